#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "visrep/font.hpp"

namespace visrep {

struct RenderConfig {
  std::filesystem::path font_path;
  int font_size = 10;
  int inter_char_padding = 0;
  /// Lower bound on the image width; the visual pipeline sets it to the
  /// slice window so blank input still yields one full window.
  int min_width = 1;

  bool operator==(const RenderConfig&) const = default;
};

/// Grayscale raster of one sentence. 0 is background, 1 is full ink.
struct LineImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // row-major, height * width
  std::string source_text;

  float at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
  float& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
};

struct PixelStats {
  double avg_density = 0.0;
  double nonwhite_fraction = 0.0;
};

class RenderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rasterizes `text` left to right, one glyph per codepoint, no shaping or
/// normalization. Throws RenderError when text contains a newline.
LineImage render_line(std::string_view text, const Font& font, const RenderConfig& cfg);

PixelStats pixel_stats(const LineImage& img);
/// Aggregate statistics over many images (pixel-weighted).
PixelStats pixel_stats(const std::vector<LineImage>& images);

/// Binary PGM (P5, maxval 255), ink v stored as round(255 * v).
void write_pgm(std::ostream& out, int height, int width, const float* pixels);
void write_pgm(const std::filesystem::path& path, const LineImage& img);
LineImage read_pgm(const std::filesystem::path& path);

}  // namespace visrep
