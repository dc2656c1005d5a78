#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace visrep {

class FontError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinFontSize = 6;

/// Anti-aliased coverage bitmap of one glyph, positioned relative to the pen
/// origin on the baseline (x right, y down).
struct GlyphBitmap {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  std::vector<float> coverage;  // row-major, values in [0, 1]
};

/// A TrueType face instantiated at a pixel size (1pt == 1px).
///
/// Handles are cheap to copy and immutable from the outside; the glyph cache
/// is internally synchronized, so one handle may be shared across threads.
class Font {
 public:
  static Font load(const std::filesystem::path& path, int size);
  static Font from_bytes(std::vector<uint8_t> bytes, int size, std::string name = "<memory>");

  int size() const;
  /// max ascent + max descent, in pixels.
  int line_height() const;
  int ascent() const;
  int descent() const;
  const std::string& name() const;

  uint32_t num_glyphs() const;
  /// 0 (the replacement glyph) when the face has no mapping for `cp`.
  uint32_t glyph_index(char32_t cp) const;
  bool has_glyph(char32_t cp) const { return glyph_index(cp) != 0; }
  /// Horizontal advance in (fractional) pixels.
  double advance(uint32_t glyph) const;
  const GlyphBitmap& bitmap(uint32_t glyph) const;

 private:
  struct Impl;
  explicit Font(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

}  // namespace visrep
