#include "visrep/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "visrep/utf8.hpp"

namespace visrep {

LineImage render_line(std::string_view text, const Font& font, const RenderConfig& cfg) {
  if (text.find('\n') != std::string_view::npos || text.find('\r') != std::string_view::npos) {
    throw RenderError("render_line: text contains a newline");
  }
  if (font.size() != cfg.font_size) {
    throw RenderError("render_line: font handle size does not match the render config");
  }
  const std::u32string cps = utf8_decode(text);

  struct Placement {
    const GlyphBitmap* bitmap;
    int x;
  };
  std::vector<Placement> placements;
  placements.reserve(cps.size());
  double pen = 0.0;
  int ink_right = 0;
  for (char32_t cp : cps) {
    const uint32_t glyph = font.glyph_index(cp);
    const GlyphBitmap& bm = font.bitmap(glyph);
    const int x = static_cast<int>(std::lround(pen));
    if (bm.width > 0) {
      placements.push_back({&bm, x});
      ink_right = std::max(ink_right, x + bm.left + bm.width);
    }
    pen += font.advance(glyph) + cfg.inter_char_padding;
  }

  LineImage img;
  img.source_text = std::string(text);
  img.height = font.line_height();
  img.width = std::max({1, cfg.min_width, static_cast<int>(std::ceil(pen)), ink_right});
  img.pixels.assign(static_cast<size_t>(img.height) * img.width, 0.0f);

  const int baseline = font.ascent();
  for (const auto& [bm, x] : placements) {
    for (int gy = 0; gy < bm->height; ++gy) {
      const int row = baseline + bm->top + gy;
      if (row < 0 || row >= img.height) continue;
      for (int gx = 0; gx < bm->width; ++gx) {
        const int col = x + bm->left + gx;
        if (col < 0 || col >= img.width) continue;
        const float v = bm->coverage[static_cast<size_t>(gy) * bm->width + gx];
        if (v == 0.0f) continue;
        float& dst = img.at(row, col);
        dst = std::min(1.0f, dst + v);
      }
    }
  }
  return img;
}

PixelStats pixel_stats(const LineImage& img) {
  PixelStats stats;
  if (img.pixels.empty()) return stats;
  double sum = 0;
  size_t nonwhite = 0;
  for (float v : img.pixels) {
    sum += v;
    if (v > 0.0f) ++nonwhite;
  }
  const auto n = static_cast<double>(img.pixels.size());
  stats.avg_density = sum / n;
  stats.nonwhite_fraction = static_cast<double>(nonwhite) / n;
  return stats;
}

PixelStats pixel_stats(const std::vector<LineImage>& images) {
  double sum = 0;
  size_t nonwhite = 0;
  size_t total = 0;
  for (const auto& img : images) {
    for (float v : img.pixels) {
      sum += v;
      if (v > 0.0f) ++nonwhite;
    }
    total += img.pixels.size();
  }
  PixelStats stats;
  if (total == 0) return stats;
  stats.avg_density = sum / static_cast<double>(total);
  stats.nonwhite_fraction = static_cast<double>(nonwhite) / static_cast<double>(total);
  return stats;
}

void write_pgm(std::ostream& out, int height, int width, const float* pixels) {
  out << "P5\n" << width << " " << height << "\n255\n";
  const size_t n = static_cast<size_t>(height) * width;
  std::string buf(n, '\0');
  for (size_t i = 0; i < n; ++i) {
    const float v = std::clamp(pixels[i], 0.0f, 1.0f);
    buf[i] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0f * v)));
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_pgm(const std::filesystem::path& path, const LineImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_pgm(out, img.height, img.width, img.pixels.data());
}

LineImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || width <= 0 || height <= 0 || maxval != 255) {
    throw std::runtime_error("unsupported PGM: " + path.string());
  }
  in.get();
  std::string buf(static_cast<size_t>(width) * height, '\0');
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw std::runtime_error("truncated PGM: " + path.string());
  }
  LineImage img;
  img.height = height;
  img.width = width;
  img.pixels.resize(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) {
    img.pixels[i] = static_cast<unsigned char>(buf[i]) / 255.0f;
  }
  return img;
}

}  // namespace visrep
