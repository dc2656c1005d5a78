#include "visrep/font.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>
#include <optional>
#include <unordered_map>

namespace visrep {
namespace {

struct Point {
  double x = 0;
  double y = 0;
};

struct OutlinePoint {
  double x = 0;
  double y = 0;
  bool on_curve = true;
};

using Contour = std::vector<OutlinePoint>;

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  void check(size_t offset, size_t len) const {
    if (offset > bytes_.size() || len > bytes_.size() - offset) {
      throw FontError("font data truncated");
    }
  }
  uint8_t u8(size_t off) const {
    check(off, 1);
    return bytes_[off];
  }
  int8_t i8(size_t off) const { return static_cast<int8_t>(u8(off)); }
  uint16_t u16(size_t off) const {
    check(off, 2);
    return static_cast<uint16_t>((bytes_[off] << 8) | bytes_[off + 1]);
  }
  int16_t i16(size_t off) const { return static_cast<int16_t>(u16(off)); }
  uint32_t u32(size_t off) const {
    check(off, 4);
    return (uint32_t{bytes_[off]} << 24) | (uint32_t{bytes_[off + 1]} << 16) |
           (uint32_t{bytes_[off + 2]} << 8) | uint32_t{bytes_[off + 3]};
  }
  size_t size() const { return bytes_.size(); }

 private:
  const std::vector<uint8_t>& bytes_;
};

constexpr uint32_t tag(const char (&t)[5]) {
  return (uint32_t(uint8_t(t[0])) << 24) | (uint32_t(uint8_t(t[1])) << 16) |
         (uint32_t(uint8_t(t[2])) << 8) | uint32_t(uint8_t(t[3]));
}

// Signed-area coverage accumulation: each edge deposits the area it sweeps
// into an accumulation buffer; a running prefix sum along each row yields the
// coverage of every pixel.
class Rasterizer {
 public:
  Rasterizer(int width, int height)
      : width_(width), height_(height), acc_(static_cast<size_t>((width + 2) * height), 0.0) {}

  void line(Point p0, Point p1) {
    if (p0.y == p1.y) return;
    float dir = 1.0f;
    if (p0.y > p1.y) {
      std::swap(p0, p1);
      dir = -1.0f;
    }
    const double dxdy = (p1.x - p0.x) / (p1.y - p0.y);
    double x = p0.x;
    if (p0.y < 0) x -= p0.y * dxdy;
    const int y_begin = std::max(0, static_cast<int>(std::floor(p0.y)));
    const int y_end = std::min(height_, static_cast<int>(std::ceil(p1.y)));
    const int stride = width_ + 2;
    for (int y = y_begin; y < y_end; ++y) {
      double* row = acc_.data() + static_cast<size_t>(y) * stride;
      const double dy = std::min<double>(y + 1, p1.y) - std::max<double>(y, p0.y);
      const double x_next = x + dxdy * dy;
      const double d = dy * dir;
      const double x0 = std::min(x, x_next);
      const double x1 = std::max(x, x_next);
      const double x0_floor = std::floor(x0);
      const double x1_ceil = std::ceil(x1);
      const int x0i = static_cast<int>(x0_floor);
      const int x1i = static_cast<int>(x1_ceil);
      if (x1i <= x0i + 1) {
        const double xmf = 0.5 * (x + x_next) - x0_floor;
        add(row, x0i, d - d * xmf);
        add(row, x0i + 1, d * xmf);
      } else {
        const double s = 1.0 / (x1 - x0);
        const double x0f = x0 - x0_floor;
        const double a0 = 0.5 * s * (1.0 - x0f) * (1.0 - x0f);
        const double x1f = x1 - x1_ceil + 1.0;
        const double am = 0.5 * s * x1f * x1f;
        add(row, x0i, d * a0);
        if (x1i == x0i + 2) {
          add(row, x0i + 1, d * (1.0 - a0 - am));
        } else {
          const double a1 = s * (1.5 - x0f);
          add(row, x0i + 1, d * (a1 - a0));
          for (int xi = x0i + 2; xi < x1i - 1; ++xi) add(row, xi, d * s);
          const double a2 = a1 + (x1i - x0i - 3) * s;
          add(row, x1i - 1, d * (1.0 - a2 - am));
        }
        add(row, x1i, d * am);
      }
      x = x_next;
    }
  }

  void quad(Point p0, Point p1, Point p2) {
    const double devx = p0.x - 2.0 * p1.x + p2.x;
    const double devy = p0.y - 2.0 * p1.y + p2.y;
    const double devsq = devx * devx + devy * devy;
    if (devsq < 0.333) {
      line(p0, p2);
      return;
    }
    constexpr double kTolerance = 3.0;
    const int n = 1 + static_cast<int>(std::floor(std::sqrt(std::sqrt(kTolerance * devsq))));
    Point prev = p0;
    for (int i = 1; i < n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double u = 1.0 - t;
      const Point p{u * u * p0.x + 2 * u * t * p1.x + t * t * p2.x,
                    u * u * p0.y + 2 * u * t * p1.y + t * t * p2.y};
      line(prev, p);
      prev = p;
    }
    line(prev, p2);
  }

  std::vector<float> coverage() const {
    std::vector<float> out(static_cast<size_t>(width_ * height_));
    const int stride = width_ + 2;
    for (int y = 0; y < height_; ++y) {
      double sum = 0;
      for (int x = 0; x < width_; ++x) {
        sum += acc_[static_cast<size_t>(y) * stride + x];
        // Residue below half a gray level is accumulation round-off.
        const double v = std::min(1.0, std::abs(sum));
        out[static_cast<size_t>(y) * width_ + x] = v < 0.5 / 255.0 ? 0.0f : static_cast<float>(v);
      }
    }
    return out;
  }

 private:
  void add(double* row, int x, double v) {
    if (x < 0) x = 0;
    if (x > width_ + 1) x = width_ + 1;
    row[x] += v;
  }

  int width_;
  int height_;
  std::vector<double> acc_;
};

}  // namespace

struct Font::Impl {
  std::string name;
  std::vector<uint8_t> data;
  int size = 0;
  double scale = 0;
  int units_per_em = 0;
  int index_to_loc_format = 0;
  uint32_t num_glyphs = 0;
  uint32_t num_hmetrics = 0;
  uint32_t glyf_offset = 0;
  uint32_t loca_offset = 0;
  uint32_t hmtx_offset = 0;
  uint32_t cmap_subtable = 0;
  uint16_t cmap_format = 0;
  int ascent_px = 0;
  int descent_px = 0;

  mutable std::mutex cache_mutex;
  mutable std::unordered_map<uint32_t, std::unique_ptr<GlyphBitmap>> cache;

  void parse();
  uint32_t lookup(char32_t cp) const;
  double advance_units(uint32_t glyph) const;
  std::vector<Contour> outline(uint32_t glyph, int depth) const;
  GlyphBitmap rasterize(uint32_t glyph) const;
};

void Font::Impl::parse() {
  const Reader r(data);
  if (r.size() < 12) throw FontError("unsupported font format: file too small");
  uint32_t base = 0;
  uint32_t version = r.u32(0);
  if (version == tag("ttcf")) {
    base = r.u32(12);
    version = r.u32(base);
  }
  if (version == tag("OTTO")) throw FontError("unsupported font format: CFF outlines");
  if (version != 0x00010000 && version != tag("true")) {
    throw FontError("unsupported font format: not a TrueType file");
  }
  const uint16_t num_tables = r.u16(base + 4);
  std::unordered_map<uint32_t, uint32_t> tables;
  for (uint16_t i = 0; i < num_tables; ++i) {
    const size_t rec = base + 12 + 16 * size_t{i};
    tables[r.u32(rec)] = r.u32(rec + 8);
  }
  auto require = [&](const char(&t)[5]) {
    auto it = tables.find(tag(t));
    if (it == tables.end()) throw FontError(std::string("unsupported font format: missing table ") + t);
    return it->second;
  };
  const uint32_t head = require("head");
  const uint32_t hhea = require("hhea");
  const uint32_t maxp = require("maxp");
  const uint32_t cmap = require("cmap");
  hmtx_offset = require("hmtx");
  loca_offset = require("loca");
  glyf_offset = require("glyf");

  units_per_em = r.u16(head + 18);
  index_to_loc_format = r.i16(head + 50);
  if (units_per_em <= 0) throw FontError("unsupported font format: bad unitsPerEm");
  num_glyphs = r.u16(maxp + 4);
  num_hmetrics = r.u16(hhea + 34);
  if (num_hmetrics == 0) throw FontError("unsupported font format: no horizontal metrics");

  scale = static_cast<double>(size) / units_per_em;
  ascent_px = static_cast<int>(std::ceil(r.i16(hhea + 4) * scale));
  descent_px = static_cast<int>(std::ceil(-r.i16(hhea + 6) * scale));

  // Prefer full-repertoire (format 12) Unicode maps over BMP-only ones.
  const uint16_t n_sub = r.u16(cmap + 2);
  int best_rank = -1;
  for (uint16_t i = 0; i < n_sub; ++i) {
    const size_t rec = cmap + 4 + 8 * size_t{i};
    const uint16_t platform = r.u16(rec);
    const uint16_t encoding = r.u16(rec + 2);
    const uint32_t off = cmap + r.u32(rec + 4);
    const uint16_t format = r.u16(off);
    const bool unicode = platform == 0 || (platform == 3 && (encoding == 1 || encoding == 10));
    if (!unicode || (format != 4 && format != 12)) continue;
    const int rank = format == 12 ? 2 : 1;
    if (rank > best_rank) {
      best_rank = rank;
      cmap_subtable = off;
      cmap_format = format;
    }
  }
  if (best_rank < 0) throw FontError("unsupported font format: no Unicode cmap");
}

uint32_t Font::Impl::lookup(char32_t cp) const {
  const Reader r(data);
  const uint32_t off = cmap_subtable;
  if (cmap_format == 12) {
    const uint32_t groups = r.u32(off + 12);
    uint32_t lo = 0;
    uint32_t hi = groups;
    while (lo < hi) {
      const uint32_t mid = (lo + hi) / 2;
      const size_t g = off + 16 + 12 * size_t{mid};
      const uint32_t start = r.u32(g);
      const uint32_t end = r.u32(g + 4);
      if (cp < start) {
        hi = mid;
      } else if (cp > end) {
        lo = mid + 1;
      } else {
        return r.u32(g + 8) + (cp - start);
      }
    }
    return 0;
  }
  if (cp > 0xFFFF) return 0;
  const uint16_t seg_count = r.u16(off + 6) / 2;
  const size_t end_codes = off + 14;
  const size_t start_codes = end_codes + 2 * size_t{seg_count} + 2;
  const size_t deltas = start_codes + 2 * size_t{seg_count};
  const size_t range_offsets = deltas + 2 * size_t{seg_count};
  for (uint16_t i = 0; i < seg_count; ++i) {
    const uint16_t end = r.u16(end_codes + 2 * size_t{i});
    if (end < cp) continue;
    const uint16_t start = r.u16(start_codes + 2 * size_t{i});
    if (start > cp) return 0;
    const uint16_t delta = r.u16(deltas + 2 * size_t{i});
    const size_t ro_addr = range_offsets + 2 * size_t{i};
    const uint16_t ro = r.u16(ro_addr);
    if (ro == 0) return (cp + delta) & 0xFFFF;
    const uint16_t glyph = r.u16(ro_addr + ro + 2 * (cp - start));
    return glyph == 0 ? 0 : (glyph + delta) & 0xFFFF;
  }
  return 0;
}

double Font::Impl::advance_units(uint32_t glyph) const {
  const Reader r(data);
  const uint32_t idx = std::min(glyph, num_hmetrics - 1);
  return r.u16(hmtx_offset + 4 * size_t{idx});
}

std::vector<Contour> Font::Impl::outline(uint32_t glyph, int depth) const {
  if (depth > 8 || glyph >= num_glyphs) return {};
  const Reader r(data);
  uint32_t start = 0;
  uint32_t end = 0;
  if (index_to_loc_format == 0) {
    start = 2u * r.u16(loca_offset + 2 * size_t{glyph});
    end = 2u * r.u16(loca_offset + 2 * size_t{glyph} + 2);
  } else {
    start = r.u32(loca_offset + 4 * size_t{glyph});
    end = r.u32(loca_offset + 4 * size_t{glyph} + 4);
  }
  if (end <= start) return {};
  const size_t g = glyf_offset + start;
  const int16_t n_contours = r.i16(g);
  std::vector<Contour> contours;

  if (n_contours >= 0) {
    std::vector<uint16_t> end_pts(static_cast<size_t>(n_contours));
    for (int i = 0; i < n_contours; ++i) end_pts[i] = r.u16(g + 10 + 2 * size_t(i));
    const size_t n_points = n_contours == 0 ? 0 : size_t{end_pts.back()} + 1;
    size_t p = g + 10 + 2 * size_t(n_contours);
    const uint16_t instr_len = r.u16(p);
    p += 2 + instr_len;

    std::vector<uint8_t> flags;
    flags.reserve(n_points);
    while (flags.size() < n_points) {
      const uint8_t f = r.u8(p++);
      flags.push_back(f);
      if (f & 0x08) {
        const uint8_t repeat = r.u8(p++);
        for (int k = 0; k < repeat && flags.size() < n_points; ++k) flags.push_back(f);
      }
    }
    std::vector<OutlinePoint> pts(n_points);
    int32_t coord = 0;
    for (size_t i = 0; i < n_points; ++i) {
      const uint8_t f = flags[i];
      if (f & 0x02) {
        const uint8_t dx = r.u8(p++);
        coord += (f & 0x10) ? dx : -dx;
      } else if (!(f & 0x10)) {
        coord += r.i16(p);
        p += 2;
      }
      pts[i].x = coord;
      pts[i].on_curve = (f & 0x01) != 0;
    }
    coord = 0;
    for (size_t i = 0; i < n_points; ++i) {
      const uint8_t f = flags[i];
      if (f & 0x04) {
        const uint8_t dy = r.u8(p++);
        coord += (f & 0x20) ? dy : -dy;
      } else if (!(f & 0x20)) {
        coord += r.i16(p);
        p += 2;
      }
      pts[i].y = coord;
    }
    size_t begin = 0;
    for (uint16_t e : end_pts) {
      if (e + 1u < begin || e >= n_points) break;
      contours.emplace_back(pts.begin() + static_cast<std::ptrdiff_t>(begin),
                            pts.begin() + static_cast<std::ptrdiff_t>(e) + 1);
      begin = size_t{e} + 1;
    }
    return contours;
  }

  // Composite glyph.
  size_t p = g + 10;
  constexpr uint16_t kArgWords = 0x0001;
  constexpr uint16_t kArgsAreXY = 0x0002;
  constexpr uint16_t kHaveScale = 0x0008;
  constexpr uint16_t kMoreComponents = 0x0020;
  constexpr uint16_t kHaveXYScale = 0x0040;
  constexpr uint16_t kHaveTwoByTwo = 0x0080;
  for (;;) {
    const uint16_t flags = r.u16(p);
    const uint16_t component = r.u16(p + 2);
    p += 4;
    double dx = 0;
    double dy = 0;
    if (flags & kArgWords) {
      if (flags & kArgsAreXY) {
        dx = r.i16(p);
        dy = r.i16(p + 2);
      }
      p += 4;
    } else {
      if (flags & kArgsAreXY) {
        dx = r.i8(p);
        dy = r.i8(p + 1);
      }
      p += 2;
    }
    auto f2dot14 = [&](size_t off) { return r.i16(off) / 16384.0; };
    double a = 1, b = 0, c = 0, d = 1;
    if (flags & kHaveScale) {
      a = d = f2dot14(p);
      p += 2;
    } else if (flags & kHaveXYScale) {
      a = f2dot14(p);
      d = f2dot14(p + 2);
      p += 4;
    } else if (flags & kHaveTwoByTwo) {
      a = f2dot14(p);
      b = f2dot14(p + 2);
      c = f2dot14(p + 4);
      d = f2dot14(p + 6);
      p += 8;
    }
    for (Contour contour : outline(component, depth + 1)) {
      for (auto& pt : contour) {
        const double x = pt.x;
        const double y = pt.y;
        pt.x = a * x + c * y + dx;
        pt.y = b * x + d * y + dy;
      }
      contours.push_back(std::move(contour));
    }
    if (!(flags & kMoreComponents)) break;
  }
  return contours;
}

GlyphBitmap Font::Impl::rasterize(uint32_t glyph) const {
  GlyphBitmap bm;
  const std::vector<Contour> contours = outline(glyph, 0);
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& c : contours) {
    for (const auto& pt : c) {
      xmin = std::min(xmin, pt.x * scale);
      xmax = std::max(xmax, pt.x * scale);
      ymin = std::min(ymin, -pt.y * scale);
      ymax = std::max(ymax, -pt.y * scale);
    }
  }
  if (!(xmin <= xmax)) return bm;
  bm.left = static_cast<int>(std::floor(xmin));
  bm.top = static_cast<int>(std::floor(ymin));
  bm.width = static_cast<int>(std::ceil(xmax)) - bm.left + 1;
  bm.height = static_cast<int>(std::ceil(ymax)) - bm.top + 1;

  Rasterizer raster(bm.width, bm.height);
  auto to_px = [&](double x, double y) { return Point{x * scale - bm.left, -y * scale - bm.top}; };
  for (const auto& c : contours) {
    if (c.size() < 2) continue;
    // Start from an on-curve point; synthesize one if every point is off-curve.
    size_t first_on = c.size();
    for (size_t i = 0; i < c.size(); ++i) {
      if (c[i].on_curve) {
        first_on = i;
        break;
      }
    }
    Point start;
    size_t offset = 0;
    if (first_on == c.size()) {
      start = to_px(0.5 * (c[0].x + c.back().x), 0.5 * (c[0].y + c.back().y));
      offset = 0;
    } else {
      start = to_px(c[first_on].x, c[first_on].y);
      offset = first_on + 1;
    }
    Point current = start;
    std::optional<Point> control;
    const size_t n = first_on == c.size() ? c.size() : c.size() - 1;
    for (size_t k = 0; k < n; ++k) {
      const auto& pt = c[(offset + k) % c.size()];
      const Point q = to_px(pt.x, pt.y);
      if (pt.on_curve) {
        if (control) {
          raster.quad(current, *control, q);
          control.reset();
        } else {
          raster.line(current, q);
        }
        current = q;
      } else {
        if (control) {
          const Point mid{0.5 * (control->x + q.x), 0.5 * (control->y + q.y)};
          raster.quad(current, *control, mid);
          current = mid;
        }
        control = q;
      }
    }
    if (control) {
      raster.quad(current, *control, start);
    } else {
      raster.line(current, start);
    }
  }
  bm.coverage = raster.coverage();
  return bm;
}

Font Font::load(const std::filesystem::path& path, int size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FontError("cannot read font file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw FontError("cannot read font file: " + path.string());
  return from_bytes(std::move(bytes), size, path.filename().string());
}

Font Font::from_bytes(std::vector<uint8_t> bytes, int size, std::string name) {
  if (size < kMinFontSize) {
    throw FontError("font size below minimum (" + std::to_string(size) + " < " +
                    std::to_string(kMinFontSize) + ")");
  }
  auto impl = std::make_shared<Impl>();
  impl->name = std::move(name);
  impl->data = std::move(bytes);
  impl->size = size;
  impl->parse();
  return Font(std::move(impl));
}

int Font::size() const { return impl_->size; }
int Font::line_height() const { return impl_->ascent_px + impl_->descent_px; }
int Font::ascent() const { return impl_->ascent_px; }
int Font::descent() const { return impl_->descent_px; }
const std::string& Font::name() const { return impl_->name; }
uint32_t Font::num_glyphs() const { return impl_->num_glyphs; }
uint32_t Font::glyph_index(char32_t cp) const {
  const uint32_t g = impl_->lookup(cp);
  return g < impl_->num_glyphs ? g : 0;
}
double Font::advance(uint32_t glyph) const { return impl_->advance_units(glyph) * impl_->scale; }

const GlyphBitmap& Font::bitmap(uint32_t glyph) const {
  std::lock_guard lock(impl_->cache_mutex);
  auto& slot = impl_->cache[glyph];
  if (!slot) slot = std::make_unique<GlyphBitmap>(impl_->rasterize(glyph));
  return *slot;
}

}  // namespace visrep
