#include <doctest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "visrep/font.hpp"
#include "visrep/render.hpp"
#include "visrep/rng.hpp"
#include "visrep/utf8.hpp"

using namespace visrep;

namespace {
const std::filesystem::path kGolden = std::filesystem::path(VISREP_TEST_DIR) / "golden";

std::string pgm_bytes(const LineImage& img) {
  std::ostringstream out;
  write_pgm(out, img.height, img.width, img.pixels.data());
  return out.str();
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("font loading") {
  const Font a = Font::load(testutil::font_path(), 10);
  const Font b = Font::load(testutil::font_path(), 10);
  CHECK(a.line_height() > 0);
  CHECK(a.line_height() == b.line_height());
  CHECK(a.line_height() == a.ascent() + a.descent());
  CHECK(Font::load(testutil::font_path(), 20).line_height() > a.line_height());

  CHECK_THROWS_WITH_AS(Font::load(testutil::font_path(), 3), doctest::Contains("below minimum"), FontError);
  CHECK_THROWS_AS(Font::load("/nonexistent/font.ttf", 10), FontError);
  CHECK_THROWS_WITH_AS(Font::from_bytes({'n', 'o', 't', ' ', 'a', ' ', 'f', 'o', 'n', 't', 0, 0}, 10),
                       doctest::Contains("unsupported"), FontError);
}

TEST_CASE("missing glyphs use the replacement glyph") {
  const Font f = Font::load(testutil::font_path(), 10);
  CHECK(f.has_glyph(U'a'));
  CHECK_FALSE(f.has_glyph(U'\U0001F9FF'));
  CHECK(f.glyph_index(U'\U0001F9FF') == 0);
  const RenderConfig rc = testutil::render_config();
  // Two unmapped codepoints render identically, as the replacement glyph.
  CHECK(render_line("\U0001F9FF", f, rc).pixels == render_line("\U0001F9FE", f, rc).pixels);
}

TEST_CASE("render geometry") {
  const Font f = Font::load(testutil::font_path(), 10);
  RenderConfig rc = testutil::render_config();

  SUBCASE("empty text is one blank image of the minimum width") {
    rc.min_width = 20;
    const LineImage img = render_line("", f, rc);
    CHECK(img.height == f.line_height());
    CHECK(img.width == 20);
    CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v == 0.0f; }));
  }
  SUBCASE("advance monotonicity") {
    CHECK(render_line("aa", f, rc).width > render_line("a", f, rc).width);
    CHECK(render_line("a b", f, rc).width > render_line("ab", f, rc).width);
  }
  SUBCASE("padding widens") {
    RenderConfig padded = rc;
    padded.inter_char_padding = 2;
    CHECK(render_line("abc", f, padded).width >= render_line("abc", f, rc).width + 4);
  }
  SUBCASE("newlines are rejected") {
    CHECK_THROWS_AS(render_line("a\nb", f, rc), RenderError);
    CHECK_THROWS_AS(render_line("a\rb", f, rc), RenderError);
  }
  SUBCASE("size mismatch is rejected") {
    rc.font_size = 12;
    CHECK_THROWS_AS(render_line("a", f, rc), RenderError);
  }
  SUBCASE("ink values stay in [0,1]") {
    const LineImage img = render_line("WWW@@@###", f, rc);
    for (float v : img.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("render properties over random strings") {
  const Font f = Font::load(testutil::font_path(), 10);
  const RenderConfig rc = testutil::render_config();
  const std::u32string pool = U"abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789 .,;!?äöüßéèЯМасерх";
  Rng rng(42);
  for (int t = 0; t < 200; ++t) {
    std::u32string s;
    const int len = 1 + static_cast<int>(rng.below(25));
    for (int i = 0; i < len; ++i) s += pool[rng.below(pool.size())];
    const std::string text = utf8_encode(s);
    const LineImage a = render_line(text, f, rc);
    const LineImage b = render_line(text, f, rc);
    CHECK(a.pixels == b.pixels);
    CHECK(a.height == f.line_height());
    CHECK(a.source_text == text);
    // Appending a character with a positive advance never shrinks the line.
    CHECK(render_line(text + "x", f, rc).width >= a.width);
    const PixelStats st = pixel_stats(a);
    CHECK(0.0 <= st.avg_density);
    CHECK(st.avg_density <= st.nonwhite_fraction);
    CHECK(st.nonwhite_fraction <= 1.0);
  }
}

TEST_CASE("golden renders") {
  const Font f10 = Font::load(testutil::font_path(), 10);
  const Font f12 = Font::load(testutil::font_path(), 12);
  CHECK(pgm_bytes(render_line("Hello, world! 0123", f10, testutil::render_config(10))) ==
        file_bytes(kGolden / "hello_10pt.pgm"));
  CHECK(pgm_bytes(render_line("Ünïcödé ЯМ ßç", f12, testutil::render_config(12))) ==
        file_bytes(kGolden / "mixed_12pt.pgm"));
}

TEST_CASE("pixel stats") {
  LineImage blank;
  blank.height = 4;
  blank.width = 5;
  blank.pixels.assign(20, 0.0f);
  CHECK(pixel_stats(blank).avg_density == 0.0);
  CHECK(pixel_stats(blank).nonwhite_fraction == 0.0);

  LineImage ink = blank;
  std::fill(ink.pixels.begin(), ink.pixels.end(), 1.0f);
  CHECK(pixel_stats(ink).avg_density == 1.0);
  CHECK(pixel_stats(ink).nonwhite_fraction == 1.0);

  LineImage half = blank;
  half.pixels[0] = 0.5f;
  half.pixels[1] = 1.0f;
  CHECK(pixel_stats(half).avg_density == doctest::Approx(1.5 / 20));
  CHECK(pixel_stats(half).nonwhite_fraction == doctest::Approx(2.0 / 20));

  // Corpus statistics weight every pixel equally.
  const PixelStats both = pixel_stats(std::vector<LineImage>{blank, ink});
  CHECK(both.avg_density == doctest::Approx(0.5));
}

TEST_CASE("pgm round trip quantizes to 8 bits") {
  const Font f = Font::load(testutil::font_path(), 10);
  const LineImage img = render_line("Quantize me", f, testutil::render_config());
  const auto dir = testutil::temp_dir("pgm");
  write_pgm(dir / "x.pgm", img);
  const LineImage back = read_pgm(dir / "x.pgm");
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(back.pixels[i] == doctest::Approx(std::round(img.pixels[i] * 255.0f) / 255.0f));
  }
  std::filesystem::remove_all(dir);
}
