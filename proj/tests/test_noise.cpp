#include <doctest.h>

#include <cmath>
#include <sstream>

#include "visrep/noise.hpp"
#include "visrep/utf8.hpp"

using namespace visrep;

namespace {

const std::filesystem::path kTables = std::filesystem::path(VISREP_DATA_DIR) / "tables";

NoiseSpec spec(NoiseKind kind, double p, uint64_t seed = 1) {
  NoiseSpec s;
  s.kind = kind;
  s.p = p;
  s.seed = seed;
  if (kind == NoiseKind::Marks) s.marks = default_marks();
  return s;
}

std::string sorted(std::string_view w) {
  std::u32string cps = utf8_decode(w);
  std::sort(cps.begin(), cps.end());
  return utf8_encode(cps);
}

const char* kSentence = "the quick brown fox jumps over the lazy dog while naïve Ärzte read";

}  // namespace

TEST_CASE("p = 0 is the identity") {
  for (NoiseKind k : {NoiseKind::Swap, NoiseKind::Cambridge, NoiseKind::Marks}) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = inject(kSentence, spec(k, 0.0, seed), seed);
      CHECK(r.text == kSentence);
      CHECK(r.report.tokens_noised == 0);
    }
  }
}

TEST_CASE("p = 1 transforms every eligible token") {
  for (NoiseKind k : {NoiseKind::Swap, NoiseKind::Cambridge}) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
      const NoiseSpec s = spec(k, 1.0, seed);
      const auto r = inject(kSentence, s, seed);
      CHECK(r.report.tokens_noised == r.report.tokens_eligible);
      const auto in = split_whitespace(kSentence);
      const auto out = split_whitespace(r.text);
      REQUIRE(in.size() == out.size());
      for (size_t i = 0; i < in.size(); ++i) {
        const std::u32string w = utf8_decode(in[i]);
        const std::u32string v = utf8_decode(out[i]);
        CHECK(sorted(in[i]) == sorted(out[i]));
        if (k == NoiseKind::Cambridge) {
          if (w.size() >= 2) {
            CHECK(v.front() == w.front());
            CHECK(v.back() == w.back());
          }
          CHECK((in[i] != out[i]) == is_eligible(w, s));
        }
      }
    }
  }
}

TEST_CASE("swap worked examples") {
  CHECK(swap_adjacent("language", 4) == "langauge");
  CHECK(swap_adjacent("abcd", 1) == "acbd");
  CHECK(swap_adjacent("ÄÖ", 0) == "ÖÄ");
  CHECK_THROWS_AS(swap_adjacent("ab", 1), std::out_of_range);

  // Under real sampling the same word reaches the other published variant.
  bool found = false;
  for (uint64_t seed = 0; seed < 200 && !found; ++seed) {
    Rng rng(seed);
    found = swap_word("language", rng) == "lnaguage";
  }
  CHECK(found);

  Rng rng(3);
  CHECK(swap_word("a", rng) == "a");
}

TEST_CASE("cambridge leaves degenerate words alone") {
  Rng rng(5);
  CHECK(cambridge_word("aXXa", rng) == "aXXa");
  CHECK(cambridge_word("abc", rng) == "abc");
  CHECK_FALSE(is_eligible(U"aXXa", spec(NoiseKind::Cambridge, 1.0)));
  CHECK(is_eligible(U"aXYa", spec(NoiseKind::Cambridge, 1.0)));
  for (int t = 0; t < 50; ++t) CHECK(cambridge_word("aXYa", rng) == "aYXa");
}

TEST_CASE("char table substitution") {
  std::istringstream one("Я\tR\n");
  const CharTable t = CharTable::parse(one);
  Rng rng(1);
  CHECK(map_chars("Я", t, rng, 1.0) == "R");
  CHECK(map_chars("ЯЯx", t, rng, 1.0) == "RRx");

  const CharTable leet = CharTable::load(kTables / "leet.tsv");
  CHECK(map_chars("ans", leet, rng, 1.0) == "4n5");

  const CharTable conf = CharTable::load(kTables / "confusables.tsv");
  REQUIRE(conf.find(U'Я'));
  CHECK((*conf.find(U'Я'))[0] == U'R');

  std::istringstream bad("AB\n");
  CHECK_THROWS_AS(CharTable::parse(bad), std::invalid_argument);
  CharTable self;
  CHECK_THROWS_AS(self.add(U'a', U'a'), std::invalid_argument);

  NoiseSpec s = spec(NoiseKind::MapChars, 1.0);
  s.table = leet;
  const auto r = inject("ans bbb", s);
  CHECK(r.text == "4n5 bbb");
  CHECK(r.report.tokens_eligible == 1);

  NoiseSpec empty = spec(NoiseKind::MapChars, 0.5);
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("marks are inserted after base characters") {
  Rng rng(9);
  const auto marks = default_marks();
  const std::string out = insert_marks("abc", marks, rng, 1.0);
  const std::u32string cps = utf8_decode(out);
  REQUIRE(cps.size() == 6);
  CHECK(cps[0] == U'a');
  CHECK(cps[2] == U'b');
  CHECK(cps[4] == U'c');
  for (size_t i = 1; i < 6; i += 2) CHECK(std::find(marks.begin(), marks.end(), cps[i]) != marks.end());
  CHECK(insert_marks("abc", marks, rng, 0.0) == "abc");
  CHECK_FALSE(arabic_marks().empty());
}

TEST_CASE("whitespace is copied verbatim") {
  const std::string text = "  two  spaces\tand\ttabs  ";
  const auto r = inject(text, spec(NoiseKind::Swap, 1.0, 4));
  REQUIRE(r.text.size() == text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == ' ' || text[i] == '\t') CHECK(r.text[i] == text[i]);
  }
  CHECK(inject("", spec(NoiseKind::Swap, 1.0)).text.empty());
}

TEST_CASE("injection is deterministic per sentence") {
  const NoiseSpec s = spec(NoiseKind::Cambridge, 0.5, 77);
  CHECK(inject(kSentence, s, 3).text == inject(kSentence, s, 3).text);
  CHECK(inject(kSentence, s, 3).text != inject(kSentence, s, 4).text);
}

TEST_CASE("effective rate tracks p") {
  std::string line;
  for (int i = 0; i < 100; ++i) line += "word ";
  for (double p : {0.1, 0.5, 0.9}) {
    NoiseReport total;
    for (uint64_t k = 0; k < 100; ++k) total += inject(line, spec(NoiseKind::Swap, p, 2024), k).report;
    REQUIRE(total.tokens_eligible == 10000);
    const double sigma = std::sqrt(p * (1 - p) / 10000.0);
    CHECK(std::abs(total.effective_rate() - p) < 3 * sigma);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(spec(NoiseKind::Swap, 1.5).validate(), std::invalid_argument);
  CHECK_THROWS_AS(spec(NoiseKind::Swap, -0.1).validate(), std::invalid_argument);
  NoiseSpec s = spec(NoiseKind::Marks, 0.5);
  s.char_p = 2.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(parse_noise_kind("unicode") == NoiseKind::MapChars);
  CHECK(parse_noise_kind("cam") == NoiseKind::Cambridge);
  CHECK_THROWS_AS(parse_noise_kind("nope"), std::invalid_argument);
}
