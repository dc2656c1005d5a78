#include "visrep/noise.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "visrep/utf8.hpp"

namespace visrep {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Swap: return "swap";
    case NoiseKind::Cambridge: return "cambridge";
    case NoiseKind::MapChars: return "mapchars";
    case NoiseKind::Marks: return "marks";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "swap") return NoiseKind::Swap;
  if (name == "cambridge" || name == "cam") return NoiseKind::Cambridge;
  if (name == "mapchars" || name == "unicode" || name == "l33t" || name == "l33tspeak" || name == "leet") {
    return NoiseKind::MapChars;
  }
  if (name == "marks" || name == "diacritics") return NoiseKind::Marks;
  throw std::invalid_argument("unknown noise kind: " + std::string(name));
}

void CharTable::add(char32_t from, char32_t to) {
  if (from == to) throw std::invalid_argument("char table maps a character to itself");
  auto& targets = entries_[from];
  if (std::find(targets.begin(), targets.end(), to) == targets.end()) targets.push_back(to);
}

const std::vector<char32_t>* CharTable::find(char32_t from) const {
  auto it = entries_.find(from);
  return it == entries_.end() ? nullptr : &it->second;
}

CharTable CharTable::parse(std::istream& in) {
  CharTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::invalid_argument("char table line " + std::to_string(lineno) + ": expected FROM<TAB>TO");
    }
    const std::u32string from = utf8_decode(line.substr(0, tab));
    const std::u32string to = utf8_decode(line.substr(tab + 1));
    if (from.size() != 1 || to.size() != 1) {
      throw std::invalid_argument("char table line " + std::to_string(lineno) +
                                  ": FROM and TO must be single codepoints");
    }
    table.add(from[0], to[0]);
  }
  return table;
}

CharTable CharTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read char table " + path.string());
  return parse(in);
}

std::vector<char32_t> default_marks() {
  return {0x0301, 0x0300, 0x0308, 0x0302, 0x0303, 0x0304, 0x0307, 0x0327};
}

std::vector<char32_t> arabic_marks() {
  // fathatan .. sukun
  return {0x064B, 0x064C, 0x064D, 0x064E, 0x064F, 0x0650, 0x0651, 0x0652};
}

void NoiseSpec::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise probability p must be in [0, 1]");
  if (!(char_p >= 0.0 && char_p <= 1.0)) throw std::invalid_argument("char_p must be in [0, 1]");
  if (kind == NoiseKind::MapChars && table.empty()) {
    throw std::invalid_argument("mapchars noise requires a non-empty table");
  }
  if (kind == NoiseKind::Marks && marks.empty()) {
    throw std::invalid_argument("marks noise requires a non-empty mark list");
  }
}

bool is_eligible(std::u32string_view word, const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::Swap:
      return word.size() >= 2;
    case NoiseKind::Cambridge: {
      if (word.size() < 4) return false;
      const auto interior = word.substr(1, word.size() - 2);
      return std::any_of(interior.begin(), interior.end(), [&](char32_t c) { return c != interior[0]; });
    }
    case NoiseKind::MapChars:
      return std::any_of(word.begin(), word.end(), [&](char32_t c) { return spec.table.find(c) != nullptr; });
    case NoiseKind::Marks:
      return !word.empty();
  }
  return false;
}

std::string swap_adjacent(std::string_view word, size_t index) {
  std::u32string cps = utf8_decode(word);
  if (index + 1 >= cps.size()) throw std::out_of_range("swap_adjacent: index out of range");
  std::swap(cps[index], cps[index + 1]);
  return utf8_encode(cps);
}

std::string swap_word(std::string_view word, Rng& rng) {
  const std::u32string cps = utf8_decode(word);
  if (cps.size() < 2) return std::string(word);
  return swap_adjacent(word, rng.below(cps.size() - 1));
}

std::string cambridge_word(std::string_view word, Rng& rng) {
  std::u32string cps = utf8_decode(word);
  if (cps.size() < 4) return std::string(word);
  const std::u32string original = cps;
  const bool has_distinct = std::any_of(cps.begin() + 1, cps.end() - 1, [&](char32_t c) { return c != cps[1]; });
  if (!has_distinct) return std::string(word);
  // Rejection sampling over uniform shuffles gives a uniform draw among the
  // non-identity arrangements; at least half of all shuffles qualify.
  do {
    cps = original;
    rng.shuffle(cps.begin() + 1, cps.end() - 1);
  } while (cps == original);
  return utf8_encode(cps);
}

std::string map_chars(std::string_view word, const CharTable& table, Rng& rng, double char_p) {
  std::u32string cps = utf8_decode(word);
  for (char32_t& c : cps) {
    const auto* targets = table.find(c);
    if (!targets) continue;
    if (!rng.bernoulli(char_p)) continue;
    c = targets->size() == 1 ? (*targets)[0] : (*targets)[rng.below(targets->size())];
  }
  return utf8_encode(cps);
}

std::string insert_marks(std::string_view word, const std::vector<char32_t>& marks, Rng& rng, double char_p) {
  if (marks.empty()) return std::string(word);
  std::u32string out;
  for (char32_t c : utf8_decode(word)) {
    out.push_back(c);
    if (rng.bernoulli(char_p)) out.push_back(marks[rng.below(marks.size())]);
  }
  return utf8_encode(out);
}

NoisedText inject(std::string_view text, const NoiseSpec& spec, uint64_t sentence_index) {
  spec.validate();
  NoisedText result;
  Rng rng(derive_seed(spec.seed, sentence_index));
  const std::u32string cps = utf8_decode(text);
  std::string& out = result.text;
  out.reserve(text.size());
  size_t i = 0;
  while (i < cps.size()) {
    if (is_space(cps[i])) {
      out += utf8_encode(cps[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < cps.size() && !is_space(cps[j])) ++j;
    const std::u32string_view token(cps.data() + i, j - i);
    const std::string token_utf8 = utf8_encode(token);
    ++result.report.tokens_total;
    const bool selected = rng.bernoulli(spec.p);
    const bool eligible = is_eligible(token, spec);
    if (eligible) ++result.report.tokens_eligible;
    if (selected && eligible) {
      ++result.report.tokens_noised;
      switch (spec.kind) {
        case NoiseKind::Swap: out += swap_word(token_utf8, rng); break;
        case NoiseKind::Cambridge: out += cambridge_word(token_utf8, rng); break;
        case NoiseKind::MapChars: out += map_chars(token_utf8, spec.table, rng, spec.char_p); break;
        case NoiseKind::Marks: out += insert_marks(token_utf8, spec.marks, rng, spec.char_p); break;
      }
    } else {
      out += token_utf8;
    }
    i = j;
  }
  return result;
}

}  // namespace visrep
