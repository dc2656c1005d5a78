#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "visrep/rng.hpp"

namespace visrep {

enum class NoiseKind { Swap, Cambridge, MapChars, Marks };

std::string to_string(NoiseKind kind);
/// Accepts the canonical names plus family aliases ("unicode", "l33t",
/// "diacritics", "cam").
NoiseKind parse_noise_kind(std::string_view name);

/// Character substitution table. A key may map to several candidates; one is
/// chosen uniformly per substitution.
class CharTable {
 public:
  CharTable() = default;

  /// UTF-8 lines "FROM<TAB>TO"; '#' starts a comment line.
  static CharTable parse(std::istream& in);
  static CharTable load(const std::filesystem::path& path);

  void add(char32_t from, char32_t to);
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  const std::vector<char32_t>* find(char32_t from) const;
  const std::map<char32_t, std::vector<char32_t>>& entries() const { return entries_; }

 private:
  std::map<char32_t, std::vector<char32_t>> entries_;
};

std::vector<char32_t> default_marks();
std::vector<char32_t> arabic_marks();

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Swap;
  double p = 0.0;
  uint64_t seed = 0;
  CharTable table;                // MapChars
  std::vector<char32_t> marks;    // Marks
  /// Per-codepoint probability inside a selected token (MapChars, Marks).
  double char_p = 1.0;

  void validate() const;
};

struct NoiseReport {
  uint64_t tokens_total = 0;
  uint64_t tokens_eligible = 0;
  uint64_t tokens_noised = 0;

  double effective_rate() const {
    return tokens_eligible == 0 ? 0.0 : static_cast<double>(tokens_noised) / static_cast<double>(tokens_eligible);
  }
  NoiseReport& operator+=(const NoiseReport& o) {
    tokens_total += o.tokens_total;
    tokens_eligible += o.tokens_eligible;
    tokens_noised += o.tokens_noised;
    return *this;
  }
};

struct NoisedText {
  std::string text;
  NoiseReport report;
};

/// Token-level injection. Tokens are maximal non-whitespace runs; each gets
/// an independent Bernoulli(p) selection draw from the stream derived from
/// (spec.seed, sentence_index). Whitespace is copied verbatim.
NoisedText inject(std::string_view text, const NoiseSpec& spec, uint64_t sentence_index = 0);

bool is_eligible(std::u32string_view word, const NoiseSpec& spec);

/// Exchanges codepoints `index` and `index + 1`.
std::string swap_adjacent(std::string_view word, size_t index);
std::string swap_word(std::string_view word, Rng& rng);
std::string cambridge_word(std::string_view word, Rng& rng);
std::string map_chars(std::string_view word, const CharTable& table, Rng& rng, double char_p);
std::string insert_marks(std::string_view word, const std::vector<char32_t>& marks, Rng& rng, double char_p);

}  // namespace visrep
