#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "visrep/rng.hpp"

namespace visrep {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kEosId = 3;
inline constexpr std::string_view kPadSymbol = "<pad>";
inline constexpr std::string_view kUnkSymbol = "<unk>";
inline constexpr std::string_view kBosSymbol = "<s>";
inline constexpr std::string_view kEosSymbol = "</s>";
/// Appended to the last symbol of every word inside vocabularies.
inline constexpr std::string_view kEndOfWord = "</w>";
/// Fill character for the final, short character n-gram window.
inline constexpr std::string_view kNgramPad = "␣";

enum class SegMode { Bpe, Char, Word, Ngram };

std::string to_string(SegMode mode);
SegMode parse_seg_mode(std::string_view name);

/// Segmented text. Surface strings never carry the end-of-word marker; word
/// boundaries live in `word_end`. `ids` is filled when a vocabulary is known.
struct TokenSequence {
  SegMode mode = SegMode::Char;
  int ngram_stride = 1;
  std::vector<std::string> surface;
  std::vector<bool> word_end;
  std::vector<int> ids;

  size_t size() const { return surface.size(); }
  /// Vocabulary key: surface plus the end-of-word marker when it closes a word.
  std::string symbol(size_t i) const;
  void push(std::string s, bool end, int id = -1);
};

/// Symbol <-> id map; ids 0..3 are PAD, UNK, BOS, EOS.
class Vocab {
 public:
  Vocab();

  int add(const std::string& symbol);
  int id(const std::string& symbol) const;
  bool contains(const std::string& symbol) const { return index_.count(symbol) != 0; }
  const std::string& symbol(int id) const { return symbols_.at(static_cast<size_t>(id)); }
  int size() const { return static_cast<int>(symbols_.size()); }

  void assign_ids(TokenSequence& seq) const;

  /// One symbol per line, specials included, in id order.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

/// Greedy pair-merge subword model.
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  /// Learns up to `merge_count` merges from whitespace-split word counts.
  /// Ties on pair frequency go to the lexicographically smallest pair.
  static BpeModel train(const std::vector<std::string>& lines, int merge_count);
  static BpeModel from_merges(std::vector<Merge> merges, std::vector<char32_t> alphabet = {});

  /// "bpe-v1 <merge_count>" header, then "LEFT<TAB>RIGHT" per merge.
  void write(std::ostream& out) const;
  static BpeModel read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

  const std::vector<Merge>& merges() const { return merges_; }
  const Vocab& vocab() const { return vocab_; }
  bool knows(char32_t cp) const;

  TokenSequence apply(std::string_view text) const;
  /// Each merge opportunity is skipped with probability drop_p.
  TokenSequence apply_dropout(std::string_view text, double drop_p, Rng& rng) const;

  /// Symbols for one word (no whitespace), end-of-word marker included.
  std::vector<std::string> segment_word(std::u32string_view word, double drop_p = 0.0, Rng* rng = nullptr) const;

 private:
  void index();
  TokenSequence apply_impl(std::string_view text, double drop_p, Rng* rng) const;

  std::vector<Merge> merges_;
  std::vector<char32_t> alphabet_;  // sorted
  std::unordered_map<std::string, int> rank_;
  Vocab vocab_;
};

TokenSequence char_segment(std::string_view text);
TokenSequence word_segment(std::string_view text);
/// Windows of n codepoints every `stride` codepoints over the whole line; the
/// last window is padded with kNgramPad. Requires n >= 1, 1 <= stride <= n.
TokenSequence char_ngrams(std::string_view text, int n, int stride);

struct SegmentOptions {
  SegMode mode = SegMode::Char;
  const BpeModel* bpe = nullptr;
  /// Vocabulary for non-BPE modes; BPE uses the model's own vocabulary.
  const Vocab* vocab = nullptr;
  int ngram = 3;
  int ngram_stride = 1;
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool add_specials = true;
};

/// Dispatches on mode; prepends BOS and appends EOS when add_specials.
TokenSequence segment(std::string_view text, const SegmentOptions& opts);

/// Inverse of segmentation; specials are skipped.
std::string detokenize(const TokenSequence& seq);
/// Decodes vocabulary symbols (with end-of-word markers) back to text.
std::string detokenize_symbols(const std::vector<std::string>& symbols, SegMode mode, int ngram_stride = 1);

}  // namespace visrep
