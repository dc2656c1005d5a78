#include "visrep/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "visrep/utf8.hpp"

namespace visrep {
namespace {

bool ends_with_marker(std::string_view s) {
  return s.size() >= kEndOfWord.size() && s.substr(s.size() - kEndOfWord.size()) == kEndOfWord;
}

std::string strip_marker(std::string_view s) {
  return std::string(ends_with_marker(s) ? s.substr(0, s.size() - kEndOfWord.size()) : s);
}

bool is_special(std::string_view s) {
  return s == kPadSymbol || s == kUnkSymbol || s == kBosSymbol || s == kEosSymbol;
}

std::string pair_key(std::string_view a, std::string_view b) {
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key.append(a);
  key.push_back('\x1F');
  key.append(b);
  return key;
}

}  // namespace

std::string to_string(SegMode mode) {
  switch (mode) {
    case SegMode::Bpe: return "bpe";
    case SegMode::Char: return "char";
    case SegMode::Word: return "word";
    case SegMode::Ngram: return "ngram";
  }
  return "unknown";
}

SegMode parse_seg_mode(std::string_view name) {
  if (name == "bpe") return SegMode::Bpe;
  if (name == "char") return SegMode::Char;
  if (name == "word") return SegMode::Word;
  if (name == "ngram") return SegMode::Ngram;
  throw std::invalid_argument("unknown segmentation mode: " + std::string(name));
}

std::string TokenSequence::symbol(size_t i) const {
  return word_end[i] ? surface[i] + std::string(kEndOfWord) : surface[i];
}

void TokenSequence::push(std::string s, bool end, int id) {
  surface.push_back(std::move(s));
  word_end.push_back(end);
  if (id >= 0) ids.push_back(id);
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() {
  for (auto s : {kPadSymbol, kUnkSymbol, kBosSymbol, kEosSymbol}) add(std::string(s));
}

int Vocab::add(const std::string& symbol) {
  auto [it, inserted] = index_.emplace(symbol, static_cast<int>(symbols_.size()));
  if (inserted) symbols_.push_back(symbol);
  return it->second;
}

int Vocab::id(const std::string& symbol) const {
  auto it = index_.find(symbol);
  return it == index_.end() ? kUnkId : it->second;
}

void Vocab::assign_ids(TokenSequence& seq) const {
  seq.ids.clear();
  seq.ids.reserve(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) seq.ids.push_back(id(seq.symbol(i)));
}

void Vocab::write(std::ostream& out) const {
  for (const auto& s : symbols_) out << s << '\n';
}

Vocab Vocab::read(std::istream& in) {
  Vocab v;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (n < 4) {
      if (line != v.symbols_[static_cast<size_t>(n)]) throw std::invalid_argument("vocab file: bad special symbols");
    } else {
      if (v.contains(line)) throw std::invalid_argument("vocab file: duplicate symbol " + line);
      v.add(line);
    }
    ++n;
  }
  if (n < 4) throw std::invalid_argument("vocab file: missing special symbols");
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------
// BPE

BpeModel BpeModel::train(const std::vector<std::string>& lines, int merge_count) {
  if (merge_count < 0) throw std::invalid_argument("merge_count must be >= 0");
  std::map<std::string, int64_t> word_counts;
  for (const auto& line : lines) {
    for (auto& w : split_whitespace(line)) ++word_counts[w];
  }
  if (word_counts.empty()) throw std::invalid_argument("bpe_train: empty corpus");

  struct Word {
    std::vector<std::string> symbols;
    int64_t count;
  };
  std::vector<Word> words;
  std::vector<char32_t> alphabet;
  for (const auto& [w, count] : word_counts) {
    Word word{{}, count};
    for (char32_t cp : utf8_decode(w)) {
      word.symbols.push_back(utf8_encode(cp));
      alphabet.push_back(cp);
    }
    word.symbols.back() += kEndOfWord;
    words.push_back(std::move(word));
  }

  std::vector<Merge> merges;
  for (int m = 0; m < merge_count; ++m) {
    std::map<Merge, int64_t> pairs;
    for (const auto& word : words) {
      for (size_t i = 0; i + 1 < word.symbols.size(); ++i) {
        pairs[{word.symbols[i], word.symbols[i + 1]}] += word.count;
      }
    }
    if (pairs.empty()) break;
    const Merge* best = nullptr;
    int64_t best_count = 0;
    for (const auto& [pair, count] : pairs) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    const Merge merge = *best;
    const std::string joined = merge.first + merge.second;
    for (auto& word : words) {
      std::vector<std::string> next;
      next.reserve(word.symbols.size());
      for (size_t i = 0; i < word.symbols.size(); ++i) {
        if (i + 1 < word.symbols.size() && word.symbols[i] == merge.first && word.symbols[i + 1] == merge.second) {
          next.push_back(joined);
          ++i;
        } else {
          next.push_back(std::move(word.symbols[i]));
        }
      }
      word.symbols = std::move(next);
    }
    merges.push_back(merge);
  }
  return from_merges(std::move(merges), std::move(alphabet));
}

BpeModel BpeModel::from_merges(std::vector<Merge> merges, std::vector<char32_t> alphabet) {
  BpeModel model;
  for (const auto& [a, b] : merges) {
    for (const auto& part : {a, b}) {
      for (char32_t cp : utf8_decode(strip_marker(part))) alphabet.push_back(cp);
    }
  }
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  model.alphabet_ = std::move(alphabet);
  model.merges_ = std::move(merges);
  model.index();
  return model;
}

void BpeModel::index() {
  rank_.clear();
  vocab_ = Vocab();
  for (char32_t cp : alphabet_) {
    const std::string c = utf8_encode(cp);
    vocab_.add(c);
    vocab_.add(c + std::string(kEndOfWord));
  }
  for (size_t i = 0; i < merges_.size(); ++i) {
    const auto& [a, b] = merges_[i];
    rank_.emplace(pair_key(a, b), static_cast<int>(i));
    vocab_.add(a + b);
  }
}

bool BpeModel::knows(char32_t cp) const { return std::binary_search(alphabet_.begin(), alphabet_.end(), cp); }

void BpeModel::write(std::ostream& out) const {
  out << "bpe-v1 " << merges_.size() << '\n';
  for (const auto& [a, b] : merges_) out << a << '\t' << b << '\n';
}

BpeModel BpeModel::read(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("bpe model: empty file");
  std::istringstream hs(header);
  std::string magic;
  long long count = -1;
  hs >> magic >> count;
  if (magic != "bpe-v1" || count < 0) throw std::invalid_argument("bpe model: bad header '" + header + "'");
  std::vector<Merge> merges;
  std::string line;
  while (static_cast<long long>(merges.size()) < count && std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw std::invalid_argument("bpe model: bad merge line '" + line + "'");
    }
    merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  if (static_cast<long long>(merges.size()) != count) throw std::invalid_argument("bpe model: truncated merge list");
  return from_merges(std::move(merges));
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read(in);
}

std::vector<std::string> BpeModel::segment_word(std::u32string_view word, double drop_p, Rng* rng) const {
  std::vector<std::string> syms;
  syms.reserve(word.size());
  for (char32_t cp : word) syms.push_back(utf8_encode(cp));
  if (syms.empty()) return syms;
  syms.back() += kEndOfWord;
  const bool dropping = drop_p > 0.0 && rng != nullptr;
  for (;;) {
    int best_rank = std::numeric_limits<int>::max();
    size_t best_pos = syms.size();
    for (size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = rank_.find(pair_key(syms[i], syms[i + 1]));
      if (it == rank_.end()) continue;
      if (dropping && rng->bernoulli(drop_p)) continue;
      if (it->second < best_rank) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_pos == syms.size()) break;
    syms[best_pos] += syms[best_pos + 1];
    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  return syms;
}

TokenSequence BpeModel::apply_impl(std::string_view text, double drop_p, Rng* rng) const {
  TokenSequence seq;
  seq.mode = SegMode::Bpe;
  for (const auto& word : split_whitespace(text)) {
    for (auto& sym : segment_word(utf8_decode(word), drop_p, rng)) {
      const int id = vocab_.id(sym);
      const bool end = ends_with_marker(sym);
      seq.push(strip_marker(sym), end, id);
    }
  }
  return seq;
}

TokenSequence BpeModel::apply(std::string_view text) const { return apply_impl(text, 0.0, nullptr); }

TokenSequence BpeModel::apply_dropout(std::string_view text, double drop_p, Rng& rng) const {
  if (!(drop_p >= 0.0 && drop_p <= 1.0)) throw std::invalid_argument("dropout probability must be in [0, 1]");
  return apply_impl(text, drop_p, &rng);
}

// ---------------------------------------------------------------------------
// Character, word and n-gram segmentation

TokenSequence char_segment(std::string_view text) {
  TokenSequence seq;
  seq.mode = SegMode::Char;
  for (const auto& word : split_whitespace(text)) {
    const auto chars = utf8_chars(word);
    for (size_t i = 0; i < chars.size(); ++i) seq.push(chars[i], i + 1 == chars.size());
  }
  return seq;
}

TokenSequence word_segment(std::string_view text) {
  TokenSequence seq;
  seq.mode = SegMode::Word;
  for (auto& word : split_whitespace(text)) seq.push(std::move(word), true);
  return seq;
}

TokenSequence char_ngrams(std::string_view text, int n, int stride) {
  if (n < 1 || stride < 1 || stride > n) throw std::invalid_argument("char_ngrams: need n >= 1 and 1 <= stride <= n");
  TokenSequence seq;
  seq.mode = SegMode::Ngram;
  seq.ngram_stride = stride;
  const std::u32string cps = utf8_decode(text);
  const size_t len = cps.size();
  const size_t count = len <= static_cast<size_t>(n) ? 1 : (len - n + stride - 1) / stride + 1;
  for (size_t k = 0; k < count; ++k) {
    std::string gram;
    for (size_t j = k * stride; j < k * stride + n; ++j) {
      gram += j < len ? utf8_encode(cps[j]) : std::string(kNgramPad);
    }
    seq.push(std::move(gram), false);
  }
  return seq;
}

TokenSequence segment(std::string_view text, const SegmentOptions& opts) {
  TokenSequence body;
  switch (opts.mode) {
    case SegMode::Bpe:
      if (!opts.bpe) throw std::invalid_argument("segment: bpe mode requires a model");
      body = opts.dropout > 0.0 && opts.rng ? opts.bpe->apply_dropout(text, opts.dropout, *opts.rng)
                                            : opts.bpe->apply(text);
      break;
    case SegMode::Char: body = char_segment(text); break;
    case SegMode::Word: body = word_segment(text); break;
    case SegMode::Ngram: body = char_ngrams(text, opts.ngram, opts.ngram_stride); break;
  }
  const Vocab* vocab = opts.mode == SegMode::Bpe ? &opts.bpe->vocab() : opts.vocab;
  if (vocab && body.mode != SegMode::Bpe) vocab->assign_ids(body);
  if (!opts.add_specials) return body;

  TokenSequence seq;
  seq.mode = body.mode;
  seq.ngram_stride = body.ngram_stride;
  const bool with_ids = vocab != nullptr;
  seq.push(std::string(kBosSymbol), false, with_ids ? kBosId : -1);
  for (size_t i = 0; i < body.size(); ++i) {
    seq.push(body.surface[i], body.word_end[i], with_ids ? body.ids[i] : -1);
  }
  seq.push(std::string(kEosSymbol), false, with_ids ? kEosId : -1);
  return seq;
}

std::string detokenize(const TokenSequence& seq) {
  std::vector<size_t> keep;
  for (size_t i = 0; i < seq.size(); ++i) {
    const bool special = seq.ids.size() == seq.size()
                             ? (seq.ids[i] == kBosId || seq.ids[i] == kEosId || seq.ids[i] == kPadId)
                             : is_special(seq.surface[i]);
    if (!special) keep.push_back(i);
  }
  std::string out;
  if (seq.mode == SegMode::Ngram) {
    for (size_t k = 0; k < keep.size(); ++k) {
      const auto chars = utf8_chars(seq.surface[keep[k]]);
      const size_t take = k + 1 < keep.size() ? std::min<size_t>(seq.ngram_stride, chars.size()) : chars.size();
      for (size_t j = 0; j < take; ++j) {
        if (chars[j] != kNgramPad) out += chars[j];
      }
    }
    return out;
  }
  for (size_t k = 0; k < keep.size(); ++k) {
    out += seq.surface[keep[k]];
    if (seq.word_end[keep[k]] && k + 1 < keep.size()) out += ' ';
  }
  return out;
}

std::string detokenize_symbols(const std::vector<std::string>& symbols, SegMode mode, int ngram_stride) {
  TokenSequence seq;
  seq.mode = mode;
  seq.ngram_stride = ngram_stride;
  for (const auto& s : symbols) {
    if (is_special(s)) continue;
    seq.push(strip_marker(s), mode != SegMode::Ngram && ends_with_marker(s));
  }
  return detokenize(seq);
}

}  // namespace visrep
