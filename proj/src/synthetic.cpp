#include "visrep/synthetic.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "visrep/rng.hpp"

namespace visrep {

namespace {

// Letters that have look-alikes in the shipped confusable table; every
// mapped-lexicon source word contains at least one.
constexpr std::string_view kConfusableLetters = "acejiopsxy";
constexpr std::string_view kLatin = "abcdefghijklmnopqrstuvwxyz";

std::string random_word(Rng& rng, int min_len, int max_len) {
  const int len = min_len + static_cast<int>(rng.below(static_cast<uint64_t>(max_len - min_len + 1)));
  std::string w;
  for (int i = 0; i < len; ++i) w += kLatin[rng.below(kLatin.size())];
  return w;
}

std::vector<std::pair<std::string, std::string>> make_lexicon(Rng& rng, int size) {
  std::set<std::string> src_seen, tgt_seen;
  std::vector<std::pair<std::string, std::string>> lex;
  while (static_cast<int>(lex.size()) < size) {
    std::string s = random_word(rng, 5, 9);
    if (s.find_first_of(kConfusableLetters) == std::string::npos || src_seen.count(s)) continue;
    std::string t;
    do {
      t = random_word(rng, 3, 6);
    } while (tgt_seen.count(t));
    src_seen.insert(s);
    tgt_seen.insert(t);
    lex.emplace_back(std::move(s), std::move(t));
  }
  return lex;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

std::string to_string(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::Copy: return "copy";
    case SyntheticTask::Reverse: return "reverse";
    case SyntheticTask::MappedLexicon: return "mapped-lexicon";
  }
  return "?";
}

SyntheticTask parse_synthetic_task(const std::string& name) {
  if (name == "copy") return SyntheticTask::Copy;
  if (name == "reverse") return SyntheticTask::Reverse;
  if (name == "mapped-lexicon" || name == "lexicon") return SyntheticTask::MappedLexicon;
  throw std::invalid_argument("unknown synthetic task: " + name);
}

SyntheticOptions default_synthetic_options(SyntheticTask task) {
  SyntheticOptions o;
  o.task = task;
  if (task == SyntheticTask::MappedLexicon) {
    o.min_tokens = 3;
    o.max_tokens = 7;
  }
  return o;
}

const std::vector<std::string>& copy_alphabet() {
  static const std::vector<std::string> letters = [] {
    std::vector<std::string> v;
    for (char c = 'a'; c < 'a' + 20; ++c) v.emplace_back(1, c);
    return v;
  }();
  return letters;
}

SyntheticCorpus generate_synthetic(const SyntheticOptions& opts, int train_size, int dev_size, int test_size,
                                   uint64_t seed) {
  if (train_size < 1 || dev_size < 0 || test_size < 0) throw std::invalid_argument("synthetic corpus size must be >= 1");
  if (opts.min_tokens < 1 || opts.max_tokens < opts.min_tokens)
    throw std::invalid_argument("synthetic corpus: bad sentence length range");
  SyntheticCorpus corpus;
  Rng rng(derive_seed(seed, hash_name(to_string(opts.task))));
  if (opts.task == SyntheticTask::MappedLexicon) {
    if (opts.lexicon_size < 1) throw std::invalid_argument("synthetic corpus: lexicon size must be >= 1");
    corpus.lexicon = make_lexicon(rng, opts.lexicon_size);
  }
  auto fill = [&](ParallelCorpus& split, int n) {
    for (int k = 0; k < n; ++k) {
      const int len = opts.min_tokens + static_cast<int>(rng.below(static_cast<uint64_t>(opts.max_tokens - opts.min_tokens + 1)));
      std::vector<std::string> src, tgt;
      for (int i = 0; i < len; ++i) {
        if (opts.task == SyntheticTask::MappedLexicon) {
          const auto& [s, t] = corpus.lexicon[rng.below(corpus.lexicon.size())];
          src.push_back(s);
          tgt.push_back(t);
        } else {
          src.push_back(copy_alphabet()[rng.below(copy_alphabet().size())]);
        }
      }
      if (opts.task == SyntheticTask::Copy) tgt = src;
      if (opts.task == SyntheticTask::Reverse) tgt.assign(src.rbegin(), src.rend());
      split.src.push_back(join(src));
      split.tgt.push_back(join(tgt));
    }
  };
  fill(corpus.train, train_size);
  fill(corpus.dev, dev_size);
  fill(corpus.test, test_size);
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  corpus.train.save(dir / "train.src", dir / "train.tgt");
  corpus.dev.save(dir / "dev.src", dir / "dev.tgt");
  corpus.test.save(dir / "test.src", dir / "test.tgt");
  if (!corpus.lexicon.empty()) {
    std::ofstream out(dir / "lexicon.tsv", std::ios::binary);
    for (const auto& [s, t] : corpus.lexicon) out << s << '\t' << t << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "lexicon.tsv").string());
  }
}

}  // namespace visrep
