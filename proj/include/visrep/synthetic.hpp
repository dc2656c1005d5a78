#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "visrep/model.hpp"

namespace visrep {

enum class SyntheticTask { Copy, Reverse, MappedLexicon };

std::string to_string(SyntheticTask task);
SyntheticTask parse_synthetic_task(const std::string& name);

struct SyntheticOptions {
  SyntheticTask task = SyntheticTask::Copy;
  int lexicon_size = 200;  // mapped-lexicon only
  int min_tokens = 4;
  int max_tokens = 10;
};

/// Default sentence lengths per task: 4-10 tokens for copy/reverse, 3-7 for
/// mapped-lexicon.
SyntheticOptions default_synthetic_options(SyntheticTask task);

/// Alphabet of the copy and reverse tasks (20 single-letter tokens).
const std::vector<std::string>& copy_alphabet();

struct SyntheticCorpus {
  ParallelCorpus train, dev, test;
  /// Source word -> target word; empty for copy and reverse.
  std::vector<std::pair<std::string, std::string>> lexicon;
};

/// All splits come from one seeded stream and share one lexicon.
SyntheticCorpus generate_synthetic(const SyntheticOptions& opts, int train_size, int dev_size, int test_size,
                                   uint64_t seed);

/// Writes train/dev/test .src/.tgt files (and lexicon.tsv when present).
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace visrep
