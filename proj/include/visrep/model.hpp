#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "visrep/embedder.hpp"
#include "visrep/font.hpp"
#include "visrep/nn/transformer.hpp"
#include "visrep/render.hpp"
#include "visrep/segmentation.hpp"
#include "visrep/slicer.hpp"

namespace visrep {

/// Two aligned line lists.
struct ParallelCorpus {
  std::vector<std::string> src;
  std::vector<std::string> tgt;

  size_t size() const { return src.size(); }
  /// Throws std::runtime_error on unreadable files or mismatched line counts.
  static ParallelCorpus load(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path);
  void save(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path) const;
};

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

std::filesystem::path default_font_path();

struct SourceSegmentation {
  SegMode mode = SegMode::Bpe;
  int merges = 500;
  int ngram = 3;
  int ngram_stride = 1;
  double bpe_dropout = 0.0;  // training only

  bool operator==(const SourceSegmentation&) const = default;
};

struct TargetSegmentation {
  SegMode mode = SegMode::Bpe;
  int merges = 500;

  bool operator==(const TargetSegmentation&) const = default;
};

struct ModelConfig {
  nn::Frontend frontend = nn::Frontend::Visual;
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 128;
  double label_smoothing = 0.2;
  int max_len = 256;
  uint64_t seed = 1;

  RenderConfig render;
  SliceConfig slice;
  /// blocks, kernel and channels are read; slice shape and d_model are derived.
  EmbedderConfig embedder;
  SourceSegmentation source;
  TargetSegmentation target;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  int batch_size = 256;  // target tokens per update
  double lr = 1e-3;
  int max_steps = 1000;
  int eval_every = 100;
  uint64_t seed = 1;
  double clip_norm = 1.0;  // <= 0 disables clipping
  int warmup_steps = 0;
  /// Stop at the first evaluation whose dev BLEU reaches this; <= 0 disables.
  double stop_at_bleu = 0.0;
  /// Evaluate on the first dev_limit dev pairs; 0 uses all.
  int dev_limit = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Encoder-decoder translator: source preprocessing for either front-end,
/// target vocabulary, and the float32 network.
class Translator {
 public:
  /// Learns segmentation models and vocabularies from the training pairs and
  /// initializes the network.
  static std::unique_ptr<Translator> create(const ModelConfig& cfg, const ParallelCorpus& train);
  /// Reads a directory written by save().
  static std::unique_ptr<Translator> load(const std::filesystem::path& dir);

  /// Writes config.json, manifest.txt, one little-endian float32 blob per
  /// parameter under params/, and the vocabulary/segmentation files.
  void save(const std::filesystem::path& dir) const;

  const ModelConfig& config() const { return cfg_; }
  nn::Seq2Seq<float>& network() { return *net_; }
  const nn::Seq2Seq<float>& network() const { return *net_; }
  const Vocab& source_vocab() const { return src_vocab_; }
  const Vocab& target_vocab() const { return tgt_vocab_; }
  const BpeModel* source_bpe() const { return src_bpe_ ? &*src_bpe_ : nullptr; }
  const BpeModel* target_bpe() const { return tgt_bpe_ ? &*tgt_bpe_ : nullptr; }
  const Font* font() const { return font_ ? &*font_ : nullptr; }

  /// Rendered slices (visual) or source ids with BOS/EOS (token). A non-null
  /// rng enables BPE-dropout when configured.
  nn::SourceInput<float> source_input(std::string_view text, Rng* dropout_rng = nullptr) const;
  TokenSequence source_tokens(std::string_view text, Rng* dropout_rng = nullptr) const;
  /// BOS ... EOS.
  std::vector<int> target_ids(std::string_view text) const;
  std::string target_text(const std::vector<int>& ids) const;

  struct Translation {
    std::string text;
    bool truncated = false;
  };
  Translation translate(std::string_view text);
  std::vector<std::string> translate_all(const std::vector<std::string>& lines);

  size_t parameter_count() const { return net_->params().count(); }

 private:
  Translator() = default;
  void build_network();
  nn::NetworkConfig network_config() const;

  ModelConfig cfg_;
  std::optional<Font> font_;
  std::optional<BpeModel> src_bpe_;
  std::optional<BpeModel> tgt_bpe_;
  Vocab src_vocab_;
  Vocab tgt_vocab_;
  std::unique_ptr<nn::Seq2Seq<float>> net_;
};

struct MetricRow {
  long step = 0;
  double train_loss = 0.0;
  double dev_bleu = 0.0;
};

struct TrainResult {
  std::vector<MetricRow> metrics;
  long steps = 0;
  double final_dev_bleu = 0.0;
  bool stopped_early = false;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam on the label-smoothed loss with per-sentence gradient accumulation up
/// to batch_size target tokens. Deterministic for a fixed seed. on_metric is
/// called for every evaluation row as it is produced.
TrainResult train(Translator& model, const ParallelCorpus& train_pairs, const ParallelCorpus& dev,
                  const TrainConfig& tcfg, const std::function<void(const MetricRow&)>& on_metric = {});

}  // namespace visrep
