#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "visrep/embedder.hpp"
#include "visrep/nn/layers.hpp"
#include "visrep/nn/tensor.hpp"
#include "visrep/segmentation.hpp"

namespace visrep::nn {

enum class Frontend { Visual, Token };

inline std::string to_string(Frontend f) { return f == Frontend::Visual ? "visual" : "token"; }
inline Frontend parse_frontend(const std::string& s) {
  if (s == "visual") return Frontend::Visual;
  if (s == "token" || s == "text" || s == "bpe") return Frontend::Token;
  throw std::invalid_argument("unknown front-end: " + s);
}

/// Shape of the encoder-decoder network itself; front-end preprocessing
/// (rendering, segmentation) lives in the model pipeline.
struct NetworkConfig {
  Frontend frontend = Frontend::Token;
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 128;
  int src_vocab = 0;  // token front-end only
  int tgt_vocab = 0;
  double label_smoothing = 0.2;
  int max_len = 256;
  EmbedderConfig embedder;  // visual front-end only; d_model is forced to match
  uint64_t seed = 1;

  void validate() const {
    if (layers < 0) throw std::invalid_argument("network: layers must be >= 0");
    if (heads < 1 || d_model < 1 || d_model % heads != 0)
      throw std::invalid_argument("network: d_model must be divisible by heads");
    if (d_ff < 1) throw std::invalid_argument("network: d_ff must be >= 1");
    if (tgt_vocab < 5) throw std::invalid_argument("network: target vocabulary too small");
    if (frontend == Frontend::Token && src_vocab < 5) throw std::invalid_argument("network: source vocabulary too small");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
      throw std::invalid_argument("network: label smoothing must lie in [0,1)");
    if (max_len < 2) throw std::invalid_argument("network: max_len must be >= 2");
    if (frontend == Frontend::Visual) {
      EmbedderConfig e = embedder;
      e.d_model = d_model;
      e.validate();
    }
  }
};

/// Encoder input: slices for the visual front-end, token ids otherwise.
template <typename T>
struct SourceInput {
  DenseArray<T> slices;
  std::vector<int> ids;

  int length() const { return slices.shape.empty() ? static_cast<int>(ids.size()) : slices.dim(0); }
};

template <typename T>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(ParameterStore<T>& store, const std::string& name, const NetworkConfig& c)
      : ln1_(store, name + ".ln1", c.d_model),
        attn_(store, name + ".self_attn", c.d_model, c.heads, c.seed),
        ln2_(store, name + ".ln2", c.d_model),
        ffn_(store, name + ".ffn", c.d_model, c.d_ff, c.seed) {}

  Matrix<T> forward(const Matrix<T>& x) {
    Matrix<T> h = x + attn_.forward(ln1_.forward(x), false);
    return h + ffn_.forward(ln2_.forward(h));
  }

  Matrix<T> backward(const Matrix<T>& dy) {
    Matrix<T> dh = dy + ln2_.backward(ffn_.backward(dy));
    return dh + ln1_.backward(attn_.backward(dh));
  }

 private:
  LayerNorm<T> ln1_;
  SelfAttention<T> attn_;
  LayerNorm<T> ln2_;
  FeedForward<T> ffn_;
};

template <typename T>
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParameterStore<T>& store, const std::string& name, const NetworkConfig& c)
      : ln1_(store, name + ".ln1", c.d_model),
        self_(store, name + ".self_attn", c.d_model, c.heads, c.seed),
        ln2_(store, name + ".ln2", c.d_model),
        cross_(store, name + ".cross_attn", c.d_model, c.heads, c.seed),
        ln3_(store, name + ".ln3", c.d_model),
        ffn_(store, name + ".ffn", c.d_model, c.d_ff, c.seed) {}

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& memory) {
    Matrix<T> h1 = x + self_.forward(ln1_.forward(x), true);
    Matrix<T> h2 = h1 + cross_.forward(ln2_.forward(h1), memory);
    return h2 + ffn_.forward(ln3_.forward(h2));
  }

  /// Adds this layer's memory gradient into dmemory.
  Matrix<T> backward(const Matrix<T>& dy, Matrix<T>& dmemory) {
    Matrix<T> dh2 = dy + ln3_.backward(ffn_.backward(dy));
    auto [dq, dmem] = cross_.backward(dh2);
    dmemory += dmem;
    Matrix<T> dh1 = dh2 + ln2_.backward(dq);
    return dh1 + ln1_.backward(self_.backward(dh1));
  }

 private:
  LayerNorm<T> ln1_;
  SelfAttention<T> self_;
  LayerNorm<T> ln2_;
  CrossAttention<T> cross_;
  LayerNorm<T> ln3_;
  FeedForward<T> ffn_;
};

struct LossResult {
  double loss = 0.0;    // mean label-smoothed loss per target token
  double nll = 0.0;     // mean gold-token NLL
  int tokens = 0;
  std::vector<double> gold_logprobs;
};

/// Pre-norm encoder-decoder with a visual or token source front-end.
///
/// Every forward call caches what its backward needs; the model therefore
/// handles one sentence at a time and callers accumulate gradients.
template <typename T>
class Seq2Seq {
 public:
  explicit Seq2Seq(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.embedder.d_model = cfg_.d_model;
    cfg_.validate();
    if (cfg_.frontend == Frontend::Visual) {
      visual_ = VisualEmbedder<T>(store_, "src.visual", cfg_.embedder, cfg_.seed);
    } else {
      src_embed_ = Embedding<T>(store_, "src.embed", cfg_.src_vocab, cfg_.d_model, cfg_.seed);
    }
    for (int l = 0; l < cfg_.layers; ++l) {
      encoder_.emplace_back(store_, "enc.layer" + std::to_string(l), cfg_);
    }
    enc_ln_ = LayerNorm<T>(store_, "enc.ln_final", cfg_.d_model);
    tgt_embed_ = Embedding<T>(store_, "tgt.embed", cfg_.tgt_vocab, cfg_.d_model, cfg_.seed);
    for (int l = 0; l < cfg_.layers; ++l) {
      decoder_.emplace_back(store_, "dec.layer" + std::to_string(l), cfg_);
    }
    dec_ln_ = LayerNorm<T>(store_, "dec.ln_final", cfg_.d_model);
    output_ = Linear<T>(store_, "out", cfg_.d_model, cfg_.tgt_vocab, cfg_.seed);
    positions_ = sinusoidal_positions<T>(cfg_.max_len, cfg_.d_model);
  }

  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;

  const NetworkConfig& config() const { return cfg_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  /// Encoder output (src_len x d_model).
  Matrix<T> encode(const SourceInput<T>& src, Mode mode) {
    const int n = src.length();
    if (n < 1) throw std::invalid_argument("empty source input");
    if (n > cfg_.max_len) throw std::length_error("source sequence exceeds max_len");
    Matrix<T> x = cfg_.frontend == Frontend::Visual ? visual_.forward(src.slices, mode) : src_embed_.forward(src.ids);
    x += positions_.topRows(n);
    for (auto& layer : encoder_) x = layer.forward(x);
    return enc_ln_.forward(x);
  }

  /// Next-token logits for every position of tgt_in given encoder memory.
  Matrix<T> decode(const std::vector<int>& tgt_in, const Matrix<T>& memory) {
    const int n = static_cast<int>(tgt_in.size());
    if (n < 1) throw std::invalid_argument("empty target prefix");
    if (n > cfg_.max_len) throw std::length_error("target sequence exceeds max_len");
    Matrix<T> y = tgt_embed_.forward(tgt_in);
    y += positions_.topRows(n);
    for (auto& layer : decoder_) y = layer.forward(y, memory);
    return output_.forward(dec_ln_.forward(y));
  }

  /// tgt holds BOS ... EOS. Caches everything needed by backward().
  LossResult forward_loss(const SourceInput<T>& src, const std::vector<int>& tgt, Mode mode = Mode::Train) {
    if (tgt.size() < 2) throw std::invalid_argument("target must contain at least BOS and EOS");
    if (static_cast<int>(tgt.size()) - 1 > cfg_.max_len) throw std::length_error("target sequence exceeds max_len");
    const Matrix<T> memory = encode(src, mode);
    const std::vector<int> tgt_in(tgt.begin(), tgt.end() - 1);
    const Matrix<T> logits = decode(tgt_in, memory);
    src_len_ = static_cast<int>(memory.rows());
    return smoothed_loss(logits, std::vector<int>(tgt.begin() + 1, tgt.end()));
  }

  /// Loss from logits; sets the cached d(loss_sum)/d(logits).
  LossResult smoothed_loss(const Matrix<T>& logits, const std::vector<int>& gold) {
    const Eigen::Index n = logits.rows();
    const Eigen::Index v = logits.cols();
    const double eps = cfg_.label_smoothing;
    LossResult r;
    r.tokens = static_cast<int>(n);
    dlogits_.resize(n, v);
    double total = 0, total_nll = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mx = logits.row(i).maxCoeff();
      double z = 0;
      for (Eigen::Index j = 0; j < v; ++j) z += std::exp(static_cast<double>(logits(i, j) - mx));
      const double log_z = std::log(z) + static_cast<double>(mx);
      double sum_nll = 0;
      for (Eigen::Index j = 0; j < v; ++j) {
        const double lp = static_cast<double>(logits(i, j)) - log_z;
        sum_nll -= lp;
        dlogits_(i, j) = static_cast<T>(std::exp(lp) - eps / static_cast<double>(v));
      }
      const int g = gold[static_cast<size_t>(i)];
      const double gold_lp = static_cast<double>(logits(i, g)) - log_z;
      dlogits_(i, g) -= static_cast<T>(1.0 - eps);
      r.gold_logprobs.push_back(gold_lp);
      total_nll -= gold_lp;
      total += (1.0 - eps) * -gold_lp + eps * sum_nll / static_cast<double>(v);
    }
    r.loss = total / static_cast<double>(n);
    r.nll = total_nll / static_cast<double>(n);
    return r;
  }

  /// Backpropagates scale * (summed token loss) from the last forward_loss.
  void backward(double scale) {
    if (dlogits_.size() == 0) throw std::logic_error("backward called without a cached forward pass");
    Matrix<T> dy = dec_ln_.backward(output_.backward(dlogits_ * static_cast<T>(scale)));
    dlogits_.resize(0, 0);
    Matrix<T> dmemory = Matrix<T>::Zero(src_len_, cfg_.d_model);
    for (size_t l = decoder_.size(); l-- > 0;) dy = decoder_[l].backward(dy, dmemory);
    tgt_embed_.backward(dy);
    Matrix<T> dx = enc_ln_.backward(dmemory);
    for (size_t l = encoder_.size(); l-- > 0;) dx = encoder_[l].backward(dx);
    if (cfg_.frontend == Frontend::Visual) {
      visual_.backward(dx, false);
    } else {
      src_embed_.backward(dx);
    }
  }

  struct Decoded {
    std::vector<int> ids;  // without BOS/EOS
    bool truncated = false;
  };

  /// Argmax decoding from BOS until EOS or max_len, recomputing the prefix.
  Decoded greedy_decode(const SourceInput<T>& src) {
    const Matrix<T> memory = encode(src, Mode::Eval);
    std::vector<int> prefix{kBosId};
    Decoded out;
    while (true) {
      if (static_cast<int>(prefix.size()) >= cfg_.max_len) {
        out.truncated = true;
        break;
      }
      const Matrix<T> logits = decode(prefix, memory);
      Eigen::Index best = 0;
      logits.row(logits.rows() - 1).maxCoeff(&best);
      if (best == kEosId) break;
      prefix.push_back(static_cast<int>(best));
      out.ids.push_back(static_cast<int>(best));
    }
    return out;
  }

  VisualEmbedder<T>& visual() { return visual_; }
  Linear<T>& output_layer() { return output_; }

 private:
  NetworkConfig cfg_;
  ParameterStore<T> store_;
  VisualEmbedder<T> visual_;
  Embedding<T> src_embed_;
  std::vector<EncoderLayer<T>> encoder_;
  LayerNorm<T> enc_ln_;
  Embedding<T> tgt_embed_;
  std::vector<DecoderLayer<T>> decoder_;
  LayerNorm<T> dec_ln_;
  Linear<T> output_;
  Matrix<T> positions_;
  Matrix<T> dlogits_;
  int src_len_ = 0;
};

}  // namespace visrep::nn
