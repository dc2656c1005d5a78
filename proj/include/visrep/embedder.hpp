#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "visrep/nn/layers.hpp"
#include "visrep/nn/tensor.hpp"
#include "visrep/slicer.hpp"

namespace visrep {

/// Visual front-end geometry: `blocks` stacked conv blocks over each h x w
/// slice, flattened and projected to d_model.
struct EmbedderConfig {
  int blocks = 1;
  int kernel = 3;
  int channels = 1;
  int d_model = 64;
  int slice_height = 0;
  int slice_width = 0;

  void validate() const {
    if (blocks < 0) throw std::invalid_argument("embedder: blocks must be >= 0");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("embedder: kernel must be odd and >= 1");
    if (channels < 1) throw std::invalid_argument("embedder: channels must be >= 1");
    if (d_model < 1) throw std::invalid_argument("embedder: d_model must be >= 1");
    if (slice_height < 1 || slice_width < 1) throw std::invalid_argument("embedder: slice shape must be positive");
  }

  bool operator==(const EmbedderConfig&) const = default;

  int flat_size() const { return (blocks == 0 ? 1 : channels) * slice_height * slice_width; }
};

/// 2D convolution (same padding, stride 1) -> batch norm -> ReLU.
///
/// Batch statistics are taken over every (slice, row, column) of a channel in
/// train mode, which also updates the running statistics; eval mode uses the
/// running statistics only.
template <typename T>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(nn::ParameterStore<T>& store, const std::string& name, int in_ch, int out_ch, int kernel, uint64_t seed)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel) {
    weight_ = &store.create(name + ".weight", out_ch, in_ch * kernel * kernel);
    bias_ = &store.create(name + ".bias", 1, out_ch);
    gamma_ = &store.create(name + ".bn_gamma", 1, out_ch);
    beta_ = &store.create(name + ".bn_beta", 1, out_ch);
    running_mean_ = &store.create(name + ".bn_running_mean", 1, out_ch, false);
    running_var_ = &store.create(name + ".bn_running_var", 1, out_ch, false);
    nn::init_uniform(*weight_, seed, 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel)));
    nn::init_constant(*gamma_, T(1));
    nn::init_constant(*running_var_, T(1));
  }

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  T eps() const { return eps_; }
  T momentum() const { return momentum_; }

  nn::Parameter<T>& weight() { return *weight_; }
  nn::Parameter<T>& bias() { return *bias_; }
  nn::Parameter<T>& gamma() { return *gamma_; }
  nn::Parameter<T>& beta() { return *beta_; }
  nn::Parameter<T>& running_mean() { return *running_mean_; }
  nn::Parameter<T>& running_var() { return *running_var_; }

  /// x: (n, in_ch, h, w) -> (n, out_ch, h, w).
  nn::DenseArray<T> forward(const nn::DenseArray<T>& x, nn::Mode mode) {
    if (x.shape.size() != 4 || x.dim(1) != in_ch_) throw std::invalid_argument("conv block: input shape mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (h < 1 || w < 1) throw std::invalid_argument("conv block: empty spatial dims");
    x_ = x;
    mode_ = mode;
    nn::DenseArray<T> z = convolve(x);

    const size_t plane = static_cast<size_t>(h) * w;
    const double count = static_cast<double>(n) * static_cast<double>(plane);
    rstd_.assign(static_cast<size_t>(out_ch_), T(0));
    xhat_ = nn::DenseArray<T>(z.shape);
    nn::DenseArray<T> y(z.shape);
    for (int o = 0; o < out_ch_; ++o) {
      T mean, var;
      if (mode == nn::Mode::Train) {
        double s = 0, s2 = 0;
        for (int b = 0; b < n; ++b) {
          const T* zp = z.ptr() + (static_cast<size_t>(b) * out_ch_ + o) * plane;
          for (size_t i = 0; i < plane; ++i) s += zp[i];
        }
        const double m = s / count;
        for (int b = 0; b < n; ++b) {
          const T* zp = z.ptr() + (static_cast<size_t>(b) * out_ch_ + o) * plane;
          for (size_t i = 0; i < plane; ++i) s2 += (zp[i] - m) * (zp[i] - m);
        }
        mean = static_cast<T>(m);
        var = static_cast<T>(s2 / count);
        const T unbiased = count > 1 ? static_cast<T>(s2 / (count - 1)) : var;
        running_mean_->value(0, o) = (T(1) - momentum_) * running_mean_->value(0, o) + momentum_ * mean;
        running_var_->value(0, o) = (T(1) - momentum_) * running_var_->value(0, o) + momentum_ * unbiased;
      } else {
        mean = running_mean_->value(0, o);
        var = running_var_->value(0, o);
      }
      const T rstd = T(1) / std::sqrt(var + eps_);
      rstd_[static_cast<size_t>(o)] = rstd;
      const T g = gamma_->value(0, o);
      const T bt = beta_->value(0, o);
      for (int b = 0; b < n; ++b) {
        const size_t base = (static_cast<size_t>(b) * out_ch_ + o) * plane;
        for (size_t i = 0; i < plane; ++i) {
          const T xh = (z.data[base + i] - mean) * rstd;
          xhat_.data[base + i] = xh;
          y.data[base + i] = std::max(T(0), g * xh + bt);
        }
      }
    }
    y_ = y;
    cached_ = true;
    return y;
  }

  /// Accumulates parameter gradients; returns the input gradient when asked.
  nn::DenseArray<T> backward(const nn::DenseArray<T>& dy, bool need_dx = true) {
    if (!cached_) throw std::logic_error("conv block: backward called without a cached forward pass");
    cached_ = false;
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    const double count = static_cast<double>(n) * static_cast<double>(plane);
    nn::DenseArray<T> dz(y_.shape);
    for (int o = 0; o < out_ch_; ++o) {
      const T g = gamma_->value(0, o);
      const T rstd = rstd_[static_cast<size_t>(o)];
      double sum_dxhat = 0, sum_dxhat_xhat = 0, dgamma = 0, dbeta = 0;
      for (int b = 0; b < n; ++b) {
        const size_t base = (static_cast<size_t>(b) * out_ch_ + o) * plane;
        for (size_t i = 0; i < plane; ++i) {
          const T d = y_.data[base + i] > T(0) ? dy.data[base + i] : T(0);
          dz.data[base + i] = d;  // d(loss)/d(bn output), reused below
          dgamma += d * xhat_.data[base + i];
          dbeta += d;
          sum_dxhat += d * g;
          sum_dxhat_xhat += d * g * xhat_.data[base + i];
        }
      }
      gamma_->grad(0, o) += static_cast<T>(dgamma);
      beta_->grad(0, o) += static_cast<T>(dbeta);
      for (int b = 0; b < n; ++b) {
        const size_t base = (static_cast<size_t>(b) * out_ch_ + o) * plane;
        for (size_t i = 0; i < plane; ++i) {
          const T dxhat = dz.data[base + i] * g;
          if (mode_ == nn::Mode::Train) {
            dz.data[base + i] = static_cast<T>(rstd / count *
                                               (count * dxhat - sum_dxhat - xhat_.data[base + i] * sum_dxhat_xhat));
          } else {
            dz.data[base + i] = dxhat * rstd;
          }
        }
      }
    }
    return convolve_backward(dz, need_dx);
  }

 private:
  nn::DenseArray<T> convolve(const nn::DenseArray<T>& x) const {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int pad = kernel_ / 2;
    nn::DenseArray<T> z({n, out_ch_, h, w});
    for (int b = 0; b < n; ++b) {
      for (int o = 0; o < out_ch_; ++o) {
        T* zp = z.ptr() + (static_cast<size_t>(b) * out_ch_ + o) * h * w;
        std::fill(zp, zp + static_cast<size_t>(h) * w, bias_->value(0, o));
        for (int c = 0; c < in_ch_; ++c) {
          const T* xp = x.ptr() + (static_cast<size_t>(b) * in_ch_ + c) * h * w;
          for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
              const T wv = weight_->value(o, (c * kernel_ + ky) * kernel_ + kx);
              const int dy = ky - pad, dx = kx - pad;
              const int r0 = std::max(0, -dy), r1 = std::min(h, h - dy);
              const int c0 = std::max(0, -dx), c1 = std::min(w, w - dx);
              for (int r = r0; r < r1; ++r) {
                T* zr = zp + static_cast<size_t>(r) * w;
                const T* xr = xp + static_cast<size_t>(r + dy) * w + dx;
                for (int col = c0; col < c1; ++col) zr[col] += wv * xr[col];
              }
            }
          }
        }
      }
    }
    return z;
  }

  nn::DenseArray<T> convolve_backward(const nn::DenseArray<T>& dz, bool need_dx) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const int pad = kernel_ / 2;
    nn::DenseArray<T> dx;
    if (need_dx) dx = nn::DenseArray<T>(x_.shape);
    for (int b = 0; b < n; ++b) {
      for (int o = 0; o < out_ch_; ++o) {
        const T* dzp = dz.ptr() + (static_cast<size_t>(b) * out_ch_ + o) * h * w;
        T db = 0;
        for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) db += dzp[i];
        bias_->grad(0, o) += db;
        for (int c = 0; c < in_ch_; ++c) {
          const T* xp = x_.ptr() + (static_cast<size_t>(b) * in_ch_ + c) * h * w;
          T* dxp = need_dx ? dx.ptr() + (static_cast<size_t>(b) * in_ch_ + c) * h * w : nullptr;
          for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
              const int widx = (c * kernel_ + ky) * kernel_ + kx;
              const T wv = weight_->value(o, widx);
              const int dy = ky - pad, dxo = kx - pad;
              const int r0 = std::max(0, -dy), r1 = std::min(h, h - dy);
              const int c0 = std::max(0, -dxo), c1 = std::min(w, w - dxo);
              T gw = 0;
              for (int r = r0; r < r1; ++r) {
                const T* dzr = dzp + static_cast<size_t>(r) * w;
                const T* xr = xp + static_cast<size_t>(r + dy) * w + dxo;
                for (int col = c0; col < c1; ++col) gw += dzr[col] * xr[col];
                if (dxp) {
                  T* dxr = dxp + static_cast<size_t>(r + dy) * w + dxo;
                  for (int col = c0; col < c1; ++col) dxr[col] += wv * dzr[col];
                }
              }
              weight_->grad(o, widx) += gw;
            }
          }
        }
      }
    }
    return dx;
  }

  int in_ch_ = 1;
  int out_ch_ = 1;
  int kernel_ = 3;
  T eps_ = T(1e-5);
  T momentum_ = T(0.1);
  nn::Parameter<T>* weight_ = nullptr;
  nn::Parameter<T>* bias_ = nullptr;
  nn::Parameter<T>* gamma_ = nullptr;
  nn::Parameter<T>* beta_ = nullptr;
  nn::Parameter<T>* running_mean_ = nullptr;
  nn::Parameter<T>* running_var_ = nullptr;

  bool cached_ = false;
  nn::Mode mode_ = nn::Mode::Eval;
  nn::DenseArray<T> x_;
  nn::DenseArray<T> xhat_;
  nn::DenseArray<T> y_;
  std::vector<T> rstd_;
};

/// Conv blocks over each slice, flatten, linear projection to d_model.
/// Row i of the output embeds slice i.
template <typename T>
class VisualEmbedder {
 public:
  VisualEmbedder() = default;
  VisualEmbedder(nn::ParameterStore<T>& store, const std::string& name, const EmbedderConfig& cfg, uint64_t seed)
      : cfg_(cfg) {
    cfg.validate();
    for (int b = 0; b < cfg.blocks; ++b) {
      blocks_.emplace_back(store, name + ".conv" + std::to_string(b), b == 0 ? 1 : cfg.channels, cfg.channels,
                           cfg.kernel, seed);
    }
    projection_ = nn::Linear<T>(store, name + ".proj", cfg.flat_size(), cfg.d_model, seed,
                                1.0 / std::sqrt(static_cast<double>(cfg.flat_size())));
  }

  const EmbedderConfig& config() const { return cfg_; }
  std::vector<ConvBlock<T>>& blocks() { return blocks_; }
  nn::Linear<T>& projection() { return projection_; }

  static nn::DenseArray<T> from_slices(const SliceSequence& seq) {
    nn::DenseArray<T> x({seq.count, 1, seq.height, seq.window});
    std::transform(seq.data.begin(), seq.data.end(), x.data.begin(), [](float v) { return static_cast<T>(v); });
    return x;
  }

  /// slices: (n, 1, h, w) -> (n, d_model).
  nn::Matrix<T> forward(const nn::DenseArray<T>& slices, nn::Mode mode) {
    if (slices.shape.size() != 4 || slices.dim(1) != 1 || slices.dim(2) != cfg_.slice_height ||
        slices.dim(3) != cfg_.slice_width) {
      throw std::invalid_argument("embedder: slice shape mismatch");
    }
    nn::DenseArray<T> x = slices;
    for (auto& block : blocks_) x = block.forward(x, mode);
    const int n = slices.dim(0);
    flat_shape_ = x.shape;
    const Eigen::Map<const nn::Matrix<T>> flat(x.ptr(), n, cfg_.flat_size());
    cached_ = true;
    return projection_.forward(flat);
  }

  /// Accumulates parameter gradients and returns d(loss)/d(slices).
  nn::DenseArray<T> backward(const nn::Matrix<T>& dy, bool need_dx = true) {
    if (!cached_) throw std::logic_error("embedder: backward called without a cached forward pass");
    cached_ = false;
    const nn::Matrix<T> dflat = projection_.backward(dy, need_dx || !blocks_.empty());
    if (!need_dx && blocks_.empty()) return {};
    nn::DenseArray<T> dx(flat_shape_);
    std::copy(dflat.data(), dflat.data() + dflat.size(), dx.data.begin());
    for (size_t b = blocks_.size(); b-- > 0;) dx = blocks_[b].backward(dx, need_dx || b > 0);
    return dx;
  }

 private:
  EmbedderConfig cfg_;
  std::vector<ConvBlock<T>> blocks_;
  nn::Linear<T> projection_;
  std::vector<int> flat_shape_;
  bool cached_ = false;
};

}  // namespace visrep
