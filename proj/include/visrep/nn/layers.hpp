#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "visrep/nn/tensor.hpp"

namespace visrep::nn {

/// y = x W + b, with W stored (in x out).
template <typename T>
class Linear {
 public:
  Linear() = default;
  /// bound < 0 selects Xavier-uniform, otherwise U(-bound, bound).
  Linear(ParameterStore<T>& store, const std::string& name, int in, int out, uint64_t seed, double bound = -1.0)
      : weight_(&store.create(name + ".weight", in, out)), bias_(&store.create(name + ".bias", 1, out)) {
    if (bound < 0) bound = std::sqrt(6.0 / (in + out));
    init_uniform(*weight_, seed, bound);
  }

  Matrix<T> forward(const Matrix<T>& x) {
    x_ = x;
    Matrix<T> y = x * weight_->value;
    y.rowwise() += bias_->value.row(0);
    return y;
  }

  Matrix<T> backward(const Matrix<T>& dy, bool need_dx = true) {
    weight_->grad.noalias() += x_.transpose() * dy;
    bias_->grad += dy.colwise().sum();
    if (!need_dx) return {};
    return dy * weight_->value.transpose();
  }

  Parameter<T>& weight() { return *weight_; }
  Parameter<T>& bias() { return *bias_; }

 private:
  Parameter<T>* weight_ = nullptr;
  Parameter<T>* bias_ = nullptr;
  Matrix<T> x_;
};

/// Row-wise layer normalization with learned gain and bias.
template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, int dim)
      : gamma_(&store.create(name + ".gamma", 1, dim)), beta_(&store.create(name + ".beta", 1, dim)) {
    init_constant(*gamma_, T(1));
  }

  Matrix<T> forward(const Matrix<T>& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    xhat_.resize(n, d);
    rstd_.resize(n);
    Matrix<T> y(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mean = x.row(i).mean();
      const T var = (x.row(i).array() - mean).square().mean();
      const T rstd = T(1) / std::sqrt(var + kEps);
      rstd_[i] = rstd;
      xhat_.row(i) = (x.row(i).array() - mean) * rstd;
      y.row(i) = xhat_.row(i).cwiseProduct(gamma_->value.row(0)) + beta_->value.row(0);
    }
    return y;
  }

  Matrix<T> backward(const Matrix<T>& dy) {
    gamma_->grad += dy.cwiseProduct(xhat_).colwise().sum();
    beta_->grad += dy.colwise().sum();
    Matrix<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const RowVector<T> dxhat = dy.row(i).cwiseProduct(gamma_->value.row(0));
      const T mean_d = dxhat.mean();
      const T mean_dx = dxhat.cwiseProduct(xhat_.row(i)).mean();
      dx.row(i) = rstd_[i] * (dxhat.array() - mean_d - xhat_.row(i).array() * mean_dx);
    }
    return dx;
  }

 private:
  static constexpr T kEps = T(1e-5);
  Parameter<T>* gamma_ = nullptr;
  Parameter<T>* beta_ = nullptr;
  Matrix<T> xhat_;
  std::vector<T> rstd_;
};

/// Scaled dot-product attention split over heads; no parameters.
template <typename T>
class AttentionCore {
 public:
  explicit AttentionCore(int heads = 1) : heads_(heads) {}

  Matrix<T> forward(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v, bool causal) {
    q_ = q;
    k_ = k;
    v_ = v;
    const Eigen::Index nq = q.rows();
    const Eigen::Index nk = k.rows();
    const int dh = static_cast<int>(q.cols()) / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    probs_.assign(static_cast<size_t>(heads_), Matrix<T>());
    Matrix<T> out(nq, q.cols());
    for (int h = 0; h < heads_; ++h) {
      Matrix<T> s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
      for (Eigen::Index i = 0; i < nq; ++i) {
        const Eigen::Index visible = causal ? std::min<Eigen::Index>(i + 1, nk) : nk;
        const T mx = s.row(i).head(visible).maxCoeff();
        T sum = 0;
        for (Eigen::Index j = 0; j < nk; ++j) {
          const T e = j < visible ? std::exp(s(i, j) - mx) : T(0);
          s(i, j) = e;
          sum += e;
        }
        s.row(i) /= sum;
      }
      out.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
      probs_[static_cast<size_t>(h)] = std::move(s);
    }
    return out;
  }

  /// Returns (dq, dk, dv).
  std::tuple<Matrix<T>, Matrix<T>, Matrix<T>> backward(const Matrix<T>& dout) {
    const int dh = static_cast<int>(q_.cols()) / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Matrix<T> dq = Matrix<T>::Zero(q_.rows(), q_.cols());
    Matrix<T> dk = Matrix<T>::Zero(k_.rows(), k_.cols());
    Matrix<T> dv = Matrix<T>::Zero(v_.rows(), v_.cols());
    for (int h = 0; h < heads_; ++h) {
      const Matrix<T>& p = probs_[static_cast<size_t>(h)];
      const auto doh = dout.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * doh;
      Matrix<T> dp = doh * v_.middleCols(h * dh, dh).transpose();
      const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = dp.cwiseProduct(p).rowwise().sum();
      Matrix<T> ds = p.cwiseProduct((dp.colwise() - row_dot));
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * k_.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = ds.transpose() * q_.middleCols(h * dh, dh);
    }
    return {std::move(dq), std::move(dk), std::move(dv)};
  }

 private:
  int heads_;
  Matrix<T> q_, k_, v_;
  std::vector<Matrix<T>> probs_;
};

/// Multi-head self-attention (fused QKV projection).
template <typename T>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParameterStore<T>& store, const std::string& name, int d, int heads, uint64_t seed)
      : d_(d), qkv_(store, name + ".qkv", d, 3 * d, seed), out_(store, name + ".out", d, d, seed), core_(heads) {}

  Matrix<T> forward(const Matrix<T>& x, bool causal) {
    const Matrix<T> qkv = qkv_.forward(x);
    return out_.forward(core_.forward(qkv.leftCols(d_), qkv.middleCols(d_, d_), qkv.rightCols(d_), causal));
  }

  Matrix<T> backward(const Matrix<T>& dy) {
    auto [dq, dk, dv] = core_.backward(out_.backward(dy));
    Matrix<T> dqkv(dq.rows(), 3 * d_);
    dqkv << dq, dk, dv;
    return qkv_.backward(dqkv);
  }

 private:
  int d_ = 0;
  Linear<T> qkv_;
  Linear<T> out_;
  AttentionCore<T> core_;
};

/// Multi-head attention from queries onto an encoder memory.
template <typename T>
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(ParameterStore<T>& store, const std::string& name, int d, int heads, uint64_t seed)
      : d_(d),
        q_(store, name + ".q", d, d, seed),
        kv_(store, name + ".kv", d, 2 * d, seed),
        out_(store, name + ".out", d, d, seed),
        core_(heads) {}

  Matrix<T> forward(const Matrix<T>& x, const Matrix<T>& memory) {
    const Matrix<T> q = q_.forward(x);
    const Matrix<T> kv = kv_.forward(memory);
    return out_.forward(core_.forward(q, kv.leftCols(d_), kv.rightCols(d_), false));
  }

  /// Returns (dx, dmemory).
  std::pair<Matrix<T>, Matrix<T>> backward(const Matrix<T>& dy) {
    auto [dq, dk, dv] = core_.backward(out_.backward(dy));
    Matrix<T> dkv(dk.rows(), 2 * d_);
    dkv << dk, dv;
    return {q_.backward(dq), kv_.backward(dkv)};
  }

 private:
  int d_ = 0;
  Linear<T> q_;
  Linear<T> kv_;
  Linear<T> out_;
  AttentionCore<T> core_;
};

template <typename T>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore<T>& store, const std::string& name, int d, int d_ff, uint64_t seed)
      : fc1_(store, name + ".fc1", d, d_ff, seed), fc2_(store, name + ".fc2", d_ff, d, seed) {}

  Matrix<T> forward(const Matrix<T>& x) {
    hidden_ = fc1_.forward(x).cwiseMax(T(0));
    return fc2_.forward(hidden_);
  }

  Matrix<T> backward(const Matrix<T>& dy) {
    Matrix<T> dh = fc2_.backward(dy);
    dh = (hidden_.array() > T(0)).select(dh, T(0));
    return fc1_.backward(dh);
  }

 private:
  Linear<T> fc1_;
  Linear<T> fc2_;
  Matrix<T> hidden_;
};

/// Token lookup table scaled by sqrt(d).
template <typename T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore<T>& store, const std::string& name, int vocab, int d, uint64_t seed)
      : table_(&store.create(name + ".weight", vocab, d)), scale_(std::sqrt(static_cast<T>(d))) {
    init_normal(*table_, seed, 1.0 / std::sqrt(static_cast<double>(d)));
  }

  Matrix<T> forward(const std::vector<int>& ids) {
    ids_ = ids;
    Matrix<T> y(static_cast<Eigen::Index>(ids.size()), table_->value.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table_->value.rows()) throw std::out_of_range("token id out of vocabulary");
      y.row(static_cast<Eigen::Index>(i)) = table_->value.row(ids[i]) * scale_;
    }
    return y;
  }

  void backward(const Matrix<T>& dy) {
    for (size_t i = 0; i < ids_.size(); ++i) {
      table_->grad.row(ids_[i]) += dy.row(static_cast<Eigen::Index>(i)) * scale_;
    }
  }

  Parameter<T>& table() { return *table_; }

 private:
  Parameter<T>* table_ = nullptr;
  T scale_ = T(1);
  std::vector<int> ids_;
};

/// Fixed sinusoidal position table (max_len x d).
template <typename T>
Matrix<T> sinusoidal_positions(int max_len, int d) {
  Matrix<T> pe(max_len, d);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pe(pos, i) = static_cast<T>(std::sin(pos * freq));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<T>(std::cos(pos * freq));
    }
  }
  return pe;
}

}  // namespace visrep::nn
