#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "visrep/nn/tensor.hpp"

namespace visrep::nn {

/// Rescales all trainable gradients so their joint L2 norm is at most
/// max_norm. Returns the norm before clipping.
template <typename T>
double clip_grad_norm(ParameterStore<T>& store, double max_norm) {
  double sq = 0;
  for (const auto& p : store.all()) {
    if (p->trainable) sq += static_cast<double>(p->grad.squaredNorm());
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-12));
    for (const auto& p : store.all()) {
      if (p->trainable) p->grad *= scale;
    }
  }
  return norm;
}

/// Adam with bias correction; moments live alongside the store's order.
template <typename T>
class Adam {
 public:
  Adam(ParameterStore<T>& store, double lr, double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-8)
      : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(lr > 0)) throw std::invalid_argument("adam: learning rate must be positive");
    for (const auto& p : store.all()) {
      m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  long steps() const { return t_; }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step_size = static_cast<T>(lr_ * std::sqrt(c2) / c1);
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T eps = static_cast<T>(eps_ * std::sqrt(c2));
    const auto& params = store_.all();
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter<T>& p = *params[i];
      if (!p.trainable) continue;
      m_[i] = b1 * m_[i] + (T(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (T(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() + eps);
    }
  }

 private:
  ParameterStore<T>& store_;
  double lr_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix<T>> m_;
  std::vector<Matrix<T>> v_;
};

}  // namespace visrep::nn
