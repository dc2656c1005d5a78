#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "visrep/rng.hpp"

namespace visrep::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

enum class Mode { Train, Eval };

/// Dense row-major array with an explicit shape; used for conv activations
/// laid out as (batch, channels, height, width).
template <typename T>
struct DenseArray {
  std::vector<int> shape;
  std::vector<T> data;

  DenseArray() = default;
  explicit DenseArray(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel(shape)), fill);
  }

  static long numel(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), 1L, [](long a, int b) { return a * b; });
  }
  int dim(size_t i) const { return shape.at(i); }
  size_t size() const { return data.size(); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }
};

/// A named learnable (or persisted-only) array with its gradient.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool trainable = true;
};

/// Owns every array of a model, in registration order. References returned
/// by create() stay valid for the lifetime of the store.
template <typename T>
class ParameterStore {
 public:
  Parameter<T>& create(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool trainable = true) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->value = Matrix<T>::Zero(rows, cols);
    p->grad = Matrix<T>::Zero(rows, cols);
    p->trainable = trainable;
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  const std::vector<std::unique_ptr<Parameter<T>>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  size_t count(bool trainable_only = true) const {
    size_t n = 0;
    for (const auto& p : params_) {
      if (!trainable_only || p->trainable) n += static_cast<size_t>(p->value.size());
    }
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, size_t> index_;
};

/// Every parameter draws from its own stream keyed by (seed, name), so shared
/// submodules initialize identically whatever else the model contains.
inline Rng param_rng(uint64_t seed, const std::string& name) { return Rng(derive_seed(seed, hash_name(name))); }

template <typename T>
void init_uniform(Parameter<T>& p, uint64_t seed, double bound) {
  Rng rng = param_rng(seed, p.name);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void init_normal(Parameter<T>& p, uint64_t seed, double stddev) {
  Rng rng = param_rng(seed, p.name);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(stddev * rng.normal());
}

template <typename T>
void init_constant(Parameter<T>& p, T v) {
  p.value.setConstant(v);
}

}  // namespace visrep::nn
