#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "visrep/model.hpp"
#include "visrep/nn/tensor.hpp"
#include "visrep/render.hpp"

namespace testutil {

inline std::filesystem::path font_path() { return visrep::default_font_path(); }

inline visrep::RenderConfig render_config(int size = 10) {
  visrep::RenderConfig rc;
  rc.font_path = font_path();
  rc.font_size = size;
  return rc;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("visrep-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct GradCheck {
  double worst = 0.0;
  std::string worst_param;
  size_t checked = 0;
};

/// Central differences (step h) against the analytic gradient for every
/// trainable entry. loss(true) must run forward+backward and return the
/// loss; loss(false) only the forward loss.
inline GradCheck grad_check(visrep::nn::ParameterStore<double>& store, const std::function<double(bool)>& loss,
                            double h = 1e-5) {
  store.zero_grad();
  loss(true);
  GradCheck r;
  for (const auto& p : store.all()) {
    if (!p->trainable) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double old = v;
      v = old + h;
      const double lp = loss(false);
      v = old - h;
      const double lm = loss(false);
      v = old;
      const double fd = (lp - lm) / (2 * h);
      const double err = std::abs(p->grad.data()[i] - fd) / std::max(1.0, std::abs(fd));
      ++r.checked;
      if (err > r.worst) {
        r.worst = err;
        r.worst_param = p->name;
      }
    }
  }
  return r;
}

}  // namespace testutil
