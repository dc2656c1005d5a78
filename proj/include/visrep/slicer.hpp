#pragma once

#include <stdexcept>
#include <vector>

#include "visrep/render.hpp"

namespace visrep {

struct SliceConfig {
  int window = 25;
  int stride = 10;

  /// Throws std::invalid_argument unless 1 <= stride <= window.
  void validate() const;
  bool operator==(const SliceConfig&) const = default;
};

/// Fixed-size overlapping windows of a LineImage, stored contiguously as
/// count x height x window values.
struct SliceSequence {
  int count = 0;
  int height = 0;
  int window = 0;
  SliceConfig config;
  int source_width = 0;
  std::vector<float> data;

  const float* slice(int i) const { return data.data() + static_cast<size_t>(i) * height * window; }
  float at(int i, int row, int col) const { return slice(i)[static_cast<size_t>(row) * window + col]; }
  int offset(int i) const { return i * config.stride; }
};

/// 1 if width <= window, else ceil((width - window) / stride) + 1.
int num_slices(int width, const SliceConfig& cfg);

/// Slice i covers source columns [i*stride, i*stride + window); columns past
/// the image edge are background.
SliceSequence slice_image(const LineImage& img, const SliceConfig& cfg);

}  // namespace visrep
