#include "visrep/slicer.hpp"

#include <algorithm>
#include <string>

namespace visrep {

void SliceConfig::validate() const {
  if (window < 1 || stride < 1) throw std::invalid_argument("window and stride must be >= 1");
  if (window < stride) {
    throw std::invalid_argument("window (" + std::to_string(window) + ") must be >= stride (" +
                                std::to_string(stride) + ")");
  }
}

int num_slices(int width, const SliceConfig& cfg) {
  cfg.validate();
  if (width <= cfg.window) return 1;
  return (width - cfg.window + cfg.stride - 1) / cfg.stride + 1;
}

SliceSequence slice_image(const LineImage& img, const SliceConfig& cfg) {
  SliceSequence seq;
  seq.config = cfg;
  seq.count = num_slices(std::max(1, img.width), cfg);
  seq.height = img.height;
  seq.window = cfg.window;
  seq.source_width = img.width;
  seq.data.assign(static_cast<size_t>(seq.count) * seq.height * seq.window, 0.0f);
  for (int i = 0; i < seq.count; ++i) {
    const int start = i * cfg.stride;
    const int cols = std::clamp(img.width - start, 0, cfg.window);
    float* dst = seq.data.data() + static_cast<size_t>(i) * seq.height * seq.window;
    for (int r = 0; r < img.height; ++r) {
      std::copy_n(img.pixels.data() + static_cast<size_t>(r) * img.width + start, cols,
                  dst + static_cast<size_t>(r) * seq.window);
    }
  }
  return seq;
}

}  // namespace visrep
