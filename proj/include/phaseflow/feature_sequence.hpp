#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "phaseflow/common.hpp"

namespace phaseflow {

enum class ChannelId { physician, assistant, ambient, xray_image, xray_log };

const char* channel_name(ChannelId id);
ChannelId channel_from_name(const std::string& name);

// Per-second feature matrix for one channel: `seconds` rows of `dim` values.
struct FeatureSequence {
  std::size_t seconds = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // row-major, seconds x dim
  ChannelId channel = ChannelId::physician;

  float at(std::size_t t, std::size_t d) const { return values[t * dim + d]; }
  float& at(std::size_t t, std::size_t d) { return values[t * dim + d]; }

  void validate() const {
    if (values.size() != seconds * dim)
      throw DataError("feature sequence size mismatch");
    for (float v : values)
      if (!std::isfinite(v)) throw DataError("corrupt features");
  }
};

}  // namespace phaseflow
