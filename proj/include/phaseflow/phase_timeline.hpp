#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "phaseflow/common.hpp"

namespace phaseflow {

inline constexpr int kNumClasses = 9;  // 8 surgical phases + transition

// Per-second phase labels. Id 0 is the transition phase; ids 1..8 are the
// surgical phases in canonical operation order, named by the dataset manifest.
struct PhaseTimeline {
  std::vector<int> labels;
  std::vector<std::string> label_names;  // 9 entries, index 0 = transition

  std::size_t seconds() const { return labels.size(); }

  void validate() const {
    for (int l : labels)
      if (l < 0 || l >= kNumClasses)
        throw DataError("phase id out of range [0, 9)");
    if (!label_names.empty() &&
        label_names.size() != static_cast<std::size_t>(kNumClasses))
      throw DataError("expected 9 label names");
  }
};

}  // namespace phaseflow
