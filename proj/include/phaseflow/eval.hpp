#pragma once

#include <string>
#include <vector>

#include "phaseflow/phase_timeline.hpp"

namespace phaseflow::eval {

struct ConfusionMatrix {
  std::vector<std::vector<long>> counts;  // rows = ground truth, cols = pred

  explicit ConfusionMatrix(int n_classes = kNumClasses)
      : counts(static_cast<std::size_t>(n_classes),
               std::vector<long>(static_cast<std::size_t>(n_classes), 0)) {}

  long total() const {
    long t = 0;
    for (const auto& row : counts)
      for (long c : row) t += c;
    return t;
  }
};

struct RunAggregate {
  double mean = 0.0;
  double std_dev = 0.0;  // population (N denominator)
  std::size_t runs = 0;
};

struct MetricOptions {
  bool exclude_transition = false;  // drop label-0 frames before scoring
  bool zero_support_as_zero = false;  // count unsupported classes as F1 = 0
};

ConfusionMatrix confusion(const PhaseTimeline& pred, const PhaseTimeline& gt,
                          int n_classes = kNumClasses);

// 100 * matching seconds / T
double frame_accuracy(const PhaseTimeline& pred, const PhaseTimeline& gt,
                      const MetricOptions& opt = {});

// Mean F1 over classes with ground-truth support, as a percentage.
double macro_f1(const PhaseTimeline& pred, const PhaseTimeline& gt,
                int n_classes = kNumClasses, const MetricOptions& opt = {});

RunAggregate aggregate_runs(const std::vector<double>& values);

struct RibbonPair {
  PhaseTimeline pred;
  PhaseTimeline gt;
  std::string title;
};

// One two-row ribbon per operation (prediction above ground truth), nine
// fixed class colors, legend, time axis in minutes.
std::string ribbon_svg(const std::vector<RibbonPair>& pairs,
                       const std::vector<std::string>& label_names);

}  // namespace phaseflow::eval
