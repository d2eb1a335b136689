#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "phaseflow/common.hpp"

namespace phaseflow::nn {

// Label-distribution-aware margin loss configuration. The per-class margin
// is margin_scale / n_j^(1/4); logits are multiplied by logit_scale before
// the margin-adjusted softmax.
struct LdamConfig {
  std::vector<double> class_counts;
  double margin_scale = 0.5;  // C
  double logit_scale = 30.0;  // s

  std::vector<double> margins() const {
    std::vector<double> m(class_counts.size(), 0.0);
    for (std::size_t j = 0; j < class_counts.size(); ++j)
      if (class_counts[j] >= 1.0)
        m[j] = margin_scale / std::pow(class_counts[j], 0.25);
    return m;
  }

  // Normalizes C so the largest margin equals max_margin.
  static LdamConfig from_counts(std::vector<double> counts,
                                double max_margin = 0.5,
                                double logit_scale = 30.0) {
    double min_count = 0.0;
    for (double c : counts)
      if (c >= 1.0 && (min_count == 0.0 || c < min_count)) min_count = c;
    if (min_count == 0.0) throw InputError("no class has a positive count");
    LdamConfig cfg;
    cfg.class_counts = std::move(counts);
    cfg.margin_scale = max_margin * std::pow(min_count, 0.25);
    cfg.logit_scale = logit_scale;
    return cfg;
  }
};

}  // namespace phaseflow::nn
