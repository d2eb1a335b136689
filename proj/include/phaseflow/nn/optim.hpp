#pragma once

#include <cmath>
#include <vector>

#include "phaseflow/nn/params.hpp"
#include "phaseflow/nn/tensor.hpp"

namespace phaseflow::nn {

struct AdamConfig {
  double lr = 9e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
};

// Classic Adam with weight decay folded into the gradient.
template <class S>
class AdamState {
 public:
  explicit AdamState(const ParamSet<S>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.emplace_back(params.tensor(static_cast<int>(i)).shape);
      v_.emplace_back(params.tensor(static_cast<int>(i)).shape);
    }
  }

  std::int64_t step_count() const { return step_; }

  void step(ParamSet<S>& params, const std::vector<TensorT<S>>& grads,
            const AdamConfig& cfg) {
    if (grads.size() != params.size())
      throw InputError("adam gradient count mismatch");
    ++step_;
    const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
    const S corr1 =
        static_cast<S>(1.0 - std::pow(cfg.beta1, static_cast<double>(step_)));
    const S corr2 =
        static_cast<S>(1.0 - std::pow(cfg.beta2, static_cast<double>(step_)));
    const S lr = static_cast<S>(cfg.lr), eps = static_cast<S>(cfg.eps);
    const S wd = static_cast<S>(cfg.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& theta = params.tensor(static_cast<int>(i));
      const auto& grad = grads[i];
      if (!theta.same_shape(grad)) throw InputError("adam shape mismatch");
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < theta.numel(); ++j) {
        const S g = grad.data[j] + wd * theta.data[j];
        m.data[j] = b1 * m.data[j] + (S(1) - b1) * g;
        v.data[j] = b2 * v.data[j] + (S(1) - b2) * g * g;
        const S m_hat = m.data[j] / corr1;
        const S v_hat = v.data[j] / corr2;
        theta.data[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }

 private:
  std::int64_t step_ = 0;
  std::vector<TensorT<S>> m_, v_;
};

}  // namespace phaseflow::nn
