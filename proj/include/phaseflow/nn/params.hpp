#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "phaseflow/common.hpp"
#include "phaseflow/nn/graph.hpp"
#include "phaseflow/nn/tensor.hpp"

namespace phaseflow::nn {

// Ordered, named parameter collection. Creation order is the checkpoint and
// gradient order, which keeps training bit-deterministic.
template <class S>
class ParamSet {
 public:
  // zero-initialized
  int add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name)) throw InputError("duplicate parameter: " + name);
    index_[name] = static_cast<int>(tensors_.size());
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return static_cast<int>(tensors_.size()) - 1;
  }

  // weights: uniform in +/- sqrt(1/fan_in), fan_in = product of the
  // dimensions past the first (the receiving dimension for rank-1).
  int add_init(const std::string& name, std::vector<std::size_t> shape,
               DetRng& rng) {
    const int h = add(name, std::move(shape));
    auto& t = tensors_[static_cast<std::size_t>(h)];
    std::size_t fan_in = 1;
    if (t.rank() >= 2)
      for (std::size_t i = 1; i < t.rank(); ++i) fan_in *= t.dim(i);
    else
      fan_in = t.dim(0);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (auto& v : t.data)
      v = static_cast<S>(rng.uniform(-bound, bound));
    return h;
  }

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(int h) const {
    return names_.at(static_cast<std::size_t>(h));
  }
  TensorT<S>& tensor(int h) { return tensors_.at(static_cast<std::size_t>(h)); }
  const TensorT<S>& tensor(int h) const {
    return tensors_.at(static_cast<std::size_t>(h));
  }
  int find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  // Registers every tensor as a grad-requiring leaf; result is indexed by
  // parameter handle.
  std::vector<typename GraphT<S>::Ref> leaves(GraphT<S>& g) const {
    std::vector<typename GraphT<S>::Ref> refs;
    refs.reserve(tensors_.size());
    for (const auto& t : tensors_) refs.push_back(g.leaf(t, true));
    return refs;
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      const int h = out.add(names_[i], tensors_[i].shape);
      out.swap_data(h, tensors_[i].template cast<U>());
    }
    return out;
  }

  // internal helper for cast()
  void swap_data(int h, TensorT<S> t) {
    tensors_.at(static_cast<std::size_t>(h)) = std::move(t);
  }

 private:
  std::vector<std::string> names_;
  std::vector<TensorT<S>> tensors_;
  std::map<std::string, int> index_;
};

}  // namespace phaseflow::nn
