#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "phaseflow/common.hpp"

namespace phaseflow::nn {

// Dense row-major tensor. Training runs single precision; the
// finite-difference verification path instantiates double.
template <class S>
struct TensorT {
  std::vector<std::size_t> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<std::size_t> shp)
      : shape(std::move(shp)), data(numel_of(shape), S(0)) {}

  static std::size_t numel_of(const std::vector<std::size_t>& shp) {
    std::size_t n = 1;
    for (std::size_t d : shp) n *= d;
    return n;
  }

  static TensorT zeros(std::vector<std::size_t> shp) {
    return TensorT(std::move(shp));
  }

  static TensorT scalar(S v) {
    TensorT t({1});
    t.data[0] = v;
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  S& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  S at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  S& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  S at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace phaseflow::nn
