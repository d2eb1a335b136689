#pragma once

#include <string>
#include <vector>

#include "phaseflow/nn/graph.hpp"
#include "phaseflow/nn/params.hpp"

namespace phaseflow::nn {

// Parameter handles into a ParamSet; bound to graph leaves per pass.

struct GmuHandles {
  std::vector<int> w_h;  // K matrices, D_model x D_k
  std::vector<int> w_z;  // K matrices, D_model x sum(D_k)
};

struct BlockHandles {
  int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};

struct StageHandles {
  int w_in = -1, b_in = -1;
  std::vector<BlockHandles> blocks;  // block l uses dilation 2^l
  int w_out = -1, b_out = -1;
  int kernel = 3;
  Padding padding = Padding::acausal_same;
};

template <class S>
GmuHandles make_gmu(ParamSet<S>& params, const std::string& prefix,
                    const std::vector<std::size_t>& input_dims,
                    std::size_t model_dim, DetRng& rng) {
  std::size_t concat_dim = 0;
  for (std::size_t d : input_dims) concat_dim += d;
  GmuHandles h;
  for (std::size_t k = 0; k < input_dims.size(); ++k) {
    h.w_h.push_back(params.add_init(prefix + ".wh" + std::to_string(k),
                                    {model_dim, input_dims[k]}, rng));
    h.w_z.push_back(params.add_init(prefix + ".wz" + std::to_string(k),
                                    {model_dim, concat_dim}, rng));
  }
  return h;
}

template <class S>
StageHandles make_stage(ParamSet<S>& params, const std::string& prefix,
                        std::size_t in_dim, std::size_t channels,
                        std::size_t n_classes, int layers, int kernel,
                        Padding padding, DetRng& rng) {
  StageHandles h;
  h.kernel = kernel;
  h.padding = padding;
  h.w_in = params.add_init(prefix + ".in.w", {channels, in_dim, 1}, rng);
  h.b_in = params.add(prefix + ".in.b", {channels});
  for (int l = 0; l < layers; ++l) {
    const std::string bp = prefix + ".block" + std::to_string(l);
    BlockHandles b;
    b.w1 = params.add_init(bp + ".w1",
                           {channels, channels, static_cast<std::size_t>(kernel)},
                           rng);
    b.b1 = params.add(bp + ".b1", {channels});
    b.w2 = params.add_init(bp + ".w2", {channels, channels, 1}, rng);
    b.b2 = params.add(bp + ".b2", {channels});
    h.blocks.push_back(b);
  }
  h.w_out = params.add_init(prefix + ".out.w", {n_classes, channels, 1}, rng);
  h.b_out = params.add(prefix + ".out.b", {n_classes});
  return h;
}

template <class S>
using Refs = std::vector<typename GraphT<S>::Ref>;

// h_k = tanh(W_hk x_k); z_k = sigmoid(W_zk [x_1..x_K]); out = sum h_k * z_k.
template <class S>
typename GraphT<S>::Ref gmu_forward(GraphT<S>& g,
                                    const Refs<S>& inputs,
                                    const GmuHandles& h, const Refs<S>& leaves) {
  if (inputs.empty() || inputs.size() != h.w_h.size())
    throw InputError("gmu modality count mismatch");
  const auto cat =
      inputs.size() == 1 ? inputs[0] : g.concat_rows(inputs);
  typename GraphT<S>::Ref out = 0;
  bool first = true;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto hk = g.tanh(g.matmul(leaves[h.w_h[k]], inputs[k]));
    const auto zk = g.sigmoid(g.matmul(leaves[h.w_z[k]], cat));
    const auto ok = g.mul(hk, zk);
    out = first ? ok : g.add(out, ok);
    first = false;
  }
  return out;
}

// d_hat = ReLU(W1 * d_prev + b1) dilated; d = d_prev + W2 * d_hat + b2.
template <class S>
typename GraphT<S>::Ref residual_block_forward(GraphT<S>& g,
                                               typename GraphT<S>::Ref d_prev,
                                               const BlockHandles& h,
                                               int dilation, Padding padding,
                                               const Refs<S>& leaves) {
  const auto hidden =
      g.relu(g.conv1d(d_prev, leaves[h.w1], leaves[h.b1], dilation, padding));
  const auto proj = g.conv1d(hidden, leaves[h.w2], leaves[h.b2], 1, padding);
  return g.add(d_prev, proj);
}

// 1x1 input conv, L residual blocks with dilation doubling per layer,
// 1x1 output conv. Returns raw logits.
template <class S>
typename GraphT<S>::Ref stage_forward(GraphT<S>& g, typename GraphT<S>::Ref x,
                                      const StageHandles& h,
                                      const Refs<S>& leaves) {
  auto d = g.conv1d(x, leaves[h.w_in], leaves[h.b_in], 1, h.padding);
  int dilation = 1;
  for (const auto& b : h.blocks) {
    d = residual_block_forward(g, d, b, dilation, h.padding, leaves);
    dilation *= 2;
  }
  return g.conv1d(d, leaves[h.w_out], leaves[h.b_out], 1, h.padding);
}

// Stage s > 1 consumes the softmax of stage s-1's logits.
template <class S>
Refs<S> mstcn_forward(GraphT<S>& g, typename GraphT<S>::Ref x,
                      const std::vector<StageHandles>& stages,
                      const Refs<S>& leaves) {
  if (stages.empty()) throw InputError("mstcn needs at least one stage");
  Refs<S> logits;
  auto input = x;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (s > 0) input = g.softmax_classes(logits.back());
    logits.push_back(stage_forward(g, input, stages[s], leaves));
  }
  return logits;
}

}  // namespace phaseflow::nn
