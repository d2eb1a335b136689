#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nn_test_util.hpp"
#include "phaseflow/nn/graph.hpp"
#include "phaseflow/nn/layers.hpp"

using namespace phaseflow;
using namespace phaseflow::nn;
using nn_test_util::max_rel_grad_error;
using nn_test_util::random_tensor;

// Every check verifies reverse-mode gradients against central finite
// differences (step 1e-4) in double precision.

namespace {

// weighs the output entries so the test loss has rich curvature
GraphD::Ref weighted_sum(GraphD& g, GraphD::Ref x, std::uint64_t seed) {
  DetRng rng(seed);
  auto w = g.value(x);
  for (auto& v : w.data) v = rng.uniform(0.2, 1.0);
  return g.sum_all(g.mul(x, g.leaf(w)));
}

}  // namespace

TEST_CASE("gradcheck: dilated convolution") {
  DetRng rng(100);
  ParamSet<double> params;
  const int w = params.add_init("w", {3, 2, 3}, rng);
  const int b = params.add_init("b", {3}, rng);
  const auto x = random_tensor({2, 9}, rng);
  for (Padding pad : {Padding::acausal_same, Padding::causal}) {
    const auto err = max_rel_grad_error(
        params, [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
          return weighted_sum(
              g, g.conv1d(g.leaf(x, true), L[w], L[b], 2, pad), 9);
        });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gradcheck: gmu fusion") {
  DetRng rng(101);
  ParamSet<double> params;
  const auto gmu = make_gmu(params, "g", {3, 4, 2}, 4, rng);
  std::vector<TensorD> xs = {random_tensor({3, 5}, rng),
                             random_tensor({4, 5}, rng),
                             random_tensor({2, 5}, rng)};
  const auto err = max_rel_grad_error(
      params, [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
        std::vector<GraphD::Ref> inputs;
        for (const auto& x : xs) inputs.push_back(g.leaf(x));
        return weighted_sum(g, gmu_forward(g, inputs, gmu, L), 11);
      });
  CHECK(err < 1e-4);
}

TEST_CASE("gradcheck: dilated residual block") {
  for (std::uint64_t seed = 102;; ++seed) {
    REQUIRE(seed < 152);
    DetRng rng(seed);
    ParamSet<double> params;
    BlockHandles h;
    h.w1 = params.add_init("w1", {3, 3, 3}, rng);
    h.b1 = params.add_init("b1", {3}, rng);
    h.w2 = params.add_init("w2", {3, 3, 1}, rng);
    h.b2 = params.add_init("b2", {3}, rng);
    const auto x = random_tensor({3, 8}, rng);
    const auto build = [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
      return weighted_sum(
          g,
          residual_block_forward(g, g.leaf(x), h, 2, Padding::acausal_same, L),
          13);
    };
    if (nn_test_util::relu_clearance(params, build) < 2e-3) continue;
    CHECK(max_rel_grad_error(params, build) < 1e-4);
    break;
  }
}

TEST_CASE("gradcheck: full 2-stage TCN with LDAM loss, D=6 C=8 T=12") {
  for (std::uint64_t seed = 103;; ++seed) {
    REQUIRE(seed < 403);
    DetRng rng(seed);
    ParamSet<double> params;
    std::vector<StageHandles> stages;
    stages.push_back(
        make_stage(params, "s0", 6, 8, 5, 3, 3, Padding::acausal_same, rng));
    stages.push_back(
        make_stage(params, "s1", 5, 8, 5, 3, 3, Padding::acausal_same, rng));
    // nonzero biases keep ReLU pre-activations away from the kink
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& t = params.tensor(static_cast<int>(i));
      if (t.rank() == 1)
        for (auto& v : t.data)
          v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 0.5);
    }
    const auto x = random_tensor({6, 12}, rng);
    std::vector<int> labels(12);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 4));
    const auto cfg = LdamConfig::from_counts({3, 9, 27, 81, 12}, 0.5, 4.0);

    const auto build = [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
      const auto logits = mstcn_forward(g, g.leaf(x), stages, L);
      auto total = g.ldam_loss(logits[0], labels, cfg);
      for (std::size_t s = 1; s < logits.size(); ++s)
        total = g.add(total, g.ldam_loss(logits[s], labels, cfg));
      return total;
    };
    if (nn_test_util::relu_clearance(params, build) < 2e-3) continue;
    CHECK(max_rel_grad_error(params, build) < 1e-4);
    break;
  }
}

TEST_CASE("gradcheck: LDAM loss on raw logits") {
  DetRng rng(104);
  ParamSet<double> params;
  const int z = params.add_init("z", {4, 10}, rng);
  for (auto& v : params.tensor(z).data) v *= 4.0;
  std::vector<int> labels(10);
  for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, 3));
  const auto cfg = LdamConfig::from_counts({2, 16, 5, 40}, 0.5, 3.0);
  const auto err = max_rel_grad_error(
      params, [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
        return g.ldam_loss(L[z], labels, cfg);
      });
  CHECK(err < 1e-4);
}

TEST_CASE("gradcheck: pooling, embedding, softmax and pointwise ops") {
  for (std::uint64_t seed = 105;; ++seed) {
    REQUIRE(seed < 155);
    DetRng rng(seed);
    ParamSet<double> params;
    const int w = params.add_init("w", {7, 6}, rng);
    const int table = params.add_init("table", {5, 3}, rng);
    const std::vector<int> ids = {0, 2, 4, 4, 1, 0, 3, 2};
    const auto x = random_tensor({6, 8}, rng);
    const auto build = [&](GraphD& g, const std::vector<GraphD::Ref>& L) {
      const auto feats = g.matmul(L[w], g.leaf(x));   // 7 x 8
      const auto pooled = g.avg_pool_rows(feats, 4);  // 4 x 8
      const auto emb = g.embed(L[table], ids);        // 3 x 8
      const auto cat = g.concat_rows({pooled, emb});  // 7 x 8
      const auto act = g.tanh(g.mul(g.sigmoid(cat), g.relu(cat)));
      return weighted_sum(g, g.softmax_classes(act), 17);
    };
    if (nn_test_util::relu_clearance(params, build) < 2e-3) continue;
    CHECK(max_rel_grad_error(params, build) < 1e-4);
    break;
  }
}

TEST_CASE("backward: constant loss leaves zero parameter gradients") {
  ParamSet<double> params;
  DetRng rng(106);
  params.add_init("w", {3, 3}, rng);
  GraphD g;
  const auto leaves = params.leaves(g);
  const auto loss = g.sum_all(g.leaf(TensorD::scalar(5.0)));
  g.backward(loss);
  for (double v : g.grad(leaves[0]).data) CHECK(v == 0.0);
}

TEST_CASE("backward: gradient of a sum is the sum of gradients") {
  DetRng rng(107);
  ParamSet<double> params;
  const int w = params.add_init("w", {4, 4}, rng);
  const auto x1 = random_tensor({4, 3}, rng);
  const auto x2 = random_tensor({4, 3}, rng);

  const auto run = [&](int which) {
    GraphD g;
    const auto leaves = params.leaves(g);
    const auto l1 = g.sum_all(g.tanh(g.matmul(leaves[w], g.leaf(x1))));
    const auto l2 = g.sum_all(g.sigmoid(g.matmul(leaves[w], g.leaf(x2))));
    g.backward(which == 0 ? l1 : which == 1 ? l2 : g.add(l1, l2));
    return g.grad(leaves[w]);
  };
  const auto g1 = run(0), g2 = run(1), gsum = run(2);
  for (std::size_t i = 0; i < gsum.numel(); ++i)
    CHECK(gsum.data[i] == doctest::Approx(g1.data[i] + g2.data[i]).epsilon(1e-12));
}

TEST_CASE("backward: errors without a recorded forward") {
  GraphD g;
  CHECK_THROWS_WITH_AS(g.backward(0), "backward without forward", InputError);
  DetRng rng(1);
  const auto v = g.leaf(random_tensor({2, 2}, rng));
  CHECK_THROWS_AS(g.backward(v), InputError);  // non-scalar root
}

TEST_CASE("gradcheck: untouched gradient access errors") {
  GraphD g;
  const auto v = g.leaf(TensorD::scalar(1.0), true);
  CHECK_THROWS_AS(g.grad(v), InputError);
  g.backward(v);
  CHECK(g.grad(v).data[0] == 1.0);
}
