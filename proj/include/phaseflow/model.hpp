#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "phaseflow/eval.hpp"
#include "phaseflow/features.hpp"
#include "phaseflow/nn/checkpoint.hpp"
#include "phaseflow/nn/layers.hpp"
#include "phaseflow/nn/loss.hpp"
#include "phaseflow/nn/optim.hpp"
#include "phaseflow/phase_timeline.hpp"

namespace phaseflow::model {

// row index of the autoregressive start token (one past the class ids)
inline constexpr int kStartToken = kNumClasses;

struct ModelConfig {
  std::size_t model_dim = 256;   // pooled feature width fed to the GMU
  std::size_t tcn_channels = 64;
  int speech_layers = 7;
  int image_layers = 4;
  int stages = 2;
  int kernel = 3;
  std::size_t ar_dim = 16;
  int refine_blocks = 2;  // N_r per speech channel
  std::vector<std::string> speech_channels = {"physician", "assistant",
                                              "ambient"};
  bool image_use_log = true;  // false drops the 192-dim log block
};

struct TrainConfig {
  int segment_s = 180;
  int epochs = 10;
  std::uint64_t seed = 1;
  bool teacher_forcing = true;
  double lr = 9e-6;
  double weight_decay = 1e-6;
  double ldam_max_margin = 0.5;
  double ldam_scale = 30.0;
};

struct SwitchConfig {
  int trigger_phase = 2;  // Puncture
  int consecutive_s = 30;
  std::vector<int> speech_phases = {1, 2};
  std::vector<int> image_phases = {3, 4, 5, 6, 7, 8};

  void validate() const {
    if (consecutive_s < 1) throw InputError("switch duration must be >= 1");
    std::vector<bool> seen(kNumClasses, false);
    for (const auto* set : {&speech_phases, &image_phases})
      for (int p : *set) {
        if (p < 1 || p >= kNumClasses)
          throw InputError("switch phase id out of range");
        if (seen[static_cast<std::size_t>(p)])
          throw InputError("switch phase sets overlap");
        seen[static_cast<std::size_t>(p)] = true;
      }
    for (int p = 1; p < kNumClasses; ++p)
      if (!seen[static_cast<std::size_t>(p)])
        throw InputError("switch phase sets must cover all 8 phases");
    if (std::find(speech_phases.begin(), speech_phases.end(), trigger_phase) ==
        speech_phases.end())
      throw InputError("trigger phase must belong to the speech model");
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_f1 = 0.0;
};

namespace detail {

// feature rows [t0, t1) as a feature-major tensor, optionally restricted to
// feature columns [d0, d1)
template <class S>
nn::TensorT<S> slice_features(const FeatureSequence& seq, std::size_t t0,
                              std::size_t t1, std::size_t d0 = 0,
                              std::size_t d1 = 0) {
  if (d1 == 0) d1 = seq.dim;
  if (t1 > seq.seconds || d1 > seq.dim || t0 >= t1 || d0 >= d1)
    throw InputError("feature slice out of range");
  nn::TensorT<S> out({d1 - d0, t1 - t0});
  for (std::size_t t = t0; t < t1; ++t)
    for (std::size_t d = d0; d < d1; ++d)
      out.at2(d - d0, t - t0) = static_cast<S>(seq.at(t, d));
  return out;
}

}  // namespace detail

// Speech model: per-channel residual refinement at native width, adaptive
// average pooling to model_dim, GMU fusion, autoregressive label embedding,
// multi-stage TCN.
template <class S>
class SpeechModelT {
 public:
  SpeechModelT(const ModelConfig& cfg, std::vector<std::size_t> channel_dims,
               std::uint64_t seed)
      : cfg_(cfg), dims_(std::move(channel_dims)) {
    if (dims_.size() != cfg_.speech_channels.size() || dims_.empty())
      throw InputError("speech channel dims mismatch");
    DetRng rng(seed);
    for (std::size_t c = 0; c < dims_.size(); ++c) {
      std::vector<nn::BlockHandles> blocks;
      for (int r = 0; r < cfg_.refine_blocks; ++r) {
        const std::string p =
            "refine." + cfg_.speech_channels[c] + "." + std::to_string(r);
        nn::BlockHandles b;
        b.w1 = params_.add_init(p + ".w1", {dims_[c], dims_[c]}, rng);
        b.b1 = params_.add(p + ".b1", {dims_[c]});
        b.w2 = params_.add_init(p + ".w2", {dims_[c], dims_[c]}, rng);
        b.b2 = params_.add(p + ".b2", {dims_[c]});
        blocks.push_back(b);
      }
      refine_.push_back(std::move(blocks));
    }
    gmu_ = nn::make_gmu(params_, "gmu",
                        std::vector<std::size_t>(dims_.size(), cfg_.model_dim),
                        cfg_.model_dim, rng);
    ar_table_ = params_.add_init(
        "ar.table", {static_cast<std::size_t>(kNumClasses) + 1, cfg_.ar_dim},
        rng);
    for (int s = 0; s < cfg_.stages; ++s) {
      const std::size_t in_dim = s == 0
                                     ? cfg_.model_dim + cfg_.ar_dim
                                     : static_cast<std::size_t>(kNumClasses);
      stages_.push_back(nn::make_stage(
          params_, "stage" + std::to_string(s), in_dim, cfg_.tcn_channels,
          static_cast<std::size_t>(kNumClasses), cfg_.speech_layers,
          cfg_.kernel, nn::Padding::acausal_same, rng));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::size_t>& channel_dims() const { return dims_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  // channel_inputs: one D_c x T tensor per configured channel
  std::vector<typename nn::GraphT<S>::Ref> forward(
      nn::GraphT<S>& g, const std::vector<typename nn::GraphT<S>::Ref>& leaves,
      const std::vector<nn::TensorT<S>>& channel_inputs,
      const std::vector<int>& prev_labels) const {
    if (channel_inputs.size() != dims_.size())
      throw InputError("missing channel");
    std::vector<typename nn::GraphT<S>::Ref> pooled;
    for (std::size_t c = 0; c < channel_inputs.size(); ++c) {
      if (channel_inputs[c].dim(0) != dims_[c])
        throw InputError("channel width mismatch");
      auto x = g.leaf(channel_inputs[c]);
      for (const auto& b : refine_[c]) {
        const auto hidden =
            g.relu(g.add_bias(g.matmul(leaves[b.w1], x), leaves[b.b1]));
        const auto proj =
            g.add_bias(g.matmul(leaves[b.w2], hidden), leaves[b.b2]);
        x = g.add(x, proj);
      }
      pooled.push_back(g.avg_pool_rows(x, cfg_.model_dim));
    }
    const auto fused = nn::gmu_forward(g, pooled, gmu_, leaves);
    const auto ar = g.embed(leaves[ar_table_], prev_labels);
    const auto with_ar = g.concat_rows({fused, ar});
    return nn::mstcn_forward(g, with_ar, stages_, leaves);
  }

 private:
  ModelConfig cfg_;
  std::vector<std::size_t> dims_;
  nn::ParamSet<S> params_;
  std::vector<std::vector<nn::BlockHandles>> refine_;  // per channel
  nn::GmuHandles gmu_;
  int ar_table_ = -1;
  std::vector<nn::StageHandles> stages_;
};

// Image model: 1x1 conv from the concatenated image+log width to model_dim,
// autoregressive embedding, multi-stage TCN.
template <class S>
class ImageModelT {
 public:
  ImageModelT(const ModelConfig& cfg, std::size_t input_dim, std::uint64_t seed)
      : cfg_(cfg), input_dim_(input_dim) {
    DetRng rng(seed);
    in_w_ = params_.add_init("in.w", {cfg_.model_dim, input_dim_}, rng);
    in_b_ = params_.add("in.b", {cfg_.model_dim});
    ar_table_ = params_.add_init(
        "ar.table", {static_cast<std::size_t>(kNumClasses) + 1, cfg_.ar_dim},
        rng);
    for (int s = 0; s < cfg_.stages; ++s) {
      const std::size_t in_dim = s == 0
                                     ? cfg_.model_dim + cfg_.ar_dim
                                     : static_cast<std::size_t>(kNumClasses);
      stages_.push_back(nn::make_stage(
          params_, "stage" + std::to_string(s), in_dim, cfg_.tcn_channels,
          static_cast<std::size_t>(kNumClasses), cfg_.image_layers, cfg_.kernel,
          nn::Padding::acausal_same, rng));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return input_dim_; }
  nn::ParamSet<S>& params() { return params_; }
  const nn::ParamSet<S>& params() const { return params_; }

  std::vector<typename nn::GraphT<S>::Ref> forward(
      nn::GraphT<S>& g, const std::vector<typename nn::GraphT<S>::Ref>& leaves,
      const std::vector<nn::TensorT<S>>& channel_inputs,
      const std::vector<int>& prev_labels) const {
    if (channel_inputs.size() != 1) throw InputError("missing channel");
    if (channel_inputs[0].dim(0) != input_dim_)
      throw InputError("image input width mismatch");
    const auto projected = g.add_bias(
        g.matmul(leaves[in_w_], g.leaf(channel_inputs[0])), leaves[in_b_]);
    const auto ar = g.embed(leaves[ar_table_], prev_labels);
    const auto with_ar = g.concat_rows({projected, ar});
    return nn::mstcn_forward(g, with_ar, stages_, leaves);
  }

 private:
  ModelConfig cfg_;
  std::size_t input_dim_ = 0;
  nn::ParamSet<S> params_;
  int in_w_ = -1, in_b_ = -1, ar_table_ = -1;
  std::vector<nn::StageHandles> stages_;
};

using SpeechModel = SpeechModelT<float>;
using ImageModel = ImageModelT<float>;

namespace detail {

template <class S>
std::vector<nn::TensorT<S>> speech_inputs(const SpeechModelT<S>& m,
                                          const features::OperationRecord& op,
                                          std::size_t t0, std::size_t t1) {
  std::vector<nn::TensorT<S>> inputs;
  for (const auto& name : m.config().speech_channels) {
    const FeatureSequence* seq = nullptr;
    if (name == "physician") seq = &op.physician;
    else if (name == "assistant") seq = &op.assistant;
    else if (name == "ambient") seq = &op.ambient;
    else throw InputError("unknown speech channel: " + name);
    if (seq->seconds == 0) throw InputError("missing channel");
    inputs.push_back(slice_features<S>(*seq, t0, t1));
  }
  return inputs;
}

template <class S>
std::vector<nn::TensorT<S>> image_inputs(const ImageModelT<S>& m,
                                         const features::OperationRecord& op,
                                         std::size_t t0, std::size_t t1) {
  if (op.image.seconds == 0) throw InputError("missing channel");
  const std::size_t d1 =
      m.config().image_use_log ? op.image.dim
                               : op.image.dim - features::kLogEncodingDim;
  std::vector<nn::TensorT<S>> inputs;
  inputs.push_back(slice_features<S>(op.image, t0, t1, 0, d1));
  return inputs;
}

inline std::vector<int> argmax_labels(const nn::Tensor& logits) {
  std::vector<int> labels(logits.dim(1));
  for (std::size_t t = 0; t < logits.dim(1); ++t) {
    int best = 0;
    float best_v = logits.at2(0, t);
    for (std::size_t c = 1; c < logits.dim(0); ++c)
      if (logits.at2(c, t) > best_v) {
        best_v = logits.at2(c, t);
        best = static_cast<int>(c);
      }
    labels[t] = best;
  }
  return labels;
}

}  // namespace detail

// Segment-wise inference. The autoregressive feed crosses segment
// boundaries through the already-final labels; within a segment a first
// pass runs from start tokens and a second pass feeds the first pass's
// own shifted predictions.
template <class Model>
std::vector<int> predict_labels(Model& m, const features::OperationRecord& op,
                                int segment_s) {
  if (segment_s < 1) throw InputError("segment length must be >= 1");
  const std::size_t t_total = op.seconds();
  std::vector<int> final_labels(t_total, kStartToken);
  for (std::size_t t0 = 0; t0 < t_total;
       t0 += static_cast<std::size_t>(segment_s)) {
    const std::size_t t1 =
        std::min(t_total, t0 + static_cast<std::size_t>(segment_s));
    const auto inputs = [&] {
      if constexpr (std::is_same_v<Model, SpeechModel>)
        return detail::speech_inputs<float>(m, op, t0, t1);
      else
        return detail::image_inputs<float>(m, op, t0, t1);
    }();

    const auto run = [&](const std::vector<int>& prev) {
      nn::Graph g;
      const auto leaves = m.params().leaves(g);
      const auto logits = m.forward(g, leaves, inputs, prev);
      return detail::argmax_labels(g.value(logits.back()));
    };

    std::vector<int> prev(t1 - t0, kStartToken);
    if (t0 > 0) prev[0] = final_labels[t0 - 1];
    const auto pass1 = run(prev);
    for (std::size_t t = t0 + 1; t < t1; ++t) prev[t - t0] = pass1[t - t0 - 1];
    const auto pass2 = run(prev);
    std::copy(pass2.begin(), pass2.end(), final_labels.begin() + static_cast<std::ptrdiff_t>(t0));
  }
  return final_labels;
}

// Last second of the first run of consecutive_s trigger predictions, or
// labels.size() when no switch happens. Fires at most once and never
// before second consecutive_s - 1.
std::size_t find_switch_time(const std::vector<int>& labels,
                             const SwitchConfig& sw);

// Run the speech model from t=0; the first time it emits the trigger phase
// for K consecutive seconds the remainder of the timeline comes from the
// image model (run over the full sequence with its own feed).
PhaseTimeline merged_infer(SpeechModel& speech, ImageModel& image,
                           const features::OperationRecord& op,
                           const SwitchConfig& sw, int segment_s = 180);

// Training: seeded-shuffled operations, 180 s segments, summed per-stage
// LDAM losses, one Adam step per segment.
template <class Model>
std::vector<EpochStats> train(Model& m,
                              const std::vector<features::OperationRecord>& train_ops,
                              const std::vector<features::OperationRecord>& val_ops,
                              const TrainConfig& cfg) {
  if (train_ops.empty()) throw InputError("empty dataset");
  std::vector<double> counts(kNumClasses, 0.0);
  for (const auto& op : train_ops) {
    if (op.timeline.seconds() != op.seconds())
      throw DataError("misaligned operation");
    for (int l : op.timeline.labels) counts[static_cast<std::size_t>(l)] += 1.0;
  }
  const auto ldam = nn::LdamConfig::from_counts(counts, cfg.ldam_max_margin,
                                                cfg.ldam_scale);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  nn::AdamState<float> adam(m.params());

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_ops.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    DetRng shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(
                    shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    double loss_sum = 0.0;
    std::size_t n_segments = 0;
    for (const std::size_t oi : order) {
      const auto& op = train_ops[oi];
      const std::size_t t_total = op.seconds();
      for (std::size_t t0 = 0; t0 < t_total;
           t0 += static_cast<std::size_t>(cfg.segment_s)) {
        const std::size_t t1 =
            std::min(t_total, t0 + static_cast<std::size_t>(cfg.segment_s));
        const auto inputs = [&] {
          if constexpr (std::is_same_v<Model, SpeechModel>)
            return detail::speech_inputs<float>(m, op, t0, t1);
          else
            return detail::image_inputs<float>(m, op, t0, t1);
        }();
        std::vector<int> labels(op.timeline.labels.begin() + static_cast<std::ptrdiff_t>(t0),
                                op.timeline.labels.begin() + static_cast<std::ptrdiff_t>(t1));

        std::vector<int> prev(t1 - t0, kStartToken);
        if (cfg.teacher_forcing) {
          for (std::size_t t = t0; t < t1; ++t)
            prev[t - t0] = t == 0 ? kStartToken : op.timeline.labels[t - 1];
        } else {
          // feed the model's own first-pass predictions, shifted by one
          nn::Graph g0;
          const auto leaves0 = m.params().leaves(g0);
          const auto logits0 = m.forward(g0, leaves0, inputs, prev);
          const auto pass1 = detail::argmax_labels(g0.value(logits0.back()));
          for (std::size_t t = t0 + 1; t < t1; ++t)
            prev[t - t0] = pass1[t - t0 - 1];
        }

        nn::Graph g;
        const auto leaves = m.params().leaves(g);
        const auto logits = m.forward(g, leaves, inputs, prev);
        auto total = g.ldam_loss(logits[0], labels, ldam);
        for (std::size_t s = 1; s < logits.size(); ++s)
          total = g.add(total, g.ldam_loss(logits[s], labels, ldam));
        g.backward(total);
        loss_sum += static_cast<double>(g.value(total).data[0]);
        ++n_segments;

        std::vector<nn::Tensor> grads;
        grads.reserve(m.params().size());
        for (std::size_t i = 0; i < m.params().size(); ++i)
          grads.push_back(g.grad(leaves[i]));
        adam.step(m.params(), grads, adam_cfg);
      }
    }

    EpochStats stats;
    stats.train_loss = n_segments ? loss_sum / static_cast<double>(n_segments) : 0.0;
    if (!val_ops.empty()) {
      double acc_sum = 0.0, f1_sum = 0.0;
      for (const auto& op : val_ops) {
        PhaseTimeline pred;
        pred.labels = predict_labels(m, op, cfg.segment_s);
        acc_sum += eval::frame_accuracy(pred, op.timeline);
        f1_sum += eval::macro_f1(pred, op.timeline);
      }
      stats.val_acc = acc_sum / static_cast<double>(val_ops.size());
      stats.val_f1 = f1_sum / static_cast<double>(val_ops.size());
    }
    history.push_back(stats);
  }
  return history;
}

}  // namespace phaseflow::model
