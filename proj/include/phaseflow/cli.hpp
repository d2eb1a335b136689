#pragma once

#include <string>
#include <vector>

#include "phaseflow/data.hpp"
#include "phaseflow/eval.hpp"
#include "phaseflow/model.hpp"
#include "phaseflow/signal.hpp"

namespace phaseflow::cli {

struct AlignOptions {
  double band_lo_hz = 539.0;
  double band_hi_hz = 545.0;
  double frame_len_s = 0.4;
  double hop_s = 0.1;
  double growth_ratio = 1.35;
  int min_consecutive = 5;
  double max_lag_s = 30.0;
  double corr_window_s = 240.0;
  align::RebaseMode rebase_mode = align::RebaseMode::first_pair;
};

struct SplitOptions {
  std::size_t n_val = 5;
  std::size_t n_test = 5;
};

struct SwitchNames {
  std::string trigger_phase = "Puncture";
  int consecutive_s = 30;
  std::vector<std::string> speech_phases = {"Preparation", "Puncture"};
  std::vector<std::string> image_phases = {
      "GuideWirePositioning", "CatheterPositioning", "CatheterAdjustment",
      "CatheterControl",      "PortPreparation",     "Closing"};
};

struct EvalOptions {
  bool exclude_transition = false;
  bool zero_support_as_zero = false;
  int runs = 1;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string dataset_dir = "dataset";
  std::string out_dir = "out";
  data::SynthConfig synth;
  signal::MfccConfig mfcc;
  AlignOptions align;
  SplitOptions split;
  model::ModelConfig model;
  model::TrainConfig train;
  SwitchNames switch_names;
  EvalOptions eval;
};

// JSON config file; missing keys keep their defaults. Flags override after.
RunConfig load_config(const std::string& path);

model::SwitchConfig resolve_switch(const SwitchNames& names,
                                   const std::vector<std::string>& label_names);

int cmd_synth(const RunConfig& cfg);
int cmd_align(const RunConfig& cfg);
int cmd_split(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg, const std::string& model_kind);
int cmd_infer(const RunConfig& cfg, const std::string& which_split);
int cmd_eval(const RunConfig& cfg, const std::string& which_split);
int cmd_plot(const RunConfig& cfg, const std::string& which_split);

// Full argument parse and dispatch; returns the process exit code
// (0 success, 2 input/configuration error, 3 data-consistency error).
int run_cli(int argc, char** argv);

}  // namespace phaseflow::cli
