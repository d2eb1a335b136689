#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phaseflow/align.hpp"
#include "phaseflow/features.hpp"
#include "phaseflow/phase_timeline.hpp"
#include "phaseflow/signal.hpp"

namespace phaseflow::data {

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

// Entry (i, p) = duration of phase p+1 in operation i divided by the total
// duration of that phase over all operations; the transition phase is
// excluded, so columns are 8 wide and each sums to 1.
std::vector<std::vector<double>> phase_percentages(
    const std::vector<PhaseTimeline>& ops);

// Shannon entropy (natural log) of the renormalized vector; 0 ln 0 := 0.
double operation_entropy(const std::vector<double>& vec);

// Sort by entropy ascending (ties by operation id), first n_val to
// validation, next n_test to test, rest to train.
DatasetSplit stratified_split(
    const std::vector<std::pair<std::string, PhaseTimeline>>& ops,
    std::size_t n_val = 5, std::size_t n_test = 5);

// ---- synthetic corpus ----

struct SynthConfig {
  int n_operations = 28;
  int sample_rate = 2000;
  std::uint64_t seed = 42;

  double phase_dur_lo_s = 30.0;
  double phase_dur_hi_s = 300.0;
  double transition_dur_lo_s = 3.0;
  double transition_dur_hi_s = 10.0;

  std::size_t speech_dim = 32;  // physician/assistant stub feature width
  std::size_t image_dim = 32;
  std::size_t ambient_dim = 40;  // stub width when audio is disabled
  double mean_separation = 1.0;
  double noise_scale = 0.3;

  // Groups of phases whose class-conditional means collapse within one
  // channel; the channel alone cannot tell the group members apart, fusion
  // can. The image channel is blind to Preparation/Puncture and to the
  // catheter work that only the machine log (DSA flag) separates.
  std::vector<std::vector<int>> physician_ambiguous = {{7, 8}};
  std::vector<std::vector<int>> assistant_ambiguous = {{2, 3}};
  std::vector<std::vector<int>> ambient_ambiguous = {{5, 6}};
  std::vector<std::vector<int>> image_ambiguous = {{1, 2}, {5, 6}};

  // Channel noise multipliers on top of noise_scale: the assistant wanders
  // off-task and the ambient microphone is far and reverberant.
  double physician_noise_mult = 1.0;
  double assistant_noise_mult = 4.0;
  double ambient_noise_mult = 2.0;
  double image_noise_mult = 1.0;

  // ambient recorder start delay, uniform per operation
  double ambient_lag_lo_s = 0.0;
  double ambient_lag_hi_s = 12.0;
  // X-ray log epoch offset relative to the operation clock
  double log_epoch_lo_s = 500.0;
  double log_epoch_hi_s = 2000.0;

  bool emit_audio = true;       // false: stub ambient features, empty WAVs
  std::vector<int> skip_phases;  // short-phase stress testing
};

struct SynthOperation {
  std::string id;
  PhaseTimeline timeline;
  FeatureSequence physician, assistant, image;  // stub embeddings
  FeatureSequence ambient_stub;                 // only when !emit_audio
  std::vector<align::LogFlags> flags;           // true per-second X-ray state
  std::vector<align::XrayLogRecord> log;        // log-epoch timestamps
  signal::AudioSignal physician_wav, assistant_wav;
  signal::AudioSignal ambient_wav;  // starts injected_lag_s late
  double injected_lag_s = 0.0;
  double log_epoch_offset_s = 0.0;
};

std::vector<std::string> default_label_names();

// Deterministic per (cfg.seed, index); independent of n_operations.
SynthOperation synth_operation(const SynthConfig& cfg, int index);
std::vector<SynthOperation> synth_generate(const SynthConfig& cfg);

// Model-ready record; ambient is the MFCC of the aligned ambient channel,
// or the stub when audio generation is off.
features::OperationRecord to_operation_record(const SynthOperation& op,
                                              const FeatureSequence& ambient);

// labels CSV: header second,phase_id
PhaseTimeline read_labels_csv(const std::string& path,
                              std::vector<std::string> label_names = {});
void write_labels_csv(const std::string& path, const PhaseTimeline& timeline,
                      const std::string& header_comment = "");

// ---- dataset manifest ----

struct OperationEntry {
  std::string id;
  std::string physician_wav, assistant_wav, ambient_wav;
  std::string log_csv;
  std::string labels_csv;
  features::EmbeddingManifest embeddings;
  std::size_t seconds = 0;
  double lag_s = 0.0;  // filled by the alignment step
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int sample_rate = 0;
  bool aligned = false;
  std::vector<std::string> label_names;
  std::vector<OperationEntry> operations;
};

DatasetManifest read_dataset_manifest(const std::string& path);
void write_dataset_manifest(const std::string& path, const DatasetManifest& m);

void write_split_json(const std::string& path, const DatasetSplit& split,
                      std::uint64_t seed);
DatasetSplit read_split_json(const std::string& path);

}  // namespace phaseflow::data
