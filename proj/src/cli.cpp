#include "phaseflow/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "phaseflow/nn/checkpoint.hpp"

namespace phaseflow::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void get_to_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void get_range_if(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2)
    throw InputError(std::string("config key ") + key + " must be [lo, hi]");
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

}  // namespace

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed config JSON: " + std::string(e.what()));
  }

  get_to_if(j, "seed", cfg.seed);
  get_to_if(j, "dataset_dir", cfg.dataset_dir);
  get_to_if(j, "out_dir", cfg.out_dir);

  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    get_to_if(s, "n_operations", cfg.synth.n_operations);
    get_to_if(s, "sample_rate", cfg.synth.sample_rate);
    get_range_if(s, "phase_dur_s", cfg.synth.phase_dur_lo_s,
                 cfg.synth.phase_dur_hi_s);
    get_range_if(s, "transition_dur_s", cfg.synth.transition_dur_lo_s,
                 cfg.synth.transition_dur_hi_s);
    get_to_if(s, "speech_dim", cfg.synth.speech_dim);
    get_to_if(s, "image_dim", cfg.synth.image_dim);
    get_to_if(s, "ambient_dim", cfg.synth.ambient_dim);
    get_to_if(s, "mean_separation", cfg.synth.mean_separation);
    get_to_if(s, "noise_scale", cfg.synth.noise_scale);
    get_range_if(s, "ambient_lag_s", cfg.synth.ambient_lag_lo_s,
                 cfg.synth.ambient_lag_hi_s);
    get_range_if(s, "log_epoch_s", cfg.synth.log_epoch_lo_s,
                 cfg.synth.log_epoch_hi_s);
    get_to_if(s, "emit_audio", cfg.synth.emit_audio);
    get_to_if(s, "physician_ambiguous", cfg.synth.physician_ambiguous);
    get_to_if(s, "assistant_ambiguous", cfg.synth.assistant_ambiguous);
    get_to_if(s, "ambient_ambiguous", cfg.synth.ambient_ambiguous);
    get_to_if(s, "image_ambiguous", cfg.synth.image_ambiguous);
    get_to_if(s, "physician_noise_mult", cfg.synth.physician_noise_mult);
    get_to_if(s, "assistant_noise_mult", cfg.synth.assistant_noise_mult);
    get_to_if(s, "ambient_noise_mult", cfg.synth.ambient_noise_mult);
    get_to_if(s, "image_noise_mult", cfg.synth.image_noise_mult);
    get_to_if(s, "skip_phases", cfg.synth.skip_phases);
  }
  if (j.contains("mfcc")) {
    const auto& m = j.at("mfcc");
    get_to_if(m, "n_coeffs", cfg.mfcc.n_coeffs);
    get_to_if(m, "frame_len_s", cfg.mfcc.frame_len_s);
    get_to_if(m, "frame_hop_s", cfg.mfcc.frame_hop_s);
    get_to_if(m, "n_mel_filters", cfg.mfcc.n_mel_filters);
    get_to_if(m, "fmin_hz", cfg.mfcc.fmin_hz);
    get_to_if(m, "fmax_hz", cfg.mfcc.fmax_hz);
    get_to_if(m, "log_floor", cfg.mfcc.log_floor);
  }
  if (j.contains("align")) {
    const auto& a = j.at("align");
    get_to_if(a, "band_lo_hz", cfg.align.band_lo_hz);
    get_to_if(a, "band_hi_hz", cfg.align.band_hi_hz);
    get_to_if(a, "frame_len_s", cfg.align.frame_len_s);
    get_to_if(a, "hop_s", cfg.align.hop_s);
    get_to_if(a, "growth_ratio", cfg.align.growth_ratio);
    get_to_if(a, "min_consecutive", cfg.align.min_consecutive);
    get_to_if(a, "max_lag_s", cfg.align.max_lag_s);
    get_to_if(a, "corr_window_s", cfg.align.corr_window_s);
    if (a.contains("rebase_mode")) {
      const auto mode = a.at("rebase_mode").get<std::string>();
      if (mode == "first_pair")
        cfg.align.rebase_mode = align::RebaseMode::first_pair;
      else if (mode == "median_pairs")
        cfg.align.rebase_mode = align::RebaseMode::median_pairs;
      else
        throw InputError("unknown rebase_mode: " + mode);
    }
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    get_to_if(s, "n_val", cfg.split.n_val);
    get_to_if(s, "n_test", cfg.split.n_test);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get_to_if(m, "model_dim", cfg.model.model_dim);
    get_to_if(m, "tcn_channels", cfg.model.tcn_channels);
    get_to_if(m, "speech_layers", cfg.model.speech_layers);
    get_to_if(m, "image_layers", cfg.model.image_layers);
    get_to_if(m, "stages", cfg.model.stages);
    get_to_if(m, "kernel", cfg.model.kernel);
    get_to_if(m, "ar_dim", cfg.model.ar_dim);
    get_to_if(m, "refine_blocks", cfg.model.refine_blocks);
    get_to_if(m, "speech_channels", cfg.model.speech_channels);
    get_to_if(m, "image_use_log", cfg.model.image_use_log);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    get_to_if(t, "segment_s", cfg.train.segment_s);
    get_to_if(t, "epochs", cfg.train.epochs);
    get_to_if(t, "teacher_forcing", cfg.train.teacher_forcing);
    get_to_if(t, "lr", cfg.train.lr);
    get_to_if(t, "weight_decay", cfg.train.weight_decay);
    get_to_if(t, "ldam_max_margin", cfg.train.ldam_max_margin);
    get_to_if(t, "ldam_scale", cfg.train.ldam_scale);
  }
  if (j.contains("switch")) {
    const auto& s = j.at("switch");
    get_to_if(s, "trigger_phase", cfg.switch_names.trigger_phase);
    get_to_if(s, "consecutive_s", cfg.switch_names.consecutive_s);
    get_to_if(s, "speech_phases", cfg.switch_names.speech_phases);
    get_to_if(s, "image_phases", cfg.switch_names.image_phases);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    get_to_if(e, "exclude_transition", cfg.eval.exclude_transition);
    get_to_if(e, "zero_support_as_zero", cfg.eval.zero_support_as_zero);
    get_to_if(e, "runs", cfg.eval.runs);
  }
  return cfg;
}

model::SwitchConfig resolve_switch(const SwitchNames& names,
                                   const std::vector<std::string>& label_names) {
  const auto id_of = [&](const std::string& name) {
    const auto it = std::find(label_names.begin(), label_names.end(), name);
    if (it == label_names.end())
      throw InputError("unknown phase name: " + name);
    return static_cast<int>(it - label_names.begin());
  };
  model::SwitchConfig sw;
  sw.trigger_phase = id_of(names.trigger_phase);
  sw.consecutive_s = names.consecutive_s;
  sw.speech_phases.clear();
  for (const auto& n : names.speech_phases)
    sw.speech_phases.push_back(id_of(n));
  sw.image_phases.clear();
  for (const auto& n : names.image_phases) sw.image_phases.push_back(id_of(n));
  sw.validate();
  return sw;
}

namespace {

std::string seed_comment(const RunConfig& cfg) {
  return "seed=" + std::to_string(cfg.seed);
}

std::string aligned_manifest_path(const RunConfig& cfg) {
  return cfg.dataset_dir + "/dataset_aligned.json";
}

std::string raw_manifest_path(const RunConfig& cfg) {
  return cfg.dataset_dir + "/dataset.json";
}

// Assemble one model-ready operation from on-disk artifacts.
features::OperationRecord load_operation(const data::DatasetManifest& m,
                                         const data::OperationEntry& entry) {
  const auto ambient_it = entry.embeddings.channels.find("ambient");
  if (ambient_it == entry.embeddings.channels.end())
    throw InputError("operation lacks ambient features (run align first): " +
                     entry.id);
  auto ambient = features::load_feature_file(ambient_it->second.path);
  ambient.channel = ChannelId::ambient;

  features::EmbeddingManifest embeddings = entry.embeddings;
  embeddings.channels.erase("ambient");

  const auto log = align::read_log_csv(entry.log_csv);
  const auto flags = align::log_to_per_second(log, entry.seconds);

  auto record = features::assemble_operation(embeddings, flags, ambient);
  record.timeline = data::read_labels_csv(entry.labels_csv, m.label_names);
  if (record.timeline.seconds() != record.seconds())
    throw DataError("labels/features length mismatch for " + entry.id);
  return record;
}

std::vector<features::OperationRecord> load_operations(
    const data::DatasetManifest& m, const std::vector<std::string>& ids) {
  std::vector<features::OperationRecord> out;
  for (const auto& id : ids) {
    const auto it =
        std::find_if(m.operations.begin(), m.operations.end(),
                     [&](const auto& op) { return op.id == id; });
    if (it == m.operations.end())
      throw InputError("split references unknown operation: " + id);
    out.push_back(load_operation(m, *it));
  }
  return out;
}

std::vector<std::string> split_ids(const data::DatasetSplit& split,
                                   const std::string& which) {
  if (which == "train") return split.train;
  if (which == "val") return split.val;
  if (which == "test") return split.test;
  if (which == "all") {
    auto all = split.train;
    all.insert(all.end(), split.val.begin(), split.val.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    return all;
  }
  throw InputError("unknown split name: " + which);
}

int thread_budget() {
  const char* env = std::getenv("PHASEFLOW_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

std::uint64_t model_seed(const RunConfig& cfg, const std::string& kind) {
  return mix_seed(cfg.seed, fnv1a("model/" + kind));
}

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  auto synth_cfg = cfg.synth;
  synth_cfg.seed = cfg.seed;

  std::error_code ec;
  fs::create_directories(cfg.dataset_dir, ec);
  {
    std::ofstream probe(cfg.dataset_dir + "/.write_probe");
    if (!probe) throw InputError("output directory not writable: " + cfg.dataset_dir);
  }
  fs::remove(cfg.dataset_dir + "/.write_probe", ec);

  data::DatasetManifest manifest;
  manifest.seed = cfg.seed;
  manifest.sample_rate = synth_cfg.sample_rate;
  manifest.aligned = !synth_cfg.emit_audio;  // nothing to align without audio
  manifest.label_names = data::default_label_names();

  for (int i = 0; i < synth_cfg.n_operations; ++i) {
    const auto op = data::synth_operation(synth_cfg, i);
    const std::string dir = cfg.dataset_dir + "/" + op.id;
    fs::create_directories(dir);

    data::OperationEntry entry;
    entry.id = op.id;
    entry.seconds = op.timeline.seconds();
    entry.labels_csv = dir + "/labels.csv";
    entry.log_csv = dir + "/log.csv";
    data::write_labels_csv(entry.labels_csv, op.timeline, seed_comment(cfg));
    align::write_log_csv(entry.log_csv, op.log, seed_comment(cfg));

    entry.embeddings.operation_id = op.id;
    const auto put_channel = [&](const char* name, const FeatureSequence& seq) {
      const std::string path = dir + "/" + name + ".ftr";
      features::write_feature_file(path, seq);
      entry.embeddings.channels[name] = {path, seq.dim, seq.seconds};
    };
    put_channel("physician", op.physician);
    put_channel("assistant", op.assistant);
    put_channel("xray_image", op.image);
    if (!synth_cfg.emit_audio) put_channel("ambient", op.ambient_stub);

    if (synth_cfg.emit_audio) {
      entry.physician_wav = dir + "/physician.wav";
      entry.assistant_wav = dir + "/assistant.wav";
      entry.ambient_wav = dir + "/ambient.wav";
      signal::write_wav(entry.physician_wav, op.physician_wav);
      signal::write_wav(entry.assistant_wav, op.assistant_wav);
      signal::write_wav(entry.ambient_wav, op.ambient_wav);
    }
    manifest.operations.push_back(std::move(entry));
  }

  const std::string path = synth_cfg.emit_audio ? raw_manifest_path(cfg)
                                                : aligned_manifest_path(cfg);
  data::write_dataset_manifest(path, manifest);
  std::cout << "generated " << manifest.operations.size() << " operations in "
            << cfg.dataset_dir << "\n";
  return 0;
}

int cmd_align(const RunConfig& cfg) {
  auto manifest = data::read_dataset_manifest(raw_manifest_path(cfg));
  const auto& a = cfg.align;

  for (auto& entry : manifest.operations) {
    if (entry.physician_wav.empty() || entry.assistant_wav.empty() ||
        entry.ambient_wav.empty())
      throw InputError("operation lacks audio channels: " + entry.id);

    align::ChannelSet channels;
    channels.physician = signal::read_wav(entry.physician_wav);
    channels.assistant = signal::read_wav(entry.assistant_wav);
    channels.ambient = signal::read_wav(entry.ambient_wav);
    const int sr = channels.physician.sample_rate;

    // lag search over a prefix window; the full signals are unnecessary
    const auto window = [&](const signal::AudioSignal& s) {
      signal::AudioSignal w = s;
      const auto max_n = static_cast<std::size_t>(a.corr_window_s * sr);
      if (w.samples.size() > max_n) w.samples.resize(max_n);
      return w;
    };
    const double lag = signal::cross_correlate_lag(
        window(channels.physician), window(channels.ambient), a.max_lag_s);
    auto aligned = align::align_by_lag(channels, lag);
    entry.lag_s = lag;

    const std::string dir = cfg.dataset_dir + "/" + entry.id;
    const std::string ambient_aligned = dir + "/ambient_aligned.wav";
    signal::write_wav(ambient_aligned, aligned.ambient);
    entry.ambient_wav = ambient_aligned;

    auto mfcc_cfg = cfg.mfcc;
    const auto ambient_feats = signal::mfcc(aligned.ambient, mfcc_cfg);
    const std::string ambient_ftr = dir + "/ambient.ftr";
    features::write_feature_file(ambient_ftr, ambient_feats);
    entry.embeddings.channels["ambient"] = {ambient_ftr, ambient_feats.dim,
                                            ambient_feats.seconds};

    const auto track = signal::band_energy_track(
        aligned.physician, a.band_lo_hz, a.band_hi_hz, a.frame_len_s, a.hop_s);
    const auto events = signal::detect_growth_events(
        track, a.min_consecutive, a.growth_ratio, a.hop_s);
    const auto log = align::read_log_csv(entry.log_csv);
    const auto rebased =
        align::rebase_log_timestamps(log, events, a.rebase_mode);
    const std::string log_aligned = dir + "/log_aligned.csv";
    align::write_log_csv(log_aligned, rebased, seed_comment(cfg));
    entry.log_csv = log_aligned;

    double offset = 0.0;
    if (!events.empty())
      for (const auto& rec : log)
        if (rec.beep) {
          offset = events.front() - rec.t_s;
          break;
        }

    const std::size_t t_s = aligned.duration_s();
    if (ambient_feats.seconds != t_s)
      throw DataError("ambient features disagree with aligned duration");
    if (entry.seconds != t_s) {
      // tail trim: shorten labels and feature declarations coherently
      if (t_s > entry.seconds)
        throw DataError("aligned duration exceeds labeled duration");
      entry.seconds = t_s;
    }

    std::cout << entry.id << ": lag " << lag << " s, log offset " << offset
              << " s, " << events.size() << " audio events\n";
  }

  manifest.aligned = true;
  data::write_dataset_manifest(aligned_manifest_path(cfg), manifest);
  std::cout << "aligned manifest written to " << aligned_manifest_path(cfg)
            << "\n";
  return 0;
}

int cmd_split(const RunConfig& cfg) {
  const auto manifest =
      data::read_dataset_manifest(fs::exists(aligned_manifest_path(cfg))
                                      ? aligned_manifest_path(cfg)
                                      : raw_manifest_path(cfg));
  std::vector<std::pair<std::string, PhaseTimeline>> ops;
  for (const auto& entry : manifest.operations)
    ops.emplace_back(entry.id,
                     data::read_labels_csv(entry.labels_csv, manifest.label_names));
  const auto split = data::stratified_split(ops, cfg.split.n_val, cfg.split.n_test);
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  data::write_split_json(cfg.out_dir + "/split.json", split, cfg.seed);
  std::cout << "split " << split.train.size() << "/" << split.val.size() << "/"
            << split.test.size() << " written to " << cfg.out_dir
            << "/split.json\n";
  return 0;
}

namespace {

void write_history_csv(const std::string& path,
                       const std::vector<model::EpochStats>& history,
                       const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write history: " + path);
  out << "# " << seed_comment(cfg) << "\n";
  out << "epoch,train_loss,val_acc,val_f1\n";
  out.precision(8);
  for (std::size_t e = 0; e < history.size(); ++e)
    out << e << ',' << history[e].train_loss << ',' << history[e].val_acc
        << ',' << history[e].val_f1 << '\n';
}

}  // namespace

int cmd_train(const RunConfig& cfg, const std::string& model_kind) {
  if (model_kind != "speech" && model_kind != "image")
    throw InputError("--model must be speech or image");
  const auto manifest = data::read_dataset_manifest(aligned_manifest_path(cfg));
  const auto split = data::read_split_json(cfg.out_dir + "/split.json");
  const auto train_ops = load_operations(manifest, split.train);
  const auto val_ops = load_operations(manifest, split.val);
  if (train_ops.empty()) throw InputError("empty dataset");

  auto train_cfg = cfg.train;
  train_cfg.seed = mix_seed(cfg.seed, fnv1a("train/" + model_kind));

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  std::vector<model::EpochStats> history;
  if (model_kind == "speech") {
    std::vector<std::size_t> dims;
    for (const auto& name : cfg.model.speech_channels) {
      if (name == "physician") dims.push_back(train_ops[0].physician.dim);
      else if (name == "assistant") dims.push_back(train_ops[0].assistant.dim);
      else if (name == "ambient") dims.push_back(train_ops[0].ambient.dim);
      else throw InputError("unknown speech channel: " + name);
    }
    model::SpeechModel m(cfg.model, dims, model_seed(cfg, "speech"));
    history = model::train(m, train_ops, val_ops, train_cfg);
    nn::save_checkpoint(cfg.out_dir + "/speech.ckpt", m.params(), "speech.");
  } else {
    const std::size_t input_dim =
        cfg.model.image_use_log
            ? train_ops[0].image.dim
            : train_ops[0].image.dim - features::kLogEncodingDim;
    model::ImageModel m(cfg.model, input_dim, model_seed(cfg, "image"));
    history = model::train(m, train_ops, val_ops, train_cfg);
    nn::save_checkpoint(cfg.out_dir + "/image.ckpt", m.params(), "image.");
  }
  write_history_csv(cfg.out_dir + "/" + model_kind + "_history.csv", history,
                    cfg);
  if (!history.empty())
    std::cout << model_kind << " trained: final loss "
              << history.back().train_loss << ", val acc "
              << history.back().val_acc << "\n";
  return 0;
}

int cmd_infer(const RunConfig& cfg, const std::string& which_split) {
  const auto manifest = data::read_dataset_manifest(aligned_manifest_path(cfg));
  const auto split = data::read_split_json(cfg.out_dir + "/split.json");
  const auto ids = split_ids(split, which_split);
  const auto ops = load_operations(manifest, ids);
  if (ops.empty()) throw InputError("no operations in split " + which_split);

  const std::string speech_ckpt = cfg.out_dir + "/speech.ckpt";
  const std::string image_ckpt = cfg.out_dir + "/image.ckpt";
  if (!fs::exists(speech_ckpt) || !fs::exists(image_ckpt))
    throw InputError("missing checkpoint (train speech and image first)");

  std::vector<std::size_t> dims;
  for (const auto& name : cfg.model.speech_channels) {
    if (name == "physician") dims.push_back(ops[0].physician.dim);
    else if (name == "assistant") dims.push_back(ops[0].assistant.dim);
    else if (name == "ambient") dims.push_back(ops[0].ambient.dim);
    else throw InputError("unknown speech channel: " + name);
  }
  model::SpeechModel speech(cfg.model, dims, model_seed(cfg, "speech"));
  nn::load_checkpoint(speech_ckpt, speech.params(), "speech.");
  const std::size_t image_dim =
      cfg.model.image_use_log ? ops[0].image.dim
                              : ops[0].image.dim - features::kLogEncodingDim;
  model::ImageModel image(cfg.model, image_dim, model_seed(cfg, "image"));
  nn::load_checkpoint(image_ckpt, image.params(), "image.");

  const auto sw = resolve_switch(cfg.switch_names, manifest.label_names);

  const std::string pred_dir = cfg.out_dir + "/predictions";
  std::error_code ec;
  fs::create_directories(pred_dir, ec);

  std::vector<PhaseTimeline> results(ops.size());
  const int n_threads =
      std::min<int>(thread_budget(), static_cast<int>(ops.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < ops.size(); ++i)
      results[i] =
          model::merged_infer(speech, image, ops[i], sw, cfg.train.segment_s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < n_threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < ops.size();
             i = next.fetch_add(1))
          results[i] = model::merged_infer(speech, image, ops[i], sw,
                                           cfg.train.segment_s);
      });
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < ops.size(); ++i) {
    results[i].label_names = manifest.label_names;
    data::write_labels_csv(pred_dir + "/" + ops[i].id + ".csv", results[i],
                           seed_comment(cfg));
  }
  std::cout << "predictions for " << ops.size() << " operations written to "
            << pred_dir << "\n";
  return 0;
}

namespace {

struct SplitMetrics {
  std::vector<std::pair<std::string, std::pair<double, double>>> per_op;
  double mean_acc = 0.0, mean_f1 = 0.0;
};

SplitMetrics eval_run(const RunConfig& cfg, const data::DatasetManifest& manifest,
                      const std::vector<std::string>& ids,
                      const std::string& pred_dir) {
  eval::MetricOptions opt;
  opt.exclude_transition = cfg.eval.exclude_transition;
  opt.zero_support_as_zero = cfg.eval.zero_support_as_zero;
  SplitMetrics out;
  for (const auto& id : ids) {
    const auto it =
        std::find_if(manifest.operations.begin(), manifest.operations.end(),
                     [&](const auto& op) { return op.id == id; });
    if (it == manifest.operations.end())
      throw InputError("split references unknown operation: " + id);
    const auto gt = data::read_labels_csv(it->labels_csv, manifest.label_names);
    const auto pred =
        data::read_labels_csv(pred_dir + "/" + id + ".csv", manifest.label_names);
    const double acc = eval::frame_accuracy(pred, gt, opt);
    const double f1 = eval::macro_f1(pred, gt, kNumClasses, opt);
    out.per_op.emplace_back(id, std::make_pair(acc, f1));
    out.mean_acc += acc;
    out.mean_f1 += f1;
  }
  if (!out.per_op.empty()) {
    out.mean_acc /= static_cast<double>(out.per_op.size());
    out.mean_f1 /= static_cast<double>(out.per_op.size());
  }
  return out;
}

}  // namespace

int cmd_eval(const RunConfig& cfg, const std::string& which_split) {
  const auto manifest = data::read_dataset_manifest(aligned_manifest_path(cfg));
  const auto split = data::read_split_json(cfg.out_dir + "/split.json");
  const auto ids = split_ids(split, which_split);

  json summary;
  summary["seed"] = cfg.seed;
  summary["split"] = which_split;

  if (cfg.eval.runs <= 1) {
    const auto run = eval_run(cfg, manifest, ids, cfg.out_dir + "/predictions");
    std::ofstream csv(cfg.out_dir + "/metrics.csv");
    if (!csv) throw InputError("cannot write metrics CSV");
    csv << "# " << seed_comment(cfg) << "\n";
    csv << "operation_id,accuracy,f1\n";
    csv.precision(8);
    std::vector<double> accs, f1s;
    for (const auto& [id, m] : run.per_op) {
      csv << id << ',' << m.first << ',' << m.second << '\n';
      accs.push_back(m.first);
      f1s.push_back(m.second);
    }
    const auto acc_agg = eval::aggregate_runs(accs);
    const auto f1_agg = eval::aggregate_runs(f1s);
    summary["accuracy"] = {{"mean", acc_agg.mean}, {"std", acc_agg.std_dev}};
    summary["f1"] = {{"mean", f1_agg.mean}, {"std", f1_agg.std_dev}};
    std::cout << "accuracy " << acc_agg.mean << " +/- " << acc_agg.std_dev
              << ", f1 " << f1_agg.mean << " +/- " << f1_agg.std_dev << "\n";
  } else {
    // out_dir/run1..runN each hold a predictions/ directory
    std::vector<double> acc_means, acc_stds, f1_means, f1_stds;
    for (int r = 1; r <= cfg.eval.runs; ++r) {
      const std::string run_dir =
          cfg.out_dir + "/run" + std::to_string(r) + "/predictions";
      const auto run = eval_run(cfg, manifest, ids, run_dir);
      std::vector<double> accs, f1s;
      for (const auto& [id, m] : run.per_op) {
        accs.push_back(m.first);
        f1s.push_back(m.second);
      }
      acc_means.push_back(eval::aggregate_runs(accs).mean);
      acc_stds.push_back(eval::aggregate_runs(accs).std_dev);
      f1_means.push_back(eval::aggregate_runs(f1s).mean);
      f1_stds.push_back(eval::aggregate_runs(f1s).std_dev);
    }
    summary["runs"] = cfg.eval.runs;
    summary["accuracy"] = {{"mean", eval::aggregate_runs(acc_means).mean},
                           {"std", eval::aggregate_runs(acc_stds).mean}};
    summary["f1"] = {{"mean", eval::aggregate_runs(f1_means).mean},
                     {"std", eval::aggregate_runs(f1_stds).mean}};
    std::cout << "aggregated " << cfg.eval.runs << " runs: accuracy "
              << summary["accuracy"]["mean"].get<double>() << " +/- "
              << summary["accuracy"]["std"].get<double>() << "\n";
  }

  std::ofstream js(cfg.out_dir + "/summary.json");
  if (!js) throw InputError("cannot write summary JSON");
  js << summary.dump(2) << '\n';
  return 0;
}

int cmd_plot(const RunConfig& cfg, const std::string& which_split) {
  const auto manifest = data::read_dataset_manifest(aligned_manifest_path(cfg));
  const auto split = data::read_split_json(cfg.out_dir + "/split.json");
  const auto ids = split_ids(split, which_split);

  std::vector<eval::RibbonPair> pairs;
  for (const auto& id : ids) {
    const auto it =
        std::find_if(manifest.operations.begin(), manifest.operations.end(),
                     [&](const auto& op) { return op.id == id; });
    if (it == manifest.operations.end())
      throw InputError("split references unknown operation: " + id);
    eval::RibbonPair pair;
    pair.gt = data::read_labels_csv(it->labels_csv, manifest.label_names);
    pair.pred = data::read_labels_csv(cfg.out_dir + "/predictions/" + id + ".csv",
                                      manifest.label_names);
    pair.title = id;
    pairs.push_back(std::move(pair));
  }
  const auto svg = eval::ribbon_svg(pairs, manifest.label_names);
  const std::string path = cfg.out_dir + "/ribbon.svg";
  std::ofstream out(path);
  if (!out) throw InputError("cannot write SVG: " + path);
  out << svg;
  std::cout << "ribbon plot written to " << path << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"phaseflow: multimodal surgical phase recognition pipeline"};
  app.require_subcommand(1);

  std::string config_path, model_kind = "speech", which_split = "test";
  std::uint64_t seed = 0;
  bool seed_set = false, exclude_transition = false;
  int switch_k = 0, runs = 0;
  std::string dataset_dir, out_dir;

  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; },
         "root random seed");
  app.add_option("--dataset-dir", dataset_dir, "dataset directory override");
  app.add_option("--out", out_dir, "output directory override");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* align_cmd = app.add_subcommand("align", "align channels and logs");
  auto* split = app.add_subcommand("split", "entropy-stratified dataset split");
  auto* train = app.add_subcommand("train", "train the speech or image model");
  train->add_option("--model", model_kind, "speech|image")->required();
  auto* infer = app.add_subcommand("infer", "merged-model inference");
  infer->add_option("--split", which_split, "train|val|test|all");
  infer->add_option("--switch-k", switch_k, "consecutive trigger seconds");
  auto* eval_cmd = app.add_subcommand("eval", "metrics for stored predictions");
  eval_cmd->add_option("--split", which_split, "train|val|test|all");
  eval_cmd->add_flag("--exclude-transition", exclude_transition,
                     "drop transition frames from metrics");
  eval_cmd->add_option("--runs", runs, "aggregate runs 1..N under out dir");
  auto* plot = app.add_subcommand("plot", "ribbon plot for stored predictions");
  plot->add_option("--split", which_split, "train|val|test|all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (!dataset_dir.empty()) cfg.dataset_dir = dataset_dir;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (switch_k > 0) cfg.switch_names.consecutive_s = switch_k;
    if (exclude_transition) cfg.eval.exclude_transition = true;
    if (runs > 0) cfg.eval.runs = runs;

    if (synth->parsed()) return cmd_synth(cfg);
    if (align_cmd->parsed()) return cmd_align(cfg);
    if (split->parsed()) return cmd_split(cfg);
    if (train->parsed()) return cmd_train(cfg, model_kind);
    if (infer->parsed()) return cmd_infer(cfg, which_split);
    if (eval_cmd->parsed()) return cmd_eval(cfg, which_split);
    if (plot->parsed()) return cmd_plot(cfg, which_split);
    throw InputError("no subcommand given");
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace phaseflow::cli
