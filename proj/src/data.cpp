#include "phaseflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace phaseflow::data {

using nlohmann::json;

std::vector<std::vector<double>> phase_percentages(
    const std::vector<PhaseTimeline>& ops) {
  if (ops.empty()) throw InputError("no operations");
  std::vector<std::vector<double>> durations(ops.size(),
                                             std::vector<double>(8, 0.0));
  std::vector<double> totals(8, 0.0);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    ops[i].validate();
    for (int l : ops[i].labels)
      if (l >= 1) {
        durations[i][static_cast<std::size_t>(l - 1)] += 1.0;
        totals[static_cast<std::size_t>(l - 1)] += 1.0;
      }
  }
  for (double t : totals)
    if (t == 0.0) throw DataError("phase never observed");
  for (auto& row : durations)
    for (std::size_t p = 0; p < 8; ++p) row[p] /= totals[p];
  return durations;
}

double operation_entropy(const std::vector<double>& vec) {
  double sum = 0.0;
  for (double v : vec) {
    if (v < 0.0) throw InputError("negative entry in percentage vector");
    sum += v;
  }
  if (sum <= 0.0) throw InputError("all-zero percentage vector");
  double h = 0.0;
  for (double v : vec) {
    const double q = v / sum;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

DatasetSplit stratified_split(
    const std::vector<std::pair<std::string, PhaseTimeline>>& ops,
    std::size_t n_val, std::size_t n_test) {
  if (ops.size() < n_val + n_test + 1) throw InputError("too few operations");
  std::vector<PhaseTimeline> timelines;
  for (const auto& [id, tl] : ops) timelines.push_back(tl);
  const auto perc = phase_percentages(timelines);

  std::vector<std::pair<double, std::string>> order;
  for (std::size_t i = 0; i < ops.size(); ++i)
    order.emplace_back(operation_entropy(perc[i]), ops[i].first);
  std::sort(order.begin(), order.end());

  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_val)
      split.val.push_back(order[i].second);
    else if (i < n_val + n_test)
      split.test.push_back(order[i].second);
    else
      split.train.push_back(order[i].second);
  }
  return split;
}

std::vector<std::string> default_label_names() {
  return {"Transition",          "Preparation",       "Puncture",
          "GuideWirePositioning", "CatheterPositioning", "CatheterAdjustment",
          "CatheterControl",     "PortPreparation",   "Closing"};
}

namespace {

constexpr double kBeepToneHz = 542.0;
constexpr double kBeepDurS = 1.6;

// RBJ biquad notch; keeps the warning-tone band quiet until a beep rings.
class BiquadNotch {
 public:
  BiquadNotch(double f0, double q, double fs) {
    const double w = 2.0 * M_PI * f0 / fs;
    const double alpha = std::sin(w) / (2.0 * q);
    const double c = std::cos(w);
    const double a0 = 1.0 + alpha;
    b0_ = 1.0 / a0;
    b1_ = -2.0 * c / a0;
    b2_ = 1.0 / a0;
    a1_ = -2.0 * c / a0;
    a2_ = (1.0 - alpha) / a0;
  }

  double process(double x) {
    const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

bool fluoro_phase(int label) { return label == 3 || label == 4 || label == 5; }
bool dsa_phase(int label) { return label == 6; }

// class representative after collapsing a channel's ambiguous phase groups
int collapsed(int label, const std::vector<std::vector<int>>& groups) {
  for (const auto& group : groups)
    if (std::find(group.begin(), group.end(), label) != group.end())
      return *std::min_element(group.begin(), group.end());
  return label;
}

// shared across operations: one mean vector per class and channel
std::vector<std::vector<float>> class_means(
    const SynthConfig& cfg, const std::string& channel, std::size_t dim,
    const std::vector<std::vector<int>>& groups) {
  DetRng rng(mix_seed(cfg.seed, fnv1a("means/" + channel)));
  std::vector<std::vector<float>> means(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) {
    means[k].resize(dim);
    for (auto& v : means[k])
      v = static_cast<float>(cfg.mean_separation * rng.normal());
  }
  for (int k = 0; k < kNumClasses; ++k) {
    const int rep = collapsed(k, groups);
    if (rep != k) means[k] = means[rep];
  }
  return means;
}

FeatureSequence synth_features(const SynthConfig& cfg, std::uint64_t op_seed,
                               const std::string& channel, ChannelId id,
                               std::size_t dim,
                               const std::vector<std::vector<int>>& groups,
                               double noise_mult, const PhaseTimeline& timeline) {
  const auto means = class_means(cfg, channel, dim, groups);
  DetRng rng(mix_seed(op_seed, fnv1a("feat/" + channel)));
  FeatureSequence seq;
  seq.seconds = timeline.seconds();
  seq.dim = dim;
  seq.channel = id;
  seq.values.resize(seq.seconds * dim);
  const double noise = cfg.noise_scale * noise_mult;
  for (std::size_t t = 0; t < seq.seconds; ++t) {
    const auto& mean = means[static_cast<std::size_t>(timeline.labels[t])];
    for (std::size_t d = 0; d < dim; ++d)
      seq.values[t * dim + d] =
          mean[d] + static_cast<float>(noise * rng.normal());
  }
  return seq;
}

}  // namespace

SynthOperation synth_operation(const SynthConfig& cfg, int index) {
  if (cfg.n_operations < 1 || cfg.sample_rate < 1 ||
      cfg.phase_dur_lo_s < 1.0 || cfg.phase_dur_hi_s < cfg.phase_dur_lo_s)
    throw InputError("invalid synth config");
  const std::uint64_t op_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(index) + 1);

  SynthOperation op;
  {
    std::ostringstream id;
    id << "op_" << (index < 10 ? "0" : "") << index;
    op.id = id.str();
  }

  // timeline: canonical phase order with short transitions in between
  DetRng rng_tl(mix_seed(op_seed, fnv1a("timeline")));
  op.timeline.label_names = default_label_names();
  bool first = true;
  for (int phase = 1; phase <= 8; ++phase) {
    if (std::find(cfg.skip_phases.begin(), cfg.skip_phases.end(), phase) !=
        cfg.skip_phases.end())
      continue;
    if (!first) {
      const auto trans = rng_tl.uniform_int(
          static_cast<std::int64_t>(cfg.transition_dur_lo_s),
          static_cast<std::int64_t>(cfg.transition_dur_hi_s));
      op.timeline.labels.insert(op.timeline.labels.end(),
                                static_cast<std::size_t>(trans), 0);
    }
    const auto dur =
        rng_tl.uniform_int(static_cast<std::int64_t>(cfg.phase_dur_lo_s),
                           static_cast<std::int64_t>(cfg.phase_dur_hi_s));
    op.timeline.labels.insert(op.timeline.labels.end(),
                              static_cast<std::size_t>(dur), phase);
    first = false;
  }
  const std::size_t t_s = op.timeline.seconds();

  // per-second X-ray machine state; the machine moves into place during the
  // transition right before a fluoro/DSA phase
  op.flags.resize(t_s);
  for (std::size_t t = 0; t < t_s; ++t) {
    const int l = op.timeline.labels[t];
    op.flags[t].fluoro = fluoro_phase(l) ? 1 : 0;
    op.flags[t].dsa = dsa_phase(l) ? 1 : 0;
    int moving = 0;
    if (l == 0) {
      for (std::size_t u = t + 1; u < t_s; ++u) {
        if (op.timeline.labels[u] == 0) continue;
        moving = (fluoro_phase(op.timeline.labels[u]) ||
                  dsa_phase(op.timeline.labels[u]))
                     ? 1
                     : 0;
        break;
      }
    }
    op.flags[t].moving = moving;
  }

  // change records in log-epoch time; beep marks fluoro/DSA activation
  DetRng rng_log(mix_seed(op_seed, fnv1a("log")));
  op.log_epoch_offset_s =
      std::floor(rng_log.uniform(cfg.log_epoch_lo_s, cfg.log_epoch_hi_s) * 4.0) /
      4.0;
  std::vector<std::size_t> beep_seconds;
  {
    align::LogFlags prev{-1, -1, -1};
    for (std::size_t t = 0; t < t_s; ++t) {
      const auto& f = op.flags[t];
      if (f == prev) continue;
      const bool rising = (prev.fluoro <= 0 && f.fluoro == 1) ||
                          (prev.dsa <= 0 && f.dsa == 1);
      op.log.push_back({static_cast<double>(t) + op.log_epoch_offset_s,
                        f.fluoro, f.dsa, f.moving, rising ? 1 : 0});
      if (rising) beep_seconds.push_back(t);
      prev = f;
    }
  }

  // stub embeddings
  op.physician = synth_features(cfg, op_seed, "physician",
                                ChannelId::physician, cfg.speech_dim,
                                cfg.physician_ambiguous,
                                cfg.physician_noise_mult, op.timeline);
  op.assistant = synth_features(cfg, op_seed, "assistant",
                                ChannelId::assistant, cfg.speech_dim,
                                cfg.assistant_ambiguous,
                                cfg.assistant_noise_mult, op.timeline);
  op.image = synth_features(cfg, op_seed, "xray_image", ChannelId::xray_image,
                            cfg.image_dim, cfg.image_ambiguous,
                            cfg.image_noise_mult, op.timeline);

  DetRng rng_lag(mix_seed(op_seed, fnv1a("lag")));
  const double raw_lag = rng_lag.uniform(cfg.ambient_lag_lo_s, cfg.ambient_lag_hi_s);
  const auto lag_samples = static_cast<std::size_t>(
      std::llround(raw_lag * cfg.sample_rate));
  op.injected_lag_s = static_cast<double>(lag_samples) / cfg.sample_rate;

  if (!cfg.emit_audio) {
    op.ambient_stub = synth_features(cfg, op_seed, "ambient",
                                     ChannelId::ambient, cfg.ambient_dim,
                                     cfg.ambient_ambiguous,
                                     cfg.ambient_noise_mult, op.timeline);
    return op;
  }

  // audio: a noise component shared between physician and ambient carries
  // the correlation; the ambient channel encodes the phase as a tone whose
  // frequency collapses over ambiguous phases; the physician channel rings
  // the 542 Hz beep when the X-ray machine activates
  const int sr = cfg.sample_rate;
  const std::size_t n = t_s * static_cast<std::size_t>(sr);
  DetRng rng_shared(mix_seed(op_seed, fnv1a("audio/shared")));
  DetRng rng_phys(mix_seed(op_seed, fnv1a("audio/physician")));
  DetRng rng_asst(mix_seed(op_seed, fnv1a("audio/assistant")));
  DetRng rng_amb(mix_seed(op_seed, fnv1a("audio/ambient")));

  op.physician_wav.sample_rate = sr;
  op.assistant_wav.sample_rate = sr;
  op.ambient_wav.sample_rate = sr;
  op.physician_wav.samples.resize(n);
  op.assistant_wav.samples.resize(n);
  std::vector<double> ambient_true(n);

  BiquadNotch notch(kBeepToneHz, 4.0, sr);
  for (std::size_t i = 0; i < n; ++i) {
    const double shared = rng_shared.normal();
    const std::size_t t = i / static_cast<std::size_t>(sr);
    const int label = op.timeline.labels[t];
    const int tone_class = collapsed(label, cfg.ambient_ambiguous);
    const double tone_hz = 130.0 + 42.0 * tone_class;
    const double tone =
        0.22 * std::sin(2.0 * M_PI * tone_hz * static_cast<double>(i) / sr);
    op.physician_wav.samples[i] =
        notch.process(0.30 * shared + 0.08 * rng_phys.normal());
    op.assistant_wav.samples[i] = 0.18 * shared + 0.10 * rng_asst.normal();
    ambient_true[i] =
        0.26 * shared + tone +
        0.06 * cfg.ambient_noise_mult * rng_amb.normal();
  }

  for (std::size_t beep_t : beep_seconds) {
    const std::size_t start = beep_t * static_cast<std::size_t>(sr);
    const auto len = static_cast<std::size_t>(kBeepDurS * sr);
    for (std::size_t i = 0; i < len && start + i < n; ++i) {
      const double tau = static_cast<double>(i) / sr;
      const double amp = std::min(0.7, 0.004 * std::pow(2.0, tau / 0.12));
      op.physician_wav.samples[start + i] +=
          amp * std::sin(2.0 * M_PI * kBeepToneHz * tau);
    }
  }

  for (auto& v : op.physician_wav.samples) v = std::clamp(v, -1.0, 1.0);
  for (auto& v : op.assistant_wav.samples) v = std::clamp(v, -1.0, 1.0);

  // the ambient recorder started late: its recording misses the first
  // injected_lag_s seconds
  op.ambient_wav.samples.assign(ambient_true.begin() + static_cast<std::ptrdiff_t>(lag_samples),
                                ambient_true.end());
  for (auto& v : op.ambient_wav.samples) v = std::clamp(v, -1.0, 1.0);
  return op;
}

std::vector<SynthOperation> synth_generate(const SynthConfig& cfg) {
  std::vector<SynthOperation> ops;
  ops.reserve(static_cast<std::size_t>(cfg.n_operations));
  for (int i = 0; i < cfg.n_operations; ++i)
    ops.push_back(synth_operation(cfg, i));
  return ops;
}

features::OperationRecord to_operation_record(const SynthOperation& op,
                                              const FeatureSequence& ambient) {
  const std::size_t t_s = op.timeline.seconds();
  if (op.physician.seconds != t_s || op.assistant.seconds != t_s ||
      op.image.seconds != t_s || ambient.seconds != t_s ||
      op.flags.size() != t_s)
    throw DataError("misaligned operation");

  features::OperationRecord rec;
  rec.id = op.id;
  rec.physician = op.physician;
  rec.assistant = op.assistant;
  rec.ambient = ambient;
  rec.timeline = op.timeline;
  rec.image_present.assign(t_s, 1);

  rec.image.seconds = t_s;
  rec.image.dim = op.image.dim + features::kLogEncodingDim;
  rec.image.channel = ChannelId::xray_image;
  rec.image.values.resize(t_s * rec.image.dim);
  for (std::size_t t = 0; t < t_s; ++t) {
    float* row = rec.image.values.data() + t * rec.image.dim;
    const float* img = op.image.values.data() + t * op.image.dim;
    std::copy(img, img + op.image.dim, row);
    const auto enc = features::encode_xray_log(op.flags[t]);
    std::copy(enc.begin(), enc.end(), row + op.image.dim);
  }
  return rec;
}

PhaseTimeline read_labels_csv(const std::string& path,
                              std::vector<std::string> label_names) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open labels file: " + path);
  PhaseTimeline tl;
  tl.label_names = std::move(label_names);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "second,phase_id")
        throw InputError("unexpected labels CSV header: " + line);
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::size_t second;
    int phase;
    char comma;
    if (!(ss >> second >> comma >> phase) || comma != ',')
      throw InputError("malformed labels CSV row: " + line);
    if (second != tl.labels.size())
      throw DataError("labels CSV seconds must be consecutive from 0");
    tl.labels.push_back(phase);
  }
  tl.validate();
  return tl;
}

void write_labels_csv(const std::string& path, const PhaseTimeline& timeline,
                      const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write labels file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "second,phase_id\n";
  for (std::size_t t = 0; t < timeline.labels.size(); ++t)
    out << t << ',' << timeline.labels[t] << '\n';
  if (!out) throw InputError("failed writing labels file: " + path);
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["sample_rate"] = m.sample_rate;
  j["aligned"] = m.aligned;
  j["label_names"] = m.label_names;
  j["operations"] = json::array();
  for (const auto& op : m.operations) {
    json jo;
    jo["id"] = op.id;
    jo["seconds"] = op.seconds;
    jo["lag_s"] = op.lag_s;
    jo["wav"] = {{"physician", op.physician_wav},
                 {"assistant", op.assistant_wav},
                 {"ambient", op.ambient_wav}};
    jo["log_csv"] = op.log_csv;
    jo["labels_csv"] = op.labels_csv;
    json channels = json::object();
    for (const auto& [name, ch] : op.embeddings.channels)
      channels[name] = {{"path", ch.path},
                        {"dim", ch.dim},
                        {"seconds", ch.seconds}};
    jo["channels"] = channels;
    j["operations"].push_back(jo);
  }
  return j;
}

}  // namespace

DatasetManifest read_dataset_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed manifest JSON: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.sample_rate = j.at("sample_rate").get<int>();
    m.aligned = j.at("aligned").get<bool>();
    m.label_names = j.at("label_names").get<std::vector<std::string>>();
    for (const auto& jo : j.at("operations")) {
      OperationEntry op;
      op.id = jo.at("id").get<std::string>();
      op.seconds = jo.at("seconds").get<std::size_t>();
      op.lag_s = jo.at("lag_s").get<double>();
      op.physician_wav = jo.at("wav").at("physician").get<std::string>();
      op.assistant_wav = jo.at("wav").at("assistant").get<std::string>();
      op.ambient_wav = jo.at("wav").at("ambient").get<std::string>();
      op.log_csv = jo.at("log_csv").get<std::string>();
      op.labels_csv = jo.at("labels_csv").get<std::string>();
      op.embeddings.operation_id = op.id;
      for (const auto& [name, jc] : jo.at("channels").items())
        op.embeddings.channels[name] = {jc.at("path").get<std::string>(),
                                        jc.at("dim").get<std::size_t>(),
                                        jc.at("seconds").get<std::size_t>()};
      m.operations.push_back(std::move(op));
    }
  } catch (const json::exception& e) {
    throw InputError("manifest missing fields: " + std::string(e.what()));
  }
  return m;
}

void write_dataset_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest: " + path);
  out << manifest_to_json(m).dump(2) << '\n';
  if (!out) throw InputError("failed writing manifest: " + path);
}

void write_split_json(const std::string& path, const DatasetSplit& split,
                      std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write split file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed writing split file: " + path);
}

DatasetSplit read_split_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open split file: " + path);
  json j;
  try {
    in >> j;
    DatasetSplit s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw InputError("malformed split JSON: " + std::string(e.what()));
  }
}

}  // namespace phaseflow::data
