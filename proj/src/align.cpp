#include "phaseflow/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace phaseflow::align {

std::size_t ChannelSet::duration_s() const {
  const auto secs = [](const signal::AudioSignal& s) {
    return s.samples.size() / static_cast<std::size_t>(s.sample_rate);
  };
  return std::min({secs(physician), secs(assistant), secs(ambient)});
}

namespace {

void prefix_zeros(signal::AudioSignal& s, std::size_t n) {
  s.samples.insert(s.samples.begin(), n, 0.0);
}

}  // namespace

ChannelSet align_by_lag(const ChannelSet& channels, double lag_s) {
  channels.physician.validate();
  channels.assistant.validate();
  channels.ambient.validate();
  const int sr = channels.physician.sample_rate;
  if (channels.ambient.sample_rate != sr || channels.assistant.sample_rate != sr)
    throw InputError("sample-rate mismatch across channels");

  const double shorter_s =
      std::min(channels.physician.duration_s(), channels.ambient.duration_s());
  if (std::abs(lag_s) >= shorter_s) throw InputError("non-overlapping channels");

  ChannelSet out = channels;
  const auto pad = static_cast<std::size_t>(std::llround(std::abs(lag_s) * sr));
  std::size_t absent_prefix = 0;
  if (lag_s < 0.0) {
    prefix_zeros(out.ambient, pad);
  } else if (lag_s > 0.0) {
    prefix_zeros(out.physician, pad);
    prefix_zeros(out.assistant, pad);
    absent_prefix = static_cast<std::size_t>(
        std::ceil(static_cast<double>(pad) / sr - 1e-12));
  }

  const std::size_t t_s = out.duration_s();
  const std::size_t n = t_s * static_cast<std::size_t>(sr);
  out.physician.samples.resize(n);
  out.assistant.samples.resize(n);
  out.ambient.samples.resize(n);

  if (out.image_present.empty()) out.image_present.assign(t_s, 1);
  if (absent_prefix > 0)
    out.image_present.insert(out.image_present.begin(),
                             std::min(absent_prefix, t_s), 0);
  out.image_present.resize(t_s, 1);
  return out;
}

std::vector<XrayLogRecord> rebase_log_timestamps(
    const std::vector<XrayLogRecord>& log, const std::vector<double>& audio_events,
    RebaseMode mode) {
  std::vector<double> beeps;
  for (const auto& rec : log)
    if (rec.beep) beeps.push_back(rec.t_s);
  if (beeps.empty() || audio_events.empty()) throw InputError("cannot rebase");

  double offset = 0.0;
  if (mode == RebaseMode::first_pair) {
    offset = audio_events.front() - beeps.front();
  } else {
    std::vector<double> events = audio_events;
    std::sort(events.begin(), events.end());
    std::sort(beeps.begin(), beeps.end());
    const std::size_t n = std::min(events.size(), beeps.size());
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) diffs[i] = events[i] - beeps[i];
    std::sort(diffs.begin(), diffs.end());
    offset = (n % 2 == 1) ? diffs[n / 2]
                          : 0.5 * (diffs[n / 2 - 1] + diffs[n / 2]);
  }

  std::vector<XrayLogRecord> out = log;
  for (auto& rec : out) rec.t_s += offset;
  return out;
}

std::vector<LogFlags> log_to_per_second(const std::vector<XrayLogRecord>& log,
                                        std::size_t t_seconds) {
  if (t_seconds < 1) throw InputError("t_seconds must be >= 1");
  std::vector<LogFlags> out(t_seconds);
  std::size_t idx = 0;
  LogFlags current{};  // before the first record: all zeros
  for (std::size_t t = 0; t < t_seconds; ++t) {
    while (idx < log.size() && log[idx].t_s <= static_cast<double>(t)) {
      current = {log[idx].fluoro, log[idx].dsa, log[idx].moving};
      ++idx;
    }
    out[t] = current;
  }
  return out;
}

std::vector<XrayLogRecord> read_log_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open log file: " + path);
  std::vector<XrayLogRecord> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "t_s,fluoro,dsa,moving,beep")
        throw InputError("unexpected log CSV header: " + line);
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    XrayLogRecord rec;
    char c1, c2, c3, c4;
    if (!(ss >> rec.t_s >> c1 >> rec.fluoro >> c2 >> rec.dsa >> c3 >>
          rec.moving >> c4 >> rec.beep) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
      throw InputError("malformed log CSV row: " + line);
    for (int f : {rec.fluoro, rec.dsa, rec.moving, rec.beep})
      if (f != 0 && f != 1) throw InputError("log flags must be binary");
    if (!out.empty() && rec.t_s < out.back().t_s)
      throw DataError("log timestamps must be non-decreasing");
    out.push_back(rec);
  }
  if (!header_seen) throw InputError("empty log file: " + path);
  return out;
}

void write_log_csv(const std::string& path,
                   const std::vector<XrayLogRecord>& log,
                   const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write log file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "t_s,fluoro,dsa,moving,beep\n";
  out.precision(9);
  for (const auto& rec : log)
    out << rec.t_s << ',' << rec.fluoro << ',' << rec.dsa << ',' << rec.moving
        << ',' << rec.beep << '\n';
  if (!out) throw InputError("failed writing log file: " + path);
}

}  // namespace phaseflow::align
