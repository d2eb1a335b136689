#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phaseflow/signal.hpp"

namespace phaseflow::align {

// The three audio channels plus per-second image frame presence markers.
// Physician/assistant/images share one recording timeline; the ambient
// channel is recorded independently and carries the lag.
struct ChannelSet {
  signal::AudioSignal physician;
  signal::AudioSignal assistant;
  signal::AudioSignal ambient;
  std::vector<std::uint8_t> image_present;  // 1 = frame present for that second

  std::size_t duration_s() const;
};

struct XrayLogRecord {
  double t_s = 0.0;  // seconds from the log's own epoch
  int fluoro = 0;
  int dsa = 0;
  int moving = 0;
  int beep = 0;
};

struct LogFlags {
  int fluoro = 0;
  int dsa = 0;
  int moving = 0;
  bool operator==(const LogFlags&) const = default;
};

enum class RebaseMode { first_pair, median_pairs };

// lag_s is cross_correlate_lag(physician, ambient): negative means the
// ambient recorder started late (its content leads), so the ambient signal
// is zero-prefixed; positive means the physician-side recording started
// late, so physician and assistant are prefixed together and the padded
// leading seconds of the image channel are marked absent. All channels are
// then trimmed to the common whole-second duration.
ChannelSet align_by_lag(const ChannelSet& channels, double lag_s);

// Shift every record by (first audio event - first beep record) so log time
// matches audio time. median_pairs instead matches sorted beeps to sorted
// events pairwise and uses the median offset.
std::vector<XrayLogRecord> rebase_log_timestamps(
    const std::vector<XrayLogRecord>& log, const std::vector<double>& audio_events,
    RebaseMode mode = RebaseMode::first_pair);

// Zero-order hold: second t gets the flags of the latest record with
// t_s <= t; seconds before the first record get (0,0,0).
std::vector<LogFlags> log_to_per_second(const std::vector<XrayLogRecord>& log,
                                        std::size_t t_seconds);

// CSV with header t_s,fluoro,dsa,moving,beep; `#` lines are comments.
std::vector<XrayLogRecord> read_log_csv(const std::string& path);
void write_log_csv(const std::string& path,
                   const std::vector<XrayLogRecord>& log,
                   const std::string& header_comment = "");

}  // namespace phaseflow::align
