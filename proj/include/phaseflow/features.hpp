#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "phaseflow/align.hpp"
#include "phaseflow/feature_sequence.hpp"
#include "phaseflow/phase_timeline.hpp"

namespace phaseflow::features {

inline constexpr std::size_t kLogEncodingDim = 192;  // 3 flags x 64 repeats

struct ManifestChannel {
  std::string path;
  std::size_t dim = 0;
  std::size_t seconds = 0;
};

struct EmbeddingManifest {
  std::string operation_id;
  std::map<std::string, ManifestChannel> channels;

  void validate() const;  // all channels must declare identical seconds
};

// One operation's aligned per-second channels, ready for the models.
struct OperationRecord {
  std::string id;
  FeatureSequence physician;  // T x D_p
  FeatureSequence assistant;  // T x D_a
  FeatureSequence ambient;    // T x 40 (MFCC)
  FeatureSequence image;      // T x (D_x + 192), image features then log bits
  PhaseTimeline timeline;     // empty labels when unlabeled
  std::vector<std::uint8_t> image_present;

  std::size_t seconds() const { return physician.seconds; }
};

// [fluoro, dsa, moving], each repeated 64 times consecutively.
std::vector<float> encode_xray_log(const align::LogFlags& flags);

// FTR1 file: "FTR1", u32 LE version=1, u32 LE T, u32 LE D,
// then T*D float32 LE row-major.
FeatureSequence load_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const FeatureSequence& seq);

// Deterministic stand-in for the pretrained extractors: rows keyed by
// (seed, channel, t), values uniform in [-1, 1).
FeatureSequence stub_embed(std::uint64_t seed, ChannelId channel,
                           std::size_t dim, std::size_t seconds);

// Load the manifest channels, encode the per-second log flags, and build the
// model-ready record: speech inputs stay separate, the image input is the
// image features concatenated with the 192-dim log encoding.
OperationRecord assemble_operation(const EmbeddingManifest& manifest,
                                   const std::vector<align::LogFlags>& log_flags,
                                   const FeatureSequence& mfcc_ambient);

}  // namespace phaseflow::features
