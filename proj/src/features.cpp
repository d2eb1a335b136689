#include "phaseflow/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

namespace phaseflow::features {

void EmbeddingManifest::validate() const {
  if (channels.empty()) throw InputError("manifest has no channels");
  const std::size_t t = channels.begin()->second.seconds;
  for (const auto& [name, ch] : channels)
    if (ch.seconds != t)
      throw DataError("misaligned operation");
}

std::vector<float> encode_xray_log(const align::LogFlags& flags) {
  for (int f : {flags.fluoro, flags.dsa, flags.moving})
    if (f != 0 && f != 1) throw InputError("log flags must be binary");
  std::vector<float> out(kLogEncodingDim, 0.0f);
  const int vals[3] = {flags.fluoro, flags.dsa, flags.moving};
  for (int i = 0; i < 3; ++i)
    for (int r = 0; r < 64; ++r) out[i * 64 + r] = static_cast<float>(vals[i]);
  return out;
}

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32le(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

}  // namespace

FeatureSequence load_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw InputError("cannot open feature file: " + path);
  const auto file_size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);

  unsigned char header[16];
  if (file_size < sizeof(header))
    throw InputError("unrecognized format");
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (std::memcmp(header, "FTR1", 4) != 0 || read_u32le(header + 4) != 1)
    throw InputError("unrecognized format");
  const std::uint32_t t = read_u32le(header + 8);
  const std::uint32_t d = read_u32le(header + 12);

  const std::size_t payload =
      static_cast<std::size_t>(t) * d * sizeof(float);
  if (file_size != sizeof(header) + payload)
    throw InputError("truncated file");

  FeatureSequence seq;
  seq.seconds = t;
  seq.dim = d;
  seq.values.resize(static_cast<std::size_t>(t) * d);
  if (payload > 0) {
    std::vector<unsigned char> raw(payload);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(payload));
    if (!in) throw InputError("truncated file");
    for (std::size_t i = 0; i < seq.values.size(); ++i) {
      std::uint32_t bits = read_u32le(raw.data() + i * 4);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      if (!std::isfinite(f)) throw DataError("corrupt features");
      seq.values[i] = f;
    }
  }
  return seq;
}

void write_feature_file(const std::string& path, const FeatureSequence& seq) {
  seq.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write feature file: " + path);
  out.write("FTR1", 4);
  put_u32le(out, 1);
  put_u32le(out, static_cast<std::uint32_t>(seq.seconds));
  put_u32le(out, static_cast<std::uint32_t>(seq.dim));
  for (float f : seq.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32le(out, bits);
  }
  if (!out) throw InputError("failed writing feature file: " + path);
}

FeatureSequence stub_embed(std::uint64_t seed, ChannelId channel,
                           std::size_t dim, std::size_t seconds) {
  if (dim < 1 || seconds < 1) throw InputError("dim and seconds must be >= 1");
  FeatureSequence seq;
  seq.seconds = seconds;
  seq.dim = dim;
  seq.channel = channel;
  seq.values.resize(seconds * dim);
  const std::uint64_t chan_key = fnv1a(channel_name(channel));
  for (std::size_t t = 0; t < seconds; ++t) {
    DetRng rng(mix_seed(mix_seed(seed, chan_key), t));
    for (std::size_t d = 0; d < dim; ++d)
      seq.values[t * dim + d] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return seq;
}

OperationRecord assemble_operation(const EmbeddingManifest& manifest,
                                   const std::vector<align::LogFlags>& log_flags,
                                   const FeatureSequence& mfcc_ambient) {
  manifest.validate();
  const auto load = [&](const std::string& name, ChannelId id) {
    const auto it = manifest.channels.find(name);
    if (it == manifest.channels.end())
      throw InputError("manifest missing channel: " + name);
    auto seq = load_feature_file(it->second.path);
    if (seq.seconds != it->second.seconds || seq.dim != it->second.dim)
      throw DataError("misaligned operation");
    seq.channel = id;
    return seq;
  };

  OperationRecord op;
  op.id = manifest.operation_id;
  op.physician = load("physician", ChannelId::physician);
  op.assistant = load("assistant", ChannelId::assistant);
  op.ambient = mfcc_ambient;
  op.ambient.channel = ChannelId::ambient;
  const auto image_feats = load("xray_image", ChannelId::xray_image);

  const std::size_t t = op.physician.seconds;
  if (op.assistant.seconds != t || op.ambient.seconds != t ||
      image_feats.seconds != t || log_flags.size() != t)
    throw DataError("misaligned operation");

  if (op.ambient.dim != 40)
    std::cerr << "warning: ambient feature dim is " << op.ambient.dim
              << " (40-dim MFCC expected)\n";

  op.image.seconds = t;
  op.image.dim = image_feats.dim + kLogEncodingDim;
  op.image.channel = ChannelId::xray_image;
  op.image.values.resize(t * op.image.dim);
  for (std::size_t s = 0; s < t; ++s) {
    float* row = op.image.values.data() + s * op.image.dim;
    const float* img_row = image_feats.values.data() + s * image_feats.dim;
    std::memcpy(row, img_row, image_feats.dim * sizeof(float));
    const auto log_vec = encode_xray_log(log_flags[s]);
    std::memcpy(row + image_feats.dim, log_vec.data(),
                kLogEncodingDim * sizeof(float));
  }
  op.image_present.assign(t, 1);
  return op;
}

}  // namespace phaseflow::features
