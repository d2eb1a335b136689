#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "phaseflow/nn/params.hpp"

namespace phaseflow::nn {

// Checkpoint layout: "CKPT", u32 LE version=1, u32 LE n_entries, then per
// entry u16 LE name length, UTF-8 name, u8 rank, rank x u32 LE dims,
// float32 LE payload.

namespace ckpt_detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace ckpt_detail

template <class S>
void save_checkpoint(const std::string& path, const ParamSet<S>& params,
                     const std::string& name_prefix = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write("CKPT", 4);
  ckpt_detail::put_u32(out, 1);
  ckpt_detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = name_prefix + params.name(static_cast<int>(i));
    const auto& t = params.tensor(static_cast<int>(i));
    ckpt_detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(t.rank()));
    for (std::size_t d : t.shape)
      ckpt_detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (S v : t.data) {
      const auto f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      ckpt_detail::put_u32(out, bits);
    }
  }
  if (!out) throw InputError("failed writing checkpoint: " + path);
}

// Loads into an existing ParamSet; every stored entry must match a known
// parameter's name (after stripping name_prefix) and shape.
template <class S>
void load_checkpoint(const std::string& path, ParamSet<S>& params,
                     const std::string& name_prefix = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CKPT", 4) != 0 ||
      ckpt_detail::get_u32(in) != 1)
    throw InputError("unrecognized checkpoint format: " + path);
  const std::uint32_t n_entries = ckpt_detail::get_u32(in);
  std::size_t loaded = 0;
  for (std::uint32_t e = 0; e < n_entries; ++e) {
    const std::uint16_t name_len = ckpt_detail::get_u16(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int rank = in.get();
    if (!in || rank < 0) throw InputError("truncated checkpoint: " + path);
    std::vector<std::size_t> shape;
    for (int d = 0; d < rank; ++d) shape.push_back(ckpt_detail::get_u32(in));
    const std::size_t numel = TensorT<S>::numel_of(shape);
    std::vector<float> payload(numel);
    for (std::size_t i = 0; i < numel; ++i) {
      const std::uint32_t bits = ckpt_detail::get_u32(in);
      std::memcpy(&payload[i], &bits, 4);
    }
    if (!in) throw InputError("truncated checkpoint: " + path);

    if (name.rfind(name_prefix, 0) != 0)
      throw InputError("checkpoint entry outside prefix: " + name);
    const int h = params.find(name.substr(name_prefix.size()));
    if (h < 0) throw InputError("unknown checkpoint parameter: " + name);
    auto& t = params.tensor(h);
    if (t.shape != shape)
      throw InputError("checkpoint shape mismatch for: " + name);
    for (std::size_t i = 0; i < numel; ++i)
      t.data[i] = static_cast<S>(payload[i]);
    ++loaded;
  }
  if (loaded != params.size())
    throw InputError("checkpoint is missing parameters: " + path);
}

}  // namespace phaseflow::nn
