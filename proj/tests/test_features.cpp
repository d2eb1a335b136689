#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <fstream>

#include "phaseflow/features.hpp"

using namespace phaseflow;
using namespace phaseflow::features;

TEST_CASE("encode_xray_log: repeat-64 layout") {
  const auto zeros = encode_xray_log({0, 0, 0});
  REQUIRE(zeros.size() == 192);
  for (float v : zeros) CHECK(v == 0.0f);

  const auto fluoro = encode_xray_log({1, 0, 0});
  for (std::size_t i = 0; i < 64; ++i) CHECK(fluoro[i] == 1.0f);
  for (std::size_t i = 64; i < 192; ++i) CHECK(fluoro[i] == 0.0f);

  const auto both = encode_xray_log({1, 1, 0});
  for (std::size_t i = 0; i < 128; ++i) CHECK(both[i] == 1.0f);
  for (std::size_t i = 128; i < 192; ++i) CHECK(both[i] == 0.0f);

  CHECK_THROWS_AS(encode_xray_log({2, 0, 0}), InputError);
}

TEST_CASE("encode_xray_log: ones count is 64 per active flag") {
  for (int f = 0; f <= 1; ++f)
    for (int d = 0; d <= 1; ++d)
      for (int m = 0; m <= 1; ++m) {
        const auto vec = encode_xray_log({f, d, m});
        int ones = 0;
        for (float v : vec) ones += v == 1.0f;
        CHECK(ones == 64 * (f + d + m));
      }
}

TEST_CASE("FTR1: header plus row-major payload") {
  FeatureSequence seq;
  seq.seconds = 3;
  seq.dim = 2;
  seq.values = {1, 2, 3, 4, 5, 6};
  write_feature_file("test_feat.ftr", seq);
  const auto back = load_feature_file("test_feat.ftr");
  CHECK(back.seconds == 3);
  CHECK(back.dim == 2);
  CHECK(back.at(0, 0) == 1.0f);
  CHECK(back.at(0, 1) == 2.0f);
  CHECK(back.at(1, 0) == 3.0f);
  CHECK(back.at(2, 1) == 6.0f);
}

TEST_CASE("FTR1: empty sequence is valid") {
  FeatureSequence seq;
  seq.seconds = 0;
  seq.dim = 7;
  write_feature_file("test_empty.ftr", seq);
  const auto back = load_feature_file("test_empty.ftr");
  CHECK(back.seconds == 0);
  CHECK(back.dim == 7);
  CHECK(back.values.empty());
}

TEST_CASE("FTR1: load-after-write is the identity on finite matrices") {
  DetRng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureSequence seq;
    seq.seconds = static_cast<std::size_t>(rng.uniform_int(1, 8));
    seq.dim = static_cast<std::size_t>(rng.uniform_int(1, 12));
    seq.values.resize(seq.seconds * seq.dim);
    for (auto& v : seq.values)
      v = static_cast<float>(rng.uniform(-100.0, 100.0));
    write_feature_file("test_rt.ftr", seq);
    const auto back = load_feature_file("test_rt.ftr");
    CHECK(back.seconds == seq.seconds);
    CHECK(back.dim == seq.dim);
    CHECK(back.values == seq.values);  // bit-identical
  }
}

TEST_CASE("FTR1: error paths") {
  {
    std::ofstream out("test_badmagic.ftr", std::ios::binary);
    out.write("NOPE\x01\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00\x00", 16);
  }
  CHECK_THROWS_WITH_AS(load_feature_file("test_badmagic.ftr"),
                       "unrecognized format", InputError);

  {
    // header claims T=2, D=2 but only one float of payload follows
    std::ofstream out("test_trunc.ftr", std::ios::binary);
    const unsigned char hdr[16] = {'F', 'T', 'R', '1', 1, 0, 0, 0,
                                   2,   0,   0,   0,   2, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(hdr), 16);
    const float f = 1.0f;
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
  CHECK_THROWS_WITH_AS(load_feature_file("test_trunc.ftr"), "truncated file",
                       InputError);

  {
    std::ofstream out("test_nan.ftr", std::ios::binary);
    const unsigned char hdr[16] = {'F', 'T', 'R', '1', 1, 0, 0, 0,
                                   1,   0,   0,   0,   1, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(hdr), 16);
    const std::uint32_t nan_bits = 0x7fc00000u;
    out.write(reinterpret_cast<const char*>(&nan_bits), 4);
  }
  CHECK_THROWS_WITH_AS(load_feature_file("test_nan.ftr"), "corrupt features",
                       DataError);

  CHECK_THROWS_AS(load_feature_file("missing.ftr"), InputError);
}

TEST_CASE("stub_embed: deterministic, channel-sensitive") {
  const auto a = stub_embed(42, ChannelId::physician, 16, 5);
  const auto b = stub_embed(42, ChannelId::physician, 16, 5);
  CHECK(a.values == b.values);

  const auto c = stub_embed(42, ChannelId::assistant, 16, 5);
  CHECK(a.values != c.values);
  const auto d = stub_embed(43, ChannelId::physician, 16, 5);
  CHECK(a.values != d.values);

  const auto wide = stub_embed(1, ChannelId::xray_image, 1024, 2);
  CHECK(wide.dim == 1024);
  CHECK(wide.seconds == 2);
  for (float v : wide.values) CHECK((v >= -1.0f && v < 1.0f));
}

namespace {

EmbeddingManifest write_test_manifest(std::size_t t, std::size_t d_speech,
                                      std::size_t d_img) {
  EmbeddingManifest m;
  m.operation_id = "op_test";
  const struct {
    const char* name;
    ChannelId id;
    std::size_t dim;
  } specs[] = {{"physician", ChannelId::physician, d_speech},
               {"assistant", ChannelId::assistant, d_speech},
               {"xray_image", ChannelId::xray_image, d_img}};
  for (const auto& s : specs) {
    const std::string path = std::string("test_asm_") + s.name + ".ftr";
    write_feature_file(path, stub_embed(7, s.id, s.dim, t));
    m.channels[s.name] = {path, s.dim, t};
  }
  return m;
}

}  // namespace

TEST_CASE("assemble_operation: image input is D_x + 192 wide") {
  const std::size_t t = 4;
  const auto manifest = write_test_manifest(t, 8, 1024);
  std::vector<align::LogFlags> flags(t);
  flags[2] = {1, 0, 1};
  FeatureSequence amb = stub_embed(9, ChannelId::ambient, 40, t);

  const auto op = assemble_operation(manifest, flags, amb);
  CHECK(op.seconds() == t);
  CHECK(op.image.dim == 1216);
  CHECK(op.physician.dim == 8);
  CHECK(op.ambient.dim == 40);

  // concatenation order: image features first, then the log encoding
  const auto img = load_feature_file(manifest.channels.at("xray_image").path);
  for (std::size_t d = 0; d < img.dim; ++d)
    CHECK(op.image.at(2, d) == img.at(2, d));
  const auto enc = encode_xray_log(flags[2]);
  for (std::size_t d = 0; d < enc.size(); ++d)
    CHECK(op.image.at(2, img.dim + d) == enc[d]);
}

TEST_CASE("assemble_operation: minimal one-second operation") {
  const auto manifest = write_test_manifest(1, 4, 4);
  const auto op = assemble_operation(manifest, {{0, 0, 0}},
                                     stub_embed(3, ChannelId::ambient, 40, 1));
  CHECK(op.seconds() == 1);
  CHECK(op.image.dim == 4 + 192);
}

TEST_CASE("assemble_operation: misaligned channels error") {
  const auto manifest = write_test_manifest(4, 8, 8);
  // log flags length 3 != 4
  CHECK_THROWS_WITH_AS(
      assemble_operation(manifest, std::vector<align::LogFlags>(3),
                         stub_embed(9, ChannelId::ambient, 40, 4)),
      "misaligned operation", DataError);
  // ambient with wrong seconds
  CHECK_THROWS_WITH_AS(
      assemble_operation(manifest, std::vector<align::LogFlags>(4),
                         stub_embed(9, ChannelId::ambient, 40, 5)),
      "misaligned operation", DataError);
  // manifest-internal mismatch
  auto bad = manifest;
  bad.channels["assistant"].seconds = 7;
  CHECK_THROWS_AS(assemble_operation(bad, std::vector<align::LogFlags>(4),
                                     stub_embed(9, ChannelId::ambient, 40, 4)),
                  DataError);
}

TEST_CASE("assemble_operation: non-40 ambient dim accepted with warning") {
  const auto manifest = write_test_manifest(2, 4, 4);
  const auto op = assemble_operation(manifest, std::vector<align::LogFlags>(2),
                                     stub_embed(9, ChannelId::ambient, 33, 2));
  CHECK(op.ambient.dim == 33);
  CHECK(op.seconds() == 2);
}
