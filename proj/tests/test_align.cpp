#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phaseflow/align.hpp"
#include "test_util.hpp"

using namespace phaseflow;
using namespace phaseflow::align;

namespace {

ChannelSet make_channels(double phys_s, double asst_s, double amb_s,
                         int sr = 1000) {
  ChannelSet ch;
  ch.physician = test_util::white_noise(phys_s, sr, 0.3, 1);
  ch.assistant = test_util::white_noise(asst_s, sr, 0.3, 2);
  ch.ambient = test_util::white_noise(amb_s, sr, 0.3, 3);
  return ch;
}

}  // namespace

TEST_CASE("align_by_lag: lag 0 trims to the common duration only") {
  auto ch = make_channels(10.0, 9.5, 8.2);
  const auto out = align_by_lag(ch, 0.0);
  CHECK(out.duration_s() == 8);
  CHECK(out.physician.samples.size() == 8000);
  CHECK(out.assistant.samples.size() == 8000);
  CHECK(out.ambient.samples.size() == 8000);
  for (std::size_t i = 0; i < 8000; ++i)
    CHECK(out.physician.samples[i] == ch.physician.samples[i]);
  CHECK(out.image_present == std::vector<std::uint8_t>(8, 1));
}

TEST_CASE("align_by_lag: ambient lagging by 5 s gains a 5 s zero prefix") {
  auto ch = make_channels(10.0, 10.0, 10.0);
  // ambient recorder started 5 s late -> correlation lag is -5
  const auto out = align_by_lag(ch, -5.0);
  for (std::size_t i = 0; i < 5000; ++i) CHECK(out.ambient.samples[i] == 0.0);
  CHECK(out.ambient.samples[5000] == ch.ambient.samples[0]);
  CHECK(out.physician.samples.size() == out.ambient.samples.size());
  CHECK(out.assistant.samples.size() == out.ambient.samples.size());
  CHECK(out.duration_s() == 10);
}

TEST_CASE("align_by_lag: physician padding marks leading image seconds absent") {
  auto ch = make_channels(10.0, 10.0, 10.0);
  const auto out = align_by_lag(ch, 3.0);
  REQUIRE(out.image_present.size() == out.duration_s());
  for (std::size_t t = 0; t < 3; ++t) CHECK(out.image_present[t] == 0);
  for (std::size_t t = 3; t < out.image_present.size(); ++t)
    CHECK(out.image_present[t] == 1);
  for (std::size_t i = 0; i < 3000; ++i) {
    CHECK(out.physician.samples[i] == 0.0);
    CHECK(out.assistant.samples[i] == 0.0);
  }
}

TEST_CASE("align_by_lag: fractional lag marks every overlapped second absent") {
  auto ch = make_channels(20.0, 20.0, 20.0);
  const auto out = align_by_lag(ch, 7.3);
  for (std::size_t t = 0; t < 8; ++t) CHECK(out.image_present[t] == 0);
  CHECK(out.image_present[8] == 1);
}

TEST_CASE("align_by_lag: non-overlapping channels error") {
  auto ch = make_channels(10.0, 10.0, 8.0);
  CHECK_THROWS_WITH_AS(align_by_lag(ch, 9.0), "non-overlapping channels",
                       InputError);
  CHECK_THROWS_AS(align_by_lag(ch, -8.0), InputError);
}

TEST_CASE("align_by_lag: idempotent and duration-stable at lag 0") {
  auto ch = make_channels(9.7, 9.4, 9.2);
  const auto once = align_by_lag(ch, 0.0);
  const auto twice = align_by_lag(once, 0.0);
  CHECK(twice.duration_s() == once.duration_s());
  CHECK(twice.physician.samples == once.physician.samples);
  CHECK(twice.assistant.samples == once.assistant.samples);
  CHECK(twice.ambient.samples == once.ambient.samples);
  CHECK(twice.image_present == once.image_present);
}

namespace {

std::vector<XrayLogRecord> sample_log() {
  return {{100.0, 0, 0, 0, 1}, {112.5, 1, 0, 0, 0}, {130.25, 0, 1, 1, 1}};
}

}  // namespace

TEST_CASE("rebase_log_timestamps: first beep anchors the offset") {
  const auto out = rebase_log_timestamps(sample_log(), {160.0, 200.0});
  CHECK(out[0].t_s == 160.0);
  CHECK(out[1].t_s == 172.5);
  CHECK(out[2].t_s == 190.25);
}

TEST_CASE("rebase_log_timestamps: zero offset is the identity") {
  const auto log = sample_log();
  const auto out = rebase_log_timestamps(log, {100.0});
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(out[i].t_s == log[i].t_s);
}

TEST_CASE("rebase_log_timestamps: inter-record deltas are preserved") {
  const auto log = sample_log();
  const auto out = rebase_log_timestamps(log, {1234.5});
  for (std::size_t i = 1; i < log.size(); ++i)
    CHECK(out[i].t_s - out[i - 1].t_s ==
          doctest::Approx(log[i].t_s - log[i - 1].t_s).epsilon(1e-12));
}

TEST_CASE("rebase_log_timestamps: error paths") {
  CHECK_THROWS_WITH_AS(rebase_log_timestamps(sample_log(), {}), "cannot rebase",
                       InputError);
  std::vector<XrayLogRecord> no_beep = {{10.0, 1, 0, 0, 0}};
  CHECK_THROWS_WITH_AS(rebase_log_timestamps(no_beep, {50.0}), "cannot rebase",
                       InputError);
}

TEST_CASE("rebase_log_timestamps: median-of-pairs mode") {
  std::vector<XrayLogRecord> log = {
      {10.0, 0, 0, 0, 1}, {20.0, 0, 0, 0, 1}, {30.0, 0, 0, 0, 1}};
  // offsets 50, 50.4, 49.8 -> median 50
  const auto out = rebase_log_timestamps(log, {60.0, 70.4, 79.8},
                                         RebaseMode::median_pairs);
  CHECK(out[0].t_s == doctest::Approx(60.0));
}

TEST_CASE("log_to_per_second: hold rule") {
  CHECK(log_to_per_second({{0.0, 1, 0, 0, 0}}, 3) ==
        std::vector<LogFlags>{{1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
  CHECK(log_to_per_second({{0.0, 0, 0, 0, 0}, {2.0, 0, 1, 0, 0}}, 4) ==
        std::vector<LogFlags>{{0, 0, 0}, {0, 0, 0}, {0, 1, 0}, {0, 1, 0}});
  CHECK(log_to_per_second({}, 2) == std::vector<LogFlags>{{0, 0, 0}, {0, 0, 0}});
}

TEST_CASE("log_to_per_second: fractional and negative timestamps") {
  // a record at 1.5 takes effect from second 2 (latest with t_s <= t)
  const auto out = log_to_per_second({{-3.0, 0, 0, 1, 0}, {1.5, 1, 0, 0, 0}}, 3);
  CHECK(out == std::vector<LogFlags>{{0, 0, 1}, {0, 0, 1}, {1, 0, 0}});
}

TEST_CASE("log_to_per_second: output length is always T_s") {
  DetRng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<XrayLogRecord> log;
    double t = rng.uniform(-10.0, 10.0);
    const int n = static_cast<int>(rng.uniform_int(0, 12));
    for (int i = 0; i < n; ++i) {
      log.push_back({t, static_cast<int>(rng.uniform_int(0, 1)),
                     static_cast<int>(rng.uniform_int(0, 1)),
                     static_cast<int>(rng.uniform_int(0, 1)), 0});
      t += rng.uniform(0.0, 30.0);
    }
    const auto t_s = static_cast<std::size_t>(rng.uniform_int(1, 50));
    CHECK(log_to_per_second(log, t_s).size() == t_s);
  }
}

TEST_CASE("log CSV round trip") {
  const auto log = sample_log();
  write_log_csv("test_log.csv", log, "seed=7");
  const auto back = read_log_csv("test_log.csv");
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(back[i].t_s == doctest::Approx(log[i].t_s).epsilon(1e-9));
    CHECK(back[i].fluoro == log[i].fluoro);
    CHECK(back[i].dsa == log[i].dsa);
    CHECK(back[i].moving == log[i].moving);
    CHECK(back[i].beep == log[i].beep);
  }
  CHECK_THROWS_AS(read_log_csv("missing_log.csv"), InputError);
}
