#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "phaseflow/signal.hpp"
#include "test_util.hpp"

using namespace phaseflow;
using namespace phaseflow::signal;
using test_util::direct_dft_bin;
using test_util::tone;
using test_util::white_noise;

TEST_CASE("stft: zero signal gives all-zero magnitudes") {
  AudioSignal s;
  s.sample_rate = 8000;
  s.samples.assign(4096, 0.0);
  const auto spec = stft(s, 512, 128, Window::hann);
  CHECK(spec.bins == 257);
  for (double m : spec.magnitudes) CHECK(m == 0.0);
}

TEST_CASE("stft: bin-center sinusoid concentrates energy, matches direct DFT") {
  const int sr = 8000;
  const std::size_t nfft = 512, hop = 256, k0 = 32;  // 32 * 8000/512 = 500 Hz
  const double f0 = static_cast<double>(k0) * sr / static_cast<double>(nfft);
  const auto s = tone(f0, 1.0, sr, 0.5);
  const auto spec = stft(s, nfft, hop, Window::rect);

  for (std::size_t f = 0; f < spec.frames; ++f) {
    std::vector<double> frame(s.samples.begin() + f * hop,
                              s.samples.begin() + f * hop + nfft);
    // oracle: direct O(N^2) DFT summation per bin
    double oracle_max = 0.0;
    std::size_t oracle_argmax = 0;
    for (std::size_t b = 0; b < spec.bins; ++b) {
      const double mag = direct_dft_bin(frame, nfft, b);
      CHECK(spec.at(f, b) == doctest::Approx(mag).epsilon(1e-9).scale(1.0));
      if (mag > oracle_max) {
        oracle_max = mag;
        oracle_argmax = b;
      }
    }
    CHECK(oracle_argmax == k0);
    const auto row_begin = spec.magnitudes.begin() + f * spec.bins;
    const auto it = std::max_element(row_begin, row_begin + spec.bins);
    CHECK(static_cast<std::size_t>(it - row_begin) == k0);
  }
}

TEST_CASE("stft: constant signal puts all energy in bin 0") {
  AudioSignal s;
  s.sample_rate = 4000;
  s.samples.assign(2048, 1.0);
  const auto spec = stft(s, 256, 64, Window::rect);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    CHECK(spec.at(f, 0) == doctest::Approx(256.0));
    for (std::size_t b = 1; b < spec.bins; ++b)
      CHECK(spec.at(f, b) == doctest::Approx(0.0).scale(256.0).epsilon(1e-12));
  }
}

TEST_CASE("stft: frame count and errors") {
  AudioSignal s;
  s.sample_rate = 1000;
  s.samples.assign(1000, 0.25);
  const auto spec = stft(s, 256, 100, Window::hamming);
  CHECK(spec.frames == (1000 - 256) / 100 + 1);
  s.samples.resize(100);
  CHECK_THROWS_WITH_AS(stft(s, 256, 100, Window::hann), "insufficient samples",
                       InputError);
  s.samples.resize(512);
  CHECK_THROWS_AS(stft(s, 300, 100, Window::hann), InputError);  // not pow2
}

TEST_CASE("stft and band_energy_track outputs are non-negative") {
  const auto s = white_noise(2.0, 4000, 0.3, 99);
  const auto spec = stft(s, 256, 128, Window::hann);
  for (double m : spec.magnitudes) CHECK(m >= 0.0);
  const auto track = band_energy_track(s, 500.0, 700.0, 0.064, 0.032);
  for (double e : track) CHECK(e >= 0.0);
}

TEST_CASE("mfcc: 10 s signal with 40 coefficients gives 10x40") {
  const auto s = white_noise(10.0, 4000, 0.2, 7);
  MfccConfig cfg;
  const auto feats = mfcc(s, cfg);
  CHECK(feats.seconds == 10);
  CHECK(feats.dim == 40);
}

TEST_CASE("mfcc: zero signal saturates to the log floor in every frame") {
  AudioSignal s;
  s.sample_rate = 4000;
  s.samples.assign(3 * 4000, 0.0);
  MfccConfig cfg;
  cfg.n_coeffs = 40;
  const auto feats = mfcc(s, cfg);
  CHECK(feats.seconds == 3);

  // oracle: orthonormal DCT-II of the constant vector log(log_floor)
  const int n_mel = cfg.n_mel_filters;
  const double lf = std::log(cfg.log_floor);
  for (int i = 0; i < cfg.n_coeffs; ++i) {
    const double scale = i == 0 ? std::sqrt(1.0 / n_mel) : std::sqrt(2.0 / n_mel);
    double c = 0.0;
    for (int m = 0; m < n_mel; ++m)
      c += scale * std::cos(M_PI * i * (2.0 * m + 1.0) / (2.0 * n_mel)) * lf;
    for (std::size_t t = 0; t < feats.seconds; ++t)
      CHECK(feats.at(t, i) == doctest::Approx(c).epsilon(1e-5).scale(1.0));
  }
  // all rows identical
  for (std::size_t t = 1; t < feats.seconds; ++t)
    for (std::size_t d = 0; d < feats.dim; ++d)
      CHECK(feats.at(t, d) == feats.at(0, d));
}

TEST_CASE("mfcc: 1 kHz tone peaks in the mel filter nearest 1 kHz") {
  const int sr = 8000;
  const auto s = tone(1000.0, 2.0, sr, 0.5);
  MfccConfig cfg;
  cfg.n_coeffs = cfg.n_mel_filters;  // invertible DCT, recover mel energies
  const auto feats = mfcc(s, cfg);

  const int n_mel = cfg.n_mel_filters;
  // invert the orthonormal DCT-II (transpose) to get mel log energies back
  std::vector<double> mel_log(n_mel, 0.0);
  for (int m = 0; m < n_mel; ++m) {
    double v = 0.0;
    for (int i = 0; i < n_mel; ++i) {
      const double scale =
          i == 0 ? std::sqrt(1.0 / n_mel) : std::sqrt(2.0 / n_mel);
      v += scale * std::cos(M_PI * i * (2.0 * m + 1.0) / (2.0 * n_mel)) *
           feats.at(0, i);
    }
    mel_log[m] = v;
  }
  const int argmax = static_cast<int>(
      std::max_element(mel_log.begin(), mel_log.end()) - mel_log.begin());

  // oracle: independently evaluated filter centers on the mel scale
  const auto hz2mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const auto mel2hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double mel_hi = hz2mel(sr / 2.0);
  int nearest = 0;
  double best = 1e300;
  for (int m = 0; m < n_mel; ++m) {
    const double center = mel2hz(mel_hi * (m + 1) / (n_mel + 1));
    if (std::abs(center - 1000.0) < best) {
      best = std::abs(center - 1000.0);
      nearest = m;
    }
  }
  CHECK(argmax == nearest);
}

TEST_CASE("mfcc: errors on sub-second input") {
  const auto s = tone(440.0, 0.5, 4000);
  MfccConfig cfg;
  CHECK_THROWS_WITH_AS(mfcc(s, cfg), "operation too short", InputError);
}

TEST_CASE("mfcc: prepending one second of zeros shifts rows exactly") {
  const auto s = white_noise(4.0, 4000, 0.3, 21);
  MfccConfig cfg;
  const auto base = mfcc(s, cfg);

  AudioSignal padded;
  padded.sample_rate = s.sample_rate;
  padded.samples.assign(4000, 0.0);
  padded.samples.insert(padded.samples.end(), s.samples.begin(), s.samples.end());
  const auto shifted = mfcc(padded, cfg);

  REQUIRE(shifted.seconds == base.seconds + 1);
  for (std::size_t t = 0; t < base.seconds; ++t)
    for (std::size_t d = 0; d < base.dim; ++d)
      CHECK(shifted.at(t + 1, d) == base.at(t, d));

  // leading row is the floor row of an all-zero second
  AudioSignal zero;
  zero.sample_rate = s.sample_rate;
  zero.samples.assign(4000, 0.0);
  const auto floor_row = mfcc(zero, cfg);
  for (std::size_t d = 0; d < base.dim; ++d)
    CHECK(shifted.at(0, d) == floor_row.at(0, d));
}

namespace {

// quadratic-time oracle for the correlation argmax
double naive_lag(const AudioSignal& a, const AudioSignal& b, double max_lag_s) {
  const auto la = static_cast<std::int64_t>(a.samples.size());
  const auto lb = static_cast<std::int64_t>(b.samples.size());
  std::int64_t max_lag = static_cast<std::int64_t>(
      std::llround(max_lag_s * a.sample_rate));
  max_lag = std::min(max_lag, std::max(la, lb) - 1);
  double best_val = -HUGE_VAL;
  std::int64_t best_lag = 0;
  for (std::int64_t lag = -max_lag; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::int64_t t = 0; t < la; ++t) {
      const std::int64_t u = t + lag;
      if (u >= 0 && u < lb) acc += a.samples[t] * b.samples[u];
    }
    const bool better =
        acc > best_val ||
        (acc == best_val &&
         (std::llabs(lag) < std::llabs(best_lag) ||
          (std::llabs(lag) == std::llabs(best_lag) && lag < best_lag)));
    if (better) {
      best_val = acc;
      best_lag = lag;
    }
  }
  return static_cast<double>(best_lag) / a.sample_rate;
}

}  // namespace

TEST_CASE("cross_correlate_lag: identical signals give lag 0") {
  const auto a = white_noise(2.0, 4000, 0.3, 5);
  CHECK(cross_correlate_lag(a, a, 1.0) == 0.0);
}

TEST_CASE("cross_correlate_lag: pure zero-prefixed delay is recovered") {
  const int sr = 1000;
  const auto a = white_noise(3.0, sr, 0.3, 11);
  AudioSignal b;
  b.sample_rate = sr;
  b.samples.assign(static_cast<std::size_t>(7.3 * sr), 0.0);
  b.samples.insert(b.samples.end(), a.samples.begin(), a.samples.end());
  const double lag = cross_correlate_lag(a, b, 10.0);
  CHECK(std::abs(lag - 7.3) <= 1.0 / sr);
  // antisymmetry for noise-free shifts
  CHECK(cross_correlate_lag(b, a, 10.0) == doctest::Approx(-lag));
}

TEST_CASE("cross_correlate_lag: shift recovered under 10 dB noise") {
  const int sr = 2000;
  const auto a = white_noise(4.0, sr, 0.2, 33);
  const std::int64_t shift = 1234;
  AudioSignal b;
  b.sample_rate = sr;
  b.samples.assign(shift, 0.0);
  b.samples.insert(b.samples.end(), a.samples.begin(), a.samples.end());
  double sig_pow = 0.0;
  for (double v : a.samples) sig_pow += v * v;
  sig_pow /= static_cast<double>(a.samples.size());
  const double noise_amp = std::sqrt(sig_pow / 10.0);  // 10 dB SNR
  DetRng rng(77);
  for (auto& v : b.samples) v += noise_amp * rng.normal();
  const double lag = cross_correlate_lag(a, b, 2.0);
  CHECK(std::abs(lag - static_cast<double>(shift) / sr) <= 1.0 / sr + 1e-12);
}

TEST_CASE("cross_correlate_lag: FFT argmax equals naive loop argmax") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const int sr = 500;
    const auto a = white_noise(1.0, sr, 0.3, seed);
    auto b = white_noise(1.2, sr, 0.3, seed + 100);
    // embed a shifted copy of a so there is a real peak
    const std::size_t off = 37 * (seed + 1);
    for (std::size_t i = 0; i < a.samples.size() && off + i < b.samples.size(); ++i)
      b.samples[off + i] = 0.8 * a.samples[i] + 0.3 * b.samples[off + i];
    CHECK(cross_correlate_lag(a, b, 0.6) == naive_lag(a, b, 0.6));
  }
}

TEST_CASE("cross_correlate_lag: errors") {
  const auto a = white_noise(1.0, 4000, 0.3, 1);
  auto b = white_noise(1.0, 8000, 0.3, 2);
  CHECK_THROWS_AS(cross_correlate_lag(a, b, 1.0), InputError);
  AudioSignal z;
  z.sample_rate = 4000;
  z.samples.assign(4000, 0.0);
  CHECK_THROWS_WITH_AS(cross_correlate_lag(a, z, 1.0), "degenerate signal",
                       InputError);
}

TEST_CASE("band_energy_track: 542 Hz tone lights up 539-545, not 1000-1100") {
  const int sr = 4000;
  const auto s = tone(542.0, 4.0, sr, 0.5);
  const auto in_band = band_energy_track(s, 539.0, 545.0, 0.5, 0.1);
  const auto off_band = band_energy_track(s, 1000.0, 1100.0, 0.5, 0.1);
  REQUIRE(!in_band.empty());
  double mean_in = 0.0;
  for (double v : in_band) mean_in += v;
  mean_in /= static_cast<double>(in_band.size());
  CHECK(mean_in > 1.0);
  for (double v : in_band)
    CHECK(v == doctest::Approx(mean_in).epsilon(0.05));  // near constant
  for (double v : off_band) CHECK(v < 0.01 * mean_in);
}

TEST_CASE("band_energy_track: matches a direct DFT oracle") {
  const int sr = 2000;
  const auto s = white_noise(2.0, sr, 0.3, 55);
  const double frame_len_s = 0.25, hop_s = 0.125;
  const auto track = band_energy_track(s, 300.0, 420.0, frame_len_s, hop_s);

  const std::size_t frame = 500, hop = 250;
  const std::size_t nfft = next_pow2(frame);
  std::vector<double> win(frame);
  for (std::size_t i = 0; i < frame; ++i)
    win[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (frame - 1));
  REQUIRE(track.size() == (s.samples.size() - frame) / hop + 1);
  for (std::size_t f = 0; f < track.size(); ++f) {
    std::vector<double> padded(nfft, 0.0);
    for (std::size_t i = 0; i < frame; ++i)
      padded[i] = s.samples[f * hop + i] * win[i];
    double oracle = 0.0;
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
      const double fc = static_cast<double>(k) * sr / static_cast<double>(nfft);
      if (fc >= 300.0 && fc <= 420.0) oracle += direct_dft_bin(padded, nfft, k);
    }
    CHECK(track[f] == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("band_energy_track: zero signal and error paths") {
  AudioSignal z;
  z.sample_rate = 2000;
  z.samples.assign(4000, 0.0);
  for (double v : band_energy_track(z, 539.0, 545.0, 0.5, 0.1)) CHECK(v == 0.0);
  // no bin center falls inside (539.06.., 541.01..) at nfft=1024
  CHECK_THROWS_WITH_AS(band_energy_track(z, 539.5, 540.9, 0.5, 0.1),
                       "band too narrow for fft_size", InputError);
  CHECK_THROWS_AS(band_energy_track(z, 900.0, 1200.0, 0.5, 0.1), InputError);
}

TEST_CASE("detect_growth_events: hand-evaluated run rule") {
  CHECK(detect_growth_events({1, 2, 4, 8, 1, 1}, 3, 1.5, 1.0) ==
        std::vector<double>{0.0});
  CHECK(detect_growth_events({1, 2, 4, 1, 1, 1}, 3, 1.5).empty());  // 2 steps
  CHECK(detect_growth_events({5, 5, 5, 5, 5}, 3, 1.5).empty());
  CHECK(detect_growth_events({0, 0, 0, 0, 0}, 3, 1.5).empty());
  CHECK(detect_growth_events({9, 8, 7, 6, 5, 4}, 2, 1.1).empty());
  CHECK(detect_growth_events({}, 2, 1.5).empty());
  CHECK_THROWS_AS(detect_growth_events({1, 2}, 1, 1.5), InputError);
}

TEST_CASE("detect_growth_events: close runs merge, distant runs do not") {
  // two runs separated by 1 frame < min_consecutive=3 -> one event
  const std::vector<double> merged = {1, 2, 4, 8, 7, 8, 16, 32, 64};
  CHECK(detect_growth_events(merged, 3, 1.5, 0.5) == std::vector<double>{0.0});
  // separated by >= 3 frames -> two events
  const std::vector<double> split = {1, 2, 4, 8, 7, 6, 5, 4, 1, 2, 4, 8};
  CHECK(detect_growth_events(split, 3, 1.5, 1.0) ==
        std::vector<double>{0.0, 8.0});
}

TEST_CASE("detect_growth_events: sorted output, bounded count") {
  DetRng rng(321);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> track(200);
    for (auto& v : track) v = std::exp(2.0 * rng.normal());
    const int m = 2 + static_cast<int>(trial % 3);
    const auto ev = detect_growth_events(track, m, 1.3, 0.1);
    CHECK(std::is_sorted(ev.begin(), ev.end()));
    CHECK(ev.size() <= track.size() / static_cast<std::size_t>(m));
  }
}

TEST_CASE("wav: round trip and channel rejection") {
  const auto s = white_noise(1.5, 4000, 0.4, 9);
  write_wav("test_roundtrip.wav", s);
  const auto r = read_wav("test_roundtrip.wav");
  CHECK(r.sample_rate == 4000);
  REQUIRE(r.samples.size() == s.samples.size());
  for (std::size_t i = 0; i < r.samples.size(); ++i)
    CHECK(std::abs(r.samples[i] - s.samples[i]) <= 1.6 / 32768.0);

  // hand-built stereo header must be rejected
  {
    std::ofstream out("test_stereo.wav", std::ios::binary);
    const unsigned char hdr[] = {
        'R', 'I', 'F', 'F', 40, 0,   0, 0, 'W', 'A', 'V', 'E', 'f', 'm', 't',
        ' ', 16,  0,   0,   0,  1,   0, 2, 0,   0x40, 0x1f, 0,   0,   0,   0x7d,
        0,   0,   4,   0,   16, 0,   'd', 'a', 't', 'a', 4,  0,   0,   0,
        0,   0,   0,   0};
    out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  }
  CHECK_THROWS_AS(read_wav("test_stereo.wav"), InputError);
  CHECK_THROWS_AS(read_wav("no_such_file.wav"), InputError);
}
