#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "phaseflow/common.hpp"
#include "phaseflow/feature_sequence.hpp"

namespace phaseflow::signal {

struct AudioSignal {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
  void validate() const;
};

enum class Window { hann, hamming, rect };

struct Spectrogram {
  std::vector<double> magnitudes;  // row-major, frames x bins, all >= 0
  std::size_t frames = 0;
  std::size_t bins = 0;
  double frame_hop_s = 0.0;
  double freq_resolution_hz = 0.0;

  double at(std::size_t f, std::size_t b) const {
    return magnitudes[f * bins + b];
  }
};

struct MfccConfig {
  int n_coeffs = 40;
  double frame_len_s = 0.025;
  double frame_hop_s = 0.010;
  int n_mel_filters = 64;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 -> sample_rate / 2
  double log_floor = 1e-10;
  Window window = Window::hamming;

  void validate(int sample_rate) const;
};

// Magnitude of the one-sided DFT per windowed frame.
// frames = floor((len - fft_size) / hop) + 1, bins = fft_size/2 + 1.
Spectrogram stft(const AudioSignal& sig, std::size_t fft_size, std::size_t hop,
                 Window window);

// Frame-level MFCCs (mel filterbank on the power spectrum, log with floor,
// orthonormal DCT-II) mean-pooled per whole second. Only frames fully inside
// a second contribute to its row, so prepending 1 s of zeros shifts rows
// exactly. T = floor(duration).
FeatureSequence mfcc(const AudioSignal& sig, const MfccConfig& cfg);

// Argmax of the normalized cross-correlation over integer sample lags in
// [-max_lag_s*sr, +max_lag_s*sr], in seconds. Positive lag means b starts
// later than a. Ties: smallest |lag|, then negative before positive.
// FFT-based; argmax agrees with the naive quadratic loop.
double cross_correlate_lag(const AudioSignal& a, const AudioSignal& b,
                           double max_lag_s);

// Per-frame summed magnitude over DFT bins whose center lies in [f_lo, f_hi].
// Hann-windowed frames of round(frame_len_s*sr) samples, zero-padded to the
// next power of two, advanced by round(hop_s*sr).
std::vector<double> band_energy_track(const AudioSignal& sig, double f_lo,
                                      double f_hi, double frame_len_s,
                                      double hop_s);

// Start times of maximal runs with track[i+1] >= growth_ratio*track[i] (and
// strictly increasing, so a flat zero track never fires) for at least
// min_consecutive successive steps. Runs closer than min_consecutive frames
// merge into one event.
std::vector<double> detect_growth_events(const std::vector<double>& track,
                                         int min_consecutive,
                                         double growth_ratio,
                                         double hop_s = 1.0);

// PCM 16-bit signed little-endian mono only; multi-channel files rejected.
AudioSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioSignal& sig);

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {
// In-place iterative radix-2 FFT over interleaved re/im pairs. n power of 2.
void fft(std::vector<double>& re, std::vector<double>& im, bool inverse);
}  // namespace detail

}  // namespace phaseflow::signal
