#include "phaseflow/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace phaseflow::signal {

void AudioSignal::validate() const {
  if (sample_rate <= 0) throw InputError("sample rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw InputError("non-finite sample");
}

void MfccConfig::validate(int sample_rate) const {
  if (n_coeffs < 1) throw InputError("n_coeffs must be >= 1");
  if (n_coeffs > n_mel_filters)
    throw InputError("n_coeffs must not exceed n_mel_filters");
  const double fmax = fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax && fmax <= sample_rate / 2.0))
    throw InputError("mel band must satisfy fmin < fmax <= sr/2");
  if (!(frame_len_s > 0.0 && frame_len_s <= 1.0))
    throw InputError("frame length must be in (0, 1] s");
  if (frame_hop_s <= 0.0) throw InputError("frame hop must be positive");
  if (log_floor <= 0.0) throw InputError("log floor must be positive");
}

namespace detail {

void fft(std::vector<double>& re, std::vector<double>& im, bool inverse) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0) throw InputError("fft size not a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::size_t u = i + k, v = i + k + len / 2;
        const double vr = re[v] * cr - im[v] * ci;
        const double vi = re[v] * ci + im[v] * cr;
        re[v] = re[u] - vr;
        im[v] = im[u] - vi;
        re[u] += vr;
        im[u] += vi;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] *= inv;
      im[i] *= inv;
    }
  }
}

}  // namespace detail

namespace {

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> win(n, 1.0);
  if (n == 1) return win;
  switch (w) {
    case Window::rect:
      break;
    case Window::hann:
      for (std::size_t i = 0; i < n; ++i)
        win[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
      break;
    case Window::hamming:
      for (std::size_t i = 0; i < n; ++i)
        win[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
      break;
  }
  return win;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

Spectrogram stft(const AudioSignal& sig, std::size_t fft_size, std::size_t hop,
                 Window window) {
  sig.validate();
  if (fft_size == 0 || (fft_size & (fft_size - 1)) != 0)
    throw InputError("fft_size must be a power of two");
  if (hop < 1) throw InputError("hop must be >= 1");
  if (sig.samples.size() < fft_size) throw InputError("insufficient samples");

  const std::size_t n_frames = (sig.samples.size() - fft_size) / hop + 1;
  const std::size_t bins = fft_size / 2 + 1;
  const auto win = make_window(window, fft_size);

  Spectrogram out;
  out.frames = n_frames;
  out.bins = bins;
  out.frame_hop_s = static_cast<double>(hop) / sig.sample_rate;
  out.freq_resolution_hz =
      static_cast<double>(sig.sample_rate) / static_cast<double>(fft_size);
  out.magnitudes.assign(n_frames * bins, 0.0);

  std::vector<double> re(fft_size), im(fft_size);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < fft_size; ++i) {
      re[i] = sig.samples[start + i] * win[i];
      im[i] = 0.0;
    }
    detail::fft(re, im, false);
    for (std::size_t b = 0; b < bins; ++b)
      out.magnitudes[f * bins + b] = std::hypot(re[b], im[b]);
  }
  return out;
}

FeatureSequence mfcc(const AudioSignal& sig, const MfccConfig& cfg) {
  sig.validate();
  if (sig.samples.empty()) throw InputError("empty signal");
  cfg.validate(sig.sample_rate);

  const int sr = sig.sample_rate;
  const std::size_t n_seconds = sig.samples.size() / static_cast<std::size_t>(sr);
  if (n_seconds < 1) throw InputError("operation too short");

  const auto frame = static_cast<std::size_t>(std::lround(cfg.frame_len_s * sr));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.frame_hop_s * sr));
  if (frame < 1 || hop < 1) throw InputError("frame/hop too small for sample rate");
  const std::size_t nfft = next_pow2(frame);
  const std::size_t bins = nfft / 2 + 1;
  const auto win = make_window(cfg.window, frame);

  // Triangular mel filterbank over the power spectrum.
  const int n_mel = cfg.n_mel_filters;
  const double fmax = cfg.fmax_hz > 0.0 ? cfg.fmax_hz : sr / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin_hz), mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mel + 2);
  for (int m = 0; m < n_mel + 2; ++m)
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (n_mel + 1));
  std::vector<double> fbank(static_cast<std::size_t>(n_mel) * bins, 0.0);
  for (int m = 0; m < n_mel; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sr / static_cast<double>(nfft);
      double w = 0.0;
      if (f >= lo && f <= mid && mid > lo)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f <= hi && hi > mid)
        w = (hi - f) / (hi - mid);
      fbank[m * bins + k] = w;
    }
  }

  // Orthonormal DCT-II basis, n_coeffs x n_mel.
  const int nc = cfg.n_coeffs;
  std::vector<double> dct(static_cast<std::size_t>(nc) * n_mel);
  for (int i = 0; i < nc; ++i) {
    const double scale = (i == 0 ? std::sqrt(1.0 / n_mel) : std::sqrt(2.0 / n_mel));
    for (int m = 0; m < n_mel; ++m)
      dct[i * n_mel + m] =
          scale * std::cos(M_PI * i * (2.0 * m + 1.0) / (2.0 * n_mel));
  }

  FeatureSequence out;
  out.seconds = n_seconds;
  out.dim = static_cast<std::size_t>(nc);
  out.channel = ChannelId::ambient;
  out.values.assign(n_seconds * nc, 0.0f);

  std::vector<double> acc(static_cast<std::size_t>(nc));
  std::vector<double> mel_e(n_mel), coeffs(nc);
  std::vector<double> re(nfft), im(nfft);

  for (std::size_t t = 0; t < n_seconds; ++t) {
    const std::size_t sec_lo = t * static_cast<std::size_t>(sr);
    const std::size_t sec_hi = sec_lo + static_cast<std::size_t>(sr);
    std::fill(acc.begin(), acc.end(), 0.0);
    std::size_t n_in_second = 0;
    // first frame whose start is >= sec_lo
    std::size_t f0 = (sec_lo + hop - 1) / hop;
    for (std::size_t f = f0;; ++f) {
      const std::size_t start = f * hop;
      if (start + frame > sec_hi) break;  // only frames fully inside the second
      std::fill(re.begin(), re.end(), 0.0);
      std::fill(im.begin(), im.end(), 0.0);
      for (std::size_t i = 0; i < frame; ++i)
        re[i] = sig.samples[start + i] * win[i];
      detail::fft(re, im, false);
      for (int m = 0; m < n_mel; ++m) {
        double e = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
          const double p = re[k] * re[k] + im[k] * im[k];
          e += fbank[m * bins + k] * p;
        }
        mel_e[m] = std::log(std::max(e, cfg.log_floor));
      }
      for (int i = 0; i < nc; ++i) {
        double c = 0.0;
        for (int m = 0; m < n_mel; ++m) c += dct[i * n_mel + m] * mel_e[m];
        coeffs[i] = c;
      }
      for (int i = 0; i < nc; ++i) acc[i] += coeffs[i];
      ++n_in_second;
    }
    if (n_in_second == 0) throw InputError("frame longer than pooling window");
    for (int i = 0; i < nc; ++i)
      out.values[t * nc + i] = static_cast<float>(acc[i] / n_in_second);
  }
  return out;
}

double cross_correlate_lag(const AudioSignal& a, const AudioSignal& b,
                           double max_lag_s) {
  a.validate();
  b.validate();
  if (a.samples.empty() || b.samples.empty()) throw InputError("empty signal");
  if (a.sample_rate != b.sample_rate) throw InputError("sample-rate mismatch");
  if (max_lag_s < 0.0) throw InputError("max_lag_s must be >= 0");

  const auto la = static_cast<std::int64_t>(a.samples.size());
  const auto lb = static_cast<std::int64_t>(b.samples.size());
  double na = 0.0, nb = 0.0;
  for (double s : a.samples) na += s * s;
  for (double s : b.samples) nb += s * s;
  if (na == 0.0 || nb == 0.0) throw InputError("degenerate signal");
  const double norm = std::sqrt(na) * std::sqrt(nb);

  std::int64_t max_lag =
      static_cast<std::int64_t>(std::llround(max_lag_s * a.sample_rate));
  max_lag = std::min(max_lag, std::max(la, lb) - 1);

  const std::size_t n = next_pow2(static_cast<std::size_t>(la + lb));
  std::vector<double> are(n, 0.0), aim(n, 0.0), bre(n, 0.0), bim(n, 0.0);
  std::copy(a.samples.begin(), a.samples.end(), are.begin());
  std::copy(b.samples.begin(), b.samples.end(), bre.begin());
  detail::fft(are, aim, false);
  detail::fft(bre, bim, false);
  // conj(A) * B, reusing the A buffers
  for (std::size_t k = 0; k < n; ++k) {
    const double cr = are[k] * bre[k] + aim[k] * bim[k];
    const double ci = are[k] * bim[k] - aim[k] * bre[k];
    are[k] = cr;
    aim[k] = ci;
  }
  detail::fft(are, aim, true);

  // c[lag] = sum_t a[t] * b[t + lag]; negative lags wrap to n + lag.
  std::int64_t best_lag = 0;
  double best_val = -HUGE_VAL;
  const auto sn = static_cast<std::int64_t>(n);
  for (std::int64_t lag = -max_lag; lag <= max_lag; ++lag) {
    const std::int64_t idx = ((lag % sn) + sn) % sn;
    const double val = are[static_cast<std::size_t>(idx)] / norm;
    const bool better =
        val > best_val ||
        (val == best_val &&
         (std::llabs(lag) < std::llabs(best_lag) ||
          (std::llabs(lag) == std::llabs(best_lag) && lag < best_lag)));
    if (best_val == -HUGE_VAL || better) {
      best_val = val;
      best_lag = lag;
    }
  }
  return static_cast<double>(best_lag) / a.sample_rate;
}

std::vector<double> band_energy_track(const AudioSignal& sig, double f_lo,
                                      double f_hi, double frame_len_s,
                                      double hop_s) {
  sig.validate();
  if (!(0.0 < f_lo && f_lo < f_hi && f_hi <= sig.sample_rate / 2.0))
    throw InputError("band must satisfy 0 < f_lo < f_hi <= sr/2");
  const auto frame =
      static_cast<std::size_t>(std::lround(frame_len_s * sig.sample_rate));
  const auto hop =
      static_cast<std::size_t>(std::lround(hop_s * sig.sample_rate));
  if (frame < 1 || hop < 1) throw InputError("frame/hop too small for sample rate");

  const std::size_t nfft = next_pow2(frame);
  std::vector<std::size_t> band_bins;
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    const double f =
        static_cast<double>(k) * sig.sample_rate / static_cast<double>(nfft);
    if (f >= f_lo && f <= f_hi) band_bins.push_back(k);
  }
  if (band_bins.empty()) throw InputError("band too narrow for fft_size");

  std::vector<double> track;
  if (sig.samples.size() < frame) return track;
  const std::size_t n_frames = (sig.samples.size() - frame) / hop + 1;
  track.reserve(n_frames);
  const auto win = make_window(Window::hann, frame);
  std::vector<double> re(nfft), im(nfft);
  for (std::size_t f = 0; f < n_frames; ++f) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < frame; ++i)
      re[i] = sig.samples[start + i] * win[i];
    detail::fft(re, im, false);
    double e = 0.0;
    for (std::size_t k : band_bins) e += std::hypot(re[k], im[k]);
    track.push_back(e);
  }
  return track;
}

std::vector<double> detect_growth_events(const std::vector<double>& track,
                                         int min_consecutive,
                                         double growth_ratio, double hop_s) {
  if (min_consecutive < 2) throw InputError("min_consecutive must be >= 2");
  if (growth_ratio <= 1.0) throw InputError("growth_ratio must be > 1");

  struct Run {
    std::size_t start, end;  // frame indices, end = start + steps
  };
  std::vector<Run> runs;
  const std::size_t n = track.size();
  std::size_t i = 0;
  while (n >= 2 && i + 1 < n) {
    const auto grows = [&](std::size_t j) {
      return track[j + 1] >= growth_ratio * track[j] && track[j + 1] > track[j];
    };
    if (!grows(i)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && grows(j)) ++j;
    const std::size_t steps = j - i;
    if (steps >= static_cast<std::size_t>(min_consecutive))
      runs.push_back({i, j});
    i = j;
  }

  // Runs separated by fewer than min_consecutive frames are one event.
  std::vector<double> events;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!events.empty() &&
        runs[r].start - runs[r - 1].end <
            static_cast<std::size_t>(min_consecutive))
      continue;
    events.push_back(static_cast<double>(runs[r].start) * hop_s);
  }
  return events;
}

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

AudioSignal read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open WAV file: " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw InputError("not a RIFF file: " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw InputError("not a WAVE file: " + path);

  AudioSignal sig;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const std::uint32_t chunk = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t fmt = read_u16(in);
      const std::uint16_t channels = read_u16(in);
      const std::uint32_t sr = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      const std::uint16_t bits = read_u16(in);
      if (fmt != 1) throw InputError("only PCM WAV supported: " + path);
      if (channels != 1)
        throw InputError("multi-channel WAV rejected: " + path);
      if (bits != 16) throw InputError("only 16-bit WAV supported: " + path);
      sig.sample_rate = static_cast<int>(sr);
      if (chunk > 16) in.seekg(chunk - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw InputError("WAV data before fmt chunk: " + path);
      const std::size_t n = chunk / 2;
      sig.samples.resize(n);
      std::vector<char> raw(chunk);
      in.read(raw.data(), chunk);
      if (!in) throw InputError("truncated WAV data: " + path);
      for (std::size_t i = 0; i < n; ++i) {
        const auto lo = static_cast<unsigned char>(raw[2 * i]);
        const auto hi = static_cast<unsigned char>(raw[2 * i + 1]);
        const auto v = static_cast<std::int16_t>(lo | (hi << 8));
        sig.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return sig;
    } else {
      in.seekg(chunk + (chunk & 1), std::ios::cur);
    }
  }
  throw InputError("WAV has no data chunk: " + path);
}

void write_wav(const std::string& path, const AudioSignal& sig) {
  if (sig.sample_rate <= 0) throw InputError("sample rate must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write WAV file: " + path);
  const auto n = static_cast<std::uint32_t>(sig.samples.size());
  const std::uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(sig.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(sig.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  std::vector<char> raw(data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double c = std::clamp(sig.samples[i], -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    raw[2 * i] = static_cast<char>(v & 0xff);
    raw[2 * i + 1] = static_cast<char>((v >> 8) & 0xff);
  }
  out.write(raw.data(), data_bytes);
  if (!out) throw InputError("failed writing WAV file: " + path);
}

}  // namespace phaseflow::signal

namespace phaseflow {

const char* channel_name(ChannelId id) {
  switch (id) {
    case ChannelId::physician: return "physician";
    case ChannelId::assistant: return "assistant";
    case ChannelId::ambient: return "ambient";
    case ChannelId::xray_image: return "xray_image";
    case ChannelId::xray_log: return "xray_log";
  }
  throw InputError("unknown channel id");
}

ChannelId channel_from_name(const std::string& name) {
  if (name == "physician") return ChannelId::physician;
  if (name == "assistant") return ChannelId::assistant;
  if (name == "ambient") return ChannelId::ambient;
  if (name == "xray_image") return ChannelId::xray_image;
  if (name == "xray_log") return ChannelId::xray_log;
  throw InputError("unknown channel name: " + name);
}

}  // namespace phaseflow
