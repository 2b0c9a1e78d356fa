#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aanim/tensor.hpp"

namespace aanim {

// Fixed front-end configuration: 16 kHz mono input, 1280-sample Hann windows
// with hop 160, 20 mel bands spanning 0-8000 Hz, log-compressed with floor
// 1e-6. The mel scale is HTK (2595 * log10(1 + f/700)).
constexpr int kSampleRate = 16000;
constexpr int kFftSize = 1280;
constexpr int kHopSize = 160;
constexpr int kMelBands = 20;
constexpr double kLogFloor = 1e-6;

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// One mel-context slice aligned to a video frame: W mel time steps by 20 bands.
struct AudioFeatureFrame {
  Tensor mel;
  int frame_index = 0;
  bool log_scaled = true;
};

// ---------------------------------------------------------------------------
// FFT: recursive mixed-radix Cooley-Tukey. Handles any length whose prime
// factors are small (1280 = 2^8 * 5); a prime length falls back to the O(p^2)
// DFT at that level.
// ---------------------------------------------------------------------------

namespace detail {

inline int smallest_factor(int n) {
  for (int p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

// Roots of unity e^{-2*pi*i*j/n} for j in [0, n). Every recursion level of a
// length-n transform only needs roots whose order divides n, so one table
// serves the whole call tree.
inline std::vector<std::complex<double>> fft_twiddles(int n) {
  std::vector<std::complex<double>> t(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) t[static_cast<std::size_t>(j)] = std::polar(1.0, -2.0 * M_PI * j / n);
  return t;
}

inline void fft_rec(std::complex<double>* data, int n, std::complex<double>* scratch,
                    const std::complex<double>* table, int table_n) {
  if (n == 1) return;
  const int stride = table_n / n;  // maps an order-n root index into the table
  const int p = smallest_factor(n);
  const int m = n / p;
  if (m == 1) {
    // Prime length: direct DFT.
    for (int k = 0; k < n; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int j = 0; j < n; ++j) acc += data[j] * table[(static_cast<long>(j) * k % n) * stride];
      scratch[k] = acc;
    }
    std::copy(scratch, scratch + n, data);
    return;
  }
  // Deinterleave into p subsequences and transform each.
  for (int r = 0; r < p; ++r)
    for (int q = 0; q < m; ++q) scratch[r * m + q] = data[q * p + r];
  std::copy(scratch, scratch + n, data);
  for (int r = 0; r < p; ++r) fft_rec(data + r * m, m, scratch, table, table_n);
  // Combine: X[k] = sum_r W_n^{rk} * S_r[k mod m]
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int r = 0; r < p; ++r)
      acc += table[(static_cast<long>(r) * k % n) * stride] * data[r * m + k % m];
    scratch[k] = acc;
  }
  std::copy(scratch, scratch + n, data);
}

}  // namespace detail

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x) {
  if (x.empty()) return x;
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> scratch(x.size());
  const auto table = detail::fft_twiddles(n);
  detail::fft_rec(x.data(), n, scratch.data(), table.data(), n);
  return x;
}

// ---------------------------------------------------------------------------
// Mel filterbank
// ---------------------------------------------------------------------------

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters with peak 1, linear in Hz between mel-spaced edge
// frequencies, applied to the one-sided power spectrum.
class MelFilterbank {
 public:
  MelFilterbank(int bands = kMelBands, int nfft = kFftSize, double sr = kSampleRate,
                double fmin = 0.0, double fmax = kSampleRate / 2.0)
      : bands_(bands), nbins_(nfft / 2 + 1), weights_({bands, nfft / 2 + 1}) {
    const double mel_lo = hz_to_mel(fmin);
    const double mel_hi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(bands) + 2);
    for (int i = 0; i < bands + 2; ++i)
      edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));
    centers_hz_.assign(edges.begin() + 1, edges.end() - 1);
    const double hz_per_bin = sr / nfft;
    for (int b = 0; b < bands; ++b) {
      const double left = edges[static_cast<std::size_t>(b)];
      const double center = edges[static_cast<std::size_t>(b) + 1];
      const double right = edges[static_cast<std::size_t>(b) + 2];
      for (int k = 0; k < nbins_; ++k) {
        const double f = k * hz_per_bin;
        double w = 0.0;
        if (f >= left && f <= center && center > left)
          w = (f - left) / (center - left);
        else if (f > center && f <= right && right > center)
          w = (right - f) / (right - center);
        weights_.at(b, k) = w;
      }
    }
  }

  int bands() const { return bands_; }
  const std::vector<double>& centers_hz() const { return centers_hz_; }

  void apply(const double* power, double* out) const {
    for (int b = 0; b < bands_; ++b) {
      const double* wrow = weights_.row_ptr(b);
      double s = 0.0;
      for (int k = 0; k < nbins_; ++k) s += wrow[k] * power[k];
      out[b] = s;
    }
  }

 private:
  int bands_;
  int nbins_;
  Tensor weights_;
  std::vector<double> centers_hz_;
};

// ---------------------------------------------------------------------------
// Mel spectrogram and frame alignment
// ---------------------------------------------------------------------------

inline int mel_frame_count(std::size_t samples) {
  return static_cast<int>((samples - kFftSize) / kHopSize) + 1;
}

// STFT frames fully inside the signal (no padding): time step i covers
// samples [i*160, i*160 + 1280), so count = floor((len - 1280)/160) + 1.
inline Tensor mel_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate)
    throw std::invalid_argument("mel_spectrogram: expected 16000 Hz input");
  if (clip.samples.size() < static_cast<std::size_t>(kFftSize))
    throw std::invalid_argument("mel_spectrogram: clip shorter than one FFT window");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("mel_spectrogram: non-finite sample");

  static const MelFilterbank bank;  // fixed configuration, shared read-only
  std::vector<double> window(kFftSize);
  for (int i = 0; i < kFftSize; ++i)
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / kFftSize);

  const int frames = mel_frame_count(clip.samples.size());
  Tensor out({frames, kMelBands});
  std::vector<std::complex<double>> buf(kFftSize);
  std::vector<std::complex<double>> scratch(kFftSize);
  const auto twiddles = detail::fft_twiddles(kFftSize);
  std::vector<double> power(kFftSize / 2 + 1);
  for (int t = 0; t < frames; ++t) {
    const double* src = clip.samples.data() + static_cast<std::size_t>(t) * kHopSize;
    for (int i = 0; i < kFftSize; ++i)
      buf[static_cast<std::size_t>(i)] = {src[i] * window[static_cast<std::size_t>(i)], 0.0};
    detail::fft_rec(buf.data(), kFftSize, scratch.data(), twiddles.data(), kFftSize);
    for (int k = 0; k <= kFftSize / 2; ++k) power[static_cast<std::size_t>(k)] = std::norm(buf[static_cast<std::size_t>(k)]);
    bank.apply(power.data(), out.row_ptr(t));
    for (int b = 0; b < kMelBands; ++b) out.at(t, b) = std::log(out.at(t, b) + kLogFloor);
  }
  return out;
}

// Slice the mel matrix into per-video-frame contexts of W rows, centered on
// the mel step nearest each frame's midpoint time; boundary rows are padded
// with the log floor.
inline std::vector<AudioFeatureFrame> align_frames(const Tensor& mel, double fps,
                                                   double clip_duration, int window) {
  if (fps <= 0.0) throw std::invalid_argument("align_frames: fps must be positive");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("align_frames: window must be odd");
  const int frames = static_cast<int>(std::llround(clip_duration * fps));
  const int half = (window - 1) / 2;
  const int mel_steps = mel.rows();
  const double pad_value = std::log(kLogFloor);
  std::vector<AudioFeatureFrame> out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const double center_time = (t + 0.5) / fps;
    int c = static_cast<int>(std::llround((center_time * kSampleRate - kFftSize / 2.0) / kHopSize));
    c = std::max(0, std::min(mel_steps - 1, c));
    AudioFeatureFrame f;
    f.frame_index = t;
    f.mel = Tensor({window, kMelBands});
    for (int r = -half; r <= half; ++r) {
      const int src = c + r;
      double* dst = f.mel.row_ptr(r + half);
      if (src < 0 || src >= mel_steps) {
        for (int b = 0; b < kMelBands; ++b) dst[b] = pad_value;
      } else {
        const double* s = mel.row_ptr(src);
        std::copy(s, s + kMelBands, dst);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<AudioFeatureFrame> features_for_clip(const AudioClip& clip, double fps,
                                                        int window) {
  return align_frames(mel_spectrogram(clip), fps, clip.duration(), window);
}

// ---------------------------------------------------------------------------
// WAV input/output (16-bit PCM, mono)
// ---------------------------------------------------------------------------

struct LoadedWav {
  AudioClip clip;
  int original_rate = kSampleRate;
  bool resampled = false;
};

namespace detail {

inline std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  os.write(b, 2);
}

}  // namespace detail

// Linear-interpolation resampler (used when a WAV is not at 16 kHz).
inline std::vector<double> resample_linear(const std::vector<double>& in, int from_rate,
                                           int to_rate) {
  if (from_rate == to_rate || in.empty()) return in;
  const double ratio = static_cast<double>(from_rate) / to_rate;
  const std::size_t out_len =
      static_cast<std::size_t>(std::floor((in.size() - 1) / ratio)) + 1;
  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = i * ratio;
    const std::size_t i0 = static_cast<std::size_t>(pos);
    const std::size_t i1 = std::min(i0 + 1, in.size() - 1);
    const double frac = pos - static_cast<double>(i0);
    out[i] = in[i0] * (1.0 - frac) + in[i1] * frac;
  }
  return out;
}

inline LoadedWav read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_wav: cannot open " + path);
  char tag[5] = {0};
  is.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not a RIFF file");
  detail::read_u32(is);
  is.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not a WAVE file");

  int channels = 0, rate = 0, bits = 0;
  std::vector<double> samples;
  bool got_fmt = false, got_data = false;
  while (is.read(tag, 4)) {
    const std::uint32_t chunk_size = detail::read_u32(is);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      const std::uint16_t format = detail::read_u16(is);
      channels = detail::read_u16(is);
      rate = static_cast<int>(detail::read_u32(is));
      detail::read_u32(is);  // byte rate
      detail::read_u16(is);  // block align
      bits = detail::read_u16(is);
      if (chunk_size > 16) is.ignore(chunk_size - 16);
      if (format != 1) throw std::runtime_error("read_wav: only PCM supported");
      got_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw std::runtime_error("read_wav: data chunk before fmt");
      if (bits != 16) throw std::runtime_error("read_wav: only 16-bit PCM supported");
      if (channels != 1) throw std::runtime_error("read_wav: mono input required");
      const std::size_t n = chunk_size / 2;
      samples.resize(n);
      std::vector<char> raw(chunk_size);
      is.read(raw.data(), chunk_size);
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t v = static_cast<std::int16_t>(
            static_cast<unsigned char>(raw[2 * i]) |
            (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
        samples[i] = static_cast<double>(v) / 32768.0;
      }
      got_data = true;
    } else {
      is.ignore(chunk_size + (chunk_size & 1));
    }
  }
  if (!got_data) throw std::runtime_error("read_wav: missing data chunk");

  LoadedWav w;
  w.original_rate = rate;
  if (rate != kSampleRate) {
    w.clip.samples = resample_linear(samples, rate, kSampleRate);
    w.resampled = true;
  } else {
    w.clip.samples = std::move(samples);
  }
  w.clip.sample_rate = kSampleRate;
  return w;
}

inline void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_wav: cannot open " + path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  os.write("RIFF", 4);
  detail::write_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  detail::write_u32(os, 16);
  detail::write_u16(os, 1);  // PCM
  detail::write_u16(os, 1);  // mono
  detail::write_u32(os, static_cast<std::uint32_t>(clip.sample_rate));
  detail::write_u32(os, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  detail::write_u16(os, 2);
  detail::write_u16(os, 16);
  os.write("data", 4);
  detail::write_u32(os, data_bytes);
  for (double s : clip.samples) {
    const double clamped = std::max(-1.0, std::min(1.0, s));
    const std::int16_t v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    detail::write_u16(os, static_cast<std::uint16_t>(v));
  }
}

}  // namespace aanim
