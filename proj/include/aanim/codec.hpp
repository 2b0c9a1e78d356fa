#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aanim {

// Facial animation frame layout: 17 action-unit intensities followed by the
// 6-DoF head pose (pitch, yaw, roll in radians; tx, ty, tz).
constexpr int kAuCount = 17;
constexpr int kPoseCount = 6;
constexpr int kAnimDims = kAuCount + kPoseCount;

// AU45 (blink) is the last action unit in the layout.
constexpr int kBlinkAttr = 16;

struct AnimVector {
  std::array<double, kAnimDims> values{};

  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  double& au(int i) { return values[static_cast<std::size_t>(i)]; }
  double& pose(int i) { return values[static_cast<std::size_t>(kAuCount + i)]; }
  double au(int i) const { return values[static_cast<std::size_t>(i)]; }
  double pose(int i) const { return values[static_cast<std::size_t>(kAuCount + i)]; }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct AnimCode {
  std::array<int, kAnimDims> codes{};
  int& operator[](int i) { return codes[static_cast<std::size_t>(i)]; }
  int operator[](int i) const { return codes[static_cast<std::size_t>(i)]; }
};

struct AnimSequence {
  std::vector<AnimVector> frames;
  double fps = 25.0;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  std::vector<double> attribute_track(int a) const {
    std::vector<double> t(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) t[i] = frames[i][a];
    return t;
  }
};

// Uniform per-attribute quantizer. Each of the 23 attributes is split into D
// equal intervals over [lo, hi]; codes are interval indices and decoding
// returns the interval midpoint, so in-range reconstruction error is at most
// half an interval width.
class CodecSpec {
 public:
  CodecSpec() = default;
  CodecSpec(int d, std::array<std::pair<double, double>, kAnimDims> ranges)
      : d_(d), ranges_(ranges) {
    if (d_ <= 0) throw std::invalid_argument("codec: D must be positive");
    for (auto& [lo, hi] : ranges_)
      if (!(lo < hi)) throw std::invalid_argument("codec: range must have lo < hi");
  }

  int d() const { return d_; }
  double lo(int a) const { return ranges_[static_cast<std::size_t>(a)].first; }
  double hi(int a) const { return ranges_[static_cast<std::size_t>(a)].second; }
  double interval_width(int a) const { return (hi(a) - lo(a)) / d_; }
  double centroid(int a, int k) const { return lo(a) + (k + 0.5) * interval_width(a); }

  bool operator==(const CodecSpec& o) const { return d_ == o.d_ && ranges_ == o.ranges_; }

 private:
  int d_ = 0;
  std::array<std::pair<double, double>, kAnimDims> ranges_{};
};

// Fit per-attribute ranges from corpus min/max, widened by margin * span on
// both sides. A constant attribute gets the degenerate range (v-1e-6, v+1e-6).
inline CodecSpec fit_codec(const std::vector<AnimVector>& corpus, int d, double margin = 0.05) {
  if (corpus.empty()) throw std::invalid_argument("fit_codec: empty corpus");
  if (d <= 0) throw std::invalid_argument("fit_codec: D must be positive");
  if (margin < 0.0) throw std::invalid_argument("fit_codec: negative margin");
  std::array<std::pair<double, double>, kAnimDims> ranges;
  for (int a = 0; a < kAnimDims; ++a) {
    double mn = corpus[0][a], mx = corpus[0][a];
    for (const AnimVector& v : corpus) {
      if (!std::isfinite(v[a])) throw std::invalid_argument("fit_codec: non-finite input");
      mn = std::min(mn, v[a]);
      mx = std::max(mx, v[a]);
    }
    const double span = mx - mn;
    if (span == 0.0) {
      ranges[static_cast<std::size_t>(a)] = {mn - 1e-6, mn + 1e-6};
    } else {
      ranges[static_cast<std::size_t>(a)] = {mn - margin * span, mx + margin * span};
    }
  }
  return CodecSpec(d, ranges);
}

// Nearest-centroid code per attribute. Out-of-range values clamp to the end
// intervals; a value equidistant from two centroids takes the lower index.
inline AnimCode quantize(const AnimVector& v, const CodecSpec& spec) {
  if (!v.finite()) throw std::invalid_argument("quantize: non-finite component");
  AnimCode c;
  const int d = spec.d();
  for (int a = 0; a < kAnimDims; ++a) {
    const double w = spec.interval_width(a);
    const double u = (v[a] - spec.lo(a)) / w;
    int k0 = static_cast<int>(std::floor(u));
    k0 = std::max(0, std::min(d - 1, k0));
    // Floating-point floor may land one interval off near boundaries; settle
    // by exact nearest-centroid comparison among the neighbors.
    int best = -1;
    double best_dist = 0.0;
    for (int k = std::max(0, k0 - 1); k <= std::min(d - 1, k0 + 1); ++k) {
      const double dist = std::fabs(v[a] - spec.centroid(a, k));
      if (best < 0 || dist < best_dist) {
        best = k;
        best_dist = dist;
      }
    }
    c[a] = best;
  }
  return c;
}

inline AnimVector dequantize(const AnimCode& c, const CodecSpec& spec) {
  AnimVector v;
  for (int a = 0; a < kAnimDims; ++a) {
    if (c[a] < 0 || c[a] >= spec.d()) throw std::invalid_argument("dequantize: code out of range");
    v[a] = spec.centroid(a, c[a]);
  }
  return v;
}

// Per-attribute root-mean-square reconstruction error over a corpus.
inline std::array<double, kAnimDims> reconstruction_rmse(const std::vector<AnimVector>& corpus,
                                                         const CodecSpec& spec) {
  std::array<double, kAnimDims> sq{};
  for (const AnimVector& v : corpus) {
    const AnimVector r = dequantize(quantize(v, spec), spec);
    for (int a = 0; a < kAnimDims; ++a) sq[static_cast<std::size_t>(a)] += (v[a] - r[a]) * (v[a] - r[a]);
  }
  for (double& s : sq) s = std::sqrt(s / static_cast<double>(corpus.size()));
  return sq;
}

inline double mean_reconstruction_rmse(const std::vector<AnimVector>& corpus,
                                       const CodecSpec& spec) {
  const auto per = reconstruction_rmse(corpus, spec);
  double s = 0.0;
  for (double v : per) s += v;
  return s / kAnimDims;
}

// --- text record (embedded in checkpoints and written by fit-codec) --------
// Bounds are serialized as C hexfloats so round trips are bit-exact.

inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string& s) {
  const char* p = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(p, &end);
  if (end == p) throw std::invalid_argument("parse_hexfloat: bad literal '" + s + "'");
  return v;
}

inline void write_codec(std::ostream& os, const CodecSpec& spec) {
  os << "codec 1\n";
  os << "d " << spec.d() << "\n";
  for (int a = 0; a < kAnimDims; ++a)
    os << "range " << a << " " << hexfloat(spec.lo(a)) << " " << hexfloat(spec.hi(a)) << "\n";
  os << "end codec\n";
}

inline CodecSpec read_codec(std::istream& is) {
  std::string tok, ver;
  is >> tok >> ver;
  if (tok != "codec" || ver != "1") throw std::runtime_error("read_codec: bad header");
  int d = 0;
  is >> tok >> d;
  if (tok != "d" || d <= 0) throw std::runtime_error("read_codec: bad D");
  std::array<std::pair<double, double>, kAnimDims> ranges;
  for (int a = 0; a < kAnimDims; ++a) {
    int idx = 0;
    std::string lo, hi;
    is >> tok >> idx >> lo >> hi;
    if (tok != "range" || idx != a) throw std::runtime_error("read_codec: bad range line");
    ranges[static_cast<std::size_t>(a)] = {parse_hexfloat(lo), parse_hexfloat(hi)};
  }
  is >> tok >> ver;
  if (tok != "end" || ver != "codec") throw std::runtime_error("read_codec: missing terminator");
  return CodecSpec(d, ranges);
}

}  // namespace aanim
