#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include "aanim/codec.hpp"
#include "aanim/model.hpp"

namespace aanim {

struct BlinkStats {
  double rate = 0.0;  // blinks per second
  int count = 0;
  bool static_track = false;
};

// Hysteresis blink counter: a blink starts when the track rises above
// theta_hi and can only re-arm after falling below theta_lo. Thresholds are
// fractions of the track's own range; a track whose range is below
// `min_range` is reported as static (no meaningful eye motion).
inline BlinkStats blink_stats(const std::vector<double>& track, double fps, double hi_frac = 0.6,
                              double lo_frac = 0.3, double min_range = 0.05) {
  require(track.size() >= 2, "blink_stats: track too short");
  require(fps > 0.0, "blink_stats: fps must be positive");
  double mn = track[0], mx = track[0];
  for (double v : track) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  BlinkStats st;
  const double range = mx - mn;
  if (range < min_range) {
    st.static_track = true;
    return st;
  }
  const double hi = mn + hi_frac * range;
  const double lo = mn + lo_frac * range;
  bool armed = true;
  for (double v : track) {
    if (armed && v > hi) {
      ++st.count;
      armed = false;
    } else if (!armed && v < lo) {
      armed = true;
    }
  }
  st.rate = st.count / (static_cast<double>(track.size()) / fps);
  st.static_track = st.count == 0;
  return st;
}

inline double eye_blink_rate(const std::vector<double>& track, double fps) {
  return blink_stats(track, fps).rate;
}

// Mean absolute second difference per attribute; zero for constant and for
// linear-ramp tracks.
inline std::array<double, kAnimDims> smoothness(const AnimSequence& seq) {
  require(seq.size() >= 3, "smoothness: need at least 3 frames");
  std::array<double, kAnimDims> acc{};
  const std::size_t n = seq.size();
  for (std::size_t t = 1; t + 1 < n; ++t) {
    for (int a = 0; a < kAnimDims; ++a) {
      const double dd = seq.frames[t + 1][a] - 2.0 * seq.frames[t][a] + seq.frames[t - 1][a];
      acc[static_cast<std::size_t>(a)] += std::fabs(dd);
    }
  }
  for (double& v : acc) v /= static_cast<double>(n - 2);
  return acc;
}

inline double mean_smoothness(const AnimSequence& seq) {
  const auto per = smoothness(seq);
  double s = 0.0;
  for (double v : per) s += v;
  return s / kAnimDims;
}

// Mean pairwise frame-wise L1 distance across samples generated from
// distinct seeds. Uses continuous frames so the number is comparable across
// codec resolutions.
inline double diversity(const std::vector<AnimSequence>& samples) {
  require(samples.size() >= 2, "diversity: need at least two samples");
  const std::size_t n = samples[0].size();
  for (const AnimSequence& s : samples)
    require(s.size() == n, "diversity: length mismatch");
  double acc = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      ++pairs;
      for (std::size_t t = 0; t < n; ++t) {
        double l1 = 0.0;
        for (int a = 0; a < kAnimDims; ++a)
          l1 += std::fabs(samples[i].frames[t][a] - samples[j].frames[t][a]);
        acc += l1;
      }
    }
  }
  return acc / (static_cast<double>(pairs) * static_cast<double>(n));
}

// Fraction of (pair, frame, attribute) triples whose codes differ.
inline double code_disagreement(const std::vector<std::vector<AnimCode>>& samples) {
  require(samples.size() >= 2, "code_disagreement: need at least two samples");
  const std::size_t n = samples[0].size();
  for (const auto& s : samples) require(s.size() == n, "code_disagreement: length mismatch");
  long differ = 0, total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      for (std::size_t t = 0; t < n; ++t)
        for (int a = 0; a < kAnimDims; ++a) {
          ++total;
          if (samples[i][t][a] != samples[j][t][a]) ++differ;
        }
  return static_cast<double>(differ) / static_cast<double>(total);
}

// exp(mean teacher-forcing cross-entropy in nats per attribute per step).
// An untrained model scores close to D; a model cannot beat D on uniformly
// random labels.
inline double heldout_perplexity(const MappingModel& model,
                                 const std::vector<TrainingBatch>& batches) {
  require(!batches.empty(), "heldout_perplexity: no data");
  double nats = 0.0;
  long rows = 0;
  for (const TrainingBatch& b : batches) {
    const long r = static_cast<long>(b.targets.size()) * kAnimDims;
    nats += model.eval_loss(b) * static_cast<double>(r);
    rows += r;
  }
  return std::exp(nats / static_cast<double>(rows));
}

struct MetricReport {
  double ebr = 0.0;
  bool ebr_static = false;
  double smoothness = 0.0;
  double diversity = 0.0;
  double perplexity = 0.0;

  void write_text(std::ostream& os) const {
    os << "ebr " << (ebr_static ? std::string("N/A") : std::to_string(ebr)) << "\n";
    os << "smoothness " << smoothness << "\n";
    os << "diversity " << diversity << "\n";
    os << "perplexity " << perplexity << "\n";
  }

  static void write_csv_header(std::ostream& os) {
    os << "ebr,ebr_static,smoothness,diversity,perplexity\n";
  }

  void write_csv_row(std::ostream& os) const {
    os << ebr << "," << (ebr_static ? 1 : 0) << "," << smoothness << "," << diversity << ","
       << perplexity << "\n";
  }
};

}  // namespace aanim
