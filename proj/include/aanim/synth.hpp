#pragma once

#include <cmath>
#include <vector>

#include "aanim/audio.hpp"
#include "aanim/codec.hpp"
#include "aanim/rng.hpp"

namespace aanim {

// Synthetic talking-head corpus. A hidden two-state talking/pausing process
// drives both the audio amplitude envelope and the mouth action units, so the
// audio-to-mouth mapping is learnable. Blinks are a Poisson pulse process
// independent of the audio (only their statistics can be learned, not their
// timing), and the head pose is a clipped Gaussian random walk.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  double duration = 60.0;       // seconds
  double fps = 25.0;
  double blink_rate = 0.35;     // lambda, blinks per second
  double blink_duration = 0.12; // seconds per blink pulse
  double pose_sigma = 0.02;     // per-frame random-walk increment std
  double talk_on_prob = 0.05;   // pause -> talk, per frame
  double talk_off_prob = 0.02;  // talk -> pause, per frame

  void validate() const {
    require(duration > 0.0 && fps > 0.0, "synthetic: bad duration/fps");
    require(blink_rate > 0.0, "synthetic: blink rate must be positive");
    require(pose_sigma >= 0.0, "synthetic: pose sigma must be non-negative");
  }
};

struct SyntheticClip {
  AudioClip audio;
  AnimSequence anim;
};

namespace detail {
// Mouth-related action units (jaw/lip movers) and their envelope gains.
constexpr int kMouthAttrs[5] = {7, 8, 13, 14, 15};
constexpr double kMouthGains[5] = {0.9, 1.2, 0.6, 1.0, 0.8};
}  // namespace detail

inline SyntheticClip generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int frames = static_cast<int>(std::llround(spec.duration * spec.fps));
  const long samples = std::llround(spec.duration * kSampleRate);
  CounterRng state_rng = CounterRng(spec.seed).split(1);
  CounterRng blink_rng = CounterRng(spec.seed).split(2);
  CounterRng pose_rng = CounterRng(spec.seed).split(3);
  CounterRng noise_rng = CounterRng(spec.seed).split(4);
  CounterRng drift_rng = CounterRng(spec.seed).split(5);

  SyntheticClip clip;
  clip.anim.fps = spec.fps;
  clip.anim.frames.resize(static_cast<std::size_t>(frames));
  clip.audio.sample_rate = kSampleRate;
  clip.audio.samples.resize(static_cast<std::size_t>(samples), 0.0);

  // Per-frame hidden state and smoothed amplitude envelope.
  std::vector<double> env(static_cast<std::size_t>(frames));
  bool talking = true;
  double e = 1.0;
  for (int t = 0; t < frames; ++t) {
    if (talking) {
      if (state_rng.next_double() < spec.talk_off_prob) talking = false;
    } else {
      if (state_rng.next_double() < spec.talk_on_prob) talking = true;
    }
    const double target = talking ? 1.0 : 0.02;
    e += 0.3 * (target - e);
    env[static_cast<std::size_t>(t)] = e;
  }

  // Audio: low-passed white noise scaled by the envelope, interpolated
  // sample-wise so there are no clicks at frame boundaries.
  double lp = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double tpos = static_cast<double>(i) / kSampleRate * spec.fps - 0.5;
    const int t0 = std::max(0, std::min(frames - 1, static_cast<int>(std::floor(tpos))));
    const int t1 = std::min(frames - 1, t0 + 1);
    const double frac = std::max(0.0, std::min(1.0, tpos - t0));
    const double amp = env[static_cast<std::size_t>(t0)] * (1.0 - frac) + env[static_cast<std::size_t>(t1)] * frac;
    lp = 0.75 * lp + 0.25 * noise_rng.next_gaussian();
    clip.audio.samples[static_cast<std::size_t>(i)] = 0.3 * amp * lp;
  }

  // Blink pulse schedule: per-frame Poisson onsets while the eye is open.
  const int blink_frames = std::max(1, static_cast<int>(std::llround(spec.blink_duration * spec.fps)));
  const double onset_prob = 1.0 - std::exp(-spec.blink_rate / spec.fps);
  std::vector<double> blink(static_cast<std::size_t>(frames), 0.0);
  int blink_left = 0;
  for (int t = 0; t < frames; ++t) {
    if (blink_left > 0) {
      blink[static_cast<std::size_t>(t)] = 1.0;
      --blink_left;
    } else if (blink_rng.next_double() < onset_prob) {
      blink[static_cast<std::size_t>(t)] = 1.0;
      blink_left = blink_frames - 1;
    }
  }

  // Assemble frames: mouth follows the envelope, the remaining expression
  // AUs are slow damped oscillations (their next value depends on the last
  // two frames, so prediction genuinely needs temporal context), the pose is
  // a clipped random walk.
  std::array<double, kAuCount> osc{}, osc_prev{};
  std::array<double, kAuCount> osc_c1{}, osc_c2{};
  for (int a = 0; a < kAuCount; ++a) {
    const double theta = 0.08 + 0.32 * drift_rng.next_double();  // rad per frame
    const double rho = 0.985;
    osc_c1[static_cast<std::size_t>(a)] = 2.0 * rho * std::cos(theta);
    osc_c2[static_cast<std::size_t>(a)] = -rho * rho;
  }
  std::array<double, kPoseCount> pose{};
  const double pose_limit[kPoseCount] = {0.5, 0.5, 0.5, 0.1, 0.1, 0.1};
  const double pose_scale[kPoseCount] = {1.0, 1.0, 1.0, 0.2, 0.2, 0.2};
  for (int t = 0; t < frames; ++t) {
    AnimVector& f = clip.anim.frames[static_cast<std::size_t>(t)];
    for (int a = 0; a < kAuCount; ++a) {
      const double next = osc_c1[static_cast<std::size_t>(a)] * osc[static_cast<std::size_t>(a)] +
                          osc_c2[static_cast<std::size_t>(a)] * osc_prev[static_cast<std::size_t>(a)] +
                          0.02 * drift_rng.next_gaussian();
      osc_prev[static_cast<std::size_t>(a)] = osc[static_cast<std::size_t>(a)];
      osc[static_cast<std::size_t>(a)] = next;
      f.au(a) = 0.2 + 0.25 * std::tanh(next);
    }
    for (int i = 0; i < 5; ++i) {
      const int a = detail::kMouthAttrs[i];
      f.au(a) = detail::kMouthGains[i] * env[static_cast<std::size_t>(t)] +
                0.02 * drift_rng.next_gaussian();
    }
    f.au(kBlinkAttr) = blink[static_cast<std::size_t>(t)];
    for (int p = 0; p < kPoseCount; ++p) {
      pose[static_cast<std::size_t>(p)] += spec.pose_sigma * pose_scale[p] * pose_rng.next_gaussian();
      pose[static_cast<std::size_t>(p)] =
          std::max(-pose_limit[p], std::min(pose_limit[p], pose[static_cast<std::size_t>(p)]));
      f.pose(p) = pose[static_cast<std::size_t>(p)];
    }
  }
  return clip;
}

}  // namespace aanim
