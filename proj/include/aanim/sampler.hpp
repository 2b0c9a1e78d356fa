#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "aanim/codec.hpp"
#include "aanim/decoder.hpp"
#include "aanim/model.hpp"
#include "aanim/rng.hpp"

namespace aanim {

struct SamplerConfig {
  int k = 10;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int length = 0;  // 0 -> one frame per aligned audio frame
};

// Draw one index from the k most probable categories (ties broken toward the
// lower index), after applying the temperature to the surviving log
// probabilities and renormalizing. k = 1 reduces to argmax. Consumes exactly
// one uniform per call.
inline int top_k_sample(const std::vector<double>& dist, int k, double temperature,
                        CounterRng& rng) {
  require(k >= 1, "top_k_sample: k must be >= 1");
  require(temperature > 0.0, "top_k_sample: temperature must be positive");
  require(!dist.empty(), "top_k_sample: empty distribution");
  const int d = static_cast<int>(dist.size());
  const int keep = std::min(k, d);

  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](int a, int b) {
    if (dist[static_cast<std::size_t>(a)] != dist[static_cast<std::size_t>(b)])
      return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
    return a < b;
  });

  const double u = rng.next_double();
  const double pmax = dist[static_cast<std::size_t>(order[0])];
  require(pmax > 0.0, "top_k_sample: distribution sums to zero");
  std::vector<double> weights(static_cast<std::size_t>(keep));
  double total = 0.0;
  for (int i = 0; i < keep; ++i) {
    const double p = dist[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    weights[static_cast<std::size_t>(i)] =
        p > 0.0 ? std::exp((std::log(p) - std::log(pmax)) / temperature) : 0.0;
    total += weights[static_cast<std::size_t>(i)];
  }
  double cum = 0.0;
  for (int i = 0; i < keep; ++i) {
    cum += weights[static_cast<std::size_t>(i)];
    if (u * total < cum) return order[static_cast<std::size_t>(i)];
  }
  return order[static_cast<std::size_t>(keep - 1)];
}

struct GenerationResult {
  AnimSequence anim;
  std::vector<AnimCode> codes;
};

// Autoregressive generation: start from the start-of-sequence code, sample 23
// attribute codes per step from the top-k renormalized distributions, decode
// to continuous frames, and slide a context of at most tau past inputs.
// Random draws consume one uniform per (step, attribute), steps outer.
inline GenerationResult generate_sequence(const MappingModel& model,
                                          const std::vector<AudioFeatureFrame>& audio,
                                          const SamplerConfig& cfg, double fps = 25.0,
                                          bool force_recompute = false) {
  const int len = cfg.length > 0 ? cfg.length : static_cast<int>(audio.size());
  require(len >= 1, "generate: nothing to generate");
  require(static_cast<int>(audio.size()) >= len, "generate: audio shorter than requested length");
  const ModelConfig& mc = model.config();
  const int d = mc.d;
  // The growing-phase cache is exact only without positional encodings and
  // only until the window would slide; conditioning is defined over at most
  // the last tau inputs, so slid windows are recomputed fresh.
  const bool cache_growing = mc.pos_enc == PosEnc::kNone && !force_recompute;

  CounterRng rng(cfg.seed);
  IncrementalDecoder dec(model);
  GenerationResult out;
  out.anim.fps = fps;
  std::vector<double> logits;
  std::vector<double> dist(static_cast<std::size_t>(d));
  for (int t = 0; t < len; ++t) {
    const AnimCode* prev = t > 0 ? &out.codes[static_cast<std::size_t>(t) - 1] : nullptr;
    if (cache_growing && t < mc.tau) {
      logits = dec.append(prev, audio[static_cast<std::size_t>(t)]);
    } else {
      const int window = std::min(t + 1, mc.tau);
      IncrementalDecoder fresh(model);
      for (int i = t - window + 1; i <= t; ++i) {
        const AnimCode* p = i > 0 ? &out.codes[static_cast<std::size_t>(i) - 1] : nullptr;
        logits = fresh.append(p, audio[static_cast<std::size_t>(i)], i - (t - window + 1));
      }
    }
    AnimCode code;
    for (int a = 0; a < kAnimDims; ++a) {
      const double* slice = logits.data() + static_cast<std::size_t>(a) * d;
      double mx = slice[0];
      for (int j = 1; j < d; ++j) mx = std::max(mx, slice[j]);
      double denom = 0.0;
      for (int j = 0; j < d; ++j) {
        dist[static_cast<std::size_t>(j)] = std::exp(slice[j] - mx);
        denom += dist[static_cast<std::size_t>(j)];
      }
      for (int j = 0; j < d; ++j) dist[static_cast<std::size_t>(j)] /= denom;
      code[a] = top_k_sample(dist, cfg.k, cfg.temperature, rng);
    }
    out.codes.push_back(code);
    out.anim.frames.push_back(dequantize(code, model.codec()));
  }
  return out;
}

inline AnimSequence generate(const MappingModel& model, const std::vector<AudioFeatureFrame>& audio,
                             const SamplerConfig& cfg, double fps = 25.0) {
  return generate_sequence(model, audio, cfg, fps).anim;
}

}  // namespace aanim
