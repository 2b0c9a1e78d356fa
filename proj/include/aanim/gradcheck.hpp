#pragma once

#include <string>
#include <vector>

#include "aanim/attention.hpp"
#include "aanim/autodiff.hpp"
#include "aanim/model.hpp"

namespace aanim {

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

// Central-difference checks for every differentiable op, a full attention
// block under both mask kinds, and a small end-to-end mapping model
// (2 layers, width 32, 8-step window).
inline std::vector<NamedGradCheck> grad_check_suite(std::uint64_t seed = 0, double h = 1e-5,
                                                    double tol = 1e-4,
                                                    int samples_per_tensor = 12) {
  std::vector<NamedGradCheck> out;
  CounterRng rng(seed);
  auto rnd = [&](std::vector<int> shape, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = scale * rng.next_gaussian();
    return t;
  };
  auto check1 = [&](const std::string& name, Tensor& x, auto&& fn) {
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value vx = tape.param(x);
      p.loss = sum_all(mul_elem(fn(tape, vx), fn(tape, vx)));
      p.params = {vx};
      return p;
    };
    out.push_back({name, grad_check(build, {&x}, h, tol, seed + out.size(), samples_per_tensor)});
  };

  {
    Tensor a = rnd({3, 4}), b = rnd({4, 5});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value va = tape.param(a), vb = tape.param(b);
      p.loss = sum_all(mul_elem(matmul(va, vb), matmul(va, vb)));
      p.params = {va, vb};
      return p;
    };
    out.push_back({"matmul", grad_check(build, {&a, &b}, h, tol, seed + 100, samples_per_tensor)});
  }
  {
    Tensor a = rnd({3, 4}), b = rnd({5, 4});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value va = tape.param(a), vb = tape.param(b);
      p.loss = sum_all(mul_elem(matmul_nt(va, vb), matmul_nt(va, vb)));
      p.params = {va, vb};
      return p;
    };
    out.push_back({"matmul_nt", grad_check(build, {&a, &b}, h, tol, seed + 101, samples_per_tensor)});
  }
  {
    Tensor a = rnd({4, 4}), b = rnd({4, 4});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value va = tape.param(a), vb = tape.param(b);
      Value s = add(va, vb);
      p.loss = sum_all(mul_elem(s, s));
      p.params = {va, vb};
      return p;
    };
    out.push_back({"add", grad_check(build, {&a, &b}, h, tol, seed + 102, samples_per_tensor)});
  }
  {
    Tensor x = rnd({4, 6}), bias = rnd({6});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value vx = tape.param(x), vb = tape.param(bias);
      Value s = add_bias_row(vx, vb);
      p.loss = sum_all(mul_elem(s, s));
      p.params = {vx, vb};
      return p;
    };
    out.push_back({"add_bias_row", grad_check(build, {&x, &bias}, h, tol, seed + 103, samples_per_tensor)});
  }
  {
    Tensor x = rnd({3, 5});
    check1("scale", x, [](Tape&, Value v) { return scale(v, -1.7); });
  }
  {
    Tensor x = rnd({3, 5});
    check1("softmax_rows", x, [](Tape&, Value v) { return softmax_rows(v); });
  }
  {
    Tensor x = rnd({4, 8}), g = rnd({8}, 0.2), b = rnd({8}, 0.2);
    for (double& v : g.data) v += 1.0;
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value vx = tape.param(x), vg = tape.param(g), vb = tape.param(b);
      Value y = layer_norm(vx, vg, vb);
      p.loss = sum_all(mul_elem(y, y));
      p.params = {vx, vg, vb};
      return p;
    };
    out.push_back({"layer_norm", grad_check(build, {&x, &g, &b}, h, tol, seed + 104, samples_per_tensor)});
  }
  {
    Tensor x = rnd({3, 5});
    check1("gelu", x, [](Tape&, Value v) { return gelu(v); });
  }
  {
    Tensor x = rnd({3, 5});
    // Keep probes away from the kink at zero where the derivative jumps.
    for (double& v : x.data)
      if (std::fabs(v) < 0.05) v += v < 0.0 ? -0.1 : 0.1;
    check1("relu", x, [](Tape&, Value v) { return relu(v); });
  }
  {
    Tensor table = rnd({9, 6});
    check1("embedding_lookup", table,
           [](Tape&, Value v) { return embedding_lookup(v, {0, 4, 8, 4}); });
  }
  {
    Tensor a = rnd({3, 2}), b = rnd({3, 4});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value va = tape.param(a), vb = tape.param(b);
      Value c = concat_last_dim({va, vb});
      p.loss = sum_all(mul_elem(c, c));
      p.params = {va, vb};
      return p;
    };
    out.push_back({"concat_last_dim", grad_check(build, {&a, &b}, h, tol, seed + 105, samples_per_tensor)});
  }
  {
    Tensor x = rnd({4, 6});
    check1("reshape", x, [](Tape&, Value v) { return reshape(v, {8, 3}); });
  }
  {
    Tensor logits = rnd({5, 7});
    auto build = [&](Tape& tape) {
      GradProbe p;
      Value v = tape.param(logits);
      p.loss = cross_entropy(v, {0, 3, 6, 1, 2});
      p.params = {v};
      return p;
    };
    out.push_back({"cross_entropy", grad_check(build, {&logits}, h, tol, seed + 106, samples_per_tensor)});
  }

  // Full attention block, both mask kinds.
  for (MaskKind kind : {MaskKind::kVanillaCausal, MaskKind::kTemporallyBiased}) {
    AttentionBlockParams p;
    p.heads = 2;
    p.width = 8;
    p.head_dim = 4;
    for (int hh = 0; hh < 2; ++hh) {
      p.wq.push_back(rnd({8, 4}, 0.4));
      p.wk.push_back(rnd({8, 4}, 0.4));
      p.wv.push_back(rnd({8, 4}, 0.4));
    }
    p.wo = rnd({8, 8}, 0.4);
    p.wo_b = rnd({8}, 0.1);
    p.ln1_g = rnd({8}, 0.1);
    for (double& v : p.ln1_g.data) v += 1.0;
    p.ln1_b = rnd({8}, 0.1);
    p.ff_w1 = rnd({8, 32}, 0.3);
    p.ff_b1 = rnd({32}, 0.1);
    p.ff_w2 = rnd({32, 8}, 0.2);
    p.ff_b2 = rnd({8}, 0.1);
    p.ln2_g = rnd({8}, 0.1);
    for (double& v : p.ln2_g.data) v += 1.0;
    p.ln2_b = rnd({8}, 0.1);
    Tensor x = rnd({5, 8});
    const AttentionMask mask = build_mask(5, kind, {0.25, 0.0625});
    std::vector<Tensor*> tensors = {&x,       &p.wq[0], &p.wk[0], &p.wv[0], &p.wq[1], &p.wk[1],
                                    &p.wv[1], &p.wo,    &p.wo_b,  &p.ln1_g, &p.ln1_b, &p.ff_w1,
                                    &p.ff_b1, &p.ff_w2, &p.ff_b2, &p.ln2_g, &p.ln2_b};
    auto build = [&](Tape& tape) {
      GradProbe probe;
      Value vx = tape.param(x);
      AttentionBlockValues v = bind_block(tape, p);
      Value o = attention_block(tape, vx, v, mask);
      probe.loss = sum_all(mul_elem(o, o));
      probe.params = {vx,      v.wq[0], v.wk[0], v.wv[0], v.wq[1], v.wk[1],
                      v.wv[1], v.wo,    v.wo_b,  v.ln1_g, v.ln1_b, v.ff_w1,
                      v.ff_b1, v.ff_w2, v.ff_b2, v.ln2_g, v.ln2_b};
      return probe;
    };
    out.push_back({"attention_block(" + to_string(kind) + ")",
                   grad_check(build, tensors, h, tol, seed + 107, samples_per_tensor)});
  }

  // End-to-end mapping model: 2 layers, width 32, window of 8 steps.
  {
    ModelConfig cfg;
    cfg.d = 7;
    cfg.tau = 8;
    cfg.width = 32;
    cfg.heads = 2;
    cfg.head_dim = 16;
    cfg.layers = 2;
    cfg.audio_window = 3;
    cfg.init_seed = seed + 5;
    std::array<std::pair<double, double>, kAnimDims> ranges;
    ranges.fill({0.0, 1.0});
    MappingModel model(cfg, CodecSpec(cfg.d, ranges));
    const int t = 8;
    std::vector<AudioFeatureFrame> audio;
    for (int i = 0; i < t; ++i) {
      AudioFeatureFrame f;
      f.frame_index = i;
      f.mel = rnd({cfg.audio_window, cfg.mel_bands}, 0.5);
      audio.push_back(std::move(f));
    }
    std::vector<AnimCode> codes(static_cast<std::size_t>(t) - 1);
    std::vector<int> targets_flat;
    for (int i = 0; i < t; ++i)
      for (int a = 0; a < kAnimDims; ++a) {
        const int c = static_cast<int>(rng.next_below(cfg.d));
        if (i < t - 1) codes[static_cast<std::size_t>(i)][a] = c;
        targets_flat.push_back(static_cast<int>(rng.next_below(cfg.d)));
      }
    std::vector<Tensor*> tensors;
    for (auto& r : model.params()) tensors.push_back(r.tensor);
    auto build = [&](Tape& tape) {
      GradProbe probe;
      MappingModel::Bound bound = model.bind(tape);
      auto by_attr = model.codes_by_attribute(codes, true, t);
      Value logits = model.forward_on_tape(tape, bound, audio, by_attr.data());
      probe.loss = cross_entropy(reshape(logits, {t * kAnimDims, cfg.d}), targets_flat);
      probe.params = bound.flat;
      return probe;
    };
    out.push_back({"mapping_model(2x32)", grad_check(build, tensors, h, tol, seed + 108, 3)});
  }
  return out;
}

}  // namespace aanim
