#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aanim/autodiff.hpp"
#include "aanim/tensor.hpp"

namespace aanim {

enum class MaskKind { kVanillaCausal, kTemporallyBiased };

inline std::string to_string(MaskKind k) {
  return k == MaskKind::kVanillaCausal ? "vanilla" : "tbm";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "vanilla") return MaskKind::kVanillaCausal;
  if (s == "tbm") return MaskKind::kTemporallyBiased;
  throw std::invalid_argument("unknown mask kind '" + s + "'");
}

// Per-head slopes 2^(-8h/H) for h = 1..H, the geometric schedule of
// linear-bias attention.
inline std::vector<double> geometric_slopes(int heads) {
  std::vector<double> s(static_cast<std::size_t>(heads));
  for (int h = 1; h <= heads; ++h)
    s[static_cast<std::size_t>(h - 1)] = std::pow(2.0, -8.0 * h / heads);
  return s;
}

// Additive attention mask. Future positions (j > i) are -inf for both kinds;
// the temporally biased kind penalizes past positions linearly in distance,
// -slope_h * (i - j), so closer frames receive higher attention weight.
class AttentionMask {
 public:
  AttentionMask(int t, MaskKind kind, std::vector<double> slopes)
      : t_(t), kind_(kind), slopes_(std::move(slopes)) {
    require(t >= 1, "mask: T must be >= 1");
    for (double s : slopes_) require(s >= 0.0, "mask: negative slope");
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const int nmat = kind_ == MaskKind::kVanillaCausal ? 1 : static_cast<int>(slopes_.size());
    require(nmat >= 1, "mask: temporally biased kind needs per-head slopes");
    matrices_.reserve(static_cast<std::size_t>(nmat));
    for (int h = 0; h < nmat; ++h) {
      Tensor m({t, t});
      const double slope = kind_ == MaskKind::kVanillaCausal ? 0.0 : slopes_[static_cast<std::size_t>(h)];
      for (int i = 0; i < t; ++i) {
        double* row = m.row_ptr(i);
        for (int j = 0; j < t; ++j)
          row[j] = j > i ? neg_inf : (j == i ? 0.0 : -slope * (i - j));
      }
      matrices_.push_back(std::move(m));
    }
  }

  int t() const { return t_; }
  MaskKind kind() const { return kind_; }
  const std::vector<double>& slopes() const { return slopes_; }
  int head_count() const { return static_cast<int>(matrices_.size()); }

  // Matrix for head h (the vanilla mask is shared across heads).
  const Tensor& matrix(int h) const {
    return matrices_[kind_ == MaskKind::kVanillaCausal ? 0 : static_cast<std::size_t>(h)];
  }

 private:
  int t_;
  MaskKind kind_;
  std::vector<double> slopes_;
  std::vector<Tensor> matrices_;
};

inline AttentionMask build_mask(int t, MaskKind kind, const std::vector<double>& slopes) {
  return AttentionMask(t, kind, slopes);
}

// Parameters of one attention + feed-forward block. Projections are stored
// per head so no reshape is needed: width = heads * head_dim.
struct AttentionBlockParams {
  int heads = 0;
  int width = 0;
  int head_dim = 0;
  std::vector<Tensor> wq, wk, wv;  // per head, [width x head_dim]
  Tensor wo;                       // [width x width]
  Tensor wo_b;                     // [width]
  Tensor ln1_g, ln1_b;             // [width]
  Tensor ff_w1, ff_b1;             // [width x 4*width], [4*width]
  Tensor ff_w2, ff_b2;             // [4*width x width], [width]
  Tensor ln2_g, ln2_b;             // [width]
};

// Handles to the block parameters after binding onto a tape.
struct AttentionBlockValues {
  std::vector<Value> wq, wk, wv;
  Value wo, wo_b, ln1_g, ln1_b, ff_w1, ff_b1, ff_w2, ff_b2, ln2_g, ln2_b;
};

inline AttentionBlockValues bind_block(Tape& tape, const AttentionBlockParams& p) {
  AttentionBlockValues v;
  for (int h = 0; h < p.heads; ++h) {
    v.wq.push_back(tape.param(p.wq[static_cast<std::size_t>(h)]));
    v.wk.push_back(tape.param(p.wk[static_cast<std::size_t>(h)]));
    v.wv.push_back(tape.param(p.wv[static_cast<std::size_t>(h)]));
  }
  v.wo = tape.param(p.wo);
  v.wo_b = tape.param(p.wo_b);
  v.ln1_g = tape.param(p.ln1_g);
  v.ln1_b = tape.param(p.ln1_b);
  v.ff_w1 = tape.param(p.ff_w1);
  v.ff_b1 = tape.param(p.ff_b1);
  v.ff_w2 = tape.param(p.ff_w2);
  v.ff_b2 = tape.param(p.ff_b2);
  v.ln2_g = tape.param(p.ln2_g);
  v.ln2_b = tape.param(p.ln2_b);
  return v;
}

// Masked multi-head attention followed by a position-wise feed-forward, both
// with residual connections and post-layer-norm:
//   h = LN1(x + Attn(x));  out = LN2(h + FF(h))
//
// Per head the attention logits are (Q K^T + M) / sqrt(head_dim): the mask is
// added before the scaling. Setting `bias_after_scale` switches to the
// Q K^T / sqrt(head_dim) + M convention instead; for -inf entries the two are
// identical, for finite bias they differ by the 1/sqrt(head_dim) factor on
// the effective slope.
inline Value attention_block(Tape& tape, Value x, const AttentionBlockValues& p,
                             const AttentionMask& mask, bool bias_after_scale = false,
                             std::vector<Tensor>* attn_out = nullptr) {
  const Tensor& xv = tape.val(x);
  const int t = xv.rows();
  const int heads = static_cast<int>(p.wq.size());
  require(mask.t() == t, "attention_block: mask length != sequence length");
  require(mask.kind() == MaskKind::kVanillaCausal || mask.head_count() == heads,
          "attention_block: one mask matrix per head required");
  require(xv.cols() == tape.val(p.wo).rows(), "attention_block: width mismatch");
  const int head_dim = tape.val(p.wq[0]).cols();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<Value> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Value q = matmul(x, p.wq[static_cast<std::size_t>(h)]);
    Value k = matmul(x, p.wk[static_cast<std::size_t>(h)]);
    Value v = matmul(x, p.wv[static_cast<std::size_t>(h)]);
    Value scores = matmul_nt(q, k);
    Value mask_c = tape.constant(mask.matrix(h), /*allow_inf=*/true);
    Value logits = bias_after_scale ? add(scale(scores, inv_sqrt_dk), mask_c)
                                    : scale(add(scores, mask_c), inv_sqrt_dk);
    Value probs = softmax_rows(logits);
    if (attn_out) attn_out->push_back(tape.val(probs));
    head_outs.push_back(matmul(probs, v));
  }
  Value ctx = heads == 1 ? head_outs[0] : concat_last_dim(head_outs);
  Value attn = add_bias_row(matmul(ctx, p.wo), p.wo_b);
  Value h1 = layer_norm(add(x, attn), p.ln1_g, p.ln1_b);
  Value ff = add_bias_row(matmul(gelu(add_bias_row(matmul(h1, p.ff_w1), p.ff_b1)), p.ff_w2), p.ff_b2);
  return layer_norm(add(h1, ff), p.ln2_g, p.ln2_b);
}

// Sinusoidal position table (optional, for the vanilla-mask configuration;
// the temporally biased mask already encodes recency).
inline Tensor sinusoidal_encoding(int t, int width) {
  Tensor pe({t, width});
  for (int pos = 0; pos < t; ++pos) {
    double* row = pe.row_ptr(pos);
    for (int i = 0; i < width / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / width);
      row[2 * i] = std::sin(pos * freq);
      row[2 * i + 1] = std::cos(pos * freq);
    }
  }
  return pe;
}

}  // namespace aanim
