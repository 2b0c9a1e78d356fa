#pragma once

#include <cmath>
#include <vector>

#include "aanim/model.hpp"

namespace aanim {

namespace detail {

// y[cols] = x[rows] * W[rows x cols]
inline void vec_mat(const double* x, const Tensor& w, double* y) {
  const int rows = w.rows(), cols = w.cols();
  std::fill(y, y + cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    const double xi = x[i];
    const double* wrow = w.row_ptr(i);
    for (int j = 0; j < cols; ++j) y[j] += xi * wrow[j];
  }
}

inline void layer_norm_vec(double* x, const Tensor& g, const Tensor& b, int n, double eps = 1e-5) {
  double mu = 0.0;
  for (int j = 0; j < n; ++j) mu += x[j];
  mu /= n;
  double var = 0.0;
  for (int j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
  var /= n;
  const double is = 1.0 / std::sqrt(var + eps);
  for (int j = 0; j < n; ++j) x[j] = (x[j] - mu) * is * g.data[static_cast<std::size_t>(j)] + b.data[static_cast<std::size_t>(j)];
}

inline double gelu_scalar(double v) { return 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244)); }

}  // namespace detail

// Autoregressive inference state for one bounded context window. Keeps
// per-layer key/value rows; appending one input token costs O(n * width) per
// layer. The cache only grows: a window that slides must be recomputed in a
// fresh decoder, because with more than one layer a slid cache would leak
// out-of-window history through the deeper layers' receptive fields, and
// predictions are defined to condition on at most the last tau inputs.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const MappingModel& model) : m_(&model) {
    const ModelConfig& c = m_->config();
    k_cache_.assign(static_cast<std::size_t>(c.layers), {});
    v_cache_.assign(static_cast<std::size_t>(c.layers), {});
  }

  void reset() {
    for (auto& l : k_cache_) l.clear();
    for (auto& l : v_cache_) l.clear();
  }

  int cached() const { return static_cast<int>(k_cache_[0].size()); }

  // Append the input token for the next predicted frame: `prev` is the
  // previous frame's code (nullptr for start-of-sequence) and `audio` the
  // feature frame of the step being predicted. Returns logits [23 * D].
  // `pe_pos` is the window-relative position, used only with sinusoidal
  // encodings.
  std::vector<double> append(const AnimCode* prev, const AudioFeatureFrame& audio, int pe_pos = 0) {
    const ModelConfig& c = m_->config();
    const int width = c.width;
    require(cached() < c.tau, "decoder: window full; recompute in a fresh decoder");
    require(audio.mel.numel() == c.audio_window * c.mel_bands, "decoder: audio frame shape mismatch");

    // Token embedding: normalized audio projection + summed per-attribute
    // embeddings.
    std::vector<double> x(static_cast<std::size_t>(width));
    detail::vec_mat(audio.mel.data.data(), m_->audio_w(), x.data());
    for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] += m_->audio_b().data[static_cast<std::size_t>(j)];
    detail::layer_norm_vec(x.data(), m_->audio_ln_g(), m_->audio_ln_b(), width);
    for (int a = 0; a < kAnimDims; ++a) {
      const int code = prev ? (*prev)[a] : c.d;
      require(code >= 0 && code <= c.d, "decoder: code out of range");
      const double* row = m_->anim_embed(a).row_ptr(code);
      for (int j = 0; j < width; ++j) x[static_cast<std::size_t>(j)] += row[j];
    }
    if (c.pos_enc == PosEnc::kSinusoidal) {
      for (int i = 0; i < width / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / width);
        x[static_cast<std::size_t>(2 * i)] += std::sin(pe_pos * freq);
        x[static_cast<std::size_t>(2 * i + 1)] += std::cos(pe_pos * freq);
      }
    }

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(c.head_dim));
    std::vector<double> ctx(static_cast<std::size_t>(width));
    std::vector<double> tmp(static_cast<std::size_t>(width));
    std::vector<double> hidden(static_cast<std::size_t>(4 * width));
    for (int l = 0; l < c.layers; ++l) {
      const AttentionBlockParams& p = m_->layers()[static_cast<std::size_t>(l)];
      auto& kc = k_cache_[static_cast<std::size_t>(l)];
      auto& vc = v_cache_[static_cast<std::size_t>(l)];
      // Project and cache k/v for this position (all heads concatenated).
      std::vector<double> krow(static_cast<std::size_t>(width));
      std::vector<double> vrow(static_cast<std::size_t>(width));
      for (int h = 0; h < c.heads; ++h) {
        detail::vec_mat(x.data(), p.wk[static_cast<std::size_t>(h)], krow.data() + h * c.head_dim);
        detail::vec_mat(x.data(), p.wv[static_cast<std::size_t>(h)], vrow.data() + h * c.head_dim);
      }
      kc.push_back(std::move(krow));
      vc.push_back(std::move(vrow));
      const int n = static_cast<int>(kc.size());

      std::vector<double> q(static_cast<std::size_t>(c.head_dim));
      std::vector<double> scores(static_cast<std::size_t>(n));
      for (int h = 0; h < c.heads; ++h) {
        detail::vec_mat(x.data(), p.wq[static_cast<std::size_t>(h)], q.data());
        const double slope =
            c.mask == MaskKind::kTemporallyBiased ? c.slopes[static_cast<std::size_t>(h)] : 0.0;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
          const double* kj = kc[static_cast<std::size_t>(j)].data() + h * c.head_dim;
          double s = 0.0;
          for (int d = 0; d < c.head_dim; ++d) s += q[static_cast<std::size_t>(d)] * kj[d];
          const double bias = -slope * (n - 1 - j);
          scores[static_cast<std::size_t>(j)] =
              c.bias_after_scale ? s * inv_sqrt_dk + bias : (s + bias) * inv_sqrt_dk;
          mx = std::max(mx, scores[static_cast<std::size_t>(j)]);
        }
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
          scores[static_cast<std::size_t>(j)] = std::exp(scores[static_cast<std::size_t>(j)] - mx);
          denom += scores[static_cast<std::size_t>(j)];
        }
        double* out = ctx.data() + h * c.head_dim;
        std::fill(out, out + c.head_dim, 0.0);
        for (int j = 0; j < n; ++j) {
          const double w = scores[static_cast<std::size_t>(j)] / denom;
          const double* vj = vc[static_cast<std::size_t>(j)].data() + h * c.head_dim;
          for (int d = 0; d < c.head_dim; ++d) out[d] += w * vj[d];
        }
      }
      detail::vec_mat(ctx.data(), p.wo, tmp.data());
      for (int j = 0; j < width; ++j)
        x[static_cast<std::size_t>(j)] += tmp[static_cast<std::size_t>(j)] + p.wo_b.data[static_cast<std::size_t>(j)];
      detail::layer_norm_vec(x.data(), p.ln1_g, p.ln1_b, width);

      detail::vec_mat(x.data(), p.ff_w1, hidden.data());
      for (int j = 0; j < 4 * width; ++j)
        hidden[static_cast<std::size_t>(j)] = detail::gelu_scalar(hidden[static_cast<std::size_t>(j)] + p.ff_b1.data[static_cast<std::size_t>(j)]);
      detail::vec_mat(hidden.data(), p.ff_w2, tmp.data());
      for (int j = 0; j < width; ++j)
        x[static_cast<std::size_t>(j)] += tmp[static_cast<std::size_t>(j)] + p.ff_b2.data[static_cast<std::size_t>(j)];
      detail::layer_norm_vec(x.data(), p.ln2_g, p.ln2_b, width);
    }

    std::vector<double> logits(static_cast<std::size_t>(kAnimDims) * c.d);
    detail::vec_mat(x.data(), m_->head_w(), logits.data());
    for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += m_->head_b().data[j];
    return logits;
  }

 private:
  const MappingModel* m_;
  std::vector<std::vector<std::vector<double>>> k_cache_;  // [layer][pos][heads*head_dim]
  std::vector<std::vector<std::vector<double>>> v_cache_;
};

}  // namespace aanim
