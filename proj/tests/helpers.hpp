#pragma once

// Independent reference implementations used as test oracles. These must not
// share code with the library paths they check.

#include <cmath>
#include <complex>
#include <vector>

#include "aanim/codec.hpp"
#include "aanim/rng.hpp"
#include "aanim/tensor.hpp"

namespace oracle {

// Plain triple-loop matrix product.
inline aanim::Tensor matmul(const aanim::Tensor& a, const aanim::Tensor& b) {
  aanim::Tensor c({a.rows(), b.cols()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

// Exhaustive nearest-centroid scan, lower index wins ties.
inline int argmin_code(double v, const aanim::CodecSpec& spec, int attr) {
  int best = 0;
  double best_dist = std::fabs(v - spec.centroid(attr, 0));
  for (int k = 1; k < spec.d(); ++k) {
    const double dist = std::fabs(v - spec.centroid(attr, k));
    if (dist < best_dist) {
      best = k;
      best_dist = dist;
    }
  }
  return best;
}

// Direct O(n^2) DFT.
inline std::vector<std::complex<double>> dft(const std::vector<std::complex<double>>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(x.size());
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int j = 0; j < n; ++j)
      acc += x[static_cast<std::size_t>(j)] *
             std::polar(1.0, -2.0 * M_PI * static_cast<double>(j) * k / n);
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

// Naive exp/normalize/-log cross entropy, mean over rows.
inline double cross_entropy(const aanim::Tensor& logits, const std::vector<int>& targets) {
  double loss = 0.0;
  for (int i = 0; i < logits.rows(); ++i) {
    double denom = 0.0;
    for (int j = 0; j < logits.cols(); ++j) denom += std::exp(logits.at(i, j));
    loss += -std::log(std::exp(logits.at(i, targets[static_cast<std::size_t>(i)])) / denom);
  }
  return loss / logits.rows();
}

inline aanim::Tensor random_tensor(std::vector<int> shape, aanim::CounterRng& rng,
                                   double scale = 1.0) {
  aanim::Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.next_gaussian();
  return t;
}

inline aanim::AnimVector random_anim_vector(aanim::CounterRng& rng, double scale = 1.0) {
  aanim::AnimVector v;
  for (int a = 0; a < aanim::kAnimDims; ++a) v[a] = scale * (rng.next_double() * 2.0 - 1.0);
  return v;
}

}  // namespace oracle
