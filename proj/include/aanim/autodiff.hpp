#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "aanim/rng.hpp"
#include "aanim/tensor.hpp"

namespace aanim {

// ---------------------------------------------------------------------------
// Raw matmul kernels, accumulate form. Loop orders keep the inner loop on
// contiguous memory so it auto-vectorizes; wide shapes (the 23*D output
// heads) switch to tiled variants so the hot tile stays in cache.
// ---------------------------------------------------------------------------

constexpr int kMatmulTile = 512;

// C[m x n] += A[m x k] * B[k x n]
inline void mm_nn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (n <= kMatmulTile) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i);
      double* crow = c.row_ptr(i);
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = b.row_ptr(p);
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    return;
  }
  for (int jt = 0; jt < n; jt += kMatmulTile) {
    const int tw = std::min(kMatmulTile, n - jt);
    for (int p = 0; p < k; ++p) {
      const double* brow = b.row_ptr(p) + jt;
      for (int i = 0; i < m; ++i) {
        const double av = a.at(i, p);
        double* crow = c.row_ptr(i) + jt;
        for (int j = 0; j < tw; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// Dot product with eight running partials: keeps the FP add chains
// independent so the loop is throughput-bound rather than latency-bound.
inline double dot_unrolled(const double* x, const double* y, int n) {
  double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int p = 0;
  for (; p + 8 <= n; p += 8)
    for (int u = 0; u < 8; ++u) s[u] += x[p + u] * y[p + u];
  double total = ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
  for (; p < n; ++p) total += x[p] * y[p];
  return total;
}

// C[m x n] += A[m x k] * B^T where B is [n x k]
inline void mm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (k <= kMatmulTile) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i);
      double* crow = c.row_ptr(i);
      for (int j = 0; j < n; ++j) crow[j] += dot_unrolled(arow, b.row_ptr(j), k);
    }
    return;
  }
  for (int kt = 0; kt < k; kt += kMatmulTile) {
    const int tw = std::min(kMatmulTile, k - kt);
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i) + kt;
      double* crow = c.row_ptr(i);
      for (int j = 0; j < n; ++j) crow[j] += dot_unrolled(arow, b.row_ptr(j) + kt, tw);
    }
  }
}

// C[k x n] += A^T * B where A is [m x k], B is [m x n]
inline void mm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (n <= kMatmulTile) {
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i);
      const double* brow = b.row_ptr(i);
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        double* crow = c.row_ptr(p);
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    return;
  }
  for (int jt = 0; jt < n; jt += kMatmulTile) {
    const int tw = std::min(kMatmulTile, n - jt);
    for (int i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i);
      const double* brow = b.row_ptr(i) + jt;
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        double* crow = c.row_ptr(p) + jt;
        for (int j = 0; j < tw; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Reverse-mode tape. Nodes are recorded in creation order, which is a
// topological order of the DAG; backward() walks them once in reverse and
// accumulates (sums) gradients into shared inputs.
// ---------------------------------------------------------------------------

class Tape;

struct Value {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Value self)>;

  explicit Tape(bool check_finite = false) : check_finite_(check_finite) {}

  // Leaf referencing external storage (a model parameter).
  Value param(const Tensor& t) {
    Node n;
    n.external = &t;
    n.requires_grad = true;
    return push(std::move(n));
  }

  // Owned leaf with no gradient.
  Value constant(Tensor t, bool allow_inf = false) {
    Node n;
    n.value = std::move(t);
    n.allow_inf = allow_inf;
    return push(std::move(n));
  }

  // Owned leaf with gradient (handy in tests).
  Value variable(Tensor t) {
    Node n;
    n.value = std::move(t);
    n.requires_grad = true;
    return push(std::move(n));
  }

  Value emit(Tensor value, bool requires_grad, bool allow_inf, BackwardFn bwd) {
    if (check_finite_) {
      for (double x : value.data) {
        bool bad = allow_inf ? (std::isnan(x) || x == std::numeric_limits<double>::infinity())
                             : !std::isfinite(x);
        require(!bad, "tape: non-finite value produced by forward op");
      }
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.allow_inf = allow_inf;
    if (requires_grad) n.backward = std::move(bwd);
    return push(std::move(n));
  }

  const Tensor& val(Value v) const {
    const Node& n = *nodes_[v.id];
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(Value v) const { return nodes_[v.id]->requires_grad; }
  bool allow_inf(Value v) const { return nodes_[v.id]->allow_inf; }

  // Gradient of a node, zero-initialized to the value's shape on first use.
  Tensor& grad(Value v) {
    Node& n = *nodes_[v.id];
    if (n.grad.data.empty()) n.grad = Tensor(val(v).shape);
    return n.grad;
  }

  bool has_grad(Value v) const { return !nodes_[v.id]->grad.data.empty(); }

  void backward(Value loss) {
    require(val(loss).numel() == 1, "backward: loss must be a scalar");
    grad(loss).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = *nodes_[i];
      if (n.backward && !n.grad.data.empty()) n.backward(*this, Value{this, i});
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool allow_inf = false;  // -inf entries legal (attention masks)
    BackwardFn backward;
  };

  Value push(Node n) {
    nodes_.push_back(std::make_unique<Node>(std::move(n)));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<std::unique_ptr<Node>> nodes_;
  bool check_finite_ = false;
};

namespace detail {
inline Tape& tape_of(Value a) {
  require(a.valid(), "op: invalid value handle");
  return *a.tape;
}
inline Tape& tape_of(Value a, Value b) {
  require(a.valid() && b.valid() && a.tape == b.tape, "op: values from different tapes");
  return *a.tape;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable ops
// ---------------------------------------------------------------------------

inline Value matmul(Value a, Value b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.rows(),
          "matmul: shape mismatch " + av.shape_str() + " * " + bv.shape_str());
  Tensor c({av.rows(), bv.cols()});
  mm_nn_acc(av, bv, c);
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emit(std::move(c), rg, false, [a, b](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(a)) mm_nt_acc(g, tp.val(b), tp.grad(a));  // dA += dC * B^T
    if (tp.requires_grad(b)) mm_tn_acc(tp.val(a), g, tp.grad(b));  // dB += A^T * dC
  });
}

// a * b^T with b stored row-major [n x k]; used for Q K^T.
inline Value matmul_nt(Value a, Value b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.rank() == 2 && bv.rank() == 2 && av.cols() == bv.cols(),
          "matmul_nt: shape mismatch " + av.shape_str() + " * " + bv.shape_str() + "^T");
  Tensor c({av.rows(), bv.rows()});
  mm_nt_acc(av, bv, c);
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emit(std::move(c), rg, false, [a, b](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(a)) mm_nn_acc(g, tp.val(b), tp.grad(a));  // dA += dC * B
    if (tp.requires_grad(b)) mm_tn_acc(g, tp.val(a), tp.grad(b));  // dB += dC^T * A
  });
}

inline Value add(Value a, Value b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.same_shape(bv), "add: shape mismatch " + av.shape_str() + " + " + bv.shape_str());
  Tensor c = av;
  for (long i = 0; i < c.numel(); ++i) c.data[i] += bv.data[i];
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  bool inf_ok = t.allow_inf(a) || t.allow_inf(b);
  return t.emit(std::move(c), rg, inf_ok, [a, b](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      for (long i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      for (long i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
    }
  });
}

// x[m x n] + row-broadcast bias[n]
inline Value add_bias_row(Value x, Value bias) {
  Tape& t = detail::tape_of(x, bias);
  const Tensor& xv = t.val(x);
  const Tensor& bv = t.val(bias);
  require(xv.rank() == 2 && bv.numel() == xv.cols(), "add_bias_row: bias length must equal columns");
  Tensor c = xv;
  for (int i = 0; i < c.rows(); ++i) {
    double* row = c.row_ptr(i);
    for (int j = 0; j < c.cols(); ++j) row[j] += bv.data[j];
  }
  bool rg = t.requires_grad(x) || t.requires_grad(bias);
  return t.emit(std::move(c), rg, false, [x, bias](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad(x);
      for (long i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    }
    if (tp.requires_grad(bias)) {
      Tensor& gb = tp.grad(bias);
      for (int i = 0; i < g.rows(); ++i) {
        const double* row = g.row_ptr(i);
        for (int j = 0; j < g.cols(); ++j) gb.data[j] += row[j];
      }
    }
  });
}

inline Value scale(Value x, double s) {
  Tape& t = detail::tape_of(x);
  Tensor c = t.val(x);
  for (double& v : c.data) v *= s;
  return t.emit(std::move(c), t.requires_grad(x), t.allow_inf(x), [x, s](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (long i = 0; i < g.numel(); ++i) gx.data[i] += s * g.data[i];
  });
}

inline Value mul_elem(Value a, Value b) {
  Tape& t = detail::tape_of(a, b);
  const Tensor& av = t.val(a);
  const Tensor& bv = t.val(b);
  require(av.same_shape(bv), "mul_elem: shape mismatch");
  Tensor c = av;
  for (long i = 0; i < c.numel(); ++i) c.data[i] *= bv.data[i];
  bool rg = t.requires_grad(a) || t.requires_grad(b);
  return t.emit(std::move(c), rg, false, [a, b](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      const Tensor& bv2 = tp.val(b);
      for (long i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * bv2.data[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      const Tensor& av2 = tp.val(a);
      for (long i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * av2.data[i];
    }
  });
}

inline Value sum_all(Value x) {
  Tape& t = detail::tape_of(x);
  const Tensor& xv = t.val(x);
  double s = 0.0;
  for (double v : xv.data) s += v;
  Tensor c({1});
  c.data[0] = s;
  return t.emit(std::move(c), t.requires_grad(x), false, [x](Tape& tp, Value self) {
    const double g = tp.grad(self).data[0];
    Tensor& gx = tp.grad(x);
    for (long i = 0; i < gx.numel(); ++i) gx.data[i] += g;
  });
}

// Numerically stable row softmax. Rows may contain -inf (masked positions,
// mapped to exactly 0); a row of all -inf is an error.
inline Value softmax_rows(Value x) {
  Tape& t = detail::tape_of(x);
  const Tensor& xv = t.val(x);
  require(xv.rank() == 2, "softmax_rows: expected 2-d input");
  Tensor y({xv.rows(), xv.cols()});
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < xv.rows(); ++i) {
    const double* row = xv.row_ptr(i);
    double* out = y.row_ptr(i);
    double mx = neg_inf;
    for (int j = 0; j < xv.cols(); ++j) mx = std::max(mx, row[j]);
    require(mx != neg_inf, "softmax_rows: row with no finite entry");
    double denom = 0.0;
    for (int j = 0; j < xv.cols(); ++j) {
      out[j] = std::exp(row[j] - mx);  // exp(-inf) == 0 exactly
      denom += out[j];
    }
    for (int j = 0; j < xv.cols(); ++j) out[j] /= denom;
  }
  return t.emit(std::move(y), t.requires_grad(x), false, [x](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y2 = tp.val(self);
    Tensor& gx = tp.grad(x);
    for (int i = 0; i < g.rows(); ++i) {
      const double* grow = g.row_ptr(i);
      const double* yrow = y2.row_ptr(i);
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += grow[j] * yrow[j];
      double* gxrow = gx.row_ptr(i);
      for (int j = 0; j < g.cols(); ++j) gxrow[j] += yrow[j] * (grow[j] - dot);
    }
  });
}

// Per-row layer normalization with learned gain and bias.
inline Value layer_norm(Value x, Value gain, Value bias, double eps = 1e-5) {
  Tape& t = detail::tape_of(x, gain);
  const Tensor& xv = t.val(x);
  const Tensor& gv = t.val(gain);
  const Tensor& bv = t.val(bias);
  require(xv.rank() == 2 && gv.numel() == xv.cols() && bv.numel() == xv.cols(),
          "layer_norm: gain/bias length must equal columns");
  const int m = xv.rows(), n = xv.cols();
  Tensor y({m, n});
  Tensor xhat({m, n});
  Tensor inv_std({m});
  for (int i = 0; i < m; ++i) {
    const double* row = xv.row_ptr(i);
    double mu = 0.0;
    for (int j = 0; j < n; ++j) mu += row[j];
    mu /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std.data[i] = is;
    double* xh = xhat.row_ptr(i);
    double* out = y.row_ptr(i);
    for (int j = 0; j < n; ++j) {
      xh[j] = (row[j] - mu) * is;
      out[j] = xh[j] * gv.data[j] + bv.data[j];
    }
  }
  bool rg = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
  auto xh_saved = std::make_shared<Tensor>(std::move(xhat));
  auto is_saved = std::make_shared<Tensor>(std::move(inv_std));
  return t.emit(std::move(y), rg, false, [x, gain, bias, xh_saved, is_saved](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& gv2 = tp.val(gain);
    const int m = g.rows(), n = g.cols();
    if (tp.requires_grad(gain)) {
      Tensor& gg = tp.grad(gain);
      for (int i = 0; i < m; ++i) {
        const double* grow = g.row_ptr(i);
        const double* xh = xh_saved->row_ptr(i);
        for (int j = 0; j < n; ++j) gg.data[j] += grow[j] * xh[j];
      }
    }
    if (tp.requires_grad(bias)) {
      Tensor& gb = tp.grad(bias);
      for (int i = 0; i < m; ++i) {
        const double* grow = g.row_ptr(i);
        for (int j = 0; j < n; ++j) gb.data[j] += grow[j];
      }
    }
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad(x);
      for (int i = 0; i < m; ++i) {
        const double* grow = g.row_ptr(i);
        const double* xh = xh_saved->row_ptr(i);
        const double is = is_saved->data[i];
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          const double dxh = grow[j] * gv2.data[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        double* gxrow = gx.row_ptr(i);
        for (int j = 0; j < n; ++j) {
          const double dxh = grow[j] * gv2.data[j];
          gxrow[j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
        }
      }
    }
  });
}

// Exact (erf-based) GELU.
inline Value gelu(Value x) {
  Tape& t = detail::tape_of(x);
  const Tensor& xv = t.val(x);
  Tensor y = xv;
  for (double& v : y.data) v = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
  return t.emit(std::move(y), t.requires_grad(x), false, [x](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv2 = tp.val(x);
    Tensor& gx = tp.grad(x);
    for (long i = 0; i < g.numel(); ++i) {
      const double v = xv2.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
      const double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779;
      gx.data[i] += g.data[i] * (cdf + v * pdf);
    }
  });
}

inline Value relu(Value x) {
  Tape& t = detail::tape_of(x);
  Tensor y = t.val(x);
  for (double& v : y.data) v = v > 0.0 ? v : 0.0;
  return t.emit(std::move(y), t.requires_grad(x), false, [x](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.val(x);
    Tensor& gx = tp.grad(x);
    for (long i = 0; i < g.numel(); ++i)
      if (xv.data[i] > 0.0) gx.data[i] += g.data[i];
  });
}

// Gather rows of table[r x w] by index; gradient scatters back into the table.
inline Value embedding_lookup(Value table, const std::vector<int>& indices) {
  Tape& t = detail::tape_of(table);
  const Tensor& tv = t.val(table);
  require(tv.rank() == 2, "embedding_lookup: table must be 2-d");
  const int w = tv.cols();
  Tensor y({static_cast<int>(indices.size()), w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < tv.rows(), "embedding_lookup: index out of range");
    const double* src = tv.row_ptr(indices[i]);
    std::copy(src, src + w, y.row_ptr(static_cast<int>(i)));
  }
  auto idx = std::make_shared<std::vector<int>>(indices);
  return t.emit(std::move(y), t.requires_grad(table), false, [table, idx](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gt = tp.grad(table);
    const int w = g.cols();
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const double* grow = g.row_ptr(static_cast<int>(i));
      double* trow = gt.row_ptr((*idx)[i]);
      for (int j = 0; j < w; ++j) trow[j] += grow[j];
    }
  });
}

// Concatenate 2-d values along the last dimension.
inline Value concat_last_dim(const std::vector<Value>& parts) {
  require(!parts.empty(), "concat_last_dim: no inputs");
  Tape& t = detail::tape_of(parts[0]);
  const int m = t.val(parts[0]).rows();
  int total = 0;
  bool rg = false;
  for (Value p : parts) {
    const Tensor& pv = t.val(p);
    require(pv.rank() == 2 && pv.rows() == m, "concat_last_dim: row mismatch");
    total += pv.cols();
    rg = rg || t.requires_grad(p);
  }
  Tensor y({m, total});
  int off = 0;
  for (Value p : parts) {
    const Tensor& pv = t.val(p);
    for (int i = 0; i < m; ++i)
      std::copy(pv.row_ptr(i), pv.row_ptr(i) + pv.cols(), y.row_ptr(i) + off);
    off += pv.cols();
  }
  auto ps = std::make_shared<std::vector<Value>>(parts);
  return t.emit(std::move(y), rg, false, [ps](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    int off = 0;
    for (Value p : *ps) {
      const int w = tp.val(p).cols();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad(p);
        for (int i = 0; i < g.rows(); ++i) {
          const double* grow = g.row_ptr(i) + off;
          double* prow = gp.row_ptr(i);
          for (int j = 0; j < w; ++j) prow[j] += grow[j];
        }
      }
      off += w;
    }
  });
}

// Copying reshape; total element count must be preserved.
inline Value reshape(Value x, std::vector<int> new_shape) {
  Tape& t = detail::tape_of(x);
  const Tensor& xv = t.val(x);
  require(Tensor::numel_of(new_shape) == xv.numel(), "reshape: element count mismatch");
  Tensor y(std::move(new_shape));
  y.data = xv.data;
  return t.emit(std::move(y), t.requires_grad(x), t.allow_inf(x), [x](Tape& tp, Value self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (long i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
  });
}

// Mean over rows of -log softmax(logits)[i, target_i], computed via
// log-sum-exp. Returns a scalar.
inline Value cross_entropy(Value logits, const std::vector<int>& targets) {
  Tape& t = detail::tape_of(logits);
  const Tensor& lv = t.val(logits);
  require(lv.rank() == 2, "cross_entropy: logits must be 2-d");
  require(static_cast<long>(targets.size()) == lv.rows(), "cross_entropy: one target per row");
  const int n = lv.rows(), d = lv.cols();
  auto probs = std::make_shared<Tensor>(Tensor({n, d}));
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    require(targets[i] >= 0 && targets[i] < d, "cross_entropy: target out of range");
    const double* row = lv.row_ptr(i);
    double mx = row[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    double* prow = probs->row_ptr(i);
    for (int j = 0; j < d; ++j) {
      prow[j] = std::exp(row[j] - mx);
      denom += prow[j];
    }
    const double log_denom = std::log(denom);
    for (int j = 0; j < d; ++j) prow[j] /= denom;
    loss += -(row[targets[i]] - mx - log_denom);
  }
  loss /= n;
  Tensor out({1});
  out.data[0] = loss;
  auto tg = std::make_shared<std::vector<int>>(targets);
  return t.emit(std::move(out), t.requires_grad(logits), false,
                [logits, probs, tg](Tape& tp, Value self) {
                  const double g = tp.grad(self).data[0];
                  Tensor& gl = tp.grad(logits);
                  const int n = gl.rows(), d = gl.cols();
                  const double inv_n = 1.0 / n;
                  for (int i = 0; i < n; ++i) {
                    const double* prow = probs->row_ptr(i);
                    double* grow = gl.row_ptr(i);
                    for (int j = 0; j < d; ++j) grow[j] += g * inv_n * prow[j];
                    grow[(*tg)[i]] -= g * inv_n;
                  }
                });
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m, v;
  long step = 0;
};

// One Adam update; `grad_scale` premultiplies the gradient (global-norm
// clipping hooks in here).
inline void adam_step(Tensor& param, const Tensor& grad, AdamState& st, const AdamParams& hp,
                      double grad_scale = 1.0) {
  require(param.same_shape(grad), "adam_step: gradient shape mismatch");
  if (st.m.data.empty()) {
    st.m = Tensor(param.shape);
    st.v = Tensor(param.shape);
  }
  ++st.step;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
  double* p = param.data.data();
  const double* g = grad.data.data();
  double* m = st.m.data.data();
  double* v = st.v.data.data();
  const long n = param.numel();
  for (long i = 0; i < n; ++i) {
    const double gi = g[i] * grad_scale;
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences
// ---------------------------------------------------------------------------

struct GradProbe {
  Value loss;
  std::vector<Value> params;  // handles bound to the external tensors, same order
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  long coords_checked = 0;
  bool pass = false;
  std::string worst;
};

// Rebuilds the graph via `build` (which must bind each tensor in `params`
// with tape.param in the same order) and compares analytic gradients with
// (f(x+h) - f(x-h)) / 2h on a random subsample of coordinates.
inline GradCheckReport grad_check(const std::function<GradProbe(Tape&)>& build,
                                  const std::vector<Tensor*>& params, double h = 1e-5,
                                  double tol = 1e-4, std::uint64_t seed = 0,
                                  int samples_per_tensor = 24) {
  require(h >= 1e-6 && h <= 1e-4, "grad_check: h out of sensible range");
  // Analytic pass.
  std::vector<Tensor> analytic;
  {
    Tape tape;
    GradProbe probe = build(tape);
    require(probe.params.size() == params.size(), "grad_check: probe/params size mismatch");
    tape.backward(probe.loss);
    for (std::size_t i = 0; i < params.size(); ++i) analytic.push_back(tape.grad(probe.params[i]));
  }
  auto eval_loss = [&]() {
    Tape tape;
    GradProbe probe = build(tape);
    return tape.val(probe.loss).data[0];
  };
  GradCheckReport rep;
  CounterRng rng(seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const long n = p.numel();
    const long samples = std::min<long>(n, samples_per_tensor);
    for (long s = 0; s < samples; ++s) {
      const long c = (n <= samples_per_tensor) ? s : static_cast<long>(rng.next_below(n));
      const double orig = p.data[c];
      p.data[c] = orig + h;
      const double fp = eval_loss();
      p.data[c] = orig - h;
      const double fm = eval_loss();
      p.data[c] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].data[c];
      const double abs_err = std::fabs(a - numeric);
      const double rel = abs_err / std::max(std::fabs(a) + std::fabs(numeric), 1e-3);
      ++rep.coords_checked;
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst = "param " + std::to_string(pi) + " coord " + std::to_string(c) + " analytic " +
                    std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace aanim
