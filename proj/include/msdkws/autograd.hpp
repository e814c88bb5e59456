// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Tensor-level reverse-mode differentiation on an explicit tape.
//
// Nodes are appended in creation order, which is a topological order of the
// computation, so the backward pass is a single reverse sweep over the tape.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "msdkws/error.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

/// Handle to a tape node. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Graph* graph() const noexcept { return graph_; }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  /// Backward callback: receives the graph and the gradient of the node.
  using Backward = std::function<void(Graph&, const Tensor&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t) { return push(std::move(t), false, nullptr, "constant"); }

  /// Differentiable leaf not tied to a Parameter.
  Var leaf(Tensor t) { return push(std::move(t), true, nullptr, "leaf"); }

  /// Leaf bound to `p`; backward() adds its gradient into `p.grad`.
  Var param(Parameter& p) {
    Var v = push(p.value, true, nullptr, p.name.c_str());
    nodes_[v.id()].param = &p;
    return v;
  }

  /// Appends an operation result. `requires_grad` should be true iff some
  /// input needs a gradient; `fn` may then be called once during backward().
  Var push(Tensor value, bool requires_grad, Backward fn, const char* op) {
    if (!value.all_finite()) {
      throw NumericalError(std::string("non-finite value produced by ") + op);
    }
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(fn), nullptr});
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  const Tensor& grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.empty()) {
      static thread_local Tensor zero;
      zero = Tensor(n.value.shape());
      return zero;
    }
    return n.grad;
  }

  /// Gradient buffer of node `id`, zero-allocated on first use.
  Tensor& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar root. Parameter leaves accumulate `seed`-scaled
  /// gradients into their Parameter.
  void backward(Var root, double seed = 1.0) {
    if (value(root).size() != 1) throw DimensionError("backward root must be a scalar");
    grad_buffer(root.id())[0] += seed;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        // Copy the handle: the callback may allocate grads of earlier nodes
        // but never appends, so references into nodes_ stay valid.
        n.backward(*this, n.grad);
      }
      if (n.param != nullptr) {
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad;
    Backward backward;
    Parameter* param;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph_->value(*this); }
inline const Tensor& Var::grad() const { return graph_->grad(*this); }

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_str(t.shape()));
  }
}

inline void same_graph(Var a, Var b) {
  if (a.graph() != b.graph()) throw Error("usage", "variables belong to different graphs");
}

// out[m×n] (+)= a[m×k]·b[k×n]
inline void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * bp[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations
// ---------------------------------------------------------------------------

inline Var matmul(Var a, Var b) {
  detail::same_graph(a, b);
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_rank2(av, "matmul");
  detail::require_rank2(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  }
  Tensor out({m, n});
  detail::gemm_acc(av.data(), bv.data(), out.data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  const bool rg = g.requires_grad(a) || g.requires_grad(b);
  return g.push(std::move(out), rg, [ia, ib, m, k, n](Graph& gr, const Tensor& go) {
    if (gr.requires_grad(ia)) {
      // a.grad += g · bᵀ
      const Tensor& bv = gr.value(ib);
      Tensor& ga = gr.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (gr.requires_grad(ib)) {
      // b.grad += aᵀ · g
      const Tensor& av = gr.value(ia);
      Tensor& gb = gr.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * go[i * n + j];
        }
      }
    }
  }, "matmul");
}

inline Var add(Var a, Var b) {
  detail::same_graph(a, b);
  Graph& g = *a.graph();
  if (a.shape() != b.shape()) {
    throw DimensionError("add shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), g.requires_grad(a) || g.requires_grad(b),
                [ia, ib](Graph& gr, const Tensor& go) {
                  for (std::size_t id : {ia, ib}) {
                    if (!gr.requires_grad(id)) continue;
                    Tensor& gi = gr.grad_buffer(id);
                    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
                  }
                },
                "add");
}

/// Adds a bias vector (shape {n}) to every row of `a` (last axis n).
inline Var add_bias(Var a, Var bias) {
  detail::same_graph(a, bias);
  Graph& g = *a.graph();
  const std::size_t n = a.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("bias of size " + std::to_string(bias.value().size()) +
                         " does not match last axis " + std::to_string(n));
  }
  Tensor out = a.value();
  const auto bv = bias.value().data();
  const std::size_t rows = out.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return g.push(std::move(out), g.requires_grad(a) || g.requires_grad(bias),
                [ia, ib, rows, n](Graph& gr, const Tensor& go) {
                  if (gr.requires_grad(ia)) {
                    Tensor& ga = gr.grad_buffer(ia);
                    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
                  }
                  if (gr.requires_grad(ib)) {
                    Tensor& gb = gr.grad_buffer(ib);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < n; ++j) gb[j] += go[r * n + j];
                  }
                },
                "add_bias");
}

inline Var scale(Var a, double s) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ia = a.id();
  return g.push(std::move(out), g.requires_grad(a),
                [ia, s](Graph& gr, const Tensor& go) {
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * go[i];
                },
                "scale");
}

inline Var relu(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id();
  return g.push(std::move(out), g.requires_grad(a),
                [ia](Graph& gr, const Tensor& go) {
                  const Tensor& x = gr.value(ia);
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i)
                    if (x[i] > 0.0) ga[i] += go[i];
                },
                "relu");
}

inline Var tanh(Var a) {
  Graph& g = *a.graph();
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id();
  const std::size_t io = g.size();
  return g.push(std::move(out), g.requires_grad(a),
                [ia, io](Graph& gr, const Tensor& go) {
                  const Tensor& y = gr.value(io);
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
                },
                "tanh");
}

inline Var concat_last_axis(Var a, Var b) {
  detail::same_graph(a, b);
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rows() != bv.rows() ||
      !std::equal(av.shape().begin(), av.shape().end() - 1, bv.shape().begin())) {
    throw DimensionError("concat leading axes differ: " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  const std::size_t rows = av.rows(), na = av.cols(), nb = bv.cols();
  Shape s = av.shape();
  s.back() = na + nb;
  Tensor out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data().data() + r * na, na, out.data().data() + r * (na + nb));
    std::copy_n(bv.data().data() + r * nb, nb, out.data().data() + r * (na + nb) + na);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), g.requires_grad(a) || g.requires_grad(b),
                [ia, ib, rows, na, nb](Graph& gr, const Tensor& go) {
                  const std::size_t w = na + nb;
                  if (gr.requires_grad(ia)) {
                    Tensor& ga = gr.grad_buffer(ia);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < na; ++j) ga[r * na + j] += go[r * w + j];
                  }
                  if (gr.requires_grad(ib)) {
                    Tensor& gb = gr.grad_buffer(ib);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < nb; ++j) gb[r * nb + j] += go[r * w + na + j];
                  }
                },
                "concat_last_axis");
}

/// Gathers rows of `table` [V̂×E] by id; backward scatters by id.
inline Var embedding_lookup(Var table, const std::vector<std::size_t>& ids) {
  Graph& g = *table.graph();
  const Tensor& tv = table.value();
  detail::require_rank2(tv, "embedding_lookup");
  if (ids.empty()) throw DimensionError("embedding_lookup needs at least one id");
  const std::size_t e = tv.dim(1);
  Tensor out({ids.size(), e});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= tv.dim(0)) {
      throw IndexError("embedding id " + std::to_string(ids[r]) + " out of range for " +
                       std::to_string(tv.dim(0)) + " rows");
    }
    std::copy_n(tv.data().data() + ids[r] * e, e, out.data().data() + r * e);
  }
  const std::size_t it = table.id();
  return g.push(std::move(out), g.requires_grad(table),
                [it, ids, e](Graph& gr, const Tensor& go) {
                  Tensor& gt = gr.grad_buffer(it);
                  for (std::size_t r = 0; r < ids.size(); ++r)
                    for (std::size_t j = 0; j < e; ++j) gt[ids[r] * e + j] += go[r * e + j];
                },
                "embedding_lookup");
}

/// Normalizes the last axis: out_k = v_k − logsumexp(v).
inline Var log_softmax(Var a) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  if (av.rank() == 0 || av.cols() == 0) throw DimensionError("log_softmax over an empty axis");
  const std::size_t rows = av.rows(), k = av.cols();
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const double lse = logsumexp(row);
    for (auto& v : row) v -= lse;
  }
  const std::size_t ia = a.id();
  const std::size_t io = g.size();
  return g.push(std::move(out), g.requires_grad(a),
                [ia, io, rows, k](Graph& gr, const Tensor& go) {
                  const Tensor& y = gr.value(io);
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < k; ++j) s += go[r * k + j];
                    for (std::size_t j = 0; j < k; ++j)
                      ga[r * k + j] += go[r * k + j] - std::exp(y[r * k + j]) * s;
                  }
                },
                "log_softmax");
}

inline Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return g.push(Tensor::scalar(s), g.requires_grad(a),
                [ia](Graph& gr, const Tensor& go) {
                  Tensor& ga = gr.grad_buffer(ia);
                  for (auto& v : ga.values()) v += go[0];
                },
                "sum");
}

inline Var sum_squares(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const std::size_t ia = a.id();
  return g.push(Tensor::scalar(s), g.requires_grad(a),
                [ia](Graph& gr, const Tensor& go) {
                  const Tensor& x = gr.value(ia);
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * x[i] * go[0];
                },
                "sum_squares");
}

inline Var reshape(Var a, Shape s) {
  Graph& g = *a.graph();
  if (shape_numel(s) != a.value().size()) {
    throw DimensionError("reshape " + shape_str(a.shape()) + " to " + shape_str(s));
  }
  const std::size_t ia = a.id();
  return g.push(a.value().reshaped(std::move(s)), g.requires_grad(a),
                [ia](Graph& gr, const Tensor& go) {
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
                },
                "reshape");
}

/// First `n` rows of a matrix.
inline Var take_rows(Var a, std::size_t n) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  detail::require_rank2(av, "take_rows");
  if (n == 0 || n > av.dim(0)) throw DimensionError("take_rows count out of range");
  const std::size_t c = av.dim(1);
  if (n == av.dim(0)) return a;
  Tensor out({n, c}, std::vector<double>(av.data().begin(), av.data().begin() + n * c));
  const std::size_t ia = a.id();
  return g.push(std::move(out), g.requires_grad(a),
                [ia, n, c](Graph& gr, const Tensor& go) {
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t i = 0; i < n * c; ++i) ga[i] += go[i];
                },
                "take_rows");
}

/// Zeroes the rows of `a` whose mask entry is true (no rescaling).
inline Var mask_rows(Var a, const std::vector<bool>& mask) {
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  detail::require_rank2(av, "mask_rows");
  if (mask.size() != av.dim(0)) throw DimensionError("mask length differs from row count");
  const std::size_t c = av.dim(1);
  Tensor out = av;
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (mask[r]) std::fill_n(out.data().data() + r * c, c, 0.0);
  const std::size_t ia = a.id();
  return g.push(std::move(out), g.requires_grad(a),
                [ia, mask, c](Graph& gr, const Tensor& go) {
                  Tensor& ga = gr.grad_buffer(ia);
                  for (std::size_t r = 0; r < mask.size(); ++r) {
                    if (mask[r]) continue;
                    for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += go[r * c + j];
                  }
                },
                "mask_rows");
}

/// out[t·R + r] = a[t] + b[r] for a [T×J], b [R×J]; shape (T·R)×J.
inline Var pairwise_add(Var a, Var b) {
  detail::same_graph(a, b);
  Graph& g = *a.graph();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require_rank2(av, "pairwise_add");
  detail::require_rank2(bv, "pairwise_add");
  if (av.dim(1) != bv.dim(1)) {
    throw DimensionError("pairwise_add width mismatch: " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  const std::size_t t = av.dim(0), r = bv.dim(0), j = av.dim(1);
  Tensor out({t * r, j});
  for (std::size_t ti = 0; ti < t; ++ti)
    for (std::size_t ri = 0; ri < r; ++ri)
      for (std::size_t k = 0; k < j; ++k) out[(ti * r + ri) * j + k] = av[ti * j + k] + bv[ri * j + k];
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), g.requires_grad(a) || g.requires_grad(b),
                [ia, ib, t, r, j](Graph& gr, const Tensor& go) {
                  const bool need_a = gr.requires_grad(ia), need_b = gr.requires_grad(ib);
                  Tensor* ga = need_a ? &gr.grad_buffer(ia) : nullptr;
                  Tensor* gb = need_b ? &gr.grad_buffer(ib) : nullptr;
                  for (std::size_t ti = 0; ti < t; ++ti)
                    for (std::size_t ri = 0; ri < r; ++ri)
                      for (std::size_t k = 0; k < j; ++k) {
                        const double v = go[(ti * r + ri) * j + k];
                        if (ga) (*ga)[ti * j + k] += v;
                        if (gb) (*gb)[ri * j + k] += v;
                      }
                },
                "pairwise_add");
}

/// Sequential-memory block: m_t = p_t + Σ_i a_i ⊙ p_{t−i} + Σ_j c_j ⊙ p_{t+j}.
///
/// `left` is [N₁×D] (row i−1 holds a_i), `right` is [N₂×D]. Frames at or past
/// `valid` are treated as out of range; their outputs are copies of p.
inline Var fsmn_memory(Var p, Var left, Var right, std::size_t valid) {
  detail::same_graph(p, left);
  detail::same_graph(p, right);
  Graph& g = *p.graph();
  const Tensor& pv = p.value();
  const Tensor& lv = left.value();
  const Tensor& rv = right.value();
  detail::require_rank2(pv, "fsmn_memory");
  const std::size_t t = pv.dim(0), d = pv.dim(1);
  if (lv.cols() != d || rv.cols() != d) throw DimensionError("fsmn tap width differs from memory width");
  const std::size_t nl = lv.rows(), nr = rv.rows();
  const std::size_t tv = std::min(valid, t);
  Tensor out = pv;
  for (std::size_t ti = 0; ti < tv; ++ti) {
    double* o = out.data().data() + ti * d;
    for (std::size_t i = 1; i <= nl && i <= ti; ++i) {
      const double* src = pv.data().data() + (ti - i) * d;
      const double* tap = lv.data().data() + (i - 1) * d;
      for (std::size_t k = 0; k < d; ++k) o[k] += tap[k] * src[k];
    }
    for (std::size_t j = 1; j <= nr && ti + j < tv; ++j) {
      const double* src = pv.data().data() + (ti + j) * d;
      const double* tap = rv.data().data() + (j - 1) * d;
      for (std::size_t k = 0; k < d; ++k) o[k] += tap[k] * src[k];
    }
  }
  const std::size_t ip = p.id(), il = left.id(), ir = right.id();
  const bool rg = g.requires_grad(p) || g.requires_grad(left) || g.requires_grad(right);
  return g.push(std::move(out), rg, [ip, il, ir, t, d, nl, nr, tv](Graph& gr, const Tensor& go) {
    const Tensor& pv = gr.value(ip);
    const Tensor& lv = gr.value(il);
    const Tensor& rv = gr.value(ir);
    Tensor* gp = gr.requires_grad(ip) ? &gr.grad_buffer(ip) : nullptr;
    Tensor* gl = gr.requires_grad(il) ? &gr.grad_buffer(il) : nullptr;
    Tensor* grr = gr.requires_grad(ir) ? &gr.grad_buffer(ir) : nullptr;
    if (gp)
      for (std::size_t i = 0; i < t * d; ++i) (*gp)[i] += go[i];
    for (std::size_t ti = 0; ti < tv; ++ti) {
      const double* o = go.data().data() + ti * d;
      for (std::size_t i = 1; i <= nl && i <= ti; ++i) {
        const std::size_t s = ti - i;
        for (std::size_t k = 0; k < d; ++k) {
          if (gp) (*gp)[s * d + k] += lv[(i - 1) * d + k] * o[k];
          if (gl) (*gl)[(i - 1) * d + k] += pv[s * d + k] * o[k];
        }
      }
      for (std::size_t j = 1; j <= nr && ti + j < tv; ++j) {
        const std::size_t s = ti + j;
        for (std::size_t k = 0; k < d; ++k) {
          if (gp) (*gp)[s * d + k] += rv[(j - 1) * d + k] * o[k];
          if (grr) (*grr)[(j - 1) * d + k] += pv[s * d + k] * o[k];
        }
      }
    }
  }, "fsmn_memory");
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Max relative error per parameter, in parameter order.
  std::vector<std::pair<std::string, double>> per_param;
  bool passed = false;
};

/// Relative error |a−n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients of `loss` against central differences for
/// every entry of every parameter. `loss` builds a scalar on the given graph
/// and must be a pure function of the parameter values.
inline GradCheckReport grad_check(const std::function<Var(Graph&)>& loss,
                                  const std::vector<Parameter*>& params, double eps, double tol,
                                  double floor = 1e-6) {
  if (!(eps > 0.0)) throw ParameterError("grad_check epsilon must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var out = loss(g);
    if (!std::isfinite(out.value()[0])) throw NumericalError("grad_check: non-finite loss");
    g.backward(out);
  }
  auto eval = [&]() {
    Graph g;
    const double v = loss(g).value()[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite loss");
    return v;
  };
  GradCheckReport rep;
  for (Parameter* p : params) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double fp = eval();
      p->value[i] = orig - eps;
      const double fm = eval();
      p->value[i] = orig;
      const double num = (fp - fm) / (2.0 * eps);
      const double err = relative_error(p->grad[i], num, floor);
      worst = std::max(worst, err);
      if (err > rep.max_rel_error || rep.worst_param.empty()) {
        if (err >= rep.max_rel_error) {
          rep.max_rel_error = err;
          rep.worst_param = p->name;
          rep.worst_index = i;
          rep.worst_analytic = p->grad[i];
          rep.worst_numeric = num;
        }
      }
    }
    rep.per_param.emplace_back(p->name, worst);
  }
  rep.passed = rep.max_rel_error < tol;
  return rep;
}

}  // namespace msdkws
