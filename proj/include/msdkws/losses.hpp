// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Transducer lattice loss, masked self-distillation KL, combined objective.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "msdkws/autograd.hpp"
#include "msdkws/error.hpp"
#include "msdkws/model.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline void check_lattice(const Tensor& logp, const std::vector<std::size_t>& y, std::size_t blank) {
  if (logp.rank() != 3) throw DimensionError("lattice must be T×(U+1)×(V+1), got " + shape_str(logp.shape()));
  if (logp.dim(1) != y.size() + 1) {
    throw DimensionError("lattice has " + std::to_string(logp.dim(1)) + " predictor rows for " +
                         std::to_string(y.size()) + " labels");
  }
  if (blank >= logp.dim(2)) throw IndexError("blank id outside the output axis");
  for (auto k : y)
    if (k >= logp.dim(2) || k == blank) throw IndexError("label id " + std::to_string(k) + " invalid");
  if (!logp.all_finite()) throw NumericalError("non-finite log-posterior in lattice");
}

/// Forward variables α[t][u] in log space (0-based t).
inline std::vector<double> rnnt_alpha(const Tensor& lp, const std::vector<std::size_t>& y, std::size_t blank) {
  const std::size_t T = lp.dim(0), R = lp.dim(1);
  std::vector<double> a(T * R, kNegInf);
  a[0] = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < R; ++u) {
      if (t == 0 && u == 0) continue;
      double from_blank = t > 0 ? a[(t - 1) * R + u] + lp(t - 1, u, blank) : kNegInf;
      double from_token = u > 0 ? a[t * R + u - 1] + lp(t, u - 1, y[u - 1]) : kNegInf;
      a[t * R + u] = logaddexp(from_blank, from_token);
    }
  }
  return a;
}

/// Backward variables β[t][u]: log-probability of completing from (t,u).
inline std::vector<double> rnnt_beta(const Tensor& lp, const std::vector<std::size_t>& y, std::size_t blank) {
  const std::size_t T = lp.dim(0), R = lp.dim(1), U = R - 1;
  std::vector<double> b(T * R, kNegInf);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t u = R; u-- > 0;) {
      if (t == T - 1 && u == U) {
        b[t * R + u] = lp(t, u, blank);
        continue;
      }
      double via_blank = t + 1 < T ? b[(t + 1) * R + u] + lp(t, u, blank) : kNegInf;
      double via_token = u < U ? b[t * R + u + 1] + lp(t, u, y[u]) : kNegInf;
      b[t * R + u] = logaddexp(via_blank, via_token);
    }
  }
  return b;
}

}  // namespace detail

/// log p(y|x): sum over all monotonic alignments of the lattice `logp`.
inline double rnnt_log_prob(const Tensor& logp, const std::vector<std::size_t>& y, std::size_t blank) {
  detail::check_lattice(logp, y, blank);
  const std::size_t T = logp.dim(0), R = logp.dim(1);
  const auto a = detail::rnnt_alpha(logp, y, blank);
  return a[(T - 1) * R + (R - 1)] + logp(T - 1, R - 1, blank);
}

/// ∂(−log p(y|x)) / ∂logp. Only blank and next-label entries are nonzero.
inline Tensor rnnt_grad(const Tensor& logp, const std::vector<std::size_t>& y, std::size_t blank) {
  detail::check_lattice(logp, y, blank);
  const std::size_t T = logp.dim(0), R = logp.dim(1), U = R - 1;
  const auto a = detail::rnnt_alpha(logp, y, blank);
  const auto b = detail::rnnt_beta(logp, y, blank);
  const double log_p = b[0];
  Tensor g(logp.shape());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < R; ++u) {
      const double at = a[t * R + u];
      if (at == detail::kNegInf) continue;
      if (t + 1 < T) {
        g(t, u, blank) = -std::exp(at + logp(t, u, blank) + b[(t + 1) * R + u] - log_p);
      } else if (u == U) {
        g(t, u, blank) = -std::exp(at + logp(t, u, blank) - log_p);
      }
      if (u < U) g(t, u, y[u]) = -std::exp(at + logp(t, u, y[u]) + b[t * R + u + 1] - log_p);
    }
  }
  return g;
}

/// Graph op: −log p(y|x) as a scalar node.
inline Var rnnt_loss(Var logp, const std::vector<std::size_t>& y, std::size_t blank) {
  Graph& g = *logp.graph();
  const double lp = rnnt_log_prob(logp.value(), y, blank);
  if (!std::isfinite(lp)) throw NumericalError("rnnt log-probability is not finite");
  const std::size_t il = logp.id();
  return g.push(Tensor::scalar(-lp), g.requires_grad(logp),
                [il, y, blank](Graph& gr, const Tensor& go) {
                  const Tensor d = rnnt_grad(gr.value(il), y, blank);
                  Tensor& gl = gr.grad_buffer(il);
                  for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += go[0] * d[i];
                },
                "rnnt_loss");
}

/// Σ_{t,u} KL(p_{t,u} ∥ q_{t,u}) over log-probability lattices.
/// `rows` (optional) restricts the sum to predictor rows flagged true.
inline double msd_kl(const Tensor& p_log, const Tensor& q_log, const std::vector<bool>* rows = nullptr) {
  if (p_log.shape() != q_log.shape()) {
    throw DimensionError("msd_kl shape mismatch: " + shape_str(p_log.shape()) + " vs " + shape_str(q_log.shape()));
  }
  const std::size_t k = p_log.cols(), cells = p_log.rows();
  const std::size_t r = p_log.rank() == 3 ? p_log.dim(1) : 1;
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (rows && !(*rows)[c % r]) continue;
    double kl = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double lp = p_log[c * k + j];
      kl += std::exp(lp) * (lp - q_log[c * k + j]);
    }
    total += kl;
  }
  return total;
}

/// Graph op for msd_kl. The teacher side receives no gradient.
inline Var msd_kl(Var teacher, Var student, const std::vector<bool>* rows = nullptr) {
  Graph& g = *student.graph();
  const double v = msd_kl(teacher.value(), student.value(), rows);
  const std::size_t it = teacher.id(), is = student.id();
  std::vector<bool> keep = rows ? *rows : std::vector<bool>{};
  return g.push(Tensor::scalar(v), g.requires_grad(student),
                [it, is, keep](Graph& gr, const Tensor& go) {
                  const Tensor& p = gr.value(it);
                  Tensor& gs = gr.grad_buffer(is);
                  const std::size_t k = p.cols(), cells = p.rows();
                  const std::size_t r = p.rank() == 3 ? p.dim(1) : 1;
                  for (std::size_t c = 0; c < cells; ++c) {
                    if (!keep.empty() && !keep[c % r]) continue;
                    for (std::size_t j = 0; j < k; ++j) gs[c * k + j] -= go[0] * std::exp(p[c * k + j]);
                  }
                },
                "msd_kl");
}

struct LossWeights {
  double mask_prob = 0.35;
  double lambda_mask = 1.0;
  double lambda_msd = 0.003;
  /// Restrict the KL term to cells whose predictor row was masked.
  bool msd_masked_only = false;
};

struct LossBreakdown {
  double l_rnnt = 0.0;
  double l_rnnt_mask = 0.0;
  double l_msd = 0.0;
  double total = 0.0;
  double lambda_mask = 0.0;
  double lambda_msd = 0.0;

  static double combine(double rnnt, double mask, double msd, double lambda_mask, double lambda_msd) {
    return (rnnt + lambda_mask * mask) + lambda_msd * msd;
  }
};

struct Sample {
  Tensor features;           // [T_pad × F]
  std::size_t valid_frames;  // true length; rows past it are padding
  std::vector<std::size_t> tokens;
};

/// The combined objective as graph nodes.
struct Objective {
  Var total, l_rnnt, l_mask, l_msd;
  std::vector<bool> mask;
  LossBreakdown breakdown;
};

/// One encoder pass, one predictor pass, two joiner passes.
inline Objective build_objective(const BoundModel& m, const Sample& s, const LossWeights& w, std::uint64_t mask_seed) {
  Graph& g = m.graph();
  const std::size_t blank = m.config().blank();
  Var feats = g.constant(s.features);
  Var h_audio = m.encode(feats, s.valid_frames);
  Var h_text = m.predict(s.tokens);
  auto masked = random_mask(h_text, w.mask_prob, mask_seed);
  Var p_token = m.joint(h_audio, h_text);
  Var p_mtoken = m.joint(h_audio, masked.h_mask);
  Objective o;
  o.l_rnnt = rnnt_loss(p_token, s.tokens, blank);
  o.l_mask = rnnt_loss(p_mtoken, s.tokens, blank);
  o.l_msd = msd_kl(p_token, p_mtoken, w.msd_masked_only ? &masked.mask : nullptr);
  o.total = add(add(o.l_rnnt, scale(o.l_mask, w.lambda_mask)), scale(o.l_msd, w.lambda_msd));
  o.mask = std::move(masked.mask);
  auto& b = o.breakdown;
  b.l_rnnt = o.l_rnnt.value()[0];
  b.l_rnnt_mask = o.l_mask.value()[0];
  b.l_msd = o.l_msd.value()[0];
  b.lambda_mask = w.lambda_mask;
  b.lambda_msd = w.lambda_msd;
  b.total = LossBreakdown::combine(b.l_rnnt, b.l_rnnt_mask, b.l_msd, w.lambda_mask, w.lambda_msd);
  return o;
}

/// Forward-only loss.
inline LossBreakdown total_loss(const TransducerModel& model, const Sample& s, const LossWeights& w,
                                std::uint64_t mask_seed) {
  Graph g;
  return build_objective(model.bind_frozen(g), s, w, mask_seed).breakdown;
}

/// Loss plus gradient; `grad_scale`·∂total/∂θ is added into the parameters' grads.
inline LossBreakdown total_loss_backward(TransducerModel& model, const Sample& s, const LossWeights& w,
                                         std::uint64_t mask_seed, double grad_scale = 1.0) {
  Graph g;
  auto o = build_objective(model.bind(g), s, w, mask_seed);
  g.backward(o.total, grad_scale);
  return o.breakdown;
}

}  // namespace msdkws
