// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Reference implementations used by the tests. Each one is written the slow,
// obvious way and shares no code with the library routine it checks.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "msdkws/tensor.hpp"

namespace oracle {

using msdkws::Tensor;

/// Random log-softmax lattice [T×R×K].
inline Tensor random_log_lattice(std::mt19937_64& rng, std::size_t T, std::size_t R, std::size_t K,
                                 double spread = 2.0) {
  std::normal_distribution<double> g(0.0, spread);
  Tensor out({T, R, K});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t r = 0; r < R; ++r) {
      std::vector<double> z(K);
      double mx = -1e300;
      for (auto& v : z) mx = std::max(mx, v = g(rng));
      double s = 0.0;
      for (double v : z) s += std::exp(v - mx);
      for (std::size_t k = 0; k < K; ++k) out(t, r, k) = z[k] - mx - std::log(s);
    }
  }
  return out;
}

/// Probability lattice whose slices each sum to one.
inline Tensor random_prob_lattice(std::mt19937_64& rng, std::size_t T, std::size_t R, std::size_t K) {
  Tensor lp = random_log_lattice(rng, T, R, K);
  for (auto& v : lp.values()) v = std::exp(v);
  return lp;
}

/// log p(y|x) by listing every alignment: choose which of the first T+U−1
/// symbols are label emissions, then close with the final blank.
inline double rnnt_enumerate(const Tensor& lp, const std::vector<std::size_t>& y, std::size_t blank) {
  const std::size_t T = lp.dim(0), U = y.size();
  const std::size_t n = T + U - 1;
  double total = 0.0;
  for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << n); ++bits) {
    if (std::size_t(__builtin_popcountll(bits)) != U) continue;
    std::size_t t = 0, u = 0;
    double logp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (bits >> i & 1) {
        logp += lp(t, u, y[u]);
        ++u;
      } else {
        logp += lp(t, u, blank);
        ++t;
      }
    }
    logp += lp(T - 1, U, blank);
    total += std::exp(logp);
  }
  return std::log(total);
}

/// m_t = p_t + Σ_{i=1..N1} a_i ⊙ p_{t−i} + Σ_{j=1..N2} c_j ⊙ p_{t+j}, taps
/// skipped outside [0, valid).
inline Tensor fsmn_loops(const Tensor& p, const Tensor& left, const Tensor& right, std::size_t valid) {
  const std::size_t T = p.dim(0), D = p.dim(1);
  Tensor m = p;
  for (std::size_t t = 0; t < std::min(T, valid); ++t) {
    for (std::size_t k = 0; k < D; ++k) {
      double acc = p(t, k);
      for (std::size_t i = 1; i <= left.dim(0); ++i) {
        if (t >= i) acc += left(i - 1, k) * p(t - i, k);
      }
      for (std::size_t j = 1; j <= right.dim(0); ++j) {
        if (t + j < valid) acc += right(j - 1, k) * p(t + j, k);
      }
      m(t, k) = acc;
    }
  }
  return m;
}

struct KeywordPathBest {
  double prob = 0.0;
  std::size_t span = 0;
};

/// Best start-anywhere keyword path ending at each frame, by enumeration of
/// (start frame, frames at which tokens 2..U are emitted). Token u+1 can be
/// emitted at the frame of token u or later; blanks fill the frames between
/// and may follow the last token before the terminal blank.
inline std::vector<KeywordPathBest> keyword_paths(const Tensor& P, const std::vector<std::size_t>& kw) {
  const std::size_t T = P.dim(0), U = kw.size(), blank = P.dim(2) - 1;
  std::vector<KeywordPathBest> best(T);
  std::vector<std::size_t> at(U);
  std::function<void(std::size_t)> place = [&](std::size_t u) {
    if (u == U) {
      double prob = 1.0;
      for (std::size_t i = 0; i < U; ++i) {
        prob *= P(at[i], i, kw[i]);
        const std::size_t until = i + 1 < U ? at[i + 1] : at[i];
        for (std::size_t f = at[i]; f < until; ++f) prob *= P(f, i + 1, blank);
      }
      // Trailing blanks in the last row, then the terminal blank at `end`.
      double tail = prob;
      for (std::size_t end = at[U - 1]; end < T; ++end) {
        const double full = tail * P(end, U, blank);
        const std::size_t span = end - at[0] + 1;
        if (best[end].span == 0 || full > best[end].prob) best[end] = {full, span};
        tail *= P(end, U, blank);
      }
      return;
    }
    for (std::size_t f = at[u - 1]; f < T; ++f) {
      at[u] = f;
      place(u + 1);
    }
  };
  for (std::size_t s = 0; s < T; ++s) {
    at[0] = s;
    place(1);
  }
  return best;
}

/// Σ_cells Σ_k p·(log p − log q) over log-probability tensors.
inline double kl_sum(const Tensor& p_log, const Tensor& q_log) {
  double s = 0.0;
  for (std::size_t i = 0; i < p_log.size(); ++i) s += std::exp(p_log[i]) * (p_log[i] - q_log[i]);
  return s;
}

}  // namespace oracle
