// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Streaming keyword search over transducer posteriors: AR (keyword fed to the
// predictor), NAR (predictor output masked to zero), and their fusion (SAR).
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msdkws/data.hpp"
#include "msdkws/error.hpp"
#include "msdkws/model.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

/// Probability-domain lattice [T×(U+1)×(V+1)] restricted to a keyword's
/// predictor rows. The blank id is the last class.
struct PosteriorLattice {
  Tensor probs;

  std::size_t frames() const { return probs.dim(0); }
  std::size_t rows() const { return probs.dim(1); }
  std::size_t classes() const { return probs.dim(2); }
  std::size_t blank() const { return classes() - 1; }

  double operator()(std::size_t t, std::size_t u, std::size_t k) const { return probs(t, u, k); }

  /// Frame `t` as a flat (U+1)×(V+1) block.
  std::span<const double> column(std::size_t t) const {
    const std::size_t n = rows() * classes();
    return {probs.data().data() + t * n, n};
  }

  /// First `t` frames.
  PosteriorLattice truncated(std::size_t t) const {
    const std::size_t n = rows() * classes();
    return {Tensor({t, rows(), classes()},
                   std::vector<double>(probs.data().begin(), probs.data().begin() + long(t * n)))};
  }

  void validate(double tol = 1e-9) const {
    if (probs.rank() != 3) throw DimensionError("lattice must be rank 3");
    for (std::size_t c = 0; c < probs.rows(); ++c) {
      double s = 0.0;
      for (double p : probs.row(c)) {
        if (!(p >= 0.0 && p <= 1.0)) throw NumericalError("lattice entry outside [0,1]");
        s += p;
      }
      if (std::abs(s - 1.0) > tol) throw NumericalError("lattice slice does not sum to 1");
    }
  }
};

/// Which branch's best path defines the normalization length ℓ(t).
enum class LengthRule { kDominant, kAlwaysAr, kMaxLength };

struct DecodeParams {
  double alpha = 0.5;
  double bonus = 1.0;
  /// Maximum admissible path span in frames; 0 disables pruning.
  std::size_t timeout = 0;
  LengthRule length_rule = LengthRule::kDominant;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0,1]");
    if (!(bonus > 0.0)) throw ParameterError("bonus must be > 0");
  }
};

struct DecodeTrace {
  std::vector<double> scores;  // normalized S[t]
  std::vector<double> raw;     // fused raw score before pruning and normalization
  std::vector<double> raw_ar;  // δ(t,U)·P_ar[t,U][blank]
  std::vector<double> raw_nar;
  std::vector<std::size_t> start_ar;  // 1-based start frame of each branch's best path
  std::vector<std::size_t> start_nar;
  std::vector<std::size_t> length;  // ℓ(t) in frames

  friend bool operator==(const DecodeTrace&, const DecodeTrace&) = default;
};

/// Viterbi state of one branch over the blank-prepended keyword lattice.
class KeywordViterbi {
 public:
  explicit KeywordViterbi(std::vector<std::size_t> keyword) : kw_(std::move(keyword)) {
    if (kw_.empty()) throw ParameterError("keyword must have at least one token");
    delta_.assign(kw_.size() + 1, 0.0);
    start_.assign(kw_.size() + 1, 0);
  }

  /// Consumes frame `t` (0-based) given as a flat (U+1)×(V+1) block.
  /// Returns δ(t,U)·P[t,U][blank].
  double push(std::span<const double> col, std::size_t classes) {
    const std::size_t U = kw_.size();
    const std::size_t blank = classes - 1;
    if (col.size() != (U + 1) * classes) throw DimensionError("lattice column size mismatch");
    for (std::size_t k : kw_)
      if (k >= blank) throw IndexError("keyword token outside the lattice vocabulary");
    std::vector<double> next(U + 1);
    std::vector<std::size_t> next_start(U + 1);
    next[0] = 1.0;
    next_start[0] = t_;
    for (std::size_t u = 1; u <= U; ++u) {
      const double token = next[u - 1] * col[(u - 1) * classes + kw_[u - 1]];
      const double stay = t_ > 0 ? delta_[u] * prev_blank_[u] : -1.0;
      if (token >= stay) {
        next[u] = token;
        next_start[u] = next_start[u - 1];
      } else {
        next[u] = stay;
        next_start[u] = start_[u];
      }
    }
    delta_ = std::move(next);
    start_ = std::move(next_start);
    prev_blank_.resize(U + 1);
    for (std::size_t u = 0; u <= U; ++u) prev_blank_[u] = col[u * classes + blank];
    ++t_;
    return delta_[U] * prev_blank_[U];
  }

  /// δ(t,u) after the most recent push.
  std::span<const double> delta() const { return delta_; }
  /// 0-based start frame of the best complete path after the last push.
  std::size_t best_start() const { return start_.back(); }
  std::size_t frames_seen() const { return t_; }

 private:
  std::vector<std::size_t> kw_;
  std::vector<double> delta_;
  std::vector<std::size_t> start_;
  std::vector<double> prev_blank_;
  std::size_t t_ = 0;
};

/// Frame-synchronous fused decoder. Each push depends only on the frames
/// consumed so far.
class StreamingSarDecoder {
 public:
  StreamingSarDecoder(std::vector<std::size_t> keyword, DecodeParams params)
      : ar_(keyword), nar_(keyword), params_(params) {
    params_.validate();
  }

  struct Frame {
    double score, raw, raw_ar, raw_nar;
    std::size_t start_ar, start_nar, length;
  };

  Frame push(std::span<const double> col_ar, std::span<const double> col_nar, std::size_t classes) {
    const double a = params_.alpha;
    const std::size_t t = ar_.frames_seen();
    Frame f{};
    f.raw_ar = ar_.push(col_ar, classes);
    f.raw_nar = nar_.push(col_nar, classes);
    f.raw = a * f.raw_ar + (1.0 - a) * f.raw_nar;
    const std::size_t len_ar = t - ar_.best_start() + 1;
    const std::size_t len_nar = t - nar_.best_start() + 1;
    f.start_ar = ar_.best_start() + 1;
    f.start_nar = nar_.best_start() + 1;
    switch (params_.length_rule) {
      case LengthRule::kAlwaysAr:
        f.length = len_ar;
        break;
      case LengthRule::kMaxLength:
        f.length = std::max(len_ar, len_nar);
        break;
      case LengthRule::kDominant:
        if (a == 1.0) {
          f.length = len_ar;
        } else if (a == 0.0) {
          f.length = len_nar;
        } else {
          f.length = a * f.raw_ar >= (1.0 - a) * f.raw_nar ? len_ar : len_nar;
        }
        break;
    }
    double s = f.raw;
    if (params_.timeout > 0 && f.length > params_.timeout) s = 0.0;
    f.score = std::pow(params_.bonus * s, 1.0 / double(f.length));
    return f;
  }

 private:
  KeywordViterbi ar_, nar_;
  DecodeParams params_;
};

inline void check_keyword_lattice(const PosteriorLattice& p, const std::vector<std::size_t>& kw) {
  if (p.probs.rank() != 3) throw DimensionError("lattice must be rank 3");
  if (p.rows() != kw.size() + 1) {
    throw DimensionError("lattice has " + std::to_string(p.rows()) + " rows for a keyword of " +
                         std::to_string(kw.size()) + " tokens");
  }
}

/// Fused AR/NAR decode of a whole utterance.
inline DecodeTrace sar_stream_decode(const PosteriorLattice& p_ar, const PosteriorLattice& p_nar,
                                     const std::vector<std::size_t>& keyword, const DecodeParams& params) {
  check_keyword_lattice(p_ar, keyword);
  check_keyword_lattice(p_nar, keyword);
  if (p_ar.probs.shape() != p_nar.probs.shape()) {
    throw DimensionError("AR lattice " + shape_str(p_ar.probs.shape()) + " and NAR lattice " +
                         shape_str(p_nar.probs.shape()) + " differ");
  }
  StreamingSarDecoder dec(keyword, params);
  DecodeTrace tr;
  for (std::size_t t = 0; t < p_ar.frames(); ++t) {
    const auto f = dec.push(p_ar.column(t), p_nar.column(t), p_ar.classes());
    tr.scores.push_back(f.score);
    tr.raw.push_back(f.raw);
    tr.raw_ar.push_back(f.raw_ar);
    tr.raw_nar.push_back(f.raw_nar);
    tr.start_ar.push_back(f.start_ar);
    tr.start_nar.push_back(f.start_nar);
    tr.length.push_back(f.length);
  }
  return tr;
}

/// Single-lattice decode: the AR search when given P_ar, the NAR search when
/// given P_nar. Branch fields for the absent branch are zero.
inline std::vector<double> single_branch_decode(const PosteriorLattice& p, const std::vector<std::size_t>& keyword,
                                                const DecodeParams& params, std::vector<std::size_t>* lengths = nullptr) {
  check_keyword_lattice(p, keyword);
  params.validate();
  KeywordViterbi v(keyword);
  std::vector<double> scores;
  for (std::size_t t = 0; t < p.frames(); ++t) {
    double raw = v.push(p.column(t), p.classes());
    const std::size_t len = t - v.best_start() + 1;
    if (params.timeout > 0 && len > params.timeout) raw = 0.0;
    scores.push_back(std::pow(params.bonus * raw, 1.0 / double(len)));
    if (lengths) lengths->push_back(len);
  }
  return scores;
}

struct BruteForceFrame {
  double best = 0.0;      // max path probability ending at this frame
  std::size_t span = 0;   // frame span of that path
};

/// Enumerates every path consuming y₁..y_U that starts at some frame s by
/// emitting y₁ there, moves monotonically (token: u+1, blank: t+1), and ends
/// with the terminal blank at (t,U). Throws SizeError past `budget` paths.
inline std::vector<BruteForceFrame> brute_force_keyword_score(const PosteriorLattice& p,
                                                              const std::vector<std::size_t>& keyword,
                                                              std::size_t budget = 1000000) {
  check_keyword_lattice(p, keyword);
  const std::size_t T = p.frames(), U = keyword.size(), blank = p.blank();
  std::vector<BruteForceFrame> out(T);
  std::size_t visited = 0;
  // Walk from (t,u) having probability `prob`; the path started at `s`.
  std::function<void(std::size_t, std::size_t, double, std::size_t)> walk =
      [&](std::size_t t, std::size_t u, double prob, std::size_t s) {
        if (u == U) {
          if (++visited > budget) throw SizeError("brute-force path budget exceeded");
          const double full = prob * p(t, U, blank);
          if (full > out[t].best || out[t].span == 0) {
            out[t].best = full;
            out[t].span = t - s + 1;
          }
        } else {
          walk(t, u + 1, prob * p(t, u, keyword[u]), s);
        }
        if (u > 0 && t + 1 < T) walk(t + 1, u, prob * p(t, u, blank), s);
      };
  for (std::size_t s = 0; s < T; ++s) walk(s, 1, p(s, 0, keyword[0]), s);
  return out;
}

struct UtteranceScore {
  double score = 0.0;
  std::size_t peak_frame = 1;  // 1-based
};

/// Max over frames; the earliest frame wins ties.
inline UtteranceScore utterance_score(std::span<const double> scores) {
  if (scores.empty()) throw ParameterError("empty score trace");
  UtteranceScore r{scores[0], 1};
  for (std::size_t t = 1; t < scores.size(); ++t) {
    if (scores[t] > r.score) r = {scores[t], t + 1};
  }
  return r;
}

inline UtteranceScore utterance_score(const DecodeTrace& tr) { return utterance_score(tr.scores); }

struct LatticePair {
  PosteriorLattice ar;
  PosteriorLattice nar;
};

/// AR lattice from the keyword-conditioned predictor, NAR lattice from an
/// all-zero predictor output of the same shape.
inline LatticePair decode_posteriors(const TransducerModel& model, const Tensor& features,
                                     const KeywordSpec& keyword) {
  keyword.validate(model.config().vocab_size);
  Graph g;
  auto m = model.bind_frozen(g);
  Var h_audio = m.encode(g.constant(features));
  Var h_text = m.predict(keyword.tokens);
  Var h_zero = g.constant(Tensor(h_text.shape()));
  auto to_probs = [](const Tensor& logp) {
    Tensor p = logp;
    for (auto& v : p.values()) v = std::exp(v);
    return PosteriorLattice{std::move(p)};
  };
  LatticePair out{to_probs(m.joint(h_audio, h_text).value()), to_probs(m.joint(h_audio, h_zero).value())};
  return out;
}

}  // namespace msdkws
