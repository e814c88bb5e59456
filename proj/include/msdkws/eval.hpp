// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Recall at a fixed number of false alarms.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msdkws/error.hpp"

namespace msdkws {

/// The n_fa-th largest negative score. Detections fire on score > θ, so at
/// most n_fa negatives fire; ties at θ only lower the count.
inline double threshold_for_fa(std::vector<double> neg, std::size_t n_fa) {
  if (n_fa < 1 || n_fa > neg.size()) {
    throw ParameterError("n_fa=" + std::to_string(n_fa) + " outside [1, " + std::to_string(neg.size()) + "]");
  }
  std::nth_element(neg.begin(), neg.begin() + long(n_fa - 1), neg.end(), std::greater<>());
  return neg[n_fa - 1];
}

inline double recall_at_fa(const std::vector<double>& pos, const std::vector<double>& neg, std::size_t n_fa) {
  if (pos.empty()) throw ParameterError("recall needs at least one positive score");
  const double theta = threshold_for_fa(neg, n_fa);
  const auto hits = std::count_if(pos.begin(), pos.end(), [&](double s) { return s > theta; });
  return double(hits) / double(pos.size());
}

inline double macro_recall(const std::vector<double>& per_keyword) {
  if (per_keyword.empty()) throw ParameterError("macro_recall of an empty list");
  double s = 0.0;
  for (double r : per_keyword) s += r;
  return s / double(per_keyword.size());
}

struct DetPoint {
  std::size_t n_fa;
  double recall;
  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

inline std::vector<DetPoint> det_sweep(const std::vector<double>& pos, const std::vector<double>& neg,
                                       std::vector<std::size_t> fa_list) {
  std::sort(fa_list.begin(), fa_list.end());
  std::vector<DetPoint> out;
  for (auto n : fa_list) out.push_back({n, recall_at_fa(pos, neg, n)});
  return out;
}

enum class Polarity { kPositive, kNegative };

struct EvalRecord {
  std::string utt_id;
  std::string keyword;
  Polarity label;
  double score;
};

/// Scored utterances for a set of keywords. `negative_hours`, when set,
/// enables false-alarm-per-hour reporting.
struct EvalSet {
  std::vector<EvalRecord> records;
  std::optional<double> negative_hours;

  std::vector<std::string> keywords() const {
    std::vector<std::string> out;
    for (const auto& r : records)
      if (std::find(out.begin(), out.end(), r.keyword) == out.end()) out.push_back(r.keyword);
    return out;
  }

  std::pair<std::vector<double>, std::vector<double>> scores_for(const std::string& kw) const {
    std::vector<double> pos, neg;
    for (const auto& r : records) {
      if (r.keyword != kw) continue;
      (r.label == Polarity::kPositive ? pos : neg).push_back(r.score);
    }
    return {pos, neg};
  }
};

struct KeywordReport {
  std::string keyword;
  std::vector<DetPoint> points;
};

struct MetricsReport {
  std::vector<KeywordReport> keywords;
  std::vector<DetPoint> macro;
  std::optional<double> negative_hours;

  /// `keyword\tn_fa\trecall` lines followed by `macro\tn_fa\trecall`.
  std::string to_text() const {
    std::string out;
    auto line = [&](const std::string& k, const DetPoint& p) {
      out += k + '\t' + std::to_string(p.n_fa) + '\t' + fmt(p.recall);
      if (negative_hours) out += '\t' + fmt(double(p.n_fa) / *negative_hours);
      out += '\n';
    };
    for (const auto& k : keywords)
      for (const auto& p : k.points) line(k.keyword, p);
    for (const auto& p : macro) line("macro", p);
    return out;
  }

  /// One `key=value` record per line.
  std::string to_kv() const {
    std::string out;
    auto line = [&](const std::string& k, const DetPoint& p) {
      out += "keyword=" + k + " n_fa=" + std::to_string(p.n_fa) + " recall=" + fmt(p.recall);
      if (negative_hours) out += " fa_per_hour=" + fmt(double(p.n_fa) / *negative_hours);
      out += '\n';
    };
    for (const auto& k : keywords)
      for (const auto& p : k.points) line(k.keyword, p);
    for (const auto& p : macro) line("macro", p);
    return out;
  }

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
  }
};

/// Thresholds are chosen per keyword; `macro` averages the per-keyword recalls.
inline MetricsReport evaluate(const EvalSet& set, const std::vector<std::size_t>& fa_list) {
  MetricsReport rep;
  rep.negative_hours = set.negative_hours;
  for (const auto& kw : set.keywords()) {
    auto [pos, neg] = set.scores_for(kw);
    rep.keywords.push_back({kw, det_sweep(pos, neg, fa_list)});
  }
  if (rep.keywords.empty()) throw ParameterError("no scored keywords to evaluate");
  const auto& first = rep.keywords.front().points;
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::vector<double> r;
    for (const auto& k : rep.keywords) r.push_back(k.points[i].recall);
    rep.macro.push_back({first[i].n_fa, macro_recall(r)});
  }
  return rep;
}

}  // namespace msdkws
