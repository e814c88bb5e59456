// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Batch decoding over manifests and score-file I/O.
#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "msdkws/container.hpp"
#include "msdkws/data.hpp"
#include "msdkws/decoder.hpp"
#include "msdkws/error.hpp"
#include "msdkws/eval.hpp"
#include "msdkws/model.hpp"
#include "msdkws/trainer.hpp"

namespace msdkws {

/// Worker count: hardware concurrency capped by MSDKWS_THREADS when set.
inline std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MSDKWS_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<std::size_t>(n, std::size_t(cap));
  }
  return n;
}

/// Runs fn(i) for i in [0,n) over `threads` workers in contiguous chunks.
/// The first exception thrown by any worker is rethrown.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * n / threads; i < (w + 1) * n / threads; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum class DecodeMode { kAr, kNar, kSar };

inline DecodeMode parse_mode(const std::string& s) {
  if (s == "ar") return DecodeMode::kAr;
  if (s == "nar") return DecodeMode::kNar;
  if (s == "sar") return DecodeMode::kSar;
  throw ParameterError("mode must be ar, nar or sar, got '" + s + "'");
}

struct ScoreLine {
  std::string utt_id;
  double score = 0.0;
  std::size_t peak_frame = 1;

  friend bool operator==(const ScoreLine&, const ScoreLine&) = default;
};

/// `utt_id\tscore\tpeak_frame`, score printed with round-trip precision.
inline std::string encode_scores(const std::vector<ScoreLine>& lines) {
  std::string out;
  char buf[64];
  for (const auto& l : lines) {
    std::snprintf(buf, sizeof buf, "\t%.17g\t%zu\n", l.score, l.peak_frame);
    out += l.utt_id + buf;
  }
  return out;
}

inline void write_scores(const std::filesystem::path& path, const std::vector<ScoreLine>& lines) {
  detail::write_file_atomic(path, encode_scores(lines));
}

inline std::vector<ScoreLine> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scores file " + path.string());
  std::vector<ScoreLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected utt_id\\tscore\\tpeak_frame");
    }
    ScoreLine s;
    s.utt_id = line.substr(0, a);
    try {
      std::size_t pos = 0;
      const std::string sc = line.substr(a + 1, b - a - 1);
      s.score = std::stod(sc, &pos);
      if (pos != sc.size()) throw std::invalid_argument("score");
      const std::string pk = line.substr(b + 1);
      s.peak_frame = std::stoul(pk, &pos);
      if (pos != pk.size()) throw std::invalid_argument("peak");
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed score line");
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline const KeywordSpec& find_keyword(const std::vector<KeywordSpec>& kws, const std::string& name) {
  for (const auto& k : kws)
    if (k.name == name) return k;
  std::string known;
  for (const auto& k : kws) known += (known.empty() ? "" : ", ") + k.name;
  throw ParameterError("unknown keyword '" + name + "' (known: " + known + ")");
}

/// Posterior lattices for every item, computed in parallel.
inline std::vector<LatticePair> compute_lattices(const TransducerModel& model, const std::vector<TrainItem>& items,
                                                 const KeywordSpec& kw, std::size_t threads = worker_count()) {
  std::vector<LatticePair> out(items.size());
  parallel_for(items.size(), threads, [&](std::size_t i) {
    out[i] = decode_posteriors(model, items[i].sample.features, kw);
  });
  return out;
}

inline std::vector<double> decode_scores(const LatticePair& lat, const KeywordSpec& kw, DecodeMode mode,
                                         const DecodeParams& params) {
  switch (mode) {
    case DecodeMode::kAr: return single_branch_decode(lat.ar, kw.tokens, params);
    case DecodeMode::kNar: return single_branch_decode(lat.nar, kw.tokens, params);
    default: return sar_stream_decode(lat.ar, lat.nar, kw.tokens, params).scores;
  }
}

/// Utterance scores from cached lattices. `mode` kSar with the given alpha.
inline std::vector<ScoreLine> score_lattices(const std::vector<LatticePair>& lattices,
                                             const std::vector<TrainItem>& items, const KeywordSpec& kw,
                                             DecodeMode mode, const DecodeParams& params,
                                             std::size_t threads = worker_count()) {
  std::vector<ScoreLine> out(lattices.size());
  parallel_for(lattices.size(), threads, [&](std::size_t i) {
    const auto s = utterance_score(decode_scores(lattices[i], kw, mode, params));
    out[i] = {items[i].utt_id, s.score, s.peak_frame};
  });
  return out;
}

/// Splits scores by manifest label for one keyword: positives whose
/// transcript contains the keyword, and all negatives.
inline std::pair<std::vector<double>, std::vector<double>> split_scores(const Manifest& m,
                                                                        const std::vector<ScoreLine>& scores,
                                                                        const KeywordSpec& kw) {
  if (m.records.size() != scores.size()) throw ParameterError("scores and manifest differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& r = m.records[i];
    if (r.utt_id != scores[i].utt_id) throw ParameterError("scores out of manifest order at " + r.utt_id);
    if (r.label == Label::kNegative) {
      neg.push_back(scores[i].score);
    } else if (contains_run(r.tokens, kw.tokens)) {
      pos.push_back(scores[i].score);
    }
  }
  return {pos, neg};
}

}  // namespace msdkws
