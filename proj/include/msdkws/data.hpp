// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Synthetic keyword corpora, feature files, frame stacking, manifests.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "msdkws/container.hpp"
#include "msdkws/error.hpp"
#include "msdkws/rng.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

struct KeywordSpec {
  std::string name;
  std::vector<std::size_t> tokens;

  void validate(std::size_t vocab) const {
    if (tokens.empty()) throw ConfigError("keyword " + name + " has no tokens");
    for (auto t : tokens)
      if (t >= vocab) throw ConfigError("keyword " + name + " uses token " + std::to_string(t) + " >= vocab");
  }
};

/// True when `needle` occurs as a contiguous run inside `hay`.
inline bool contains_run(const std::vector<std::size_t>& hay, const std::vector<std::size_t>& needle) {
  return !needle.empty() && std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

// ---------------------------------------------------------------------------
// Feature files: "FEAT" | version u32 | T u32 | f u32 | f64[T·f], little-endian
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::string encode_features(const Tensor& feats) {
  if (feats.rank() != 2 || feats.empty()) throw FormatError("features must be a non-empty T×f matrix");
  std::string out = "FEAT";
  detail::put_le<std::uint32_t>(out, kFeatureVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(feats.dim(0)));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(feats.dim(1)));
  for (double v : feats.data()) detail::put_le<double>(out, v);
  return out;
}

inline Tensor decode_features(const std::string& bytes, const std::string& what = "features") {
  detail::ByteReader r(bytes, what);
  if (r.get_bytes(4) != "FEAT") throw FormatError(what + ": bad magic at byte offset 0");
  const auto version = r.get<std::uint32_t>();
  if (version != kFeatureVersion) throw FormatError(what + ": unsupported version " + std::to_string(version) +
                                                    " at byte offset 4");
  const auto t = r.get<std::uint32_t>();
  const auto f = r.get<std::uint32_t>();
  if (t == 0 || f == 0) throw FormatError(what + ": empty feature matrix at byte offset 8");
  const std::size_t n = std::size_t(t) * f;
  r.need(n * sizeof(double));
  std::vector<double> data(n);
  for (auto& v : data) v = r.get<double>();
  if (r.remaining() != 0) {
    throw FormatError(what + ": " + std::to_string(r.remaining()) + " trailing bytes at byte offset " +
                      std::to_string(r.pos()));
  }
  return Tensor({t, f}, std::move(data));
}

inline void write_features(const std::filesystem::path& path, const Tensor& feats) {
  detail::write_file_atomic(path, encode_features(feats));
}

inline Tensor read_features(const std::filesystem::path& path) {
  return decode_features(detail::read_file(path), path.string());
}

/// Concatenates each frame with `left` previous and `right` following frames,
/// replicating the edge frames where neighbors fall outside the utterance.
inline Tensor stack_frames(const Tensor& raw, std::size_t left, std::size_t right) {
  if (raw.rank() != 2) throw DimensionError("stack_frames expects T×f");
  const std::size_t t = raw.dim(0), f = raw.dim(1), w = left + right + 1;
  Tensor out({t, f * w});
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t k = 0; k < w; ++k) {
      const long src = std::clamp<long>(long(i) + long(k) - long(left), 0, long(t) - 1);
      std::copy_n(raw.data().data() + std::size_t(src) * f, f, out.data().data() + i * f * w + k * f);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests: utt_id \t relative/path.feat \t pos|neg \t tok tok tok
// ---------------------------------------------------------------------------

enum class Label { kPositive, kNegative };

struct ManifestRecord {
  std::string utt_id;
  std::string path;  // relative to the manifest's directory
  Label label;
  std::vector<std::size_t> tokens;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  std::filesystem::path feature_path(const ManifestRecord& r) const { return base_dir / r.path; }
};

inline std::string join_tokens(const std::vector<std::size_t>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) s += (i ? " " : "") + std::to_string(toks[i]);
  return s;
}

inline std::vector<std::size_t> parse_tokens(const std::string& s, const std::string& ctx) {
  std::istringstream is(s);
  std::vector<std::size_t> out;
  std::string w;
  while (is >> w) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(w, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != w.size() || w[0] == '-') throw FormatError(ctx + ": bad token '" + w + "'");
    out.push_back(v);
  }
  return out;
}

inline std::string encode_manifest(const Manifest& m) {
  std::string out;
  for (const auto& r : m.records) {
    out += r.utt_id + '\t' + r.path + '\t' + (r.label == Label::kPositive ? "pos" : "neg") + '\t' +
           join_tokens(r.tokens) + '\n';
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  detail::write_file_atomic(path, encode_manifest(m));
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 4) throw FormatError(ctx + ": expected 4 tab-separated fields, got " + std::to_string(f.size()));
    ManifestRecord r;
    r.utt_id = f[0];
    r.path = f[1];
    if (f[2] == "pos") {
      r.label = Label::kPositive;
    } else if (f[2] == "neg") {
      r.label = Label::kNegative;
    } else {
      throw FormatError(ctx + ": label must be pos or neg, got '" + f[2] + "'");
    }
    r.tokens = parse_tokens(f[3], ctx);
    m.records.push_back(std::move(r));
  }
  return m;
}

// Keyword list file: name \t tok tok tok
inline void write_keywords(const std::filesystem::path& path, const std::vector<KeywordSpec>& kws) {
  std::string out;
  for (const auto& k : kws) out += k.name + '\t' + join_tokens(k.tokens) + '\n';
  detail::write_file_atomic(path, out);
}

inline std::vector<KeywordSpec> read_keywords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keyword file " + path.string());
  std::vector<KeywordSpec> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing tab");
    out.push_back({line.substr(0, tab), parse_tokens(line.substr(tab + 1), path.string())});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct SyntheticTaskConfig {
  std::size_t vocab = 8;
  std::size_t raw_dim = 8;
  std::vector<KeywordSpec> keywords = {{"kw0", {1, 2, 3}}};
  std::size_t dur_min = 2;
  std::size_t dur_max = 4;
  double noise = 0.3;
  double distractor_prob = 0.0;
  std::size_t positives = 100;
  std::size_t negatives = 100;
  /// Context tokens around the keyword in positives; negatives get
  /// keyword_length + [context_min, context_max] tokens.
  std::size_t context_min = 2;
  std::size_t context_max = 5;
  /// Positives consist of the keyword alone (no context).
  bool keyword_only_positives = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (raw_dim < vocab) throw ConfigError("raw_dim must be >= vocab_size (one-hot rendering)");
    if (dur_min < 1 || dur_max < dur_min) throw ConfigError("need 1 <= dur_min <= dur_max");
    if (keywords.empty()) throw ConfigError("at least one keyword is required");
    for (const auto& k : keywords) k.validate(vocab);
    if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
    if (!(distractor_prob >= 0.0 && distractor_prob <= 1.0)) throw ConfigError("distractor_prob must lie in [0,1]");
    if (context_max < context_min) throw ConfigError("need context_min <= context_max");
    if (vocab < 2) throw ConfigError("vocab_size must be >= 2 to build negatives");
  }
};

struct SyntheticUtterance {
  std::string utt_id;
  Label label;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> durations;
  bool distractor = false;
  Tensor features;  // raw, T×raw_dim
};

namespace detail {

inline bool contains_any(const std::vector<std::size_t>& toks, const std::vector<KeywordSpec>& kws) {
  return std::any_of(kws.begin(), kws.end(), [&](const KeywordSpec& k) { return contains_run(toks, k.tokens); });
}

inline std::vector<std::size_t> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::size_t> t(n);
  for (auto& x : t) x = uniform_int(rng, 0, vocab - 1);
  return t;
}

inline void render(SyntheticUtterance& u, const SyntheticTaskConfig& c, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t frames = 0;
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    u.durations.push_back(uniform_int(rng, c.dur_min, c.dur_max));
    frames += u.durations.back();
  }
  u.features = Tensor({frames, c.raw_dim});
  std::size_t row = 0;
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    for (std::size_t d = 0; d < u.durations[i]; ++d, ++row) {
      for (std::size_t k = 0; k < c.raw_dim; ++k) {
        const double base = k == u.tokens[i] ? 1.0 : 0.0;
        u.features(row, k) = c.noise > 0.0 ? base + c.noise * gauss(rng) : base;
      }
    }
  }
}

inline std::string pad_index(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 5 ? 5 - s.size() : 0, '0') + s;
}

}  // namespace detail

inline SyntheticUtterance make_positive(const SyntheticTaskConfig& c, std::size_t index) {
  Rng rng(mix_seed(c.seed, {1, index}));
  SyntheticUtterance u;
  u.utt_id = "pos_" + detail::pad_index(index);
  u.label = Label::kPositive;
  const auto& kw = c.keywords[uniform_int(rng, 0, c.keywords.size() - 1)].tokens;
  if (c.keyword_only_positives) {
    u.tokens = kw;
  } else {
    const std::size_t n = uniform_int(rng, c.context_min, c.context_max);
    const std::size_t at = uniform_int(rng, 0, n);
    u.tokens = detail::random_tokens(rng, n, c.vocab);
    u.tokens.insert(u.tokens.begin() + long(at), kw.begin(), kw.end());
  }
  detail::render(u, c, rng);
  return u;
}

inline SyntheticUtterance make_negative(const SyntheticTaskConfig& c, std::size_t index) {
  Rng rng(mix_seed(c.seed, {2, index}));
  SyntheticUtterance u;
  u.utt_id = "neg_" + detail::pad_index(index);
  u.label = Label::kNegative;
  u.distractor = uniform01(rng) < c.distractor_prob;
  std::size_t kw_min = SIZE_MAX, kw_max = 0;
  for (const auto& k : c.keywords) {
    kw_min = std::min(kw_min, k.tokens.size());
    kw_max = std::max(kw_max, k.tokens.size());
  }
  for (;;) {
    if (u.distractor) {
      auto kw = c.keywords[uniform_int(rng, 0, c.keywords.size() - 1)].tokens;
      const std::size_t pos = uniform_int(rng, 0, kw.size() - 1);
      const std::size_t sub = uniform_int(rng, 0, c.vocab - 2);
      kw[pos] = sub >= kw[pos] ? sub + 1 : sub;  // any token but the original
      const std::size_t n = uniform_int(rng, c.context_min, c.context_max);
      const std::size_t at = uniform_int(rng, 0, n);
      u.tokens = detail::random_tokens(rng, n, c.vocab);
      u.tokens.insert(u.tokens.begin() + long(at), kw.begin(), kw.end());
    } else {
      const std::size_t n = uniform_int(rng, kw_min + c.context_min, kw_max + c.context_max);
      u.tokens = detail::random_tokens(rng, std::max<std::size_t>(n, 1), c.vocab);
    }
    if (!detail::contains_any(u.tokens, c.keywords)) break;
  }
  detail::render(u, c, rng);
  return u;
}

inline std::vector<SyntheticUtterance> generate_utterances(const SyntheticTaskConfig& c) {
  c.validate();
  std::vector<SyntheticUtterance> out;
  out.reserve(c.positives + c.negatives);
  for (std::size_t i = 0; i < c.positives; ++i) out.push_back(make_positive(c, i));
  for (std::size_t i = 0; i < c.negatives; ++i) out.push_back(make_negative(c, i));
  return out;
}

struct CorpusSummary {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t distractors = 0;
  std::size_t frames = 0;
  double mean_frames() const {
    const auto n = positives + negatives;
    return n ? double(frames) / double(n) : 0.0;
  }
};

/// Writes feats/<utt>.feat, manifest.tsv, and keywords.txt under `out_dir`.
inline CorpusSummary generate_corpus(const SyntheticTaskConfig& c, const std::filesystem::path& out_dir) {
  const auto utts = generate_utterances(c);
  std::filesystem::create_directories(out_dir / "feats");
  Manifest man;
  man.base_dir = out_dir;
  CorpusSummary s;
  for (const auto& u : utts) {
    const std::string rel = "feats/" + u.utt_id + ".feat";
    write_features(out_dir / rel, u.features);
    man.records.push_back({u.utt_id, rel, u.label, u.tokens});
    (u.label == Label::kPositive ? s.positives : s.negatives)++;
    s.distractors += u.distractor ? 1 : 0;
    s.frames += u.features.dim(0);
  }
  write_manifest(out_dir / "manifest.tsv", man);
  write_keywords(out_dir / "keywords.txt", c.keywords);
  return s;
}

}  // namespace msdkws
