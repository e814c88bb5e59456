// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Run configuration: `key = value` lines, `#` comments, unknown keys rejected.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "msdkws/data.hpp"
#include "msdkws/decoder.hpp"
#include "msdkws/error.hpp"
#include "msdkws/model.hpp"
#include "msdkws/trainer.hpp"

namespace msdkws {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeParams decode;
  SyntheticTaskConfig data;
  std::size_t stack_left = 1;
  std::size_t stack_right = 1;
  std::vector<std::size_t> fa_list = {1, 2, 3, 4, 5, 6, 12, 24};

  /// Cross-section checks (shared vocabulary, stacked width).
  void validate() const {
    model.validate();
    train.validate();
    decode.validate();
    if (data.vocab != model.vocab_size) throw ConfigError("vocab_size mismatch between model and data");
    if (model.feature_dim != data.raw_dim * (stack_left + stack_right + 1)) {
      throw ConfigError("feature_dim " + std::to_string(model.feature_dim) + " != raw_dim * (stack_left + stack_right + 1) = " +
                        std::to_string(data.raw_dim * (stack_left + stack_right + 1)));
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return std::size_t(x);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_size(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// keywords = name:1 2 3, other:4 5
inline std::vector<KeywordSpec> parse_keywords(const std::string& key, const std::string& v) {
  std::vector<KeywordSpec> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(key + ": expected name:tok tok ..., got '" + item + "'");
    KeywordSpec k{trim(item.substr(0, colon)), {}};
    for (const auto& t : [&] {
           std::vector<std::string> w;
           std::istringstream ts(item.substr(colon + 1));
           std::string x;
           while (ts >> x) w.push_back(x);
           return w;
         }())
      k.tokens.push_back(parse_size(key, t));
    if (k.name.empty() || k.tokens.empty()) throw ConfigError(key + ": malformed keyword '" + item + "'");
    out.push_back(std::move(k));
  }
  if (out.empty()) throw ConfigError(key + ": no keywords");
  return out;
}

inline std::string format_keywords(const std::vector<KeywordSpec>& kws) {
  std::string s;
  for (std::size_t i = 0; i < kws.size(); ++i) s += (i ? ", " : "") + kws[i].name + ":" + join_tokens(kws[i].tokens);
  return s;
}

inline LengthRule parse_length_rule(const std::string& key, const std::string& v) {
  if (v == "dominant") return LengthRule::kDominant;
  if (v == "ar") return LengthRule::kAlwaysAr;
  if (v == "max") return LengthRule::kMaxLength;
  throw ConfigError(key + ": expected dominant|ar|max, got '" + v + "'");
}

inline std::string format_length_rule(LengthRule r) {
  switch (r) {
    case LengthRule::kAlwaysAr: return "ar";
    case LengthRule::kMaxLength: return "max";
    default: return "dominant";
  }
}

struct KeyBinding {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<std::pair<std::string, KeyBinding>>& config_keys() {
  using C = RunConfig;
#define MSDKWS_SIZE(name, expr)                                                                         \
  {                                                                                                     \
    name, KeyBinding {                                                                                  \
      [](C& c, const std::string& k, const std::string& v) { expr = parse_size(k, v); },               \
          [](const C& c) { return std::to_string(expr); }                                               \
    }                                                                                                   \
  }
#define MSDKWS_DOUBLE(name, expr)                                                                       \
  {                                                                                                     \
    name, KeyBinding {                                                                                  \
      [](C& c, const std::string& k, const std::string& v) { expr = parse_double(k, v); },             \
          [](const C& c) { return fmt_double(expr); }                                                   \
    }                                                                                                   \
  }
#define MSDKWS_BOOL(name, expr)                                                                         \
  {                                                                                                     \
    name, KeyBinding {                                                                                  \
      [](C& c, const std::string& k, const std::string& v) { expr = parse_bool(k, v); },               \
          [](const C& c) { return std::string((expr) ? "true" : "false"); }                             \
    }                                                                                                   \
  }
  static const std::vector<std::pair<std::string, KeyBinding>> keys = {
      // model
      MSDKWS_SIZE("feature_dim", c.model.feature_dim),
      MSDKWS_SIZE("encoder_layers", c.model.encoder_layers),
      MSDKWS_SIZE("encoder_hidden", c.model.encoder_hidden),
      MSDKWS_SIZE("encoder_out", c.model.encoder_out),
      MSDKWS_SIZE("dfsmn_left", c.model.dfsmn_left),
      MSDKWS_SIZE("dfsmn_right", c.model.dfsmn_right),
      MSDKWS_SIZE("predictor_context", c.model.predictor_context),
      MSDKWS_SIZE("embed_dim", c.model.embed_dim),
      MSDKWS_SIZE("joiner_hidden", c.model.joiner_hidden),
      {"vocab_size", KeyBinding{[](C& c, const std::string& k, const std::string& v) {
                                  c.model.vocab_size = c.data.vocab = parse_size(k, v);
                                },
                                [](const C& c) { return std::to_string(c.model.vocab_size); }}},
      {"mask_prob", KeyBinding{[](C& c, const std::string& k, const std::string& v) {
                                 c.model.mask_prob = c.train.mask_prob = parse_double(k, v);
                               },
                               [](const C& c) { return fmt_double(c.train.mask_prob); }}},
      // training
      MSDKWS_DOUBLE("lr", c.train.lr),
      MSDKWS_DOUBLE("beta1", c.train.beta1),
      MSDKWS_DOUBLE("beta2", c.train.beta2),
      MSDKWS_DOUBLE("adam_eps", c.train.adam_eps),
      MSDKWS_DOUBLE("weight_decay", c.train.weight_decay),
      MSDKWS_SIZE("max_frames", c.train.max_frames),
      MSDKWS_SIZE("max_samples", c.train.max_samples),
      MSDKWS_SIZE("epochs", c.train.epochs),
      MSDKWS_DOUBLE("lambda_mask", c.train.lambda_mask),
      MSDKWS_DOUBLE("lambda_msd", c.train.lambda_msd),
      MSDKWS_BOOL("msd_masked_only", c.train.msd_masked_only),
      MSDKWS_SIZE("seed", c.train.seed),
      MSDKWS_DOUBLE("plateau_factor", c.train.plateau_factor),
      MSDKWS_SIZE("plateau_patience", c.train.plateau_patience),
      MSDKWS_DOUBLE("plateau_threshold", c.train.plateau_threshold),
      MSDKWS_DOUBLE("val_fraction", c.train.val_fraction),
      // decoding
      MSDKWS_DOUBLE("alpha", c.decode.alpha),
      MSDKWS_DOUBLE("bonus", c.decode.bonus),
      MSDKWS_SIZE("timeout", c.decode.timeout),
      {"length_rule", KeyBinding{[](C& c, const std::string& k, const std::string& v) {
                                   c.decode.length_rule = parse_length_rule(k, v);
                                 },
                                 [](const C& c) { return format_length_rule(c.decode.length_rule); }}},
      // data
      MSDKWS_SIZE("raw_dim", c.data.raw_dim),
      {"keywords", KeyBinding{[](C& c, const std::string& k, const std::string& v) {
                                c.data.keywords = parse_keywords(k, v);
                              },
                              [](const C& c) { return format_keywords(c.data.keywords); }}},
      MSDKWS_SIZE("dur_min", c.data.dur_min),
      MSDKWS_SIZE("dur_max", c.data.dur_max),
      MSDKWS_DOUBLE("noise", c.data.noise),
      MSDKWS_DOUBLE("distractor_prob", c.data.distractor_prob),
      MSDKWS_SIZE("positives", c.data.positives),
      MSDKWS_SIZE("negatives", c.data.negatives),
      MSDKWS_SIZE("context_min", c.data.context_min),
      MSDKWS_SIZE("context_max", c.data.context_max),
      MSDKWS_BOOL("keyword_only_positives", c.data.keyword_only_positives),
      MSDKWS_SIZE("data_seed", c.data.seed),
      MSDKWS_SIZE("stack_left", c.stack_left),
      MSDKWS_SIZE("stack_right", c.stack_right),
      // evaluation
      {"fa_list", KeyBinding{[](C& c, const std::string& k, const std::string& v) {
                               c.fa_list = parse_size_list(k, v);
                             },
                             [](const C& c) { return join_sizes(c.fa_list); }}},
  };
#undef MSDKWS_SIZE
#undef MSDKWS_DOUBLE
#undef MSDKWS_BOOL
  return keys;
}

}  // namespace detail

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& [k, b] : detail::config_keys()) {
    if (k == key) {
      b.set(c, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

/// Parses `key = value` text. `where` prefixes error messages.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& where = "config") {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      set_config_value(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c;
  apply_config_text(c, ss.str(), path.string());
  return c;
}

/// `key = value` for every key, in a fixed order.
inline std::string format_config(const RunConfig& c) {
  std::string out;
  for (const auto& [k, b] : detail::config_keys()) out += k + " = " + b.get(c) + '\n';
  return out;
}

}  // namespace msdkws
