// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors
//
// Transducer: DFSMN encoder, stateless predictor, add-then-tanh joiner.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msdkws/autograd.hpp"
#include "msdkws/container.hpp"
#include "msdkws/error.hpp"
#include "msdkws/rng.hpp"
#include "msdkws/tensor.hpp"

namespace msdkws {

struct ModelConfig {
  std::size_t feature_dim = 24;
  std::size_t encoder_layers = 3;
  std::size_t encoder_hidden = 64;
  std::size_t encoder_out = 32;
  std::size_t dfsmn_left = 4;
  std::size_t dfsmn_right = 2;
  std::size_t predictor_context = 2;
  std::size_t embed_dim = 32;
  std::size_t joiner_hidden = 32;
  std::size_t vocab_size = 8;  // tokens, blank excluded
  double mask_prob = 0.35;

  std::size_t blank() const noexcept { return vocab_size; }
  std::size_t output_dim() const noexcept { return vocab_size + 1; }
  /// Predictor embedding row used for "no history".
  std::size_t start_row() const noexcept { return vocab_size + 1; }

  void validate() const {
    const std::pair<const char*, std::size_t> dims[] = {
        {"feature_dim", feature_dim},     {"encoder_layers", encoder_layers},
        {"encoder_hidden", encoder_hidden}, {"encoder_out", encoder_out},
        {"dfsmn_left", dfsmn_left},       {"dfsmn_right", dfsmn_right},
        {"predictor_context", predictor_context}, {"embed_dim", embed_dim},
        {"joiner_hidden", joiner_hidden}, {"vocab_size", vocab_size}};
    for (const auto& [name, v] : dims) {
      if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    }
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob must lie in [0,1]");
  }

  std::vector<double> to_vector() const {
    return {double(feature_dim), double(encoder_layers), double(encoder_hidden), double(encoder_out),
            double(dfsmn_left),  double(dfsmn_right),    double(predictor_context), double(embed_dim),
            double(joiner_hidden), double(vocab_size),   mask_prob};
  }

  static ModelConfig from_vector(const std::vector<double>& v) {
    if (v.size() != 11) throw FormatError("model config record has " + std::to_string(v.size()) + " fields");
    ModelConfig c;
    std::size_t* dims[] = {&c.feature_dim, &c.encoder_layers, &c.encoder_hidden, &c.encoder_out,
                           &c.dfsmn_left,  &c.dfsmn_right,    &c.predictor_context, &c.embed_dim,
                           &c.joiner_hidden, &c.vocab_size};
    for (std::size_t i = 0; i < 10; ++i) *dims[i] = static_cast<std::size_t>(v[i]);
    c.mask_prob = v[10];
    c.validate();
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-row Bernoulli(γ) draw; true = masked.
inline std::vector<bool> draw_mask(std::size_t rows, double gamma, std::uint64_t seed) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("mask probability must lie in [0,1]");
  Rng rng(seed);
  std::vector<bool> mask(rows);
  for (std::size_t i = 0; i < rows; ++i) mask[i] = uniform01(rng) < gamma;
  return mask;
}

struct MaskedText {
  Var h_mask;
  std::vector<bool> mask;
};

/// Token-level RandomMask: zeroes whole predictor rows with probability γ.
inline MaskedText random_mask(Var h_text, double gamma, std::uint64_t seed) {
  auto mask = draw_mask(h_text.value().dim(0), gamma, seed);
  return {mask_rows(h_text, mask), std::move(mask)};
}

class TransducerModel;

/// Model parameters bound to a graph; the forward passes live here.
class BoundModel {
 public:
  BoundModel(const TransducerModel& m, Graph& g, bool trainable);

  const ModelConfig& config() const noexcept { return cfg_; }
  Graph& graph() const noexcept { return *g_; }

  /// features [T×F] → h_audio [T×D]. Frames at or past `valid` are padding:
  /// memory taps never reach them and, after take_rows, they are dropped.
  Var encode(Var features, std::size_t valid) const {
    const std::size_t t = features.value().dim(0);
    if (t == 0 || valid == 0) throw DimensionError("encode needs at least one frame");
    if (features.value().rank() != 2 || features.value().dim(1) != cfg_.feature_dim) {
      throw DimensionError("features shape " + shape_str(features.shape()) + " does not match feature_dim " +
                           std::to_string(cfg_.feature_dim));
    }
    Var x = features;
    Var prev_mem;
    bool have_prev = false;
    for (const auto& layer : layers_) {
      Var h = relu(add_bias(matmul(x, layer.w_in), layer.b_in));
      Var p = matmul(h, layer.w_mem);
      Var m = fsmn_memory(p, layer.left, layer.right, valid);
      if (have_prev) m = add(m, prev_mem);
      prev_mem = m;
      have_prev = true;
      x = m;
    }
    Var out = add_bias(matmul(x, enc_out_w_), enc_out_b_);
    return take_rows(out, std::min(valid, t));
  }

  Var encode(Var features) const { return encode(features, features.value().dim(0)); }

  /// tokens (length U) → h_text [(U+1)×D]; row u sees the first u tokens.
  Var predict(const std::vector<std::size_t>& tokens) const {
    const std::size_t c = cfg_.predictor_context;
    const std::size_t rows = tokens.size() + 1;
    std::vector<std::size_t> ids;
    ids.reserve(rows * c);
    for (std::size_t t : tokens) {
      if (t >= cfg_.vocab_size) {
        throw IndexError("token id " + std::to_string(t) + " >= vocab_size " + std::to_string(cfg_.vocab_size));
      }
    }
    for (std::size_t u = 0; u < rows; ++u) {
      for (std::size_t k = c; k >= 1; --k) {
        // history position u−k (0-based into tokens), oldest first
        ids.push_back(u >= k ? tokens[u - k] : cfg_.start_row());
      }
    }
    Var e = embedding_lookup(embed_, ids);
    Var ctx = reshape(e, {rows, c * cfg_.embed_dim});
    return relu(add_bias(matmul(ctx, pred_w_), pred_b_));
  }

  /// Log-posteriors [T×R×(V+1)] for every (frame, predictor row) pair.
  Var joint(Var h_audio, Var h_dec) const {
    if (h_audio.value().dim(1) != h_dec.value().dim(1)) {
      throw DimensionError("joint: encoder width " + std::to_string(h_audio.value().dim(1)) +
                           " vs predictor width " + std::to_string(h_dec.value().dim(1)));
    }
    const std::size_t t = h_audio.value().dim(0), r = h_dec.value().dim(0);
    Var a = matmul(h_audio, join_wa_);
    Var d = add_bias(matmul(h_dec, join_wd_), join_b_);
    Var hidden = tanh(pairwise_add(a, d));
    Var logits = add_bias(matmul(hidden, join_wo_), join_bo_);
    return reshape(log_softmax(logits), {t, r, cfg_.output_dim()});
  }

 private:
  struct Layer {
    Var w_in, b_in, w_mem, left, right;
  };
  ModelConfig cfg_;
  Graph* g_;
  std::vector<Layer> layers_;
  Var enc_out_w_, enc_out_b_;
  Var embed_, pred_w_, pred_b_;
  Var join_wa_, join_wd_, join_b_, join_wo_, join_bo_;
};

class TransducerModel {
 public:
  explicit TransducerModel(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg_.validate();
    build();
    initialize(seed);
  }

  const ModelConfig& config() const noexcept { return cfg_; }

  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }

  std::vector<Parameter*> param_ptrs() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }

  const Parameter& param(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p;
    throw IndexError("no parameter named " + name);
  }
  Parameter& param(const std::string& name) {
    return const_cast<Parameter&>(std::as_const(*this).param(name));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Parameters become graph leaves; backward() accumulates into their grads.
  BoundModel bind(Graph& g) { return BoundModel(*this, g, true); }
  /// Parameters become constants.
  BoundModel bind_frozen(Graph& g) const { return BoundModel(*this, g, false); }

  // Inference helpers on plain tensors.
  Tensor encode(const Tensor& features) const {
    Graph g;
    auto m = bind_frozen(g);
    return m.encode(g.constant(features)).value();
  }
  Tensor predict(const std::vector<std::size_t>& tokens) const {
    Graph g;
    auto m = bind_frozen(g);
    return m.predict(tokens).value();
  }
  Tensor joint(const Tensor& h_audio, const Tensor& h_dec) const {
    Graph g;
    auto m = bind_frozen(g);
    return m.joint(g.constant(h_audio), g.constant(h_dec)).value();
  }

  std::vector<NamedTensor> to_tensors() const {
    std::vector<NamedTensor> out;
    out.push_back({"meta.model_config", Tensor({11}, cfg_.to_vector())});
    for (const auto& p : params_) out.push_back({p.name, p.value});
    return out;
  }

  /// Rebuilds a model from container records. Records whose names start
  /// with "adam." or "trainer." are ignored; any other mismatch is an error.
  static TransducerModel from_tensors(const std::vector<NamedTensor>& records) {
    const NamedTensor* meta = nullptr;
    for (const auto& r : records)
      if (r.name == "meta.model_config") meta = &r;
    if (!meta) throw FormatError("checkpoint has no meta.model_config record");
    TransducerModel m(ModelConfig::from_vector(meta->tensor.values()));
    std::vector<bool> seen(m.params_.size(), false);
    for (const auto& r : records) {
      if (&r == meta || r.name.starts_with("adam.") || r.name.starts_with("trainer.")) continue;
      bool found = false;
      for (std::size_t i = 0; i < m.params_.size(); ++i) {
        if (m.params_[i].name != r.name) continue;
        if (m.params_[i].value.shape() != r.tensor.shape()) {
          throw FormatError("checkpoint tensor " + r.name + " has shape " + shape_str(r.tensor.shape()) +
                            ", config expects " + shape_str(m.params_[i].value.shape()));
        }
        m.params_[i].value = r.tensor;
        seen[i] = true;
        found = true;
      }
      if (!found) throw FormatError("unexpected checkpoint tensor " + r.name);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw FormatError("checkpoint is missing tensor " + m.params_[i].name);
    return m;
  }

  void save(const std::filesystem::path& path) const { save_container(path, to_tensors()); }

  static TransducerModel load(const std::filesystem::path& path) { return from_tensors(load_container(path)); }

  /// Loads and additionally checks that the stored config equals `expected`.
  static TransducerModel load(const std::filesystem::path& path, const ModelConfig& expected) {
    auto m = load(path);
    if (!(m.config() == expected)) throw FormatError(path.string() + ": model config differs from the run config");
    return m;
  }

 private:
  void add(std::string name, Shape shape) { params_.emplace_back(std::move(name), Tensor(std::move(shape))); }

  void build() {
    const auto& c = cfg_;
    std::size_t in = c.feature_dim;
    for (std::size_t l = 0; l < c.encoder_layers; ++l) {
      const std::string p = "enc.l" + std::to_string(l) + ".";
      add(p + "w_in", {in, c.encoder_hidden});
      add(p + "b_in", {c.encoder_hidden});
      add(p + "w_mem", {c.encoder_hidden, c.encoder_out});
      add(p + "left", {c.dfsmn_left, c.encoder_out});
      add(p + "right", {c.dfsmn_right, c.encoder_out});
      in = c.encoder_out;
    }
    add("enc.out.w", {c.encoder_out, c.encoder_out});
    add("enc.out.b", {c.encoder_out});
    add("pred.embed", {c.vocab_size + 2, c.embed_dim});
    add("pred.w", {c.predictor_context * c.embed_dim, c.encoder_out});
    add("pred.b", {c.encoder_out});
    add("join.w_audio", {c.encoder_out, c.joiner_hidden});
    add("join.w_dec", {c.encoder_out, c.joiner_hidden});
    add("join.b", {c.joiner_hidden});
    add("join.w_out", {c.joiner_hidden, c.output_dim()});
    add("join.b_out", {c.output_dim()});
  }

  void initialize(std::uint64_t seed) {
    Rng rng(mix_seed(seed, {0x1417}));
    for (auto& p : params_) {
      const auto& s = p.value.shape();
      double bound = 0.0;
      if (p.name.ends_with(".left") || p.name.ends_with(".right")) {
        bound = 0.1;
      } else if (p.name == "pred.embed") {
        bound = 1.0;
      } else if (s.size() == 2) {
        bound = std::sqrt(6.0 / double(s[0] + s[1]));
      }
      for (auto& v : p.value.values()) v = bound == 0.0 ? 0.0 : uniform(rng, -bound, bound);
    }
  }

  ModelConfig cfg_;
  std::vector<Parameter> params_;

  friend class BoundModel;
};

inline BoundModel::BoundModel(const TransducerModel& m, Graph& g, bool trainable) : cfg_(m.cfg_), g_(&g) {
  // Only bind() passes trainable=true, and it holds a non-const model.
  auto& params = const_cast<TransducerModel&>(m).params_;
  std::size_t i = 0;
  auto next = [&]() -> Var {
    Parameter& p = params[i++];
    return trainable ? g.param(p) : g.constant(p.value);
  };
  for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
    Layer layer;
    layer.w_in = next();
    layer.b_in = next();
    layer.w_mem = next();
    layer.left = next();
    layer.right = next();
    layers_.push_back(layer);
  }
  enc_out_w_ = next();
  enc_out_b_ = next();
  embed_ = next();
  pred_w_ = next();
  pred_b_ = next();
  join_wa_ = next();
  join_wd_ = next();
  join_b_ = next();
  join_wo_ = next();
  join_bo_ = next();
}

}  // namespace msdkws
