// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "msdkws/decoder.hpp"
#include "msdkws/losses.hpp"
#include "msdkws/model.hpp"

using namespace msdkws;
namespace fs = std::filesystem;

namespace {

Tensor random_features(std::mt19937_64& rng, std::size_t T, std::size_t F) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor f({T, F});
  for (auto& v : f.values()) v = g(rng);
  return f;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("msdkws_model_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(ModelConfig, ValidateRejectsZeroDims) {
  ModelConfig c;
  c.encoder_hidden = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  ModelConfig d;
  d.mask_prob = 1.5;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(ModelConfig, VectorRoundTrip) {
  ModelConfig c;
  c.encoder_layers = 5;
  c.mask_prob = 0.2;
  EXPECT_EQ(ModelConfig::from_vector(c.to_vector()), c);
}

TEST(Model, OutputShapes) {
  std::mt19937_64 rng(1);
  TransducerModel m(ModelConfig{}, 1);
  const Tensor h = m.encode(random_features(rng, 9, 24));
  EXPECT_EQ(h.shape(), (Shape{9, 32}));
  const Tensor d = m.predict({1, 2, 3});
  EXPECT_EQ(d.shape(), (Shape{4, 32}));
  const Tensor lp = m.joint(h, d);
  EXPECT_EQ(lp.shape(), (Shape{9, 4, 9}));
  for (std::size_t c = 0; c < lp.rows(); ++c) {
    double s = 0.0;
    for (double v : lp.row(c)) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Model, FeatureWidthMismatch) {
  TransducerModel m(ModelConfig{}, 1);
  EXPECT_THROW(m.encode(Tensor({5, 12})), DimensionError);
  EXPECT_THROW(m.predict({8}), IndexError);
}

TEST(Model, PredictorSeesOnlyTwoPreviousTokens) {
  TransducerModel m(ModelConfig{}, 2);
  const Tensor a = m.predict({5, 1, 2});
  const Tensor b = m.predict({7, 1, 2});
  for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_EQ(a(3, k), b(3, k));
  // Row 0 is the start-symbol state, identical for every transcript.
  const Tensor c = m.predict({4});
  for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_EQ(a(0, k), c(0, k));
}

TEST(Model, EncoderLookaheadIsBounded) {
  std::mt19937_64 rng(3);
  ModelConfig cfg;
  TransducerModel m(cfg, 3);
  const std::size_t T = 30, t0 = 20;
  Tensor x = random_features(rng, T, cfg.feature_dim);
  Tensor y = x;
  for (std::size_t k = 0; k < cfg.feature_dim; ++k) y(t0, k) += 3.0;
  const Tensor hx = m.encode(x), hy = m.encode(y);
  const std::size_t right = cfg.encoder_layers * cfg.dfsmn_right;
  const std::size_t left = cfg.encoder_layers * cfg.dfsmn_left;
  for (std::size_t t = 0; t < T; ++t) {
    bool same = true;
    for (std::size_t k = 0; k < hx.cols(); ++k) same = same && hx(t, k) == hy(t, k);
    if (t + right < t0 || t > t0 + left) {
      EXPECT_TRUE(same) << "frame " << t;
    }
  }
  bool changed_at_edge = false;
  for (std::size_t k = 0; k < hx.cols(); ++k) changed_at_edge |= hx(t0 - right, k) != hy(t0 - right, k);
  EXPECT_TRUE(changed_at_edge);
}

TEST(Model, TranslationCovariance) {
  std::mt19937_64 rng(4);
  ModelConfig cfg;
  TransducerModel m(cfg, 4);
  const std::size_t T = 24, shift = 5;
  Tensor x = random_features(rng, T, cfg.feature_dim);
  Tensor xs({T + shift, cfg.feature_dim});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < cfg.feature_dim; ++k) xs(t + shift, k) = x(t, k);
  const Tensor a = m.encode(x), b = m.encode(xs);
  const std::size_t lm = cfg.encoder_layers * cfg.dfsmn_left;
  const std::size_t rm = cfg.encoder_layers * cfg.dfsmn_right;
  for (std::size_t t = lm; t + rm < T; ++t)
    for (std::size_t k = 0; k < a.cols(); ++k) EXPECT_NEAR(a(t, k), b(t + shift, k), 1e-12);
}

TEST(Model, PaddingInvariance) {
  std::mt19937_64 rng(5);
  ModelConfig cfg;
  TransducerModel m(cfg, 5);
  const Tensor x = random_features(rng, 11, cfg.feature_dim);
  Tensor padded({17, cfg.feature_dim}, 7.5);
  for (std::size_t i = 0; i < x.size(); ++i) padded[i] = x[i];
  Graph g1, g2;
  const Tensor a = m.bind_frozen(g1).encode(g1.constant(x), 11).value();
  const Tensor b = m.bind_frozen(g2).encode(g2.constant(padded), 11).value();
  EXPECT_EQ(a, b);
  const LossWeights w;
  const auto la = total_loss(m, Sample{x, 11, {1, 2}}, w, 9);
  const auto lb = total_loss(m, Sample{padded, 11, {1, 2}}, w, 9);
  EXPECT_EQ(la.total, lb.total);
}

TEST(Model, CheckpointRoundTripIsByteIdentical) {
  const auto dir = scratch("ckpt");
  TransducerModel m(ModelConfig{}, 6);
  m.save(dir / "a.ckpt");
  const TransducerModel r = TransducerModel::load(dir / "a.ckpt");
  r.save(dir / "b.ckpt");
  EXPECT_EQ(detail::read_file(dir / "a.ckpt"), detail::read_file(dir / "b.ckpt"));
  EXPECT_EQ(r.config(), m.config());
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(m.params()[i].value, r.params()[i].value);
}

TEST(Model, LoadRejectsConfigAndShapeMismatch) {
  const auto dir = scratch("mismatch");
  TransducerModel m(ModelConfig{}, 7);
  m.save(dir / "m.ckpt");
  ModelConfig other;
  other.encoder_hidden = 48;
  EXPECT_THROW(TransducerModel::load(dir / "m.ckpt", other), FormatError);

  auto recs = m.to_tensors();
  for (auto& r : recs)
    if (r.name == "pred.w") r.tensor = Tensor({3, 3});
  EXPECT_THROW(TransducerModel::from_tensors(recs), FormatError);
}

TEST(Model, TruncatedCheckpointNamesOffset) {
  const auto dir = scratch("trunc");
  TransducerModel m(ModelConfig{}, 8);
  std::string bytes = encode_container(m.to_tensors());
  bytes.resize(bytes.size() / 2);
  try {
    decode_container(bytes, "half.ckpt");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
}

TEST(Model, SameSeedSameInit) {
  TransducerModel a(ModelConfig{}, 42), b(ModelConfig{}, 42), c(ModelConfig{}, 43);
  EXPECT_EQ(encode_container(a.to_tensors()), encode_container(b.to_tensors()));
  EXPECT_NE(encode_container(a.to_tensors()), encode_container(c.to_tensors()));
}

TEST(Mask, EmpiricalRate) {
  std::size_t hits = 0;
  const std::size_t n = 100000;
  const auto m = draw_mask(n, 0.35, 2024);
  for (bool b : m) hits += b;
  EXPECT_NEAR(double(hits) / double(n), 0.35, 0.01);
  for (bool b : draw_mask(100, 0.0, 1)) EXPECT_FALSE(b);
  for (bool b : draw_mask(100, 1.0, 1)) EXPECT_TRUE(b);
  EXPECT_THROW(draw_mask(3, -0.1, 1), ParameterError);
}

TEST(Posteriors, NarSlicesAreRowIndependent) {
  std::mt19937_64 rng(9);
  TransducerModel m(ModelConfig{}, 9);
  const auto lat = decode_posteriors(m, random_features(rng, 8, 24), KeywordSpec{"kw", {1, 2, 3}});
  lat.ar.validate();
  lat.nar.validate();
  for (std::size_t t = 0; t < 8; ++t)
    for (std::size_t u = 1; u < 4; ++u)
      for (std::size_t k = 0; k < 9; ++k) EXPECT_LT(std::abs(lat.nar(t, u, k) - lat.nar(t, 0, k)), 1e-12);
}
