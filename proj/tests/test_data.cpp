// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "msdkws/container.hpp"
#include "msdkws/data.hpp"

using namespace msdkws;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("msdkws_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.string() + '\n' + detail::read_file(root / f);
  return all;
}

}  // namespace

TEST(Synthetic, PositivesContainKeywordNegativesDoNot) {
  SyntheticTaskConfig c;
  c.keywords = {{"a", {1, 2, 3}}, {"b", {4, 0}}};
  c.positives = 300;
  c.negatives = 300;
  for (const auto& u : generate_utterances(c)) {
    const bool has = contains_run(u.tokens, c.keywords[0].tokens) || contains_run(u.tokens, c.keywords[1].tokens);
    EXPECT_EQ(has, u.label == Label::kPositive) << u.utt_id;
  }
}

TEST(Synthetic, RenderingLengthAndNoiselessOneHot) {
  SyntheticTaskConfig c;
  c.noise = 0.0;
  c.raw_dim = 10;
  c.positives = 20;
  c.negatives = 20;
  for (const auto& u : generate_utterances(c)) {
    std::size_t total = 0;
    for (auto d : u.durations) total += d;
    ASSERT_EQ(u.features.dim(0), total);
    std::size_t row = 0;
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      ASSERT_GE(u.durations[i], c.dur_min);
      ASSERT_LE(u.durations[i], c.dur_max);
      for (std::size_t d = 0; d < u.durations[i]; ++d, ++row)
        for (std::size_t k = 0; k < c.raw_dim; ++k) ASSERT_EQ(u.features(row, k), k == u.tokens[i] ? 1.0 : 0.0);
    }
  }
}

TEST(Synthetic, KeywordOnlyPositives) {
  SyntheticTaskConfig c;
  c.keyword_only_positives = true;
  c.positives = 10;
  c.negatives = 0;
  for (const auto& u : generate_utterances(c)) EXPECT_EQ(u.tokens, c.keywords[0].tokens);
}

TEST(Synthetic, DistractorRate) {
  SyntheticTaskConfig c;
  c.distractor_prob = 0.5;
  c.positives = 0;
  c.negatives = 10000;
  std::size_t n = 0;
  for (const auto& u : generate_utterances(c)) {
    n += u.distractor;
    EXPECT_FALSE(contains_run(u.tokens, c.keywords[0].tokens));
  }
  const double rate = double(n) / 10000.0;
  EXPECT_GE(rate, 0.47);
  EXPECT_LE(rate, 0.53);
}

TEST(Synthetic, MeanDurationWithinBinomialBounds) {
  SyntheticTaskConfig c;
  c.positives = 500;
  c.negatives = 500;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& u : generate_utterances(c))
    for (auto d : u.durations) sum += double(d), ++n;
  // Uniform on {2,3,4}: mean 3, sd sqrt(2/3).
  EXPECT_NEAR(sum / double(n), 3.0, 4.0 * std::sqrt(2.0 / 3.0 / double(n)));
}

TEST(Synthetic, ConfigErrors) {
  SyntheticTaskConfig c;
  c.raw_dim = 4;
  EXPECT_THROW(generate_utterances(c), ConfigError);
  SyntheticTaskConfig d;
  d.dur_min = 0;
  EXPECT_THROW(generate_utterances(d), ConfigError);
  SyntheticTaskConfig e;
  e.keywords = {{"k", {9}}};
  EXPECT_THROW(generate_utterances(e), ConfigError);
}

TEST(Corpus, DeterministicBytes) {
  SyntheticTaskConfig c;
  c.positives = 15;
  c.negatives = 15;
  c.distractor_prob = 0.3;
  const auto a = scratch("det_a"), b = scratch("det_b");
  const auto sa = generate_corpus(c, a);
  generate_corpus(c, b);
  EXPECT_EQ(read_tree(a), read_tree(b));
  EXPECT_EQ(sa.positives, 15u);
  EXPECT_EQ(sa.negatives, 15u);
  const Manifest m = read_manifest(a / "manifest.tsv");
  ASSERT_EQ(m.records.size(), 30u);
  EXPECT_EQ(read_features(m.feature_path(m.records[3])).dim(1), c.raw_dim);
  EXPECT_EQ(read_keywords(a / "keywords.txt")[0].tokens, c.keywords[0].tokens);
  c.seed = 2;
  const auto d = scratch("det_c");
  generate_corpus(c, d);
  EXPECT_NE(read_tree(a), read_tree(d));
}

TEST(Features, RoundTripAndErrors) {
  const auto dir = scratch("feat");
  Tensor f({3, 2}, std::vector<double>{0.1, -2.5, 1e-300, 3.0, -0.0, 7.25});
  write_features(dir / "x.feat", f);
  const Tensor g = read_features(dir / "x.feat");
  EXPECT_EQ(encode_features(f), encode_features(g));

  std::string bytes = encode_features(f);
  bytes.resize(bytes.size() - 5);
  try {
    decode_features(bytes, "short.feat");
    FAIL();
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 64"), std::string::npos) << msg;
    EXPECT_NE(msg.find("has 59"), std::string::npos) << msg;
  }
  std::string bad = encode_features(f);
  bad[0] = 'X';
  EXPECT_THROW(decode_features(bad), FormatError);
  EXPECT_THROW(encode_features(Tensor()), FormatError);
}

TEST(StackFrames, EdgeReplicationAndIdentity) {
  Tensor ramp({4, 1}, std::vector<double>{0, 1, 2, 3});
  const Tensor s = stack_frames(ramp, 1, 1);
  EXPECT_EQ(s.shape(), (Shape{4, 3}));
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.0);
  EXPECT_EQ(s(0, 2), 1.0);
  EXPECT_EQ(s(2, 0), 1.0);
  EXPECT_EQ(s(2, 1), 2.0);
  EXPECT_EQ(s(2, 2), 3.0);
  EXPECT_EQ(s(3, 2), 3.0);
  EXPECT_EQ(stack_frames(ramp, 0, 0), ramp);
  Tensor one({1, 2}, std::vector<double>{5, 6});
  EXPECT_EQ(stack_frames(one, 2, 1), Tensor({1, 8}, std::vector<double>{5, 6, 5, 6, 5, 6, 5, 6}));
}

TEST(Manifest, RoundTripAndBadLabel) {
  const auto dir = scratch("manifest");
  Manifest m;
  m.records = {{"u1", "feats/u1.feat", Label::kPositive, {1, 2, 3}}, {"u2", "feats/u2.feat", Label::kNegative, {0}}};
  write_manifest(dir / "m.tsv", m);
  const Manifest r = read_manifest(dir / "m.tsv");
  EXPECT_EQ(encode_manifest(r), encode_manifest(m));
  EXPECT_EQ(r.feature_path(r.records[0]), dir / "feats/u1.feat");
  detail::write_file_atomic(dir / "bad.tsv", "u\tp.feat\tmaybe\t1 2\n");
  EXPECT_THROW(read_manifest(dir / "bad.tsv"), FormatError);
  EXPECT_THROW(read_manifest(dir / "missing.tsv"), IoError);
}
