// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors

#include <gtest/gtest.h>

#include "msdkws/eval.hpp"

using namespace msdkws;

namespace {
const std::vector<double> kPos{0.95, 0.8};
const std::vector<double> kNeg{0.9, 0.5, 0.1};
}  // namespace

TEST(Threshold, NthLargestNegative) {
  EXPECT_EQ(threshold_for_fa(kNeg, 1), 0.9);
  EXPECT_EQ(threshold_for_fa(kNeg, 3), 0.1);
  EXPECT_THROW(threshold_for_fa(kNeg, 0), ParameterError);
  EXPECT_THROW(threshold_for_fa(kNeg, 4), ParameterError);
}

TEST(Recall, HandEnumeration) {
  EXPECT_DOUBLE_EQ(recall_at_fa(kPos, kNeg, 1), 0.5);  // only 0.95 > 0.9
  EXPECT_DOUBLE_EQ(recall_at_fa(kPos, kNeg, 2), 1.0);  // both > 0.5
  EXPECT_DOUBLE_EQ(recall_at_fa(kPos, kNeg, 3), 1.0);
  EXPECT_THROW(recall_at_fa(kPos, kNeg, 4), ParameterError);
  EXPECT_THROW(recall_at_fa({}, kNeg, 1), ParameterError);
}

TEST(Recall, TiesAtThresholdDoNotFire) {
  EXPECT_DOUBLE_EQ(recall_at_fa({0.5, 0.6}, {0.5, 0.2}, 1), 0.5);
}

TEST(Recall, MonotoneInFalseAlarms) {
  const std::vector<double> pos{0.3, 0.45, 0.6, 0.72, 0.9};
  const std::vector<double> neg{0.05, 0.2, 0.4, 0.5, 0.55, 0.7, 0.8};
  double prev = 0.0;
  for (std::size_t n = 1; n <= neg.size(); ++n) {
    const double r = recall_at_fa(pos, neg, n);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(DetSweep, SortsAndEvaluates) {
  const auto d = det_sweep(kPos, kNeg, {3, 1, 2});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0], (DetPoint{1, 0.5}));
  EXPECT_EQ(d[1], (DetPoint{2, 1.0}));
  EXPECT_EQ(d[2], (DetPoint{3, 1.0}));
  EXPECT_THROW(det_sweep(kPos, kNeg, {1, 2, 4}), ParameterError);
}

TEST(MacroRecall, AveragesKeywords) {
  EXPECT_DOUBLE_EQ(macro_recall({1.0, 0.5, 0.0}), 0.5);
  EXPECT_THROW(macro_recall({}), ParameterError);
}

TEST(Evaluate, PerKeywordThresholdsAndReport) {
  EvalSet set;
  auto add = [&](const char* kw, Polarity p, double s) { set.records.push_back({"u", kw, p, s}); };
  for (double s : kPos) add("a", Polarity::kPositive, s);
  for (double s : kNeg) add("a", Polarity::kNegative, s);
  add("b", Polarity::kPositive, 0.2);
  add("b", Polarity::kPositive, 0.4);
  add("b", Polarity::kNegative, 0.3);
  add("b", Polarity::kNegative, 0.1);
  const auto rep = evaluate(set, {1});
  ASSERT_EQ(rep.keywords.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.keywords[0].points[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(rep.keywords[1].points[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(rep.macro[0].recall, 0.5);
  EXPECT_EQ(rep.to_text(), "a\t1\t0.500000\nb\t1\t0.500000\nmacro\t1\t0.500000\n");
  set.negative_hours = 2.0;
  const std::string kv = evaluate(set, {1}).to_kv();
  EXPECT_EQ(kv.substr(0, kv.find('\n')), "keyword=a n_fa=1 recall=0.500000 fa_per_hour=0.500000");
}
