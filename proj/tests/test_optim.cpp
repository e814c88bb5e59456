// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The msdkws Authors

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "msdkws/optim.hpp"

using namespace msdkws;

namespace {

// Scalar AdamW written out from the update rule.
struct ScalarAdamW {
  double p, m = 0, v = 0;
  int t = 0;
  void step(double g, double lr, double b1, double b2, double eps, double wd) {
    ++t;
    p = p - lr * wd * p;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p = p - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST(AdamW, FirstStepMovesAgainstGradient) {
  Parameter p{"p", Tensor({4}, std::vector<double>{1.0, -2.0, 0.5, 3.0})};
  p.grad = Tensor({4}, std::vector<double>{0.3, -4.0, 1e-3, -0.2});
  const Tensor before = p.value;
  AdamW opt({&p}, {0.9, 0.999, 1e-8, 0.0});
  opt.step(0.01);
  for (std::size_t i = 0; i < 4; ++i) {
    const double dp = p.value[i] - before[i];
    EXPECT_LT(dp * p.grad[i], 0.0);
    EXPECT_NEAR(dp, -0.01 * p.grad[i] / (std::abs(p.grad[i]) + 1e-8), 1e-12);
  }
}

TEST(AdamW, MatchesScalarRecursionOnQuadratic) {
  Parameter p{"p", Tensor::scalar(1.0)};
  AdamW opt({&p}, {0.9, 0.999, 1e-8, 0.01});
  ScalarAdamW ref{1.0};
  for (int i = 0; i < 200; ++i) {
    p.grad[0] = p.value[0];  // ∇(p²/2)
    const double g = ref.p;
    opt.step(0.05);
    ref.step(g, 0.05, 0.9, 0.999, 1e-8, 0.01);
    ASSERT_NEAR(p.value[0], ref.p, 1e-15) << "step " << i;
  }
  EXPECT_LT(std::abs(p.value[0]), 0.05);
  EXPECT_EQ(opt.steps(), 200u);
}

TEST(AdamW, DecoupledDecayWithZeroGradient) {
  Parameter p{"p", Tensor::scalar(2.0)};
  AdamW opt({&p}, {0.9, 0.999, 1e-8, 0.1});
  for (int i = 0; i < 3; ++i) opt.step(0.5);
  EXPECT_DOUBLE_EQ(p.value[0], 2.0 * std::pow(1.0 - 0.05, 3));
}

TEST(AdamW, NonFiniteGradientLeavesParametersUntouched) {
  Parameter a{"a", Tensor::scalar(1.0)}, b{"b", Tensor::scalar(2.0)};
  a.grad[0] = 0.5;
  b.grad[0] = std::numeric_limits<double>::quiet_NaN();
  AdamW opt({&a, &b}, {});
  EXPECT_THROW(opt.step(0.1), NumericalError);
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 2.0);
  EXPECT_EQ(opt.steps(), 0u);
}

TEST(AdamW, StateRestoreContinuesIdentically) {
  Parameter p{"w", Tensor({2}, std::vector<double>{0.7, -1.3})};
  AdamW opt({&p}, {});
  auto grad = [&](Parameter& q) {
    for (std::size_t i = 0; i < 2; ++i) q.grad[i] = 3.0 * q.value[i] - 0.1;
  };
  for (int i = 0; i < 5; ++i) {
    grad(p);
    opt.step(0.02);
  }
  std::vector<NamedTensor> state;
  opt.append_state(state);
  Parameter q = p;
  AdamW opt2({&q}, {});
  opt2.restore_state(state);
  for (int i = 0; i < 5; ++i) {
    grad(p);
    opt.step(0.02);
    grad(q);
    opt2.step(0.02);
  }
  EXPECT_EQ(p.value, q.value);
}

TEST(AdamW, RejectsBadHyperparameters) {
  Parameter p{"p", Tensor::scalar(1.0)};
  EXPECT_THROW(AdamW({&p}, {1.0, 0.999, 1e-8, 0.0}), ParameterError);
  AdamW ok({&p}, {});
  EXPECT_THROW(ok.step(0.0), ParameterError);
}
