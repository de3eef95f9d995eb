#include "rpt/shaping.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace {

using namespace rpt;

// Independent oracle for the penalty bound: solve for the lambda that equates
// the extremal penalized unsafe return with the extremal safe return using
// plain term-by-term sums, never the closed-form geometric expressions.
double bound_by_summation(double gamma, int H, double eta, double p0, double r_min,
                          double r_max) {
  const int T = estimate_safe_steps(eta, p0, H);
  double reward_gap = 0.0;   // sum_t gamma^t (r_max - r_min)
  double penalty_mass = 0.0; // eta * sum_{t>=T} gamma^t
  double g = 1.0;
  for (int t = 0; t < H; ++t) {
    reward_gap += g * (r_max - r_min);
    if (t >= T) penalty_mass += g * eta;
    g *= gamma;
  }
  return reward_gap / penalty_mass;
}

// First step index at which the linear risk schedule exceeds eta.
int first_crossing(double eta, double p0, int H) {
  for (int t = 0; t <= H; ++t) {
    const double p = p0 + (1.0 - p0) * static_cast<double>(t) / H;
    if (p > eta) return t;
  }
  return H + 1;
}

// ==================== unsafe region ====================

TEST(UnsafeRegion, StrictThreshold) {
  EXPECT_TRUE(in_unsafe_region(0.95, 0.9));
  EXPECT_FALSE(in_unsafe_region(0.9, 0.9));  // boundary is still safe
  EXPECT_FALSE(in_unsafe_region(0.2, 0.9));
}

TEST(UnsafeRegion, DomainChecks) {
  EXPECT_THROW(in_unsafe_region(-0.1, 0.9), std::invalid_argument);
  EXPECT_THROW(in_unsafe_region(1.1, 0.9), std::invalid_argument);
  EXPECT_THROW(in_unsafe_region(0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(in_unsafe_region(0.5, 1.0), std::invalid_argument);
}

// ==================== safe-step estimate ====================

TEST(EstimateSafeSteps, KnownValues) {
  EXPECT_EQ(estimate_safe_steps(0.9, 0.0, 10), 9);
  EXPECT_EQ(estimate_safe_steps(0.9, 0.5, 10), 8);
  EXPECT_EQ(estimate_safe_steps(0.5, 0.0, 2), 1);
}

TEST(EstimateSafeSteps, DomainChecks) {
  EXPECT_THROW(estimate_safe_steps(0.5, 0.6, 10), std::invalid_argument);
  EXPECT_THROW(estimate_safe_steps(0.5, -0.1, 10), std::invalid_argument);
  EXPECT_THROW(estimate_safe_steps(1.0, 0.0, 10), std::invalid_argument);
  EXPECT_THROW(estimate_safe_steps(0.5, 0.0, 0), std::invalid_argument);
}

TEST(EstimateSafeSteps, AlwaysInsideHorizon) {
  const double etas[] = {0.1, 0.3, 0.5, 0.7, 0.9, 0.99};
  const double p0s[] = {0.0, 0.05, 0.3, 0.6};
  for (double eta : etas)
    for (double p0 : p0s) {
      if (p0 > eta) continue;
      for (int H = 1; H <= 60; ++H) {
        const int T = estimate_safe_steps(eta, p0, H);
        EXPECT_GE(T, 0);
        EXPECT_LT(T, H);
      }
    }
}

TEST(EstimateSafeSteps, MatchesSimulatedFirstCrossing) {
  const double etas[] = {0.5, 0.7, 0.9};
  const double p0s[] = {0.0, 0.3, 0.6};
  for (double eta : etas)
    for (double p0 : p0s) {
      if (p0 > eta) continue;
      for (int H = 2; H <= 50; ++H) {
        const int T = estimate_safe_steps(eta, p0, H);
        const int cross = first_crossing(eta, p0, H);
        EXPECT_LE(std::abs(cross - T), 1)
            << "eta=" << eta << " p0=" << p0 << " H=" << H;
      }
    }
}

// ==================== penalty lower bound ====================

TEST(LambdaLowerBound, ZeroWhenRewardRangeCollapses) {
  EXPECT_DOUBLE_EQ(lambda_lower_bound(0.99, 10, 0.9, 0.0, 2.0, 2.0), 0.0);
}

TEST(LambdaLowerBound, HandComputedSmallCase) {
  // gamma=0.5, H=2, eta=0.9, p0=0: T=1, bound = 0.75 / (0.9*0.5*0.5) = 10/3.
  EXPECT_NEAR(lambda_lower_bound(0.5, 2, 0.9, 0.0, 0.0, 1.0), 10.0 / 3.0, 1e-12);
}

TEST(LambdaLowerBound, ReferenceValue) {
  const double b = lambda_lower_bound(0.99, 10, 0.9, 0.0, 0.0, 1.0);
  EXPECT_NEAR(b, 11.63, 0.01);
}

TEST(LambdaLowerBound, MatchesSummationOracle) {
  const double gammas[] = {0.5, 0.9, 0.99};
  const double etas[] = {0.5, 0.9, 0.99};
  const double p0s[] = {0.0, 0.3};
  for (double gamma : gammas)
    for (double eta : etas)
      for (double p0 : p0s)
        for (int H = 2; H <= 50; H += 3) {
          const double closed = lambda_lower_bound(gamma, H, eta, p0, -1.0, 2.0);
          const double summed = bound_by_summation(gamma, H, eta, p0, -1.0, 2.0);
          EXPECT_NEAR(closed, summed, 1e-9 * std::max(1.0, summed))
              << "gamma=" << gamma << " eta=" << eta << " p0=" << p0 << " H=" << H;
        }
}

TEST(LambdaLowerBound, GeometricSumIdentity) {
  // (1 - gamma^H) / (1 - gamma) must equal the explicit partial sum.
  const double gammas[] = {0.5, 0.9, 0.99, 0.999};
  for (double gamma : gammas)
    for (int H = 1; H <= 60; ++H) {
      double s = 0.0, g = 1.0;
      for (int t = 0; t < H; ++t) {
        s += g;
        g *= gamma;
      }
      const double closed = (1.0 - std::pow(gamma, H)) / (1.0 - gamma);
      EXPECT_NEAR(closed, s, 1e-12 * s);
    }
}

TEST(LambdaLowerBound, NonincreasingInEtaAtFixedT) {
  const int H = 20;
  const double gamma = 0.95, p0 = 0.0;
  for (double eta1 = 0.30; eta1 < 0.95; eta1 += 0.01) {
    const double eta2 = eta1 + 0.005;
    if (estimate_safe_steps(eta1, p0, H) != estimate_safe_steps(eta2, p0, H)) continue;
    EXPECT_GE(lambda_lower_bound(gamma, H, eta1, p0, 0.0, 1.0),
              lambda_lower_bound(gamma, H, eta2, p0, 0.0, 1.0));
  }
}

TEST(LambdaLowerBound, UnderflowReported) {
  // gamma^T underflows for tiny gamma and huge T.
  EXPECT_THROW(lambda_lower_bound(0.001, 200000, 0.9, 0.0, 0.0, 1.0),
               std::overflow_error);
}

// ==================== reward shaping ====================

TEST(ShapeReward, Examples) {
  EXPECT_DOUBLE_EQ(shape_reward(1.0, 0.5, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(shape_reward(-1.0, 1.0, 3.0), -4.0);
  EXPECT_DOUBLE_EQ(shape_reward(0.7, 0.0, 100.0), 0.7);
  EXPECT_DOUBLE_EQ(shape_reward(0.7, 0.9, 0.0), 0.7);
}

TEST(ShapeReward, DomainChecks) {
  EXPECT_THROW(shape_reward(1.0, -0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(shape_reward(1.0, 1.1, 1.0), std::invalid_argument);
  EXPECT_THROW(shape_reward(1.0, 0.5, -1.0), std::invalid_argument);
}

// ==================== lambda schedule ====================

ShapingConfig unit_cfg() {
  ShapingConfig cfg;
  cfg.eta = 0.9;
  cfg.gamma = 0.99;
  cfg.reward_min = 0.0;
  cfg.reward_max = 1.0;
  return cfg;
}

TEST(UpdateLambda, FirstUnsafeSetsMarginTimesBound) {
  LambdaState s;
  const auto cfg = unit_cfg();
  s = update_lambda(s, 10, cfg);
  EXPECT_DOUBLE_EQ(s.lambda, 1.05 * lambda_lower_bound(0.99, 10, 0.9, 0.0, 0.0, 1.0));
  ASSERT_EQ(s.unsafe_lengths.size(), 1u);
  EXPECT_EQ(s.unsafe_lengths[0], 10);
}

TEST(UpdateLambda, IdempotentOnRepeatedH) {
  LambdaState s;
  const auto cfg = unit_cfg();
  s = update_lambda(s, 10, cfg);
  const double l1 = s.lambda;
  s = update_lambda(s, 10, cfg);
  EXPECT_DOUBLE_EQ(s.lambda, l1);
  EXPECT_EQ(s.unsafe_lengths.size(), 2u);  // the observation is still recorded
}

TEST(UpdateLambda, MaxOverObservedSequence) {
  LambdaState s;
  const auto cfg = unit_cfg();
  double expect = 0.0;
  for (int H : {5, 20, 10}) {
    s = update_lambda(s, H, cfg);
    expect = std::max(expect,
                      1.05 * lambda_lower_bound(cfg.gamma, H, cfg.eta, 0.0, 0.0, 1.0));
    EXPECT_DOUBLE_EQ(s.lambda, expect);
  }
  EXPECT_EQ(s.unsafe_lengths.size(), 3u);
}

TEST(UpdateLambda, NeverDecreases) {
  LambdaState s;
  const auto cfg = unit_cfg();
  double prev = s.lambda;
  for (int H : {30, 2, 50, 3, 7, 50, 1, 12}) {
    s = update_lambda(s, H, cfg);
    EXPECT_GE(s.lambda, prev);
    prev = s.lambda;
  }
}

TEST(UpdateLambda, LatestPolicyCoincidesUnderConservativeP0) {
  LambdaState a, b;
  b.lambda_h_policy = LambdaHPolicy::Latest;
  const auto cfg = unit_cfg();
  for (int H : {4, 17, 9, 33, 2}) {
    a = update_lambda(a, H, cfg);
    b = update_lambda(b, H, cfg);
    EXPECT_DOUBLE_EQ(a.lambda, b.lambda);
  }
}

TEST(UpdateLambda, ClassifierInitialUsesObservedP0) {
  LambdaState s;
  s.p0_policy = P0Policy::ClassifierInitial;
  const auto cfg = unit_cfg();
  s = update_lambda(s, 10, cfg, 0.3);
  EXPECT_DOUBLE_EQ(s.lambda, 1.05 * lambda_lower_bound(0.99, 10, 0.9, 0.3, 0.0, 1.0));
}

TEST(UpdateLambda, Validation) {
  LambdaState s;
  const auto cfg = unit_cfg();
  EXPECT_THROW(update_lambda(s, 0, cfg), std::invalid_argument);
  LambdaState bad;
  bad.margin = 1.0;
  EXPECT_THROW(update_lambda(bad, 5, cfg), std::invalid_argument);
}

// ==================== separation oracle ====================

TEST(VerifySeparation, BoundTimesSmallMarginSeparates) {
  const double gammas[] = {0.5, 0.9, 0.99};
  const double etas[] = {0.5, 0.9, 0.99};
  const double p0s[] = {0.0, 0.3};
  for (double gamma : gammas)
    for (double eta : etas)
      for (double p0 : p0s)
        for (int H = 2; H <= 50; H += 7) {
          const double b = lambda_lower_bound(gamma, H, eta, p0, 0.0, 1.0);
          EXPECT_TRUE(verify_separation(gamma, H, eta, p0, 0.0, 1.0, 1.001 * b));
        }
}

TEST(VerifySeparation, ZeroLambdaDoesNotSeparate) {
  EXPECT_FALSE(verify_separation(0.99, 10, 0.9, 0.0, 0.0, 1.0, 0.0));
}

TEST(VerifySeparation, JustBelowBoundDoesNotSeparate) {
  const double b = lambda_lower_bound(0.99, 10, 0.9, 0.0, 0.0, 1.0);
  EXPECT_FALSE(verify_separation(0.99, 10, 0.9, 0.0, 0.0, 1.0, 0.999 * b));
}

}  // namespace
