#include "rpt/core.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

namespace {

using namespace rpt;

Trajectory make_traj(const std::vector<double>& rewards, bool last_terminal = false) {
  Trajectory traj;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    Transition t;
    t.state = {0.0};
    t.action = 0;
    t.reward = rewards[i];
    t.next_state = {0.0};
    t.terminal = last_terminal && i + 1 == rewards.size();
    traj.append(t, rewards[i]);
  }
  return traj;
}

// ==================== return metrics ====================

TEST(DiscountedReturn, SingleTransitionIsRawReward) {
  const auto traj = make_traj({1.0});
  EXPECT_DOUBLE_EQ(discounted_return(traj, 0.9, false), 1.0);
}

TEST(DiscountedReturn, GeometricExample) {
  const auto traj = make_traj({1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(discounted_return(traj, 0.5, false), 1.75);
}

TEST(DiscountedReturn, EmptyTrajectoryIsDomainError) {
  Trajectory traj;
  EXPECT_THROW(discounted_return(traj, 0.5, false), std::invalid_argument);
  EXPECT_THROW(undiscounted_return(traj), std::invalid_argument);
}

TEST(DiscountedReturn, GammaOutsideOpenIntervalRejected) {
  const auto traj = make_traj({1.0});
  EXPECT_THROW(discounted_return(traj, 1.0, false), std::invalid_argument);
  EXPECT_THROW(discounted_return(traj, 0.0, false), std::invalid_argument);
}

TEST(DiscountedReturn, SingleTransitionIndependentOfGamma) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double r = uniform01(rng) * 20.0 - 10.0;
    const double gamma = 0.001 + 0.998 * uniform01(rng);
    const auto traj = make_traj({r});
    EXPECT_DOUBLE_EQ(discounted_return(traj, gamma, false), r);
  }
}

TEST(DiscountedReturn, ShapedNeverExceedsRawForNonnegativePenalty) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 300; ++rep) {
    const int len = 1 + uniform_int(rng, 20);
    const double lambda = 5.0 * uniform01(rng);
    Trajectory traj;
    for (int i = 0; i < len; ++i) {
      Transition t;
      t.state = {0.0};
      t.action = 0;
      t.reward = uniform01(rng) * 4.0 - 2.0;
      t.next_state = {0.0};
      const double p = uniform01(rng);
      traj.append(t, t.reward - lambda * p);
    }
    const double gamma = 0.01 + 0.98 * uniform01(rng);
    EXPECT_LE(discounted_return(traj, gamma, true),
              discounted_return(traj, gamma, false) + 1e-12);
  }
}

TEST(UndiscountedReturn, SumsRawRewards) {
  const auto traj = make_traj({1.0, -2.0, 0.5});
  EXPECT_DOUBLE_EQ(undiscounted_return(traj), -0.5);
}

TEST(DiscountedRiskCost, Example) {
  const auto traj = make_traj({0.0, 0.0});
  EXPECT_DOUBLE_EQ(discounted_risk_cost(traj, {0.5, 0.5}, 0.5), 0.75);
}

TEST(DiscountedRiskCost, LengthMismatchRejected) {
  const auto traj = make_traj({0.0, 0.0});
  EXPECT_THROW(discounted_risk_cost(traj, {0.5}, 0.5), std::invalid_argument);
}

TEST(DiscountedRiskCost, RiskOutsideUnitIntervalRejected) {
  const auto traj = make_traj({0.0});
  EXPECT_THROW(discounted_risk_cost(traj, {1.5}, 0.5), std::invalid_argument);
}

// ==================== transition invariants ====================

TEST(Transition, CostMustBeBinary) {
  Transition t;
  t.cost = 2;
  t.terminal = true;
  EXPECT_THROW(validate_transition(t), std::invalid_argument);
}

TEST(Transition, CostOneImpliesTerminal) {
  Transition t;
  t.cost = 1;
  t.terminal = false;
  EXPECT_THROW(validate_transition(t), std::invalid_argument);
}

TEST(Transition, RiskTruncationExcludesCost) {
  Transition t;
  t.cost = 1;
  t.terminal = true;
  t.truncated_by_risk = true;
  EXPECT_THROW(validate_transition(t), std::invalid_argument);
}

TEST(Trajectory, AppendPastTerminalRejected) {
  Trajectory traj;
  Transition t;
  t.cost = 1;
  t.terminal = true;
  traj.append(t, 0.0);
  Transition t2;
  EXPECT_THROW(traj.append(t2, 0.0), std::logic_error);
}

TEST(Trajectory, AppendPastRiskTruncationRejected) {
  Trajectory traj;
  Transition t;
  t.truncated_by_risk = true;
  traj.append(t, 0.0);
  Transition t2;
  EXPECT_THROW(traj.append(t2, 0.0), std::logic_error);
}

// ==================== cmdp spec ====================

TEST(CmdpSpec, ValidatesFields) {
  CmdpSpec s;
  s.state_dim = 2;
  s.actions = DiscreteSpace{4};
  s.gamma = 0.99;
  s.reward_min = -1.0;
  s.reward_max = 10.0;
  EXPECT_NO_THROW(validate_cmdp_spec(s));

  CmdpSpec bad = s;
  bad.gamma = 1.0;
  EXPECT_THROW(validate_cmdp_spec(bad), std::invalid_argument);
  bad = s;
  bad.reward_min = 11.0;
  EXPECT_THROW(validate_cmdp_spec(bad), std::invalid_argument);
  bad = s;
  bad.cost_threshold = 1.0;
  EXPECT_THROW(validate_cmdp_spec(bad), std::invalid_argument);
}

TEST(ActionSpace, MembershipChecks) {
  const ActionSpace disc = DiscreteSpace{4};
  EXPECT_TRUE(action_in_space(disc, Action{3}));
  EXPECT_FALSE(action_in_space(disc, Action{4}));
  EXPECT_FALSE(action_in_space(disc, Action{-1}));
  EXPECT_FALSE(action_in_space(disc, Action{std::vector<double>{0.0}}));

  const ActionSpace box = BoxSpace{{-1.0, -1.0}, {1.0, 1.0}};
  EXPECT_TRUE(action_in_space(box, Action{std::vector<double>{0.5, -0.5}}));
  EXPECT_FALSE(action_in_space(box, Action{std::vector<double>{1.5, 0.0}}));
  EXPECT_FALSE(action_in_space(box, Action{std::vector<double>{0.0}}));
  EXPECT_FALSE(action_in_space(box, Action{0}));
}

// ==================== replay buffer ====================

ShapedTransition shaped_with_reward(double r) {
  ShapedTransition s;
  s.t.state = {r};
  s.t.action = 0;
  s.t.reward = r;
  s.t.next_state = {r};
  s.shaped_reward = r;
  return s;
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer buf(3);
  for (int i = 1; i <= 5; ++i) buf.push(shaped_with_reward(i));
  ASSERT_EQ(buf.size(), 3u);
  EXPECT_DOUBLE_EQ(buf.at(0).shaped_reward, 3.0);
  EXPECT_DOUBLE_EQ(buf.at(1).shaped_reward, 4.0);
  EXPECT_DOUBLE_EQ(buf.at(2).shaped_reward, 5.0);
}

TEST(ReplayBuffer, SamplingReproducibleUnderSeed) {
  ReplayBuffer buf(100);
  for (int i = 0; i < 50; ++i) buf.push(shaped_with_reward(i));
  std::mt19937_64 a(99), b(99);
  const auto sa = buf.sample(32, a);
  const auto sb = buf.sample(32, b);
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i)
    EXPECT_DOUBLE_EQ(sa[i].shaped_reward, sb[i].shaped_reward);
}

TEST(ReplayBuffer, SampleFromEmptyRejected) {
  ReplayBuffer buf(4);
  std::mt19937_64 rng(1);
  EXPECT_THROW(buf.sample(1, rng), std::logic_error);
}

TEST(ReplayBuffer, StoresShapedRewardAsGiven) {
  ReplayBuffer buf(4);
  ShapedTransition s = shaped_with_reward(1.0);
  s.shaped_reward = -41.0;  // collector's value, kept verbatim
  buf.push(s);
  EXPECT_DOUBLE_EQ(buf.at(0).shaped_reward, -41.0);
  EXPECT_DOUBLE_EQ(buf.at(0).t.reward, 1.0);
}

// ==================== unsafe pair set ====================

TEST(UnsafePairSet, DuplicatesKept) {
  UnsafePairSet set;
  set.add({1.0, 2.0}, Action{3});
  set.add({1.0, 2.0}, Action{3});
  EXPECT_EQ(set.size(), 2u);
}

TEST(UnsafePairSet, BoundedFifo) {
  UnsafePairSet set(2);
  set.add({1.0}, Action{0});
  set.add({2.0}, Action{0});
  set.add({3.0}, Action{0});
  ASSERT_EQ(set.size(), 2u);
  EXPECT_DOUBLE_EQ(set.at(0).state[0], 2.0);
  EXPECT_DOUBLE_EQ(set.at(1).state[0], 3.0);
}

TEST(UnsafePairSet, SamplingReproducibleUnderSeed) {
  UnsafePairSet set;
  for (int i = 0; i < 10; ++i) set.add({double(i)}, Action{i});
  std::mt19937_64 a(7), b(7);
  const auto sa = set.sample(16, a);
  const auto sb = set.sample(16, b);
  for (std::size_t i = 0; i < sa.size(); ++i)
    EXPECT_DOUBLE_EQ(sa[i].state[0], sb[i].state[0]);
}

}  // namespace
