#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rpt/envs.hpp"
#include "rpt/rng.hpp"

namespace {

using namespace rpt;

EnvParams params_for(const std::string& id) {
  EnvParams p;
  p.id = id;
  return p;
}

Action random_action(const CmdpSpec& spec, std::mt19937_64& rng) {
  if (std::holds_alternative<DiscreteSpace>(spec.actions))
    return Action{static_cast<int>(
        uniform_int(rng, std::get<DiscreteSpace>(spec.actions).n))};
  const auto& box = std::get<BoxSpace>(spec.actions);
  std::vector<double> a(box.low.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = box.low[i] + (box.high[i] - box.low[i]) * uniform01(rng);
  return Action{a};
}

// ---------- CliffGrid ----------

TEST(CliffGrid, StartStateIsBottomLeft) {
  CliffGrid env(params_for("cliff-grid"));
  const auto s = env.reset(0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0], -1.0);
  EXPECT_DOUBLE_EQ(s[1], -1.0);
  EXPECT_EQ(env.state_index(s), 0);
}

TEST(CliffGrid, SteppingRightFromStartFallsIntoCliff) {
  CliffGrid env(params_for("cliff-grid"));
  env.reset(0);
  const auto r = env.step(Action{1});
  EXPECT_EQ(r.cost, 1);
  EXPECT_TRUE(r.terminal);
  EXPECT_DOUBLE_EQ(r.reward, -1.0);
  EXPECT_EQ(env.state_index(r.next_state), 1);
}

TEST(CliffGrid, SteppingUpIsSafe) {
  CliffGrid env(params_for("cliff-grid"));
  env.reset(0);
  const auto r = env.step(Action{0});
  EXPECT_EQ(r.cost, 0);
  EXPECT_FALSE(r.terminal);
  EXPECT_DOUBLE_EQ(r.reward, -1.0);
  EXPECT_EQ(env.state_index(r.next_state), 12);
}

TEST(CliffGrid, OffGridMovesClampInPlace) {
  CliffGrid env(params_for("cliff-grid"));
  const auto s0 = env.reset(0);
  const auto r = env.step(Action{3});  // left at the left edge
  EXPECT_EQ(env.state_index(r.next_state), env.state_index(s0));
  EXPECT_FALSE(r.terminal);
}

TEST(CliffGrid, SafeDetourReachesGoal) {
  CliffGrid env(params_for("cliff-grid"));
  env.reset(0);
  double total = 0.0;
  StepResult r;
  r = env.step(Action{0});  // up
  total += r.reward;
  for (int i = 0; i < 11; ++i) {  // right along row 1
    r = env.step(Action{1});
    ASSERT_FALSE(r.terminal);
    total += r.reward;
  }
  r = env.step(Action{2});  // down onto the goal
  total += r.reward;
  EXPECT_TRUE(r.terminal);
  EXPECT_EQ(r.cost, 0);
  EXPECT_DOUBLE_EQ(r.reward, 10.0);
  EXPECT_DOUBLE_EQ(total, 12.0 * -1.0 + 10.0);  // 12 step penalties + goal
  EXPECT_EQ(env.state_index(r.next_state), 11);
}

TEST(CliffGrid, StateIndexRoundTripsEveryCell) {
  CliffGrid env(params_for("cliff-grid"));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 12; ++x)
      EXPECT_EQ(env.state_index(env.encode(x, y)), y * 12 + x);
  EXPECT_EQ(env.state_count(), 48);
}

TEST(CliffGrid, FeatureVectorIsCoordsPlusOneHot) {
  CliffGrid env(params_for("cliff-grid"));
  const auto s = env.reset(0);
  const auto f = env.feature_vector(s, Action{2});
  ASSERT_EQ(f.size(), 6u);
  EXPECT_DOUBLE_EQ(f[0], s[0]);
  EXPECT_DOUBLE_EQ(f[1], s[1]);
  EXPECT_DOUBLE_EQ(f[2], 0.0);
  EXPECT_DOUBLE_EQ(f[3], 0.0);
  EXPECT_DOUBLE_EQ(f[4], 1.0);
  EXPECT_DOUBLE_EQ(f[5], 0.0);
}

TEST(CliffGrid, CliffRewardDefaultsToStepRewardAndIsOverridable) {
  CliffGrid plain(params_for("cliff-grid"));
  plain.reset(0);
  EXPECT_DOUBLE_EQ(plain.step(Action{1}).reward, -1.0);

  EnvParams p = params_for("cliff-grid");
  p.cliff_reward = -10.0;
  CliffGrid steep(p);
  steep.reset(0);
  EXPECT_DOUBLE_EQ(steep.step(Action{1}).reward, -10.0);
  EXPECT_DOUBLE_EQ(steep.spec().reward_min, -10.0);
  EXPECT_DOUBLE_EQ(steep.spec().reward_max, 10.0);
}

TEST(CliffGrid, RejectsDegenerateDimensions) {
  EnvParams p = params_for("cliff-grid");
  p.width = 2;
  EXPECT_THROW(CliffGrid{p}, std::invalid_argument);
  p.width = 12;
  p.height = 1;
  EXPECT_THROW(CliffGrid{p}, std::invalid_argument);
}

// ---------- PuddlePoint ----------

TEST(PuddlePoint, ResetSamplesStartRegionFromSeed) {
  PuddlePoint env(params_for("puddle-point"));
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 12345ull}) {
    const auto s = env.reset(seed);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_GE(s[0], -0.9);
    EXPECT_LE(s[0], -0.7);
    EXPECT_GE(s[1], -0.9);
    EXPECT_LE(s[1], -0.7);
    EXPECT_DOUBLE_EQ(s[2], 0.0);
    EXPECT_DOUBLE_EQ(s[3], 0.0);
  }
}

TEST(PuddlePoint, ZeroActionFromRestStaysPut) {
  PuddlePoint env(params_for("puddle-point"));
  const auto s0 = env.reset(7);
  const auto r = env.step(Action{std::vector<double>{0.0, 0.0}});
  EXPECT_DOUBLE_EQ(r.next_state[0], s0[0]);
  EXPECT_DOUBLE_EQ(r.next_state[1], s0[1]);
  EXPECT_DOUBLE_EQ(r.reward, -0.05);  // step penalty, zero progress
  EXPECT_EQ(r.cost, 0);
  EXPECT_FALSE(r.terminal);
}

TEST(PuddlePoint, WallContactZeroesVelocity) {
  PuddlePoint env(params_for("puddle-point"));
  env.reset(3);
  StepResult r;
  for (int i = 0; i < 100; ++i) {
    r = env.step(Action{std::vector<double>{-1.0, -1.0}});
    ASSERT_FALSE(r.terminal);
  }
  EXPECT_DOUBLE_EQ(r.next_state[0], -1.0);
  EXPECT_DOUBLE_EQ(r.next_state[1], -1.0);
  EXPECT_GE(r.next_state[2], -0.1);
  EXPECT_LE(r.next_state[2], 0.0);
}

TEST(PuddlePoint, DrivingThroughTheMiddleHitsTheUnsafeDisc) {
  PuddlePoint env(params_for("puddle-point"));
  auto s = env.reset(11);
  bool hit = false;
  for (int i = 0; i < 200; ++i) {
    // accelerate straight toward the origin
    const double n = std::hypot(s[0], s[1]);
    std::vector<double> a{-s[0] / n, -s[1] / n};
    const auto r = env.step(Action{a});
    s = r.next_state;
    if (r.terminal) {
      EXPECT_EQ(r.cost, 1);
      EXPECT_LE(std::hypot(s[0], s[1]), 0.3);
      hit = true;
      break;
    }
  }
  EXPECT_TRUE(hit);
}

TEST(PuddlePoint, SteeringAroundTheDiscReachesTheGoal) {
  PuddlePoint env(params_for("puddle-point"));
  auto s = env.reset(5);
  bool reached = false;
  // PD controller through a waypoint that skirts the unsafe disc.
  double wx = 0.7, wy = -0.7;
  for (int i = 0; i < 400; ++i) {
    if (std::hypot(s[0] - wx, s[1] - wy) < 0.25 && wy < 0.0) {
      wx = 0.8;
      wy = 0.8;
    }
    std::vector<double> a{
        std::clamp(4.0 * (wx - s[0]) - 3.0 * s[2], -1.0, 1.0),
        std::clamp(4.0 * (wy - s[1]) - 3.0 * s[3], -1.0, 1.0)};
    const auto r = env.step(Action{a});
    s = r.next_state;
    if (r.terminal) {
      EXPECT_EQ(r.cost, 0);
      EXPECT_DOUBLE_EQ(r.reward, 10.0);
      reached = true;
      break;
    }
  }
  EXPECT_TRUE(reached);
}

TEST(PuddlePoint, FeatureVectorAppendsAction) {
  PuddlePoint env(params_for("puddle-point"));
  const auto s = env.reset(0);
  const auto f = env.feature_vector(s, Action{std::vector<double>{0.25, -0.5}});
  ASSERT_EQ(f.size(), 6u);
  EXPECT_DOUBLE_EQ(f[4], 0.25);
  EXPECT_DOUBLE_EQ(f[5], -0.5);
}

// ---------- LineHopper ----------

TEST(LineHopper, ResetHeightJittersAroundHover) {
  LineHopper env(params_for("line-hopper"));
  for (std::uint64_t seed : {0ull, 9ull, 77ull}) {
    const auto s = env.reset(seed);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_GE(s[0], -0.1);
    EXPECT_LE(s[0], 0.1);
    EXPECT_DOUBLE_EQ(s[1], 0.0);
  }
}

TEST(LineHopper, RewardPaysForThrift) {
  LineHopper env(params_for("line-hopper"));
  env.reset(0);
  EXPECT_DOUBLE_EQ(env.step(Action{std::vector<double>{1.0}}).reward, 0.0);
  EXPECT_DOUBLE_EQ(env.step(Action{std::vector<double>{0.25}}).reward, 0.75);
  EXPECT_DOUBLE_EQ(env.step(Action{std::vector<double>{0.0}}).reward, 1.0);
}

TEST(LineHopper, CuttingThrustFallsBelowThreshold) {
  LineHopper env(params_for("line-hopper"));
  env.reset(4);
  bool fell = false;
  for (int i = 0; i < 40; ++i) {
    const auto r = env.step(Action{std::vector<double>{0.0}});
    if (r.terminal) {
      EXPECT_EQ(r.cost, 1);
      EXPECT_LT(r.next_state[0] + 1.0, 0.2);
      fell = true;
      break;
    }
  }
  EXPECT_TRUE(fell);
}

TEST(LineHopper, BalancedThrustHoversIndefinitely) {
  LineHopper env(params_for("line-hopper"));
  const auto s0 = env.reset(8);
  StepResult r;
  for (int i = 0; i < 500; ++i) {
    r = env.step(Action{std::vector<double>{0.5}});
    ASSERT_FALSE(r.terminal);
  }
  EXPECT_DOUBLE_EQ(r.next_state[0], s0[0]);
  EXPECT_DOUBLE_EQ(r.next_state[1], 0.0);
}

// ---------- shared contracts ----------

TEST(Environments, StepBeforeResetIsALogicError) {
  for (const auto* id : {"cliff-grid", "puddle-point", "line-hopper"}) {
    auto env = make_environment(params_for(id));
    std::mt19937_64 rng(1);
    EXPECT_THROW(env->step(random_action(env->spec(), rng)), std::logic_error)
        << id;
  }
}

TEST(Environments, StepAfterTerminalIsALogicError) {
  CliffGrid env(params_for("cliff-grid"));
  env.reset(0);
  ASSERT_TRUE(env.step(Action{1}).terminal);
  EXPECT_THROW(env.step(Action{0}), std::logic_error);
  env.reset(0);  // reset revives the episode
  EXPECT_NO_THROW(env.step(Action{0}));
}

TEST(Environments, OutOfSpaceActionsAreRejected) {
  CliffGrid grid(params_for("cliff-grid"));
  grid.reset(0);
  EXPECT_THROW(grid.step(Action{4}), std::invalid_argument);
  EXPECT_THROW(grid.step(Action{-1}), std::invalid_argument);
  EXPECT_THROW(grid.step(Action{std::vector<double>{0.0}}), std::invalid_argument);

  PuddlePoint pp(params_for("puddle-point"));
  pp.reset(0);
  EXPECT_THROW(pp.step(Action{std::vector<double>{1.5, 0.0}}), std::invalid_argument);
  EXPECT_THROW(pp.step(Action{std::vector<double>{0.0}}), std::invalid_argument);
  EXPECT_THROW(pp.step(Action{0}), std::invalid_argument);

  LineHopper lh(params_for("line-hopper"));
  lh.reset(0);
  EXPECT_THROW(lh.step(Action{std::vector<double>{-0.1}}), std::invalid_argument);
}

TEST(Environments, FeatureVectorValidatesItsInputs) {
  CliffGrid grid(params_for("cliff-grid"));
  EXPECT_THROW(grid.feature_vector({0.0}, Action{0}), std::invalid_argument);
  EXPECT_THROW(grid.feature_vector({0.0, 0.0}, Action{9}), std::invalid_argument);
}

TEST(Environments, IdenticalSeedsGiveBitIdenticalRollouts) {
  for (const auto* id : {"cliff-grid", "puddle-point", "line-hopper"}) {
    auto a = make_environment(params_for(id));
    auto b = make_environment(params_for(id));
    std::mt19937_64 rng_a(99), rng_b(99);
    auto sa = a->reset(2024);
    auto sb = b->reset(2024);
    ASSERT_EQ(sa, sb) << id;
    for (int t = 0; t < 300; ++t) {
      const Action act_a = random_action(a->spec(), rng_a);
      const Action act_b = random_action(b->spec(), rng_b);
      ASSERT_EQ(act_a, act_b);
      const auto ra = a->step(act_a);
      const auto rb = b->step(act_b);
      ASSERT_EQ(ra.next_state, rb.next_state) << id;
      ASSERT_EQ(ra.reward, rb.reward) << id;
      ASSERT_EQ(ra.cost, rb.cost) << id;
      ASSERT_EQ(ra.terminal, rb.terminal) << id;
      if (ra.terminal) {
        sa = a->reset(2024 + t);
        sb = b->reset(2024 + t);
        ASSERT_EQ(sa, sb);
      }
    }
  }
}

TEST(Environments, RandomWalkRespectsRewardCostAndFeatureContracts) {
  for (const auto* id : {"cliff-grid", "puddle-point", "line-hopper"}) {
    auto env = make_environment(params_for(id));
    const auto& spec = env->spec();
    std::mt19937_64 rng(314159);
    std::uint64_t episode_seed = 1;
    auto s = env->reset(episode_seed++);
    for (int t = 0; t < 100000; ++t) {
      const Action act = random_action(spec, rng);
      const auto f = env->feature_vector(s, act);
      ASSERT_EQ(static_cast<int>(f.size()), env->feature_dim()) << id;
      for (double v : f) {
        ASSERT_GE(v, -1.0) << id;
        ASSERT_LE(v, 1.0) << id;
      }
      const auto r = env->step(act);
      ASSERT_GE(r.reward, spec.reward_min) << id;
      ASSERT_LE(r.reward, spec.reward_max) << id;
      ASSERT_TRUE(r.cost == 0 || r.cost == 1) << id;
      if (r.cost == 1) ASSERT_TRUE(r.terminal) << id;  // cost events end episodes
      for (double v : r.next_state) ASSERT_TRUE(std::isfinite(v)) << id;
      s = r.terminal ? env->reset(episode_seed++) : r.next_state;
    }
  }
}

TEST(Environments, FactoryRejectsUnknownIds) {
  EXPECT_THROW(make_environment(params_for("mystery-env")), std::invalid_argument);
}

TEST(Environments, HorizonHelperPrefersConfiguredValue) {
  auto env = make_environment(params_for("cliff-grid"));
  EXPECT_EQ(episode_horizon(*env, 0), 100);
  EXPECT_EQ(episode_horizon(*env, 25), 25);
}

TEST(Environments, SpecsDescribeTheActionSpace) {
  auto grid = make_environment(params_for("cliff-grid"));
  ASSERT_TRUE(std::holds_alternative<DiscreteSpace>(grid->spec().actions));
  EXPECT_EQ(std::get<DiscreteSpace>(grid->spec().actions).n, 4);

  auto pp = make_environment(params_for("puddle-point"));
  ASSERT_TRUE(std::holds_alternative<BoxSpace>(pp->spec().actions));
  EXPECT_EQ(std::get<BoxSpace>(pp->spec().actions).low.size(), 2u);

  auto lh = make_environment(params_for("line-hopper"));
  ASSERT_TRUE(std::holds_alternative<BoxSpace>(lh->spec().actions));
  EXPECT_EQ(std::get<BoxSpace>(lh->spec().actions).low.size(), 1u);
}

}  // namespace
