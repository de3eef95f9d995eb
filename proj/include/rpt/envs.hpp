#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpt/core.hpp"
#include "rpt/rng.hpp"

namespace rpt {

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  int cost = 0;
  bool terminal = false;
};

// Episodic binary-cost environment. step() is deterministic given the state
// and action; all randomness enters through reset(seed). A transition with
// cost=1 is always terminal. Calling step() before reset() or after a
// terminal transition is a usage error.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const CmdpSpec& spec() const = 0;
  virtual const std::string& id() const = 0;
  virtual int default_horizon() const = 0;
  virtual int feature_dim() const = 0;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;

  // (state, action) embedding for the risk classifier; every component lies
  // in [-1, 1].
  virtual std::vector<double> feature_vector(const std::vector<double>& state,
                                             const Action& action) const = 0;

  // Tabular support; only discrete-state environments implement these.
  virtual int state_count() const { return 0; }
  virtual int state_index(const std::vector<double>&) const {
    throw std::logic_error(id() + ": state_index on a continuous environment");
  }

 protected:
  void require_running() const {
    if (!running_)
      throw std::logic_error("Environment: step() requires reset() and a live episode");
  }
  void begin_episode() { running_ = true; }
  void end_episode_if(bool terminal) {
    if (terminal) running_ = false;
  }
  void check_action(const CmdpSpec& s, const Action& a) const {
    if (!action_in_space(s.actions, a))
      throw std::invalid_argument("Environment: action outside the action space");
  }

 private:
  bool running_ = false;
};

// Construction parameters for all built-in environments; unused fields are
// ignored by environments that do not consume them.
struct EnvParams {
  std::string id = "cliff-grid";
  double gamma = 0.99;
  double cost_threshold = 0.0;     // CMDP budget; validation accepts only 0

  // cliff-grid
  int width = 12;
  int height = 4;
  double step_reward = -1.0;
  double goal_reward = 10.0;
  // Reward on the cliff-entering step itself; defaults to step_reward. A
  // strongly negative value makes falling unattractive to reward-only
  // learners, which otherwise rationally prefer a quick fall over a long
  // negatively-rewarded walk (cost is a separate channel from reward).
  std::optional<double> cliff_reward;

  // puddle-point
  double dt = 0.1;
  double unsafe_radius = 0.3;

  // line-hopper
  double fall_threshold = 0.2;
};

// ---------- CliffGrid ----------

// Classic cliff layout: start bottom-left, goal bottom-right, cliff cells
// between them along the bottom row. Actions 0=up 1=right 2=down 3=left;
// moves off the grid clamp in place. Entering a cliff cell costs 1 and ends
// the episode; entering the goal pays goal_reward and ends it.
class CliffGrid final : public Environment {
 public:
  explicit CliffGrid(const EnvParams& p)
      : id_("cliff-grid"), w_(p.width), h_(p.height), step_reward_(p.step_reward),
        goal_reward_(p.goal_reward),
        cliff_reward_(p.cliff_reward.value_or(p.step_reward)) {
    if (w_ < 3 || h_ < 2)
      throw std::invalid_argument("CliffGrid: width must be >= 3 and height >= 2");
    spec_.state_dim = 2;
    spec_.actions = DiscreteSpace{4};
    spec_.gamma = p.gamma;
    spec_.cost_threshold = p.cost_threshold;
    spec_.reward_min = std::min({step_reward_, goal_reward_, cliff_reward_});
    spec_.reward_max = std::max({step_reward_, goal_reward_, cliff_reward_});
    validate_cmdp_spec(spec_);
  }

  const CmdpSpec& spec() const override { return spec_; }
  const std::string& id() const override { return id_; }
  int default_horizon() const override { return 100; }
  int feature_dim() const override { return 6; }

  std::vector<double> reset(std::uint64_t) override {
    x_ = 0;
    y_ = 0;
    begin_episode();
    return encode(x_, y_);
  }

  StepResult step(const Action& action) override {
    require_running();
    check_action(spec_, action);
    const int a = std::get<int>(action);
    static constexpr int dx[4] = {0, 1, 0, -1};
    static constexpr int dy[4] = {1, 0, -1, 0};
    x_ = std::clamp(x_ + dx[a], 0, w_ - 1);
    y_ = std::clamp(y_ + dy[a], 0, h_ - 1);
    StepResult r;
    r.next_state = encode(x_, y_);
    if (is_cliff(x_, y_)) {
      r.reward = cliff_reward_;
      r.cost = 1;
      r.terminal = true;
    } else if (is_goal(x_, y_)) {
      r.reward = goal_reward_;
      r.terminal = true;
    } else {
      r.reward = step_reward_;
    }
    end_episode_if(r.terminal);
    return r;
  }

  std::vector<double> feature_vector(const std::vector<double>& state,
                                     const Action& action) const override {
    check_action(spec_, action);
    if (state.size() != 2)
      throw std::invalid_argument("CliffGrid: state must have 2 components");
    std::vector<double> f(6, 0.0);
    f[0] = state[0];
    f[1] = state[1];
    f[2 + std::get<int>(action)] = 1.0;
    return f;
  }

  int state_count() const override { return w_ * h_; }
  int state_index(const std::vector<double>& state) const override {
    if (state.size() != 2)
      throw std::invalid_argument("CliffGrid: state must have 2 components");
    const int x = decode(state[0], w_);
    const int y = decode(state[1], h_);
    return y * w_ + x;
  }

  bool is_cliff(int x, int y) const { return y == 0 && x >= 1 && x <= w_ - 2; }
  bool is_goal(int x, int y) const { return x == w_ - 1 && y == 0; }

  std::vector<double> encode(int x, int y) const {
    return {norm(x, w_), norm(y, h_)};
  }

 private:
  static double norm(int v, int extent) {
    return extent > 1 ? 2.0 * v / (extent - 1) - 1.0 : 0.0;
  }
  static int decode(double coord, int extent) {
    return extent > 1
               ? static_cast<int>(std::lround((coord + 1.0) * (extent - 1) / 2.0))
               : 0;
  }

  std::string id_;
  CmdpSpec spec_;
  int w_, h_;
  double step_reward_, goal_reward_, cliff_reward_;
  int x_ = 0, y_ = 0;
};

// ---------- PuddlePoint ----------

// Point mass on [-1,1]^2 steered by bounded acceleration. Position integrates
// velocity, then velocity integrates the action; both are clamped (a wall hit
// zeroes that velocity component). An unsafe disc sits between the start
// region and the goal disc, so straight-line policies pick up risk on the way.
class PuddlePoint final : public Environment {
 public:
  explicit PuddlePoint(const EnvParams& p) : id_("puddle-point"), dt_(p.dt),
                                             unsafe_radius_(p.unsafe_radius) {
    if (!(dt_ > 0.0 && dt_ <= 1.0))
      throw std::invalid_argument("PuddlePoint: dt must lie in (0,1]");
    if (!(unsafe_radius_ > 0.0 && unsafe_radius_ < 0.5))
      throw std::invalid_argument("PuddlePoint: unsafe_radius must lie in (0,0.5)");
    spec_.state_dim = 4;
    spec_.actions = BoxSpace{{-1.0, -1.0}, {1.0, 1.0}};
    spec_.gamma = p.gamma;
    spec_.cost_threshold = p.cost_threshold;
    spec_.reward_min = -0.25;
    spec_.reward_max = kGoalReward;
    validate_cmdp_spec(spec_);
  }

  const CmdpSpec& spec() const override { return spec_; }
  const std::string& id() const override { return id_; }
  int default_horizon() const override { return 200; }
  int feature_dim() const override { return 6; }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(splitmix64(seed));
    px_ = -0.9 + 0.2 * uniform01(rng);
    py_ = -0.9 + 0.2 * uniform01(rng);
    vx_ = vy_ = 0.0;
    begin_episode();
    return {px_, py_, vx_, vy_};
  }

  StepResult step(const Action& action) override {
    require_running();
    check_action(spec_, action);
    const auto& a = std::get<std::vector<double>>(action);
    const double prev_dist = goal_dist(px_, py_);
    px_ += vx_ * dt_;
    py_ += vy_ * dt_;
    vx_ = std::clamp(vx_ + a[0] * dt_, -1.0, 1.0);
    vy_ = std::clamp(vy_ + a[1] * dt_, -1.0, 1.0);
    if (px_ < -1.0 || px_ > 1.0) {
      px_ = std::clamp(px_, -1.0, 1.0);
      vx_ = 0.0;
    }
    if (py_ < -1.0 || py_ > 1.0) {
      py_ = std::clamp(py_, -1.0, 1.0);
      vy_ = 0.0;
    }
    StepResult r;
    r.next_state = {px_, py_, vx_, vy_};
    const double progress = prev_dist - goal_dist(px_, py_);
    r.reward = kStepPenalty + progress;
    if (std::hypot(px_, py_) <= unsafe_radius_) {
      r.cost = 1;
      r.terminal = true;
    } else if (goal_dist(px_, py_) <= kGoalRadius) {
      r.reward = kGoalReward;
      r.terminal = true;
    }
    r.reward = std::clamp(r.reward, spec_.reward_min, spec_.reward_max);
    end_episode_if(r.terminal);
    return r;
  }

  std::vector<double> feature_vector(const std::vector<double>& state,
                                     const Action& action) const override {
    check_action(spec_, action);
    if (state.size() != 4)
      throw std::invalid_argument("PuddlePoint: state must have 4 components");
    const auto& a = std::get<std::vector<double>>(action);
    return {state[0], state[1], state[2], state[3], a[0], a[1]};
  }

 private:
  static double goal_dist(double x, double y) { return std::hypot(x - 0.8, y - 0.8); }

  static constexpr double kStepPenalty = -0.05;
  static constexpr double kGoalRadius = 0.15;
  static constexpr double kGoalReward = 10.0;

  std::string id_;
  CmdpSpec spec_;
  double dt_, unsafe_radius_;
  double px_ = 0.0, py_ = 0.0, vx_ = 0.0, vy_ = 0.0;
};

// ---------- LineHopper ----------

// One-dimensional hover task. Thrust u in [0,1] fights gravity (u=0.5 hovers);
// reward (1-u) pays for thrift, so the greedy-efficient policy sinks toward
// the fall threshold. Dropping below it costs 1 and ends the episode.
class LineHopper final : public Environment {
 public:
  explicit LineHopper(const EnvParams& p) : id_("line-hopper"),
                                            fall_threshold_(p.fall_threshold) {
    if (!(fall_threshold_ > 0.0 && fall_threshold_ < 0.8))
      throw std::invalid_argument("LineHopper: fall_threshold must lie in (0,0.8)");
    spec_.state_dim = 2;
    spec_.actions = BoxSpace{{0.0}, {1.0}};
    spec_.gamma = p.gamma;
    spec_.cost_threshold = p.cost_threshold;
    spec_.reward_min = 0.0;
    spec_.reward_max = 1.0;
    validate_cmdp_spec(spec_);
  }

  const CmdpSpec& spec() const override { return spec_; }
  const std::string& id() const override { return id_; }
  int default_horizon() const override { return 200; }
  int feature_dim() const override { return 3; }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(splitmix64(seed));
    h_ = 0.9 + 0.2 * uniform01(rng);
    vv_ = 0.0;
    begin_episode();
    return {h_ - 1.0, vv_};
  }

  StepResult step(const Action& action) override {
    require_running();
    check_action(spec_, action);
    const double u = std::get<std::vector<double>>(action)[0];
    vv_ = std::clamp(vv_ + (2.0 * u - 1.0) * kDt, -1.0, 1.0);
    h_ = std::clamp(h_ + vv_ * kDt, 0.0, 2.0);
    StepResult r;
    r.next_state = {h_ - 1.0, vv_};
    r.reward = 1.0 - u;
    if (h_ < fall_threshold_) {
      r.cost = 1;
      r.terminal = true;
    }
    end_episode_if(r.terminal);
    return r;
  }

  std::vector<double> feature_vector(const std::vector<double>& state,
                                     const Action& action) const override {
    check_action(spec_, action);
    if (state.size() != 2)
      throw std::invalid_argument("LineHopper: state must have 2 components");
    const double u = std::get<std::vector<double>>(action)[0];
    return {state[0], state[1], 2.0 * u - 1.0};
  }

 private:
  static constexpr double kDt = 0.1;

  std::string id_;
  CmdpSpec spec_;
  double fall_threshold_;
  double h_ = 1.0, vv_ = 0.0;
};

inline std::unique_ptr<Environment> make_environment(const EnvParams& p) {
  if (p.id == "cliff-grid") return std::make_unique<CliffGrid>(p);
  if (p.id == "puddle-point") return std::make_unique<PuddlePoint>(p);
  if (p.id == "line-hopper") return std::make_unique<LineHopper>(p);
  throw std::invalid_argument("make_environment: unknown environment id '" + p.id + "'");
}

inline int episode_horizon(const Environment& env, int configured_max_steps) {
  return configured_max_steps > 0 ? configured_max_steps : env.default_horizon();
}

}  // namespace rpt
