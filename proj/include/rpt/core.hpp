#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rpt/rng.hpp"

namespace rpt {

// ---------- action spaces ----------

struct DiscreteSpace {
  int n = 0;
};

struct BoxSpace {
  std::vector<double> low;
  std::vector<double> high;
};

using ActionSpace = std::variant<DiscreteSpace, BoxSpace>;

// Discrete actions are an index; continuous actions a coordinate vector.
using Action = std::variant<int, std::vector<double>>;

inline bool action_in_space(const ActionSpace& space, const Action& a) {
  if (std::holds_alternative<DiscreteSpace>(space)) {
    if (!std::holds_alternative<int>(a)) return false;
    const int i = std::get<int>(a);
    return i >= 0 && i < std::get<DiscreteSpace>(space).n;
  }
  if (!std::holds_alternative<std::vector<double>>(a)) return false;
  const auto& box = std::get<BoxSpace>(space);
  const auto& v = std::get<std::vector<double>>(a);
  if (v.size() != box.low.size()) return false;
  for (std::size_t d = 0; d < v.size(); ++d) {
    if (!(v[d] >= box.low[d] && v[d] <= box.high[d])) return false;
  }
  return true;
}

// ---------- CMDP description ----------

// Binary-cost constrained MDP with a hard zero budget: any transition with
// cost=1 ends the episode, and the cost threshold is exactly 0 by contract.
struct CmdpSpec {
  int state_dim = 0;
  ActionSpace actions;
  double gamma = 0.99;
  double reward_min = 0.0;
  double reward_max = 0.0;
  double cost_threshold = 0.0;
};

inline void validate_cmdp_spec(const CmdpSpec& s) {
  if (!(s.gamma > 0.0 && s.gamma < 1.0))
    throw std::invalid_argument("CmdpSpec: gamma must lie in (0,1)");
  if (!(s.reward_min <= s.reward_max))
    throw std::invalid_argument("CmdpSpec: reward_min must be <= reward_max");
  if (s.cost_threshold != 0.0)
    throw std::invalid_argument("CmdpSpec: cost_threshold must be 0");
  if (s.state_dim <= 0) throw std::invalid_argument("CmdpSpec: state_dim must be positive");
}

// ---------- transitions and trajectories ----------

struct Transition {
  std::vector<double> state;
  Action action;
  double reward = 0.0;
  int cost = 0;
  std::vector<double> next_state;
  bool terminal = false;
  bool truncated_by_risk = false;
};

inline void validate_transition(const Transition& t) {
  if (t.cost != 0 && t.cost != 1)
    throw std::invalid_argument("Transition: cost must be 0 or 1");
  if (t.cost == 1 && !t.terminal)
    throw std::invalid_argument("Transition: cost=1 implies terminal");
  if (t.cost == 1 && t.truncated_by_risk)
    throw std::invalid_argument("Transition: truncated_by_risk excludes cost=1");
}

enum class TrajectoryOutcome { ReachedUnsafe, RiskTruncated, HorizonEnd, GoalTerminal };

inline const char* outcome_name(TrajectoryOutcome o) {
  switch (o) {
    case TrajectoryOutcome::ReachedUnsafe: return "reached-unsafe";
    case TrajectoryOutcome::RiskTruncated: return "risk-truncated";
    case TrajectoryOutcome::HorizonEnd: return "horizon-end";
    case TrajectoryOutcome::GoalTerminal: return "goal-terminal";
  }
  return "unknown";
}

// One episode. shaped_rewards parallels transitions and equals the raw reward
// wherever no penalty applied. Empty trajectories only arise when an episode
// is risk-truncated before its first step executes.
struct Trajectory {
  std::vector<Transition> transitions;
  std::vector<double> shaped_rewards;
  TrajectoryOutcome outcome = TrajectoryOutcome::HorizonEnd;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }

  void append(Transition t, double shaped_reward) {
    validate_transition(t);
    if (!transitions.empty() && transitions.back().terminal)
      throw std::logic_error("Trajectory: cannot append past a terminal transition");
    if (!transitions.empty() && transitions.back().truncated_by_risk)
      throw std::logic_error("Trajectory: cannot append past a risk truncation");
    transitions.push_back(std::move(t));
    shaped_rewards.push_back(shaped_reward);
  }
};

struct ShapedTransition {
  Transition t;
  double shaped_reward = 0.0;
};

// ---------- replay buffer ----------

// Bounded FIFO of shaped transitions. The shaped reward is whatever the
// collector computed at collection time; it is not recomputed on sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(ShapedTransition s) {
    validate_transition(s.t);
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(std::move(s));
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const ShapedTransition& at(std::size_t i) const { return entries_.at(i); }

  // Uniform with replacement; reproducible for a fixed rng state.
  std::vector<ShapedTransition> sample(std::size_t n, std::mt19937_64& rng) const {
    if (entries_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    std::vector<ShapedTransition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(entries_[static_cast<std::size_t>(
          uniform_int(rng, static_cast<int>(entries_.size())))]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<ShapedTransition> entries_;
};

// ---------- unsafe pair set ----------

struct UnsafePair {
  std::vector<double> state;
  Action action;
};

// Multiset of (state, action) pairs that incurred cost. Duplicates are kept;
// a positive max_size turns it into a FIFO window, 0 means unbounded.
class UnsafePairSet {
 public:
  explicit UnsafePairSet(std::size_t max_size = 0) : max_size_(max_size) {}

  void add(std::vector<double> state, Action action) {
    if (max_size_ > 0 && pairs_.size() == max_size_) pairs_.pop_front();
    pairs_.push_back(UnsafePair{std::move(state), std::move(action)});
  }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const UnsafePair& at(std::size_t i) const { return pairs_.at(i); }

  std::vector<UnsafePair> sample(std::size_t n, std::mt19937_64& rng) const {
    if (pairs_.empty()) throw std::logic_error("UnsafePairSet: sample from empty set");
    std::vector<UnsafePair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(pairs_[static_cast<std::size_t>(
          uniform_int(rng, static_cast<int>(pairs_.size())))]);
    return out;
  }

 private:
  std::size_t max_size_;
  std::deque<UnsafePair> pairs_;
};

// ---------- trajectory metrics ----------

/// Sum_t gamma^t r_t; uses the shaped reward stream when shaped=true.
inline double discounted_return(const Trajectory& traj, double gamma, bool shaped) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_return: gamma must lie in (0,1)");
  if (traj.empty()) throw std::invalid_argument("discounted_return: empty trajectory");
  double acc = 0.0;
  double g = 1.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    acc += g * (shaped ? traj.shaped_rewards[t] : traj.transitions[t].reward);
    g *= gamma;
  }
  return acc;
}

inline double undiscounted_return(const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("undiscounted_return: empty trajectory");
  double acc = 0.0;
  for (const auto& t : traj.transitions) acc += t.reward;
  return acc;
}

/// Discounted sum of per-step risk probabilities: the sampled estimate of the
/// constraint cost J_c under the risk model.
inline double discounted_risk_cost(const Trajectory& traj, const std::vector<double>& risks,
                                   double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("discounted_risk_cost: gamma must lie in (0,1)");
  if (traj.empty()) throw std::invalid_argument("discounted_risk_cost: empty trajectory");
  if (risks.size() != traj.size())
    throw std::invalid_argument("discounted_risk_cost: risks length must match trajectory");
  double acc = 0.0;
  double g = 1.0;
  for (double p : risks) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("discounted_risk_cost: risk outside [0,1]");
    acc += g * p;
    g *= gamma;
  }
  return acc;
}

}  // namespace rpt
