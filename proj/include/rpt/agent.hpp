#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rpt/core.hpp"
#include "rpt/envs.hpp"
#include "rpt/nn.hpp"
#include "rpt/rng.hpp"
#include "rpt/tensorio.hpp"

namespace rpt {

struct AgentParams {
  std::string kind = "tabular-q";  // "tabular-q" | "actor-critic"
  std::uint64_t seed = 0;

  // tabular-q
  double learning_rate = 0.1;
  double q_init = 0.0;
  double epsilon = 1.0;
  double epsilon_min = 0.05;
  double epsilon_decay = 0.995;

  // actor-critic
  int hidden_dim = 64;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double entropy_coef = 0.01;
};

inline void validate_agent_params(const AgentParams& p) {
  if (p.kind != "tabular-q" && p.kind != "actor-critic")
    throw std::invalid_argument("AgentParams: kind must be tabular-q or actor-critic");
  if (!(p.learning_rate >= 0.0) || !std::isfinite(p.learning_rate))
    throw std::invalid_argument("AgentParams: learning_rate must be >= 0");
  if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0))
    throw std::invalid_argument("AgentParams: epsilon must lie in [0,1]");
  if (!(p.epsilon_min >= 0.0 && p.epsilon_min <= 1.0))
    throw std::invalid_argument("AgentParams: epsilon_min must lie in [0,1]");
  if (!(p.epsilon_decay > 0.0 && p.epsilon_decay <= 1.0))
    throw std::invalid_argument("AgentParams: epsilon_decay must lie in (0,1]");
  if (p.hidden_dim < 1) throw std::invalid_argument("AgentParams: hidden_dim must be >= 1");
  if (!(p.actor_lr >= 0.0) || !(p.critic_lr >= 0.0))
    throw std::invalid_argument("AgentParams: learning rates must be >= 0");
  if (!(p.entropy_coef >= 0.0))
    throw std::invalid_argument("AgentParams: entropy_coef must be >= 0");
}

// Policy learner contract. act() with explore=false is deterministic given
// the parameters; update() is deterministic given batch order and seed.
class PolicyLearner {
 public:
  virtual ~PolicyLearner() = default;
  virtual const std::string& kind() const = 0;
  virtual Action act(const std::vector<double>& state, bool explore) = 0;
  virtual void update(const std::vector<ShapedTransition>& batch) = 0;
  virtual void decay_exploration() {}
  virtual double exploration() const { return 0.0; }
  virtual void save(TensorFile& out) const = 0;
  virtual void load(const TensorFile& in) = 0;
};

using StateIndexer = std::function<int(const std::vector<double>&)>;

// ---------- TabularQ ----------

// One-step Q-learning over an indexed finite state space. Greedy ties break
// toward the lowest action index so rollouts are reproducible.
class TabularQ final : public PolicyLearner {
 public:
  TabularQ(int state_count, int action_count, StateIndexer indexer, double gamma,
           const AgentParams& p)
      : kind_("tabular-q"), states_(state_count), actions_(action_count),
        indexer_(std::move(indexer)), gamma_(gamma), lr_(p.learning_rate),
        eps_(p.epsilon), eps_min_(p.epsilon_min), eps_decay_(p.epsilon_decay),
        q_(static_cast<std::size_t>(state_count) * action_count, p.q_init),
        rng_(derive_seed(p.seed, streams::policy_act)) {
    validate_agent_params(p);
    if (states_ < 1 || actions_ < 1)
      throw std::invalid_argument("TabularQ: state and action counts must be positive");
    if (!(gamma_ > 0.0 && gamma_ < 1.0))
      throw std::invalid_argument("TabularQ: gamma must lie in (0,1)");
    if (!indexer_) throw std::invalid_argument("TabularQ: indexer must be callable");
  }

  const std::string& kind() const override { return kind_; }

  Action act(const std::vector<double>& state, bool explore) override {
    const int s = index_of(state);
    if (explore && uniform01(rng_) < eps_) return Action{uniform_int(rng_, actions_)};
    return Action{greedy_action(s)};
  }

  void update(const std::vector<ShapedTransition>& batch) override {
    if (batch.empty()) throw std::invalid_argument("TabularQ: update batch must be non-empty");
    for (const ShapedTransition& st : batch) {
      if (!std::holds_alternative<int>(st.t.action))
        throw std::invalid_argument("TabularQ: expected a discrete action");
      const int s = index_of(st.t.state);
      const int a = std::get<int>(st.t.action);
      if (a < 0 || a >= actions_)
        throw std::invalid_argument("TabularQ: action index out of range");
      // A risk truncation is an artificial cut, not an absorbing state, so
      // only true terminals mask the bootstrap term.
      const double bootstrap =
          st.t.terminal ? 0.0 : q_[static_cast<std::size_t>(index_of(st.t.next_state)) *
                                       actions_ +
                                   greedy_action(index_of(st.t.next_state))];
      const double target = st.shaped_reward + gamma_ * bootstrap;
      double& q = q_[static_cast<std::size_t>(s) * actions_ + a];
      q += lr_ * (target - q);
      if (!std::isfinite(q)) throw std::runtime_error("TabularQ: non-finite value update");
    }
  }

  void decay_exploration() override { eps_ = std::max(eps_min_, eps_ * eps_decay_); }
  double exploration() const override { return eps_; }

  double q_value(int state, int action) const {
    if (state < 0 || state >= states_ || action < 0 || action >= actions_)
      throw std::out_of_range("TabularQ: q_value index out of range");
    return q_[static_cast<std::size_t>(state) * actions_ + action];
  }

  void save(TensorFile& out) const override {
    out.set_attr("kind", kind_);
    out.add_tensor("q", {states_, actions_}, q_);
    out.add_tensor("epsilon", {1}, {eps_});
  }

  void load(const TensorFile& in) override {
    if (in.attr_required("kind") != kind_)
      throw std::runtime_error("TabularQ: checkpoint kind is '" + in.attr_required("kind") +
                               "', expected '" + kind_ + "'");
    const Tensor& q = in.tensor_required("q");
    if (q.dims != std::vector<int>{states_, actions_})
      throw std::runtime_error("TabularQ: checkpoint table shape mismatch");
    q_ = q.values;
    eps_ = in.tensor_required("epsilon").values.at(0);
  }

 private:
  int index_of(const std::vector<double>& state) const {
    const int s = indexer_(state);
    if (s < 0 || s >= states_) throw std::invalid_argument("TabularQ: state index out of range");
    return s;
  }

  int greedy_action(int s) const {
    const std::size_t base = static_cast<std::size_t>(s) * actions_;
    int best = 0;
    for (int a = 1; a < actions_; ++a)
      if (q_[base + a] > q_[base + best]) best = a;
    return best;
  }

  std::string kind_;
  int states_, actions_;
  StateIndexer indexer_;
  double gamma_, lr_, eps_, eps_min_, eps_decay_;
  std::vector<double> q_;
  std::mt19937_64 rng_;
};

// ---------- ActorCritic ----------

// Compact Gaussian-policy actor-critic for box action spaces: both networks
// are single-hidden-layer MLPs, the actor emits per-dimension mean and
// log-std (clamped to [-5,2]), and updates are advantage-weighted policy
// gradients plus a one-step TD critic regression.
class ActorCritic final : public PolicyLearner {
 public:
  ActorCritic(int state_dim, BoxSpace box, double gamma, const AgentParams& p)
      : kind_("actor-critic"), state_dim_(state_dim), box_(std::move(box)),
        action_dim_(static_cast<int>(box_.low.size())), gamma_(gamma),
        entropy_coef_(p.entropy_coef),
        actor_(state_dim, p.hidden_dim, 2 * static_cast<int>(box_.low.size())),
        critic_(state_dim, p.hidden_dim, 1),
        rng_(derive_seed(p.seed, streams::policy_act)) {
    validate_agent_params(p);
    if (state_dim_ < 1) throw std::invalid_argument("ActorCritic: state_dim must be positive");
    if (action_dim_ < 1 || box_.low.size() != box_.high.size())
      throw std::invalid_argument("ActorCritic: malformed action box");
    if (!(gamma_ > 0.0 && gamma_ < 1.0))
      throw std::invalid_argument("ActorCritic: gamma must lie in (0,1)");
    actor_.init_random(derive_seed(p.seed, streams::actor_init));
    critic_.init_random(derive_seed(p.seed, streams::critic_init));
    actor_opt_.learning_rate = p.actor_lr;
    critic_opt_.learning_rate = p.critic_lr;
  }

  const std::string& kind() const override { return kind_; }

  Action act(const std::vector<double>& state, bool explore) override {
    const Eigen::VectorXd y = actor_.forward(to_eigen(state));
    std::vector<double> a(static_cast<std::size_t>(action_dim_));
    for (int i = 0; i < action_dim_; ++i) {
      double v = y[i];
      if (explore) {
        const double log_std = std::clamp(y[action_dim_ + i], kLogStdMin, kLogStdMax);
        v += std::exp(log_std) * normal01(rng_);
      }
      a[static_cast<std::size_t>(i)] = std::clamp(v, box_.low[i], box_.high[i]);
    }
    return Action{std::move(a)};
  }

  void update(const std::vector<ShapedTransition>& batch) override {
    if (batch.empty())
      throw std::invalid_argument("ActorCritic: update batch must be non-empty");
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(actor_.params().size());
    Eigen::VectorXd gc = Eigen::VectorXd::Zero(critic_.params().size());
    const double w = 1.0 / static_cast<double>(batch.size());
    for (const ShapedTransition& st : batch) {
      if (!std::holds_alternative<std::vector<double>>(st.t.action))
        throw std::invalid_argument("ActorCritic: expected a box action");
      const Eigen::VectorXd x = to_eigen(st.t.state);

      Mlp::Cache ccache;
      const double v = critic_.forward(x, &ccache)[0];
      const double vnext =
          st.t.terminal ? 0.0 : critic_.forward(to_eigen(st.t.next_state))[0];
      const double target = st.shaped_reward + gamma_ * vnext;
      const double advantage = target - v;
      // d/dv of (v - target)^2, averaged over the batch
      critic_.backward(ccache, Eigen::VectorXd::Constant(1, 2.0 * (v - target) * w), gc);

      Mlp::Cache acache;
      const Eigen::VectorXd y = actor_.forward(x, &acache);
      const auto& act = std::get<std::vector<double>>(st.t.action);
      if (static_cast<int>(act.size()) != action_dim_)
        throw std::invalid_argument("ActorCritic: action dimension mismatch");
      Eigen::VectorXd dy = Eigen::VectorXd::Zero(2 * action_dim_);
      for (int i = 0; i < action_dim_; ++i) {
        const double raw = y[action_dim_ + i];
        const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
        const double sigma = std::exp(log_std);
        const double z = (act[static_cast<std::size_t>(i)] - y[i]) / sigma;
        // loss = -(advantage)·log pi - entropy_coef·H, per action dimension:
        //   dlogpi/dmean    = z/sigma
        //   dlogpi/dlog_std = z^2 - 1
        //   dH/dlog_std     = 1
        dy[i] = -advantage * (z / sigma) * w;
        if (raw > kLogStdMin && raw < kLogStdMax)  // clamp gates the gradient
          dy[action_dim_ + i] = (-advantage * (z * z - 1.0) - entropy_coef_) * w;
      }
      actor_.backward(acache, dy, ga);
    }
    if (!ga.allFinite() || !gc.allFinite())
      throw std::runtime_error("ActorCritic: non-finite gradient");
    actor_opt_.apply(actor_.params(), ga);
    critic_opt_.apply(critic_.params(), gc);
  }

  double value(const std::vector<double>& state) const {
    return critic_.forward(to_eigen(state))[0];
  }

  std::vector<double> action_mean(const std::vector<double>& state) const {
    const Eigen::VectorXd y = actor_.forward(to_eigen(state));
    std::vector<double> mu(static_cast<std::size_t>(action_dim_));
    for (int i = 0; i < action_dim_; ++i)
      mu[static_cast<std::size_t>(i)] = std::clamp(y[i], box_.low[i], box_.high[i]);
    return mu;
  }

  void save(TensorFile& out) const override {
    out.set_attr("kind", kind_);
    const auto dump = [](const Mlp& net) {
      return std::vector<double>(net.params().data(), net.params().data() + net.params().size());
    };
    out.add_tensor("actor", {static_cast<int>(actor_.params().size())}, dump(actor_));
    out.add_tensor("critic", {static_cast<int>(critic_.params().size())}, dump(critic_));
  }

  void load(const TensorFile& in) override {
    if (in.attr_required("kind") != kind_)
      throw std::runtime_error("ActorCritic: checkpoint kind is '" +
                               in.attr_required("kind") + "', expected '" + kind_ + "'");
    const auto restore = [](Mlp& net, const Tensor& t) {
      if (t.values.size() != static_cast<std::size_t>(net.params().size()))
        throw std::runtime_error("ActorCritic: checkpoint parameter count mismatch");
      for (Eigen::Index i = 0; i < net.params().size(); ++i)
        net.params()[i] = t.values[static_cast<std::size_t>(i)];
    };
    restore(actor_, in.tensor_required("actor"));
    restore(critic_, in.tensor_required("critic"));
  }

 private:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  Eigen::VectorXd to_eigen(const std::vector<double>& s) const {
    if (static_cast<int>(s.size()) != state_dim_)
      throw std::invalid_argument("ActorCritic: state dimension mismatch");
    return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  }

  std::string kind_;
  int state_dim_;
  BoxSpace box_;
  int action_dim_;
  double gamma_, entropy_coef_;
  Mlp actor_, critic_;
  AdamState actor_opt_, critic_opt_;
  std::mt19937_64 rng_;
};

// The environment must outlive the learner: tabular learners keep the
// environment's state indexer.
inline std::unique_ptr<PolicyLearner> make_learner(const Environment& env,
                                                   const AgentParams& p) {
  validate_agent_params(p);
  if (p.kind == "tabular-q") {
    if (!std::holds_alternative<DiscreteSpace>(env.spec().actions) || env.state_count() <= 0)
      throw std::invalid_argument(
          "make_learner: tabular-q needs a discrete environment (try actor-critic)");
    return std::make_unique<TabularQ>(
        env.state_count(), std::get<DiscreteSpace>(env.spec().actions).n,
        [&env](const std::vector<double>& s) { return env.state_index(s); },
        env.spec().gamma, p);
  }
  if (!std::holds_alternative<BoxSpace>(env.spec().actions))
    throw std::invalid_argument(
        "make_learner: actor-critic needs a box action space (try tabular-q)");
  return std::make_unique<ActorCritic>(env.spec().state_dim,
                                       std::get<BoxSpace>(env.spec().actions),
                                       env.spec().gamma, p);
}

// ---------- shaping strategies ----------

enum class StrategyKind { Rpt, Unshaped, FixedPenalty, AdditiveLagrangian };

inline const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Rpt: return "rpt";
    case StrategyKind::Unshaped: return "unshaped";
    case StrategyKind::FixedPenalty: return "fixed-penalty";
    case StrategyKind::AdditiveLagrangian: return "additive-lagrangian";
  }
  throw std::logic_error("strategy_name: unreachable");
}

inline StrategyKind parse_strategy(const std::string& id) {
  if (id == "rpt") return StrategyKind::Rpt;
  if (id == "unshaped") return StrategyKind::Unshaped;
  if (id == "fixed-penalty") return StrategyKind::FixedPenalty;
  if (id == "additive-lagrangian") return StrategyKind::AdditiveLagrangian;
  throw std::invalid_argument(
      "strategy must be one of: rpt, unshaped, fixed-penalty, additive-lagrangian (got '" +
      id + "')");
}

// Experimental-control shaping rules. Unshaped passes rewards through
// untouched; FixedPenalty uses a constant multiplier; AdditiveLagrangian runs
// textbook dual ascent on the discounted cost with constraint level 0.
struct BaselineStrategy {
  StrategyKind kind = StrategyKind::Unshaped;
  double fixed_lambda = 5.0;
  double alpha_lambda = 0.01;
  double dual_lambda = 0.0;  // AdditiveLagrangian state, kept >= 0

  double effective_lambda() const {
    switch (kind) {
      case StrategyKind::Unshaped: return 0.0;
      case StrategyKind::FixedPenalty: return fixed_lambda;
      case StrategyKind::AdditiveLagrangian: return dual_lambda;
      case StrategyKind::Rpt:
        throw std::logic_error("BaselineStrategy: rpt's lambda lives in LambdaState");
    }
    throw std::logic_error("BaselineStrategy: unreachable");
  }
};

inline ShapedTransition apply_baseline(const BaselineStrategy& s, const Transition& t,
                                       double risk_p) {
  const double lambda = s.effective_lambda();
  // lambda == 0 must reproduce the raw reward bit-for-bit
  return ShapedTransition{t, lambda == 0.0 ? t.reward : t.reward - lambda * risk_p};
}

// Episode-end dual update; no-op for the other strategies.
inline void baseline_episode_end(BaselineStrategy& s, double discounted_cost) {
  if (s.kind == StrategyKind::AdditiveLagrangian)
    s.dual_lambda = std::max(0.0, s.dual_lambda + s.alpha_lambda * discounted_cost);
}

}  // namespace rpt
