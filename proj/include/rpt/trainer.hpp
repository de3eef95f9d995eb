#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rpt/agent.hpp"
#include "rpt/core.hpp"
#include "rpt/envs.hpp"
#include "rpt/riskmodel.hpp"
#include "rpt/rng.hpp"
#include "rpt/shaping.hpp"

namespace rpt {

// ---------- configuration ----------

struct ClassifierConfig {
  std::string mode = "learned";  // "learned" | "zero" (stub, p == 0 everywhere)
  int hidden_dim = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled parameter decay; 0 disables
  int minibatches = 4;      // classifier updates per episode
  int batch_size = 32;      // positives and negatives per update
  int unsafe_window = 0;    // cap on stored unsafe pairs; 0 = unbounded
  int positives_last_k = 1; // trailing pairs of an unsafe trajectory added as positives
};

struct ShapingParams {
  double eta = 0.9;
  double margin = 1.05;
  double initial_lambda = 0.0;  // starting multiplier for the rpt schedule
  bool pin_lambda = false;      // freeze lambda at its initial value (stub runs)
  std::string p0_policy = "conservative-zero";   // | "classifier-initial"
  std::string lambda_h_policy = "max-observed";  // | "latest"
  double fixed_lambda = 5.0;   // fixed-penalty baseline multiplier
  double alpha_lambda = 0.01;  // additive-lagrangian dual step size
};

struct TrainingConfig {
  std::string strategy = "rpt";
  int episodes = 1000;       // K
  int max_steps = 0;         // per-episode horizon; 0 = environment default
  int policy_minibatches = 1;
  int policy_batch_size = 64;
  int replay_capacity = 20000;
  int blocked_replay_copies = 1;  // replay entries recorded per blocked pair
  std::uint64_t seed = 1;
};

struct OutputConfig {
  std::optional<double> max_return;  // normalization constant for ratio metrics
  int log_every = 0;                 // progress cadence on stderr; 0 = auto
};

struct RunSpec {
  EnvParams env;
  ClassifierConfig classifier;
  ShapingParams shaping;
  AgentParams agent;
  TrainingConfig training;
  OutputConfig output;
};

inline void validate_run_spec(const RunSpec& s) {
  if (s.classifier.mode != "learned" && s.classifier.mode != "zero")
    throw std::invalid_argument("classifier.mode must be 'learned' or 'zero'");
  if (s.classifier.hidden_dim < 1)
    throw std::invalid_argument("classifier.hidden_dim must be >= 1");
  if (!(s.classifier.learning_rate >= 0.0))
    throw std::invalid_argument("classifier.learning_rate must be >= 0");
  if (!(s.classifier.weight_decay >= 0.0))
    throw std::invalid_argument("classifier.weight_decay must be >= 0");
  if (s.classifier.minibatches < 1)
    throw std::invalid_argument("classifier.minibatches must be >= 1");
  if (s.classifier.batch_size < 1)
    throw std::invalid_argument("classifier.batch_size must be >= 1");
  if (s.classifier.unsafe_window < 0)
    throw std::invalid_argument("classifier.unsafe_window must be >= 0");
  if (s.classifier.positives_last_k < 1)
    throw std::invalid_argument("classifier.positives_last_k must be >= 1");
  if (!(s.shaping.eta > 0.0 && s.shaping.eta < 1.0))
    throw std::invalid_argument("shaping.eta must lie in (0,1)");
  if (!(s.shaping.margin > 1.0))
    throw std::invalid_argument("shaping.margin must be > 1");
  if (!(s.shaping.initial_lambda >= 0.0))
    throw std::invalid_argument("shaping.initial_lambda must be >= 0");
  if (s.shaping.p0_policy != "conservative-zero" &&
      s.shaping.p0_policy != "classifier-initial")
    throw std::invalid_argument(
        "shaping.p0_policy must be 'conservative-zero' or 'classifier-initial'");
  if (s.shaping.lambda_h_policy != "max-observed" && s.shaping.lambda_h_policy != "latest")
    throw std::invalid_argument(
        "shaping.lambda_h_policy must be 'max-observed' or 'latest'");
  if (!(s.shaping.fixed_lambda >= 0.0))
    throw std::invalid_argument("shaping.fixed_lambda must be >= 0");
  if (!(s.shaping.alpha_lambda >= 0.0))
    throw std::invalid_argument("shaping.alpha_lambda must be >= 0");
  parse_strategy(s.training.strategy);  // throws on unknown ids
  if (s.training.episodes < 0)
    throw std::invalid_argument("training.episodes must be >= 0");
  if (s.training.max_steps < 0)
    throw std::invalid_argument("training.max_steps must be >= 0");
  if (s.training.policy_minibatches < 1)
    throw std::invalid_argument("training.policy_minibatches must be >= 1");
  if (s.training.policy_batch_size < 1)
    throw std::invalid_argument("training.policy_batch_size must be >= 1");
  if (s.training.replay_capacity < 1)
    throw std::invalid_argument("training.replay_capacity must be >= 1");
  if (s.training.blocked_replay_copies < 1)
    throw std::invalid_argument("training.blocked_replay_copies must be >= 1");
  if (s.output.max_return && !(*s.output.max_return > 0.0))
    throw std::invalid_argument("output.max_return must be > 0");
  if (s.output.log_every < 0) throw std::invalid_argument("output.log_every must be >= 0");
  validate_agent_params(s.agent);
}

// ---------- metrics ----------

struct EpisodeRecord {
  int episode = 0;                  // 0-based index
  long env_steps = 0;               // cumulative environment steps
  double undiscounted_return = 0.0; // raw reward sum for this episode
  TrajectoryOutcome outcome = TrajectoryOutcome::HorizonEnd;
  double lambda = 0.0;              // effective multiplier at episode end
  long cumulative_violations = 0;
  long cumulative_risk_truncations = 0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  std::string strategy;
  std::vector<EpisodeRecord> episodes;
};

// ---------- episode collection ----------

struct CollectResult {
  Trajectory trajectory;
  std::vector<double> risks;  // p for each executed transition
  double initial_risk = 0.0;  // p of the first sampled pair
  long env_steps = 0;
};

// Shared collection loop for every strategy. Risk is queried for each pair
// before it executes; with truncation active (rpt + ready scorer) a pair whose
// risk exceeds eta is never executed, including the episode's first. On a
// cost event the fatal transition is recorded in the trajectory and in the
// replay buffer — with learners that do not generalize across states, a cost
// event the replay never sees could not influence the policy at all — then
// the unsafe pairs are banked and (for rpt) lambda is raised.
//
// A pair blocked by truncation is still recorded in replay, as a virtual
// terminal transition with raw reward 0, for two reasons. First, truncation
// censors exactly the pairs the classifier flags, so replay alone could never
// contradict a false positive — the pair must reach the negative pool for the
// classifier to reconsider it. Second, learners that do not generalize across
// states would otherwise keep a blocked pair's value at its initial estimate,
// and greedy evaluation (which runs without truncation) would favor it; the
// virtual entry, re-shaped at sampling time, pins that value to -lambda * p
// under the current classifier, shrinking back toward neutral if the
// classifier later clears the pair.
class Trainer {
 public:
  Trainer(Environment& env, PolicyLearner& learner, const RunSpec& spec)
      : env_(env), learner_(learner), spec_(spec),
        strategy_(parse_strategy(spec.training.strategy)),
        replay_(static_cast<std::size_t>(spec.training.replay_capacity)),
        unsafe_set_(static_cast<std::size_t>(spec.classifier.unsafe_window)) {
    validate_run_spec(spec);
    shaping_.eta = spec.shaping.eta;
    shaping_.gamma = env.spec().gamma;
    shaping_.reward_min = env.spec().reward_min;
    shaping_.reward_max = env.spec().reward_max;
    validate_shaping_config(shaping_);
    lambda_.margin = spec.shaping.margin;
    lambda_.lambda = spec.shaping.initial_lambda;
    lambda_.p0_policy = spec.shaping.p0_policy == "classifier-initial"
                            ? P0Policy::ClassifierInitial
                            : P0Policy::ConservativeZero;
    lambda_.lambda_h_policy = spec.shaping.lambda_h_policy == "latest"
                                  ? LambdaHPolicy::Latest
                                  : LambdaHPolicy::MaxObserved;
    baseline_.kind = strategy_;
    baseline_.fixed_lambda = spec.shaping.fixed_lambda;
    baseline_.alpha_lambda = spec.shaping.alpha_lambda;
    horizon_ = episode_horizon(env, spec.training.max_steps);
  }

  CollectResult collect_episode(const RiskScorer& scorer, std::uint64_t episode_seed) {
    CollectResult res;
    const bool truncation_on = strategy_ == StrategyKind::Rpt && scorer.ready();

    std::vector<double> s = env_.reset(episode_seed);
    Action a = learner_.act(s, /*explore=*/true);
    double p_pending = checked_risk(scorer, s, a);
    res.initial_risk = p_pending;

    if (truncation_on && in_unsafe_region(p_pending, shaping_.eta)) {
      // The very first pair is already unsafe; nothing executes.
      push_blocked_pair(s, a, p_pending);
      res.trajectory.outcome = TrajectoryOutcome::RiskTruncated;
      ++risk_truncations_;
      return res;
    }

    for (int t = 0; t < horizon_; ++t) {
      const StepResult sr = env_.step(a);
      ++res.env_steps;
      Transition tr{s, a, sr.reward, sr.cost, sr.next_state,
                    sr.terminal, /*truncated_by_risk=*/false};

      if (sr.cost > 0) {
        const double shaped = shape_reward(sr.reward, p_pending, effective_lambda());
        res.trajectory.append(tr, shaped);
        res.risks.push_back(p_pending);
        replay_.push(ShapedTransition{tr, shaped});
        bank_unsafe_pairs(res.trajectory);
        const int H = static_cast<int>(res.trajectory.size());
        record_violation(H, res.initial_risk, scorer.ready());
        res.trajectory.outcome = TrajectoryOutcome::ReachedUnsafe;
        return res;
      }

      const double p_t = p_pending;
      const double shaped = shape_reward(sr.reward, p_t, effective_lambda());

      if (sr.terminal) {
        res.trajectory.append(tr, shaped);
        res.risks.push_back(p_t);
        replay_.push(ShapedTransition{tr, shaped});
        res.trajectory.outcome = TrajectoryOutcome::GoalTerminal;
        return res;
      }
      if (t == horizon_ - 1) {
        res.trajectory.append(tr, shaped);
        res.risks.push_back(p_t);
        replay_.push(ShapedTransition{tr, shaped});
        res.trajectory.outcome = TrajectoryOutcome::HorizonEnd;
        return res;
      }

      Action a_next = learner_.act(sr.next_state, /*explore=*/true);
      const double p_next = checked_risk(scorer, sr.next_state, a_next);
      if (truncation_on && in_unsafe_region(p_next, shaping_.eta)) {
        tr.truncated_by_risk = true;
        res.trajectory.append(tr, shaped);
        res.risks.push_back(p_t);
        replay_.push(ShapedTransition{tr, shaped});
        push_blocked_pair(sr.next_state, a_next, p_next);
        res.trajectory.outcome = TrajectoryOutcome::RiskTruncated;
        ++risk_truncations_;
        return res;
      }

      res.trajectory.append(tr, shaped);
      res.risks.push_back(p_t);
      replay_.push(ShapedTransition{tr, shaped});
      s = sr.next_state;
      a = std::move(a_next);
      p_pending = p_next;
    }
    res.trajectory.outcome = TrajectoryOutcome::HorizonEnd;
    return res;
  }

  double effective_lambda() const {
    return strategy_ == StrategyKind::Rpt ? lambda_.lambda : baseline_.effective_lambda();
  }

  ReplayBuffer& replay() { return replay_; }
  UnsafePairSet& unsafe_set() { return unsafe_set_; }
  LambdaState& lambda_state() { return lambda_; }
  const LambdaState& lambda_state() const { return lambda_; }
  BaselineStrategy& baseline() { return baseline_; }
  StrategyKind strategy() const { return strategy_; }
  const ShapingConfig& shaping() const { return shaping_; }
  long violations() const { return violations_; }
  long risk_truncations() const { return risk_truncations_; }
  int horizon() const { return horizon_; }

 private:
  static double checked_risk(const RiskScorer& scorer, const std::vector<double>& s,
                             const Action& a) {
    const double p = scorer.risk(s, a);
    if (!(p >= 0.0 && p <= 1.0))
      throw std::runtime_error("Trainer: risk scorer returned a value outside [0,1]");
    return p;
  }

  // Blocked pairs never execute, so no real reward or successor exists; the
  // virtual entry is terminal (no bootstrap) with raw reward 0, leaving the
  // pair's sampled value as exactly the risk penalty. Each block can record
  // several copies: blocked pairs are the only counter-evidence against a
  // false flag, and under uniform replay sampling a single entry per event
  // is too rare to matter, so the copy count importance-weights them.
  void push_blocked_pair(const std::vector<double>& s, const Action& a, double p) {
    Transition vt{s, a, /*reward=*/0.0, /*cost=*/0, /*next_state=*/s,
                  /*terminal=*/true, /*truncated_by_risk=*/true};
    const ShapedTransition entry{vt, shape_reward(0.0, p, effective_lambda())};
    for (int i = 0; i < spec_.training.blocked_replay_copies; ++i) replay_.push(entry);
  }

  void bank_unsafe_pairs(const Trajectory& traj) {
    const std::size_t n = traj.size();
    const std::size_t k =
        std::min<std::size_t>(n, static_cast<std::size_t>(spec_.classifier.positives_last_k));
    for (std::size_t i = n - k; i < n; ++i)
      unsafe_set_.add(traj.transitions[i].state, traj.transitions[i].action);
  }

  void record_violation(int H, double initial_risk, bool scorer_ready) {
    ++violations_;
    if (strategy_ == StrategyKind::Rpt && !spec_.shaping.pin_lambda) {
      const double p0 = scorer_ready ? initial_risk : 0.0;
      lambda_ = update_lambda(std::move(lambda_), H, shaping_, p0);
    } else {
      // Bookkeeping only: |H-set| must always equal the violation count.
      lambda_.unsafe_lengths.push_back(H);
      lambda_.observed_p0.push_back(0.0);
    }
  }

  Environment& env_;
  PolicyLearner& learner_;
  RunSpec spec_;
  StrategyKind strategy_;
  ShapingConfig shaping_;
  LambdaState lambda_;
  BaselineStrategy baseline_;
  ReplayBuffer replay_;
  UnsafePairSet unsafe_set_;
  int horizon_ = 0;
  long violations_ = 0;
  long risk_truncations_ = 0;
};

// ---------- full training runs ----------

struct TrainingArtifacts {
  RunMetrics metrics;
  std::unique_ptr<Environment> env;
  std::unique_ptr<PolicyLearner> learner;
  std::unique_ptr<RiskClassifier> classifier;  // present even in zero mode (never trained)
  LambdaState lambda;
};

namespace detail {

inline Eigen::VectorXd to_feature_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline int progress_cadence(const RunSpec& spec) {
  if (spec.output.log_every > 0) return spec.output.log_every;
  return std::max(1, spec.training.episodes / 10);
}

inline bool logging_enabled() {
  const char* v = std::getenv("RPT_LOG_LEVEL");
  if (!v) return true;
  const std::string s(v);
  return !(s == "0" || s == "quiet" || s == "off");
}

}  // namespace detail

// Executes `episodes` episodes of collection + per-episode classifier and
// policy updates, per the configured strategy. Fully deterministic under
// training.seed. `scorer_override`, when given, replaces the per-episode
// classifier snapshot as the source of risk estimates (used to inject oracle
// scorers in tests); the classifier itself still trains unless mode == "zero".
inline TrainingArtifacts run_training(const RunSpec& spec,
                                      const RiskScorer* scorer_override = nullptr) {
  validate_run_spec(spec);
  TrainingArtifacts out;
  out.env = make_environment(spec.env);
  Environment& env = *out.env;

  AgentParams agent = spec.agent;
  agent.seed = spec.training.seed;
  out.learner = make_learner(env, agent);
  PolicyLearner& learner = *out.learner;

  const std::uint64_t seed = spec.training.seed;
  out.classifier = std::make_unique<RiskClassifier>(
      env.feature_dim(), spec.classifier.hidden_dim,
      derive_seed(seed, streams::classifier_init));
  AdamState clf_opt;
  clf_opt.learning_rate = spec.classifier.learning_rate;
  clf_opt.weight_decay = spec.classifier.weight_decay;
  const Featurizer featurize = [&env](const std::vector<double>& s, const Action& a) {
    return env.feature_vector(s, a);
  };
  const bool learned_mode = spec.classifier.mode == "learned";
  bool classifier_ready = false;

  Trainer trainer(env, learner, spec);
  std::mt19937_64 rng_clf(derive_seed(seed, streams::classifier_batch));
  std::mt19937_64 rng_policy(derive_seed(seed, streams::policy_batch));

  out.metrics.seed = seed;
  out.metrics.strategy = spec.training.strategy;
  out.metrics.episodes.reserve(static_cast<std::size_t>(spec.training.episodes));

  const int cadence = detail::progress_cadence(spec);
  const bool log = detail::logging_enabled();
  long env_steps = 0;

  for (int ep = 0; ep < spec.training.episodes; ++ep) {
    std::unique_ptr<RiskScorer> snapshot;
    const RiskScorer* scorer = scorer_override;
    if (!scorer) {
      if (learned_mode)
        snapshot = std::make_unique<ClassifierRiskScorer>(*out.classifier, featurize,
                                                          classifier_ready);
      else
        snapshot = std::make_unique<ZeroRiskScorer>(/*ready=*/false);
      scorer = snapshot.get();
    }

    const CollectResult res =
        trainer.collect_episode(*scorer, derive_seed(seed, streams::env_episode,
                                                     static_cast<std::uint64_t>(ep)));
    env_steps += res.env_steps;

    if (trainer.strategy() == StrategyKind::AdditiveLagrangian) {
      const double jc = res.trajectory.empty()
                            ? 0.0
                            : discounted_risk_cost(res.trajectory, res.risks,
                                                   env.spec().gamma);
      baseline_episode_end(trainer.baseline(), jc);
    }

    // Classifier update: positives from the unsafe set, negatives from replay
    // (which includes virtual entries for risk-truncated pairs, keeping the
    // negative pool representative of everything the policy proposes).
    // Skipped until at least one positive exists.
    if (learned_mode && !trainer.unsafe_set().empty() && trainer.replay().size() > 0) {
      for (int k = 0; k < spec.classifier.minibatches; ++k) {
        ClassifierBatch batch;
        const auto pos = trainer.unsafe_set().sample(
            static_cast<std::size_t>(spec.classifier.batch_size), rng_clf);
        for (const UnsafePair& up : pos)
          batch.positives.push_back(detail::to_feature_vec(featurize(up.state, up.action)));
        const auto neg = trainer.replay().sample(
            static_cast<std::size_t>(spec.classifier.batch_size), rng_clf);
        for (const ShapedTransition& st : neg)
          batch.negatives.push_back(detail::to_feature_vec(featurize(st.t.state, st.t.action)));
        std::tie(*out.classifier, clf_opt) =
            train_step(std::move(*out.classifier), std::move(clf_opt), batch);
      }
      classifier_ready = true;
    }

    // Policy update on replay samples. Penalties are recomputed from this
    // episode's scorer snapshot and the current multiplier rather than read
    // back from collection time: early transitions were shaped by an immature
    // classifier, and with a full-strength multiplier those stale penalties
    // would otherwise poison the value function for the buffer's lifetime.
    //
    // Virtual blocked-pair entries (terminal + truncated_by_risk) stand in
    // for "proposing this pair truncates the episode". Once the pair's risk
    // drops back to the allowed side of the threshold that statement is no
    // longer true, so such entries go inert for the policy — otherwise the
    // accumulated virtual mass keeps outvoting the pair's real experience
    // long after it stopped being blocked. They remain classifier negatives
    // either way, and re-arm if the pair crosses the threshold again.
    if (trainer.replay().size() > 0) {
      const double lam = trainer.effective_lambda();
      for (int k = 0; k < spec.training.policy_minibatches; ++k) {
        auto batch = trainer.replay().sample(
            static_cast<std::size_t>(spec.training.policy_batch_size), rng_policy);
        std::vector<ShapedTransition> live;
        live.reserve(batch.size());
        for (ShapedTransition& st : batch) {
          const double p = scorer->risk(st.t.state, st.t.action);
          const bool is_virtual = st.t.truncated_by_risk && st.t.terminal;
          if (is_virtual && !in_unsafe_region(p, spec.shaping.eta)) continue;
          st.shaped_reward = shape_reward(st.t.reward, p, lam);
          live.push_back(std::move(st));
        }
        if (!live.empty()) learner.update(live);
      }
    }
    learner.decay_exploration();

    EpisodeRecord rec;
    rec.episode = ep;
    rec.env_steps = env_steps;
    rec.undiscounted_return =
        res.trajectory.empty() ? 0.0 : undiscounted_return(res.trajectory);
    rec.outcome = res.trajectory.outcome;
    rec.lambda = trainer.effective_lambda();
    rec.cumulative_violations = trainer.violations();
    rec.cumulative_risk_truncations = trainer.risk_truncations();
    out.metrics.episodes.push_back(rec);

    if (log && ((ep + 1) % cadence == 0 || ep + 1 == spec.training.episodes))
      std::fprintf(stderr,
                   "[%s seed=%llu] episode %d/%d return=%.3f lambda=%.3f "
                   "violations=%ld truncations=%ld\n",
                   spec.training.strategy.c_str(),
                   static_cast<unsigned long long>(seed), ep + 1,
                   spec.training.episodes, rec.undiscounted_return, rec.lambda,
                   rec.cumulative_violations, rec.cumulative_risk_truncations);
  }

  out.lambda = trainer.lambda_state();
  return out;
}

// ---------- evaluation ----------

struct EvalResult {
  double mean_return = 0.0;
  long violations = 0;
};

// Greedy rollouts: no shaping, no truncation, no learning.
inline EvalResult evaluate_policy(Environment& env, PolicyLearner& learner, int episodes,
                                  std::uint64_t seed, int max_steps = 0) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be positive");
  const int horizon = episode_horizon(env, max_steps);
  EvalResult out;
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> s =
        env.reset(derive_seed(seed, streams::eval, static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const StepResult sr = env.step(learner.act(s, /*explore=*/false));
      ret += sr.reward;
      if (sr.cost > 0) ++out.violations;
      if (sr.terminal) break;
      s = sr.next_state;
    }
    total += ret;
  }
  out.mean_return = total / static_cast<double>(episodes);
  return out;
}

// ---------- derived series ----------

// Per-episode (return / max_return) / max(1, cumulative violations).
inline std::vector<double> normalized_ratio_series(const RunMetrics& metrics,
                                                   double max_return) {
  if (!(max_return > 0.0))
    throw std::invalid_argument("normalized_ratio_series: max_return must be > 0");
  std::vector<double> out;
  out.reserve(metrics.episodes.size());
  for (const EpisodeRecord& r : metrics.episodes) {
    const double denom = std::max<long>(1, r.cumulative_violations);
    out.push_back((r.undiscounted_return / max_return) / static_cast<double>(denom));
  }
  return out;
}

}  // namespace rpt
