#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpt {

enum class P0Policy { ConservativeZero, ClassifierInitial };
enum class LambdaHPolicy { MaxObserved, Latest };

struct ShapingConfig {
  double eta = 0.9;        // unsafe-region threshold; a pair is unsafe iff p > eta
  double gamma = 0.99;     // copied from the CMDP spec
  double reward_min = 0.0;
  double reward_max = 0.0;
};

inline void validate_shaping_config(const ShapingConfig& c) {
  if (!(c.eta > 0.0 && c.eta < 1.0))
    throw std::invalid_argument("ShapingConfig: eta must lie in (0,1)");
  if (!(c.gamma > 0.0 && c.gamma < 1.0))
    throw std::invalid_argument("ShapingConfig: gamma must lie in (0,1)");
  if (!(c.reward_min <= c.reward_max))
    throw std::invalid_argument("ShapingConfig: reward_min must be <= reward_max");
}

inline bool in_unsafe_region(double p, double eta) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("in_unsafe_region: p must lie in [0,1]");
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("in_unsafe_region: eta must lie in (0,1)");
  return p > eta;  // strictly greater: p == eta is still safe
}

/// Largest step count T such that a linearly rising risk p_t = p0 + (1-p0) t/H
/// stays at or below eta: T = floor((eta - p0) / (1 - p0) * H), 0 <= T < H.
///
/// The quotient is evaluated in doubles and snapped to the nearest integer
/// when within 1e-9 before flooring, so inputs whose exact value is integral
/// (e.g. eta=0.9, p0=0, H=10 -> 9) cannot fall to the neighbour below through
/// representation error. floor() is discontinuous and golden tests depend on
/// the result, so the snap keeps behaviour deterministic across platforms.
inline int estimate_safe_steps(double eta, double p0, int H) {
  if (H < 1) throw std::invalid_argument("estimate_safe_steps: H must be >= 1");
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("estimate_safe_steps: eta must lie in (0,1)");
  if (!(p0 >= 0.0)) throw std::invalid_argument("estimate_safe_steps: p0 must be >= 0");
  if (p0 > eta) throw std::invalid_argument("estimate_safe_steps: p0 must be <= eta");
  const double q = (eta - p0) / (1.0 - p0) * static_cast<double>(H);
  const double qr = std::round(q);
  int T = (std::fabs(q - qr) <= 1e-9) ? static_cast<int>(qr)
                                      : static_cast<int>(std::floor(q));
  T = std::clamp(T, 0, H - 1);
  return T;
}

/// Penalty coefficient above which every trajectory that enters the unsafe
/// region within horizon H scores strictly worse than any trajectory that
/// stays safe:
///
///   lambda > (1 - gamma^H) (r_max - r_min) / (eta gamma^T (1 - gamma^(H-T)))
///
/// with T from estimate_safe_steps. Returns the bound itself (exclusive).
inline double lambda_lower_bound(double gamma, int H, double eta, double p0,
                                 double r_min, double r_max) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("lambda_lower_bound: gamma must lie in (0,1)");
  if (!(r_min <= r_max))
    throw std::invalid_argument("lambda_lower_bound: reward bounds inverted");
  const int T = estimate_safe_steps(eta, p0, H);
  const double gT = std::pow(gamma, T);
  if (gT <= 0.0 || !std::isfinite(gT)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "lambda_lower_bound: gamma^T underflows (gamma=%.17g, H=%d, T=%d)",
                  gamma, H, T);
    throw std::overflow_error(buf);
  }
  const double denom = eta * gT * (1.0 - std::pow(gamma, H - T));
  if (denom <= 0.0 || !std::isfinite(denom)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "lambda_lower_bound: degenerate denominator (gamma=%.17g, H=%d, T=%d, eta=%.17g)",
                  gamma, H, T, eta);
    throw std::overflow_error(buf);
  }
  return (1.0 - std::pow(gamma, H)) * (r_max - r_min) / denom;
}

inline double shape_reward(double reward, double p, double lambda) {
  if (!std::isfinite(reward)) throw std::invalid_argument("shape_reward: non-finite reward");
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("shape_reward: p must lie in [0,1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("shape_reward: lambda must be >= 0");
  return reward - lambda * p;
}

// ---------- lambda schedule ----------

// Monotone penalty schedule driven by observed unsafe-trajectory lengths.
struct LambdaState {
  double lambda = 0.0;
  double margin = 1.05;  // multiplier applied above the exclusive bound
  std::vector<int> unsafe_lengths;
  std::vector<double> observed_p0;  // parallel to unsafe_lengths
  P0Policy p0_policy = P0Policy::ConservativeZero;
  LambdaHPolicy lambda_h_policy = LambdaHPolicy::MaxObserved;
};

inline void validate_lambda_state(const LambdaState& s) {
  if (!(s.margin > 1.0)) throw std::invalid_argument("LambdaState: margin must be > 1");
  if (!(s.lambda >= 0.0)) throw std::invalid_argument("LambdaState: lambda must be >= 0");
}

/// Records an unsafe trajectory of length new_H and raises lambda to
/// margin * bound if that exceeds the current value. lambda never decreases.
/// p0_observed is consulted only under P0Policy::ClassifierInitial and is
/// clamped into [0, eta] (a measured initial risk above eta degenerates to
/// the tightest admissible p0).
inline LambdaState update_lambda(LambdaState state, int new_H, const ShapingConfig& cfg,
                                 double p0_observed = 0.0) {
  validate_lambda_state(state);
  validate_shaping_config(cfg);
  if (new_H < 1) throw std::invalid_argument("update_lambda: new_H must be >= 1");
  double p0 = 0.0;
  if (state.p0_policy == P0Policy::ClassifierInitial) {
    if (!(p0_observed >= 0.0 && p0_observed <= 1.0))
      throw std::invalid_argument("update_lambda: observed p0 must lie in [0,1]");
    p0 = std::min(p0_observed, cfg.eta);
  }
  state.unsafe_lengths.push_back(new_H);
  state.observed_p0.push_back(p0);
  double candidate = 0.0;
  if (state.lambda_h_policy == LambdaHPolicy::Latest) {
    candidate = lambda_lower_bound(cfg.gamma, new_H, cfg.eta, p0, cfg.reward_min,
                                   cfg.reward_max);
  } else {
    for (std::size_t i = 0; i < state.unsafe_lengths.size(); ++i)
      candidate = std::max(candidate,
                           lambda_lower_bound(cfg.gamma, state.unsafe_lengths[i], cfg.eta,
                                              state.observed_p0[i], cfg.reward_min,
                                              cfg.reward_max));
  }
  state.lambda = std::max(state.lambda, state.margin * candidate);
  return state;
}

/// Brute-force check of the separation property behind lambda_lower_bound.
/// Builds the extremal unsafe trajectory (reward r_max at every step, risk 0
/// before T and exactly eta from T on) and the extremal safe trajectory
/// (reward r_min, no penalty), sums both term by term, and reports whether
/// the penalized unsafe return is strictly below the safe return. Test oracle;
/// no closed forms on purpose.
inline bool verify_separation(double gamma, int H, double eta, double p0, double r_min,
                              double r_max, double lambda) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("verify_separation: gamma must lie in (0,1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("verify_separation: lambda must be >= 0");
  if (!(r_min <= r_max))
    throw std::invalid_argument("verify_separation: reward bounds inverted");
  const int T = estimate_safe_steps(eta, p0, H);
  double unsafe_penalized = 0.0;
  double safe = 0.0;
  double g = 1.0;
  for (int t = 0; t < H; ++t) {
    const double risk = (t < T) ? 0.0 : eta;
    unsafe_penalized += g * (r_max - lambda * risk);
    safe += g * r_min;
    g *= gamma;
  }
  return unsafe_penalized < safe;
}

}  // namespace rpt
