#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpt/core.hpp"
#include "rpt/nn.hpp"

namespace rpt {

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Contrastive discriminator over (state, action) features. The head is
// structurally rescaled to F = 0.5 * sigmoid(z), so F always stays inside
// (0, 0.5) and the Bayes inversion F/(1-F) lands in (0, 1).
class RiskClassifier {
 public:
  // seed 0 keeps all parameters at zero (F = 0.25 everywhere); any other
  // seed draws the usual scaled random init.
  RiskClassifier(int input_dim, int hidden_dim = 64, std::uint64_t seed = 0)
      : net_(input_dim, hidden_dim, 1) {
    if (seed != 0) net_.init_random(seed);
  }

  int input_dim() const { return net_.in_dim(); }
  int hidden_dim() const { return net_.hidden_dim(); }

  Eigen::VectorXd& params() { return net_.params(); }
  const Eigen::VectorXd& params() const { return net_.params(); }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

  double logit(const Eigen::VectorXd& features, Mlp::Cache* cache = nullptr) const {
    if (features.size() != net_.in_dim())
      throw std::invalid_argument("RiskClassifier: feature dimension mismatch");
    if (!features.allFinite())
      throw std::invalid_argument("RiskClassifier: non-finite feature input");
    return net_.forward(features, cache)(0);
  }

  double forward(const Eigen::VectorXd& features) const {
    return squash(logit(features));
  }

  double forward(const std::vector<double>& features) const {
    return forward(Eigen::Map<const Eigen::VectorXd>(
        features.data(), static_cast<Eigen::Index>(features.size())));
  }

  // 0.5 * sigmoid, clamped away from the closed endpoints that double
  // saturation would otherwise reach for |z| beyond ~37.
  static double squash(double z) {
    const double f = 0.5 * stable_sigmoid(z);
    const double lo = std::numeric_limits<double>::min();
    const double hi = 0.5 * (1.0 - std::numeric_limits<double>::epsilon());
    return std::min(std::max(f, lo), hi);
  }

 private:
  Mlp net_;
};

/// Bayes inversion of the contrastive output: p(y=1|s,a) = F / (1 - F),
/// mapping [0, 0.5] onto [0, 1].
inline double risk_probability(double f) {
  if (!(f >= 0.0 && f <= 0.5))
    throw std::invalid_argument("risk_probability: F must lie in [0, 0.5]");
  return f / (1.0 - f);
}

struct ClassifierBatch {
  std::vector<Eigen::VectorXd> positives;  // featurized unsafe pairs
  std::vector<Eigen::VectorXd> negatives;  // featurized replay pairs
};

inline void validate_batch(const ClassifierBatch& batch) {
  if (batch.positives.empty() || batch.negatives.empty())
    throw std::invalid_argument("ClassifierBatch: positives and negatives must be non-empty");
}

namespace detail {

// Loss and gradient share one pass. Per-sample dL/dz:
//   positive:  d(-log F)/dz       = sigma(z) - 1
//   negative:  d(-log(1-F))/dz    = sigma(z)(1 - sigma(z)) / (2 - sigma(z))
// each averaged over its side of the batch.
inline double loss_impl(const RiskClassifier& clf, const ClassifierBatch& batch,
                        Eigen::VectorXd* grad) {
  validate_batch(batch);
  if (grad) grad->setZero(clf.params().size());
  const double wp = 1.0 / static_cast<double>(batch.positives.size());
  const double wn = 1.0 / static_cast<double>(batch.negatives.size());
  double loss = 0.0;
  Mlp::Cache cache;
  Eigen::VectorXd dy(1);
  for (const auto& x : batch.positives) {
    const double z = clf.logit(x, grad ? &cache : nullptr);
    const double f = RiskClassifier::squash(z);
    loss -= wp * std::log(f);
    if (grad) {
      dy(0) = wp * (stable_sigmoid(z) - 1.0);
      clf.net().backward(cache, dy, *grad);
    }
  }
  for (const auto& x : batch.negatives) {
    const double z = clf.logit(x, grad ? &cache : nullptr);
    const double f = RiskClassifier::squash(z);
    loss -= wn * std::log(1.0 - f);
    if (grad) {
      const double s = stable_sigmoid(z);
      dy(0) = wn * s * (1.0 - s) / (2.0 - s);
      clf.net().backward(cache, dy, *grad);
    }
  }
  return loss;
}

}  // namespace detail

/// Negated contrastive objective (a positive quantity to minimize):
///   -[ mean_pos log F + mean_neg log(1 - F) ]  >=  ln 2.
inline double contrastive_loss(const RiskClassifier& clf, const ClassifierBatch& batch) {
  return detail::loss_impl(clf, batch, nullptr);
}

inline std::pair<double, Eigen::VectorXd> loss_gradient(const RiskClassifier& clf,
                                                        const ClassifierBatch& batch) {
  Eigen::VectorXd grad;
  const double loss = detail::loss_impl(clf, batch, &grad);
  return {loss, std::move(grad)};
}

/// One optimizer step. Returns fresh values; the inputs are not aliased.
inline std::pair<RiskClassifier, AdamState> train_step(RiskClassifier clf, AdamState opt,
                                                       const ClassifierBatch& batch) {
  auto [loss, grad] = loss_gradient(clf, batch);
  (void)loss;
  if (!grad.allFinite()) {
    const Mlp& net = clf.net();
    const char* block = "W1";
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      if (std::isfinite(grad(i))) continue;
      if (i >= net.off_b2()) block = "b2";
      else if (i >= net.off_w2()) block = "W2";
      else if (i >= net.off_b1()) block = "b1";
      else block = "W1";
      break;
    }
    throw std::runtime_error(std::string("train_step: non-finite gradient in block ") + block);
  }
  opt.apply(clf.params(), grad);
  return {std::move(clf), std::move(opt)};
}

/// Named op over the core container: records one observed unsafe pair
/// (duplicates intentionally accumulate; the set has multiset semantics).
inline void add_unsafe_pair(UnsafePairSet& set, std::vector<double> state, Action action) {
  set.add(std::move(state), std::move(action));
}

// ---------- risk sources for collection ----------

using Featurizer =
    std::function<std::vector<double>(const std::vector<double>&, const Action&)>;

// What the trainer queries during collection. ready() gates risk truncation:
// a freshly initialized classifier outputs near-uniform risk, so truncating
// on it would stop every episode at step zero.
class RiskScorer {
 public:
  virtual ~RiskScorer() = default;
  virtual double risk(const std::vector<double>& state, const Action& action) const = 0;
  virtual bool ready() const = 0;
};

class ClassifierRiskScorer : public RiskScorer {
 public:
  ClassifierRiskScorer(RiskClassifier snapshot, Featurizer featurize, bool ready)
      : clf_(std::move(snapshot)), featurize_(std::move(featurize)), ready_(ready) {}

  double risk(const std::vector<double>& state, const Action& action) const override {
    return risk_probability(clf_.forward(featurize_(state, action)));
  }
  bool ready() const override { return ready_; }

 private:
  RiskClassifier clf_;
  Featurizer featurize_;
  bool ready_;
};

// p == 0 everywhere. `ready` is false for strategies that never truncate and
// true for the stub-classifier reduction mode.
class ZeroRiskScorer : public RiskScorer {
 public:
  explicit ZeroRiskScorer(bool ready = false) : ready_(ready) {}
  double risk(const std::vector<double>&, const Action&) const override { return 0.0; }
  bool ready() const override { return ready_; }

 private:
  bool ready_;
};

}  // namespace rpt
