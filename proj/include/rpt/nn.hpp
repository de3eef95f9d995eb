#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "rpt/rng.hpp"

namespace rpt {

// One-hidden-layer perceptron with tanh activation and linear outputs, kept
// as a single flat parameter vector [W1 | b1 | W2 | b2] so optimizers,
// finite-difference checks, and checkpoints all see one contiguous block.
class Mlp {
 public:
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Mlp(int in_dim, int hidden_dim, int out_dim)
      : in_(in_dim), hidden_(hidden_dim), out_(out_dim),
        theta_(Eigen::VectorXd::Zero(param_count(in_dim, hidden_dim, out_dim))) {
    if (in_dim < 1 || hidden_dim < 1 || out_dim < 1)
      throw std::invalid_argument("Mlp: dimensions must be positive");
  }

  static Eigen::Index param_count(int in_dim, int hidden_dim, int out_dim) {
    return static_cast<Eigen::Index>(hidden_dim) * in_dim + hidden_dim +
           static_cast<Eigen::Index>(out_dim) * hidden_dim + out_dim;
  }

  int in_dim() const { return in_; }
  int hidden_dim() const { return hidden_; }
  int out_dim() const { return out_; }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }

  // Flat index ranges per named block; used to attribute non-finite values.
  Eigen::Index off_b1() const { return static_cast<Eigen::Index>(hidden_) * in_; }
  Eigen::Index off_w2() const { return off_b1() + hidden_; }
  Eigen::Index off_b2() const { return off_w2() + static_cast<Eigen::Index>(out_) * hidden_; }

  Eigen::Map<RowMat> W1() { return {theta_.data(), hidden_, in_}; }
  Eigen::Map<const RowMat> W1() const { return {theta_.data(), hidden_, in_}; }
  Eigen::Map<Eigen::VectorXd> b1() { return {theta_.data() + off_b1(), hidden_}; }
  Eigen::Map<const Eigen::VectorXd> b1() const { return {theta_.data() + off_b1(), hidden_}; }
  Eigen::Map<RowMat> W2() { return {theta_.data() + off_w2(), out_, hidden_}; }
  Eigen::Map<const RowMat> W2() const { return {theta_.data() + off_w2(), out_, hidden_}; }
  Eigen::Map<Eigen::VectorXd> b2() { return {theta_.data() + off_b2(), out_}; }
  Eigen::Map<const Eigen::VectorXd> b2() const { return {theta_.data() + off_b2(), out_}; }

  // Weights ~ N(0, 1/sqrt(fan_in)), biases zero. Uses the portable normal
  // sampler so identical seeds give identical parameters everywhere.
  void init_random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto w1 = W1();
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c)
        w1(r, c) = normal01(rng) / std::sqrt(static_cast<double>(in_));
    b1().setZero();
    auto w2 = W2();
    for (Eigen::Index r = 0; r < w2.rows(); ++r)
      for (Eigen::Index c = 0; c < w2.cols(); ++c)
        w2(r, c) = normal01(rng) / std::sqrt(static_cast<double>(hidden_));
    b2().setZero();
  }

  struct Cache {
    Eigen::VectorXd x;
    Eigen::VectorXd h;  // tanh activations
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache* cache = nullptr) const {
    if (x.size() != in_) throw std::invalid_argument("Mlp: input dimension mismatch");
    Eigen::VectorXd h = (W1() * x + b1()).array().tanh();
    Eigen::VectorXd y = W2() * h + b2();
    if (cache) {
      cache->x = x;
      cache->h = std::move(h);
    }
    return y;
  }

  // Accumulates dL/dtheta into grad (same layout as params) for a single
  // sample, given dL/dy and the forward cache of that sample.
  void backward(const Cache& cache, const Eigen::VectorXd& dy,
                Eigen::VectorXd& grad) const {
    if (grad.size() != theta_.size())
      throw std::invalid_argument("Mlp: gradient buffer size mismatch");
    Eigen::Map<RowMat> gW1(grad.data(), hidden_, in_);
    Eigen::Map<Eigen::VectorXd> gb1(grad.data() + off_b1(), hidden_);
    Eigen::Map<RowMat> gW2(grad.data() + off_w2(), out_, hidden_);
    Eigen::Map<Eigen::VectorXd> gb2(grad.data() + off_b2(), out_);

    gb2 += dy;
    gW2 += dy * cache.h.transpose();
    const Eigen::VectorXd dh = W2().transpose() * dy;
    const Eigen::VectorXd dpre = dh.array() * (1.0 - cache.h.array().square());
    gb1 += dpre;
    gW1 += dpre * cache.x.transpose();
  }

 private:
  int in_, hidden_, out_;
  Eigen::VectorXd theta_;
};

// Adam with bias correction. A zero learning rate is a valid no-op step.
// weight_decay is decoupled (applied to parameters directly, not through the
// moment estimates), so the loss-gradient path is untouched; 0 disables it.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  long step_count = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  void apply(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    if (theta.size() != grad.size())
      throw std::invalid_argument("AdamState: parameter/gradient size mismatch");
    if (m.size() != theta.size()) {
      m = Eigen::VectorXd::Zero(theta.size());
      v = Eigen::VectorXd::Zero(theta.size());
      step_count = 0;
    }
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    theta.array() -=
        learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
    if (weight_decay > 0.0) theta *= 1.0 - learning_rate * weight_decay;
  }
};

}  // namespace rpt
