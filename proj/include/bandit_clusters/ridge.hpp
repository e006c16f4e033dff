#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bandits {

// Sufficient statistics of a ridge regression with unit regularization:
//   gramian  S = I + sum x xT
//   moment   b = sum y x
//   count    T
// The inverse of S is maintained incrementally (Sherman-Morrison for rank-1
// absorbs, full refactorization for bulk edits) together with log det S.
// Items are expected to lie in the unit ball; callers guarantee that, the
// class does not check.
class RidgeState {
 public:
  explicit RidgeState(Eigen::Index dim)
      : gramian_(Eigen::MatrixXd::Identity(dim, dim)),
        inverse_(Eigen::MatrixXd::Identity(dim, dim)),
        moment_(Eigen::VectorXd::Zero(dim)) {
    if (dim < 1) throw std::invalid_argument("RidgeState: dim must be >= 1");
  }

  Eigen::Index dim() const { return gramian_.rows(); }
  long count() const { return count_; }
  const Eigen::MatrixXd& gramian() const { return gramian_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }
  const Eigen::VectorXd& moment() const { return moment_; }
  double log_det() const { return log_det_; }

  // S += x xT, b += y x, T += 1. O(d^2).
  void observe(const Eigen::VectorXd& x, double y) {
    const Eigen::VectorXd ax = inverse_ * x;
    const double denom = 1.0 + x.dot(ax);
    inverse_.noalias() -= (ax * ax.transpose()) / denom;
    gramian_.noalias() += x * x.transpose();
    moment_.noalias() += y * x;
    count_ += 1;
    log_det_ += std::log(denom);
    if (++since_refresh_ >= kRefreshEvery) refresh();
  }

  // Absorb another accumulator: S += So - I, b += bo, T += To.
  void add(const RidgeState& other) {
    check_dim_(other);
    gramian_ += other.gramian_;
    gramian_.diagonal().array() -= 1.0;
    moment_ += other.moment_;
    count_ += other.count_;
    refresh();
  }

  // Retire a sub-accumulator: S -= Ss - I, b -= bs, T -= Ts. Throws if the
  // result is not positive definite; that means sub was never part of this
  // state and continuing would corrupt every later estimate.
  void remove(const RidgeState& sub) {
    check_dim_(sub);
    if (sub.count_ > count_) {
      throw std::runtime_error("RidgeState::remove: count would go negative");
    }
    gramian_ -= sub.gramian_;
    gramian_.diagonal().array() += 1.0;
    moment_ -= sub.moment_;
    count_ -= sub.count_;
    refresh();
  }

  // I + sum over parts of (S_p - I); one refactorization at the end.
  static RidgeState aggregated(Eigen::Index dim,
                               const std::vector<const RidgeState*>& parts) {
    RidgeState out(dim);
    for (const RidgeState* p : parts) {
      out.check_dim_(*p);
      out.gramian_ += p->gramian_;
      out.gramian_.diagonal().array() -= 1.0;
      out.moment_ += p->moment_;
      out.count_ += p->count_;
    }
    out.refresh();
    return out;
  }

  // S^-1 b. O(d^2).
  Eigen::VectorXd estimate() const { return inverse_ * moment_; }

  // sqrt(xT S^-1 x). The inner product can go epsilon-negative through
  // accumulated drift; clamp instead of feeding sqrt a negative.
  double mahalanobis(const Eigen::VectorXd& x) const {
    return std::sqrt(std::max(0.0, x.dot(inverse_ * x)));
  }

  // ||S S^-1 - I||_max, for audits.
  double max_inverse_drift() const {
    const Eigen::Index d = dim();
    return (gramian_ * inverse_ - Eigen::MatrixXd::Identity(d, d))
        .cwiseAbs()
        .maxCoeff();
  }

  // Refactorize inverse and log det from the gramian. Throws if S has lost
  // positive definiteness.
  void refresh() {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gramian_);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= kMinPivot) {
      throw std::runtime_error("RidgeState: gramian is not positive definite");
    }
    const Eigen::Index n = dim();
    inverse_ = ldlt.solve(Eigen::MatrixXd::Identity(n, n));
    inverse_ = ((inverse_ + inverse_.transpose()) / 2.0).eval();
    log_det_ = d.array().log().sum();
    since_refresh_ = 0;
  }

 private:
  void check_dim_(const RidgeState& other) const {
    if (other.dim() != dim()) {
      throw std::invalid_argument("RidgeState: dimension mismatch");
    }
  }

  static constexpr int kRefreshEvery = 512;
  static constexpr double kMinPivot = 1e-10;

  Eigen::MatrixXd gramian_;
  Eigen::MatrixXd inverse_;
  Eigen::VectorXd moment_;
  long count_ = 0;
  double log_det_ = 0.0;
  int since_refresh_ = 0;
};

}  // namespace bandits
