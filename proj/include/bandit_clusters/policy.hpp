#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bandit_clusters/params.hpp"
#include "bandit_clusters/ridge.hpp"

namespace bandits {

// Index of the column maximizing estimate.x + beta |x|_{S^-1}; ties go to
// the lowest index.
inline int ucb_argmax(const RidgeState& state, const Eigen::VectorXd& estimate,
                      double beta, const Eigen::MatrixXd& items) {
  if (items.cols() < 1) throw std::invalid_argument("ucb_argmax: empty item set");
  if (items.rows() != estimate.size()) {
    throw std::invalid_argument("ucb_argmax: item dimension mismatch");
  }
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < items.cols(); ++j) {
    const double value =
        estimate.dot(items.col(j)) + beta * state.mahalanobis(items.col(j));
    if (value > best_value) {
      best_value = value;
      best = j;
    }
  }
  return best;
}

inline int ucb_argmax(const RidgeState& state, double beta,
                      const Eigen::MatrixXd& items) {
  return ucb_argmax(state, state.estimate(), beta, items);
}

// Sequential decision interface: choose an item column for the served user,
// then learn from the reward of the chosen item. partition() labels users by
// the model's current grouping; labels are arbitrary but consistent.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual const char* name() const = 0;
  virtual int choose(int user, const Eigen::MatrixXd& items) = 0;
  virtual void learn(int user, const Eigen::VectorXd& item, double reward) = 0;
  virtual int cluster_count() const = 0;
  virtual std::vector<int> partition() const = 0;
};

// One shared model for everybody.
class LinUcbOnePolicy final : public Policy {
 public:
  LinUcbOnePolicy(int n_users, int dim, const PolicyParams& params)
      : n_users_(n_users), params_(params), state_(dim) {
    if (n_users < 1) throw std::invalid_argument("LinUcbOne: n_users must be >= 1");
  }

  const char* name() const override { return "linucb_one"; }

  int choose(int user, const Eigen::MatrixXd& items) override {
    check_user_(user);
    return ucb_argmax(state_, params_.beta, items);
  }

  void learn(int user, const Eigen::VectorXd& item, double reward) override {
    check_user_(user);
    state_.observe(item, reward);
  }

  int cluster_count() const override { return 1; }

  std::vector<int> partition() const override {
    return std::vector<int>(n_users_, 0);
  }

  const RidgeState& state() const { return state_; }

 private:
  void check_user_(int user) const {
    if (user < 0 || user >= n_users_) {
      throw std::invalid_argument("LinUcbOne: user index out of range");
    }
  }

  int n_users_;
  PolicyParams params_;
  RidgeState state_;
};

// One independent model per user.
class LinUcbIndPolicy final : public Policy {
 public:
  LinUcbIndPolicy(int n_users, int dim, const PolicyParams& params)
      : params_(params) {
    if (n_users < 1) throw std::invalid_argument("LinUcbInd: n_users must be >= 1");
    states_.reserve(n_users);
    for (int u = 0; u < n_users; ++u) states_.emplace_back(dim);
  }

  const char* name() const override { return "linucb_ind"; }

  int choose(int user, const Eigen::MatrixXd& items) override {
    check_user_(user);
    return ucb_argmax(states_[user], params_.beta, items);
  }

  void learn(int user, const Eigen::VectorXd& item, double reward) override {
    check_user_(user);
    states_[user].observe(item, reward);
  }

  int cluster_count() const override { return static_cast<int>(states_.size()); }

  std::vector<int> partition() const override {
    std::vector<int> labels(states_.size());
    std::iota(labels.begin(), labels.end(), 0);
    return labels;
  }

  const RidgeState& state(int user) const { return states_.at(user); }

 private:
  void check_user_(int user) const {
    if (user < 0 || user >= static_cast<int>(states_.size())) {
      throw std::invalid_argument("LinUcbInd: user index out of range");
    }
  }

  PolicyParams params_;
  std::vector<RidgeState> states_;
};

}  // namespace bandits
