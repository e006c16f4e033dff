#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

#include "bandit_clusters/params.hpp"
#include "bandit_clusters/policy.hpp"
#include "bandit_clusters/ridge.hpp"
#include "bandit_clusters/rng.hpp"

namespace bandits {

// Undirected simple graph over users, dense adjacency. Deterministic: the
// random variant draws edges in ascending (i, j) order from its own stream.
class UserGraph {
 public:
  static UserGraph complete(int n) {
    UserGraph g(n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) g.set_(i, j, true);
    }
    return g;
  }

  // Includes each edge with probability min(1, 3 ln(n) / n).
  static UserGraph erdos_renyi(int n, std::uint64_t seed) {
    UserGraph g(n);
    const double p =
        n > 1 ? std::min(1.0, 3.0 * std::log(static_cast<double>(n)) / n) : 0.0;
    RngStream rng(seed);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rng.uniform01() < p) g.set_(i, j, true);
      }
    }
    return g;
  }

  int size() const { return n_; }

  bool has_edge(int i, int j) const {
    check_(i);
    check_(j);
    return i != j && bits_[static_cast<std::size_t>(i) * n_ + j] != 0;
  }

  void remove_edge(int i, int j) {
    check_(i);
    check_(j);
    set_(i, j, false);
  }

  // Connected-component labels, 0-based in order of the smallest vertex.
  std::vector<int> components() const {
    std::vector<int> label(n_, -1);
    int next = 0;
    std::queue<int> frontier;
    for (int s = 0; s < n_; ++s) {
      if (label[s] != -1) continue;
      label[s] = next;
      frontier.push(s);
      while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int w = 0; w < n_; ++w) {
          if (label[w] == -1 && has_edge(v, w)) {
            label[w] = next;
            frontier.push(w);
          }
        }
      }
      ++next;
    }
    return label;
  }

 private:
  explicit UserGraph(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("UserGraph: size must be >= 1");
    bits_.assign(static_cast<std::size_t>(n) * n, 0);
  }

  void check_(int i) const {
    if (i < 0 || i >= n_) {
      throw std::invalid_argument("UserGraph: vertex out of range");
    }
  }

  void set_(int i, int j, bool on) {
    if (i == j) return;
    bits_[static_cast<std::size_t>(i) * n_ + j] = on ? 1 : 0;
    bits_[static_cast<std::size_t>(j) * n_ + i] = on ? 1 : 0;
  }

  int n_;
  std::vector<std::uint8_t> bits_;
};

struct ClubOptions {
  enum class Graph { kComplete, kErdosRenyi };
  Graph graph = Graph::kComplete;
  std::uint64_t graph_seed = 0;
};

// Graph-based clustering baseline. Starts from a connected guess, deletes
// the edge between two users once their estimates provably separate, and
// serves each user with the aggregate model of its current component.
// Components and aggregates are recomputed only on rounds that deleted an
// edge; full recomputation is fine at the scales this runs at.
class ClubPolicy final : public Policy {
 public:
  ClubPolicy(int n_users, int dim, const PolicyParams& params,
             const ClubOptions& options = {})
      : dim_(dim),
        params_(params),
        graph_(options.graph == ClubOptions::Graph::kComplete
                   ? UserGraph::complete(n_users)
                   : UserGraph::erdos_renyi(
                         n_users,
                         stream_seed(options.graph_seed, stream::kClubGraph))) {
    if (dim < 1) throw std::invalid_argument("Club: dim must be >= 1");
    user_states_.reserve(n_users);
    for (int u = 0; u < n_users; ++u) user_states_.emplace_back(dim);
    estimates_.assign(n_users, Eigen::VectorXd::Zero(dim));
    rebuild_components_();
  }

  const char* name() const override { return "club"; }

  int choose(int user, const Eigen::MatrixXd& items) override {
    check_user_(user);
    if (items.rows() != dim_) {
      throw std::invalid_argument("Club: item dimension mismatch");
    }
    const int c = component_of_[user];
    return ucb_argmax(component_states_[c], component_estimates_[c],
                      params_.beta, items);
  }

  void learn(int user, const Eigen::VectorXd& item, double reward) override {
    check_user_(user);
    if (item.size() != dim_) {
      throw std::invalid_argument("Club: item dimension mismatch");
    }
    user_states_[user].observe(item, reward);
    estimates_[user] = user_states_[user].estimate();
    const int c = component_of_[user];
    component_states_[c].observe(item, reward);
    component_estimates_[c] = component_states_[c].estimate();

    bool deleted = false;
    const int n = graph_.size();
    for (int other = 0; other < n; ++other) {
      if (!graph_.has_edge(user, other)) continue;
      if (edge_is_stale(estimates_[user], estimates_[other],
                        user_states_[user].count(), user_states_[other].count(),
                        params_.alpha_theta)) {
        graph_.remove_edge(user, other);
        deleted = true;
      }
    }
    if (deleted) rebuild_components_();
  }

  int cluster_count() const override {
    return static_cast<int>(component_states_.size());
  }

  std::vector<int> partition() const override { return component_of_; }

  const UserGraph& graph() const { return graph_; }
  const RidgeState& user_state(int user) const { return user_states_.at(user); }
  const RidgeState& component_state(int c) const {
    return component_states_.at(c);
  }

 private:
  void check_user_(int user) const {
    if (user < 0 || user >= static_cast<int>(user_states_.size())) {
      throw std::invalid_argument("Club: user index out of range");
    }
  }

  void rebuild_components_() {
    component_of_ = graph_.components();
    int count = 0;
    for (int c : component_of_) count = std::max(count, c + 1);
    component_states_.clear();
    component_estimates_.clear();
    component_states_.reserve(count);
    component_estimates_.reserve(count);
    std::vector<std::vector<const RidgeState*>> parts(count);
    for (int u = 0; u < static_cast<int>(user_states_.size()); ++u) {
      parts[component_of_[u]].push_back(&user_states_[u]);
    }
    for (int c = 0; c < count; ++c) {
      component_states_.push_back(RidgeState::aggregated(dim_, parts[c]));
      component_estimates_.push_back(component_states_.back().estimate());
    }
  }

  int dim_;
  PolicyParams params_;
  UserGraph graph_;
  std::vector<RidgeState> user_states_;
  std::vector<Eigen::VectorXd> estimates_;
  std::vector<int> component_of_;
  std::vector<RidgeState> component_states_;
  std::vector<Eigen::VectorXd> component_estimates_;
};

}  // namespace bandits
