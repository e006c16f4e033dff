#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bandit_clusters/params.hpp"
#include "bandit_clusters/policy.hpp"
#include "bandit_clusters/ridge.hpp"

namespace bandits {

// Set-based clustering of users over phases of doubling length. Each phase
// freezes a pivot estimate per cluster; serving a user can split it off its
// cluster (estimate far from the pivot, or frequency far from a member's),
// and clusters whose members have all been served this phase can merge when
// both their estimates and their average frequencies are close. Recommends
// by UCB on the aggregate model of the serving user's cluster.
//
// Invariant maintained throughout: for every cluster j,
//   S^j = I + sum over members i of (S_i - I), likewise b and T.
// audit_max_error() measures the worst deviation.
class SclubPolicy final : public Policy {
 public:
  SclubPolicy(int n_users, int dim, const PolicyParams& params)
      : dim_(dim), params_(params) {
    if (n_users < 1) throw std::invalid_argument("Sclub: n_users must be >= 1");
    if (dim < 1) throw std::invalid_argument("Sclub: dim must be >= 1");
    users_.reserve(n_users);
    for (int u = 0; u < n_users; ++u) users_.push_back(User{RidgeState(dim), false});
    assignment_.assign(n_users, 1);
    Cluster all(dim);
    all.members.resize(n_users);
    std::iota(all.members.begin(), all.members.end(), 0);
    clusters_.emplace(1, std::move(all));
  }

  const char* name() const override { return "sclub"; }

  int choose(int user, const Eigen::MatrixXd& items) override {
    check_user_(user);
    if (pending_user_ != -1) {
      throw std::logic_error("Sclub: choose called with a learn outstanding");
    }
    if (items.rows() != dim_) {
      throw std::invalid_argument("Sclub: item dimension mismatch");
    }
    begin_round_();
    pending_user_ = user;
    const Cluster& c = clusters_.at(assignment_[user]);
    return ucb_argmax(c.state, c.estimate, params_.beta, items);
  }

  void learn(int user, const Eigen::VectorXd& item, double reward) override {
    check_user_(user);
    if (pending_user_ != user) {
      throw std::logic_error("Sclub: learn does not match the chosen round");
    }
    pending_user_ = -1;
    if (item.size() != dim_) {
      throw std::invalid_argument("Sclub: item dimension mismatch");
    }

    users_[user].state.observe(item, reward);
    Cluster& c = clusters_.at(assignment_[user]);
    c.state.observe(item, reward);
    c.estimate = c.state.estimate();
    const long t_user = users_[user].state.count();
    c.max_member_count = std::max(c.max_member_count, t_user);
    if (t_user - 1 == c.min_member_count) recount_extremes_(c);

    split_check_(user);

    // Marked after the split so a fresh singleton counts its own flag.
    if (!users_[user].checked) {
      users_[user].checked = true;
      clusters_.at(assignment_[user]).checked_members += 1;
    }

    merge_pass_();
  }

  int cluster_count() const override { return static_cast<int>(clusters_.size()); }

  std::vector<int> partition() const override { return assignment_; }

  // Introspection, mostly for tests and audits.
  long phase() const { return phase_; }
  long round_in_phase() const { return in_phase_; }
  long global_round() const { return round_; }
  int cluster_of(int user) const {
    check_user_(user);
    return assignment_[user];
  }
  std::vector<int> cluster_ids() const {
    std::vector<int> ids;
    ids.reserve(clusters_.size());
    for (const auto& [id, c] : clusters_) ids.push_back(id);
    return ids;
  }
  const std::vector<int>& members(int cluster_id) const {
    return clusters_.at(cluster_id).members;
  }
  const RidgeState& user_state(int user) const {
    check_user_(user);
    return users_[user].state;
  }
  bool user_checked(int user) const {
    check_user_(user);
    return users_[user].checked;
  }
  const RidgeState& cluster_state(int cluster_id) const {
    return clusters_.at(cluster_id).state;
  }
  const Eigen::VectorXd& cluster_pivot_estimate(int cluster_id) const {
    return clusters_.at(cluster_id).pivot_estimate;
  }
  long cluster_pivot_count(int cluster_id) const {
    return clusters_.at(cluster_id).pivot_count;
  }
  bool cluster_checked(int cluster_id) const {
    const Cluster& c = clusters_.at(cluster_id);
    return c.checked_members == static_cast<int>(c.members.size());
  }

  // Worst numeric deviation between each cluster's statistics and a from-
  // scratch aggregation of its members. Throws on structural breaches
  // (assignment and membership out of sync, members lost or duplicated).
  double audit_max_error() const {
    std::vector<char> seen(users_.size(), 0);
    double worst = 0.0;
    for (const auto& [id, c] : clusters_) {
      std::vector<const RidgeState*> parts;
      parts.reserve(c.members.size());
      long min_count = std::numeric_limits<long>::max();
      long max_count = 0;
      for (int u : c.members) {
        if (u < 0 || u >= static_cast<int>(users_.size()) || seen[u] ||
            assignment_[u] != id) {
          throw std::runtime_error("Sclub audit: membership out of sync");
        }
        seen[u] = 1;
        parts.push_back(&users_[u].state);
        min_count = std::min(min_count, users_[u].state.count());
        max_count = std::max(max_count, users_[u].state.count());
      }
      if (c.members.empty()) {
        throw std::runtime_error("Sclub audit: empty cluster");
      }
      if (min_count != c.min_member_count || max_count != c.max_member_count) {
        throw std::runtime_error("Sclub audit: member count extremes stale");
      }
      const RidgeState rebuilt = RidgeState::aggregated(dim_, parts);
      worst = std::max(worst,
                       (rebuilt.gramian() - c.state.gramian()).cwiseAbs().maxCoeff());
      worst = std::max(worst,
                       (rebuilt.moment() - c.state.moment()).cwiseAbs().maxCoeff());
      if (rebuilt.count() != c.state.count()) {
        throw std::runtime_error("Sclub audit: count mismatch");
      }
      worst = std::max(worst, (c.estimate - c.state.estimate()).cwiseAbs().maxCoeff());
    }
    for (char s : seen) {
      if (!s) throw std::runtime_error("Sclub audit: user in no cluster");
    }
    return worst;
  }

 private:
  struct User {
    RidgeState state;
    bool checked = false;
  };

  struct Cluster {
    explicit Cluster(int dim)
        : state(dim),
          estimate(Eigen::VectorXd::Zero(dim)),
          pivot_estimate(Eigen::VectorXd::Zero(dim)) {}

    RidgeState state;
    Eigen::VectorXd estimate;  // always equals state.estimate()
    std::vector<int> members;  // sorted user indices
    Eigen::VectorXd pivot_estimate;  // frozen at phase start or birth
    long pivot_count = 0;
    int checked_members = 0;
    long min_member_count = 0;
    long max_member_count = 0;
  };

  void check_user_(int user) const {
    if (user < 0 || user >= static_cast<int>(users_.size())) {
      throw std::invalid_argument("Sclub: user index out of range");
    }
  }

  // Phase s runs 2^s rounds; the global round is 2^s - 2 + t.
  void begin_round_() {
    round_ += 1;
    if (phase_ == 0) {
      phase_ = 1;
      in_phase_ = 1;
      begin_phase_();
    } else if (in_phase_ == (1L << phase_)) {
      phase_ += 1;
      in_phase_ = 1;
      begin_phase_();
    } else {
      in_phase_ += 1;
    }
  }

  void begin_phase_() {
    for (User& u : users_) u.checked = false;
    for (auto& [id, c] : clusters_) {
      c.checked_members = 0;
      c.pivot_estimate = c.estimate;
      c.pivot_count = c.state.count();
    }
  }

  void recount_extremes_(Cluster& c) {
    long lo = std::numeric_limits<long>::max();
    long hi = 0;
    for (int u : c.members) {
      const long t = users_[u].state.count();
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    c.min_member_count = lo;
    c.max_member_count = hi;
  }

  void split_check_(int user) {
    const int j = assignment_[user];
    Cluster& c = clusters_.at(j);
    if (c.members.size() < 2) return;  // splitting a singleton is a no-op

    const Eigen::VectorXd user_estimate = users_[user].state.estimate();
    const long t_user = users_[user].state.count();
    bool fire = split_on_estimate(user_estimate, c.pivot_estimate, t_user,
                                  c.pivot_count, params_.alpha_theta);
    if (!fire) {
      const double tau = static_cast<double>(round_);
      fire = split_on_frequency(static_cast<double>(t_user) / tau,
                                static_cast<double>(c.min_member_count) / tau,
                                static_cast<double>(c.max_member_count) / tau,
                                round_, params_.alpha_p);
    }
    if (!fire) return;

    c.state.remove(users_[user].state);
    c.estimate = c.state.estimate();
    c.members.erase(std::lower_bound(c.members.begin(), c.members.end(), user));
    if (users_[user].checked) c.checked_members -= 1;
    recount_extremes_(c);

    // The departing user becomes a fresh singleton whose pivot is its
    // estimate at birth; the id extends the live range.
    const int fresh_id = clusters_.rbegin()->first + 1;
    Cluster fresh(dim_);
    fresh.state = users_[user].state;
    fresh.estimate = user_estimate;
    fresh.members = {user};
    fresh.pivot_estimate = user_estimate;
    fresh.pivot_count = t_user;
    fresh.checked_members = users_[user].checked ? 1 : 0;
    fresh.min_member_count = t_user;
    fresh.max_member_count = t_user;
    clusters_.emplace(fresh_id, std::move(fresh));
    assignment_[user] = fresh_id;
  }

  double average_frequency_(const Cluster& c) const {
    return static_cast<double>(c.state.count()) /
           (static_cast<double>(c.members.size()) * static_cast<double>(round_));
  }

  // Scan checked pairs in ascending id order; each merge restarts the scan
  // until a full pass finds nothing.
  void merge_pass_() {
    bool merged = true;
    while (merged) {
      merged = false;
      for (auto it1 = clusters_.begin(); it1 != clusters_.end() && !merged;
           ++it1) {
        Cluster& c1 = it1->second;
        if (c1.checked_members != static_cast<int>(c1.members.size())) continue;
        for (auto it2 = std::next(it1); it2 != clusters_.end(); ++it2) {
          Cluster& c2 = it2->second;
          if (c2.checked_members != static_cast<int>(c2.members.size())) continue;
          if (!merge_on_frequency(average_frequency_(c1), average_frequency_(c2),
                                  round_, params_.alpha_p)) {
            continue;
          }
          if (!merge_on_estimates(c1.estimate, c2.estimate, c1.state.count(),
                                  c2.state.count(), params_.alpha_theta)) {
            continue;
          }
          absorb_(it1, it2);
          merged = true;
          break;
        }
      }
    }
  }

  void absorb_(std::map<int, Cluster>::iterator keep,
               std::map<int, Cluster>::iterator gone) {
    Cluster& c1 = keep->second;
    Cluster& c2 = gone->second;
    c1.state.add(c2.state);
    c1.estimate = c1.state.estimate();
    std::vector<int> merged_members;
    merged_members.reserve(c1.members.size() + c2.members.size());
    std::merge(c1.members.begin(), c1.members.end(), c2.members.begin(),
               c2.members.end(), std::back_inserter(merged_members));
    c1.members = std::move(merged_members);
    for (int u : c2.members) assignment_[u] = keep->first;
    c1.checked_members += c2.checked_members;
    c1.min_member_count = std::min(c1.min_member_count, c2.min_member_count);
    c1.max_member_count = std::max(c1.max_member_count, c2.max_member_count);
    clusters_.erase(gone);
  }

  int dim_;
  PolicyParams params_;
  std::vector<User> users_;
  std::vector<int> assignment_;
  std::map<int, Cluster> clusters_;
  long phase_ = 0;
  long in_phase_ = 0;
  long round_ = 0;
  int pending_user_ = -1;
};

}  // namespace bandits
