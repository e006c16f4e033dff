#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bandit_clusters/rng.hpp"

namespace bandits {

// Checks, by direct per-step factorization, the potential inequality that
// the regret analyses lean on: with M_0 = lambda I and
// M_t = M_{t-1} + sum_k x_{t,k} x_{t,k}T, if every batch satisfies
// sum_k |x_{t,k}|^2_{M_{t-1}^-1} <= 1 then
//
//   sum_t sum_k |x_{t,k}|^2_{M_{t-1}^-1} <= 2 log(det M_n / det M_0)
//
// and consequently, with K_t <= A items of norm <= L,
//
//   sum_t sum_k |x_{t,k}|_{M_{t-1}^-1} <= sqrt(2 d n A log(1 + n A L^2 / (lambda d))).
//
// lambda = A L^2 makes the batch condition hold automatically. Streams are
// uniform ball draws plus fixed-direction worst cases; everything here is
// deliberately independent of RidgeState.

struct SelfNormGroupResult {
  int dim = 0;
  int max_batch = 0;
  int steps = 0;
  long trials = 0;
  long violations = 0;
  double worst_quadratic_slack = std::numeric_limits<double>::infinity();
  double worst_sum_slack = std::numeric_limits<double>::infinity();
  double mean_norm_sum = 0.0;
  double norm_sum_bound = 0.0;
  bool ok = false;
};

struct SelfNormReport {
  std::vector<SelfNormGroupResult> groups;
  long trials = 0;
  long violations = 0;

  bool all_ok() const {
    for (const auto& g : groups) {
      if (!g.ok) return false;
    }
    return !groups.empty();
  }
};

namespace detail {

inline double log_det_llt(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("selfnorm: matrix lost positive definiteness");
  }
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// One stream of `steps` batches; item_at fills column k of the batch.
template <typename ItemGen>
void selfnorm_trial(int dim, int steps, int max_batch, double lambda,
                    ItemGen&& item_at, RngStream& rng,
                    SelfNormGroupResult& group) {
  Eigen::MatrixXd m = lambda * Eigen::MatrixXd::Identity(dim, dim);
  const double log_det_start = log_det_llt(m);
  double quadratic_sum = 0.0;
  double norm_sum = 0.0;
  for (int t = 0; t < steps; ++t) {
    const int batch =
        max_batch == 1
            ? 1
            : 1 + static_cast<int>(rng.uniform01() * max_batch) % max_batch;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("selfnorm: matrix lost positive definiteness");
    }
    Eigen::MatrixXd items(dim, batch);
    for (int k = 0; k < batch; ++k) item_at(t, k, items.col(k));
    double batch_quadratic = 0.0;
    for (int k = 0; k < batch; ++k) {
      const double q = items.col(k).dot(llt.solve(items.col(k)));
      batch_quadratic += q;
      norm_sum += std::sqrt(std::max(0.0, q));
    }
    if (batch_quadratic > 1.0 + 1e-9) {
      throw std::runtime_error("selfnorm: batch precondition violated");
    }
    quadratic_sum += batch_quadratic;
    m += items * items.transpose();
  }
  const double rhs = 2.0 * (log_det_llt(m) - log_det_start);
  group.worst_quadratic_slack =
      std::min(group.worst_quadratic_slack, rhs - quadratic_sum);
  group.worst_sum_slack =
      std::min(group.worst_sum_slack, group.norm_sum_bound - norm_sum);
  group.mean_norm_sum += norm_sum;
  group.trials += 1;
  if (quadratic_sum > rhs + 1e-8 || norm_sum > group.norm_sum_bound + 1e-8) {
    group.violations += 1;
  }
}

}  // namespace detail

inline SelfNormReport run_selfnorm_suite(std::uint64_t seed,
                                         int trials_per_group,
                                         int steps = 60) {
  if (trials_per_group < 1) {
    throw std::invalid_argument("selfnorm: trials_per_group must be >= 1");
  }
  if (steps < 1) throw std::invalid_argument("selfnorm: steps must be >= 1");
  SelfNormReport report;
  const int dims[] = {1, 2, 5, 20};
  const int batches[] = {1, 4};
  std::uint64_t group_index = 0;
  for (int dim : dims) {
    for (int max_batch : batches) {
      SelfNormGroupResult group;
      group.dim = dim;
      group.max_batch = max_batch;
      group.steps = steps;
      const double lambda = static_cast<double>(max_batch);  // A L^2, L = 1
      const double n = static_cast<double>(steps);
      const double a = static_cast<double>(max_batch);
      group.norm_sum_bound =
          std::sqrt(2.0 * dim * n * a * std::log1p(n * a / (lambda * dim)));
      RngStream rng(stream_seed(seed, 0x5E1F, group_index++));

      // Uniform ball draws.
      const auto ball_item = [&](int, int, auto col) {
        do {
          for (int i = 0; i < dim; ++i) col(i) = rng.gaussian();
        } while (!(col.norm() > 0.0));
        col *= std::pow(rng.uniform_open(), 1.0 / dim) / col.norm();
      };
      for (int trial = 0; trial < trials_per_group; ++trial) {
        detail::selfnorm_trial(dim, steps, max_batch, lambda, ball_item, rng,
                               group);
      }

      // Fixed direction, the concentration worst case.
      const auto axis_item = [&](int, int, auto col) {
        col.setZero();
        col(0) = 1.0;
      };
      detail::selfnorm_trial(dim, steps, max_batch, lambda, axis_item, rng,
                             group);

      // Rotating axes.
      const auto rotating_item = [&](int t, int, auto col) {
        col.setZero();
        col(t % dim) = 1.0;
      };
      detail::selfnorm_trial(dim, steps, max_batch, lambda, rotating_item, rng,
                             group);

      group.mean_norm_sum /= static_cast<double>(group.trials);
      group.ok = group.violations == 0 &&
                 group.mean_norm_sum <= group.norm_sum_bound + 1e-8;
      report.trials += group.trials;
      report.violations += group.violations;
      report.groups.push_back(group);
    }
  }
  return report;
}

}  // namespace bandits
