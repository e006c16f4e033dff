#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace bandits {

// F(T) = sqrt((1 + ln(1+T)) / (1+T)). Decreasing in T, F(0) = 1.
inline double confidence_radius(long count) {
  if (count < 0) {
    throw std::invalid_argument("confidence_radius: count must be >= 0");
  }
  const double t = static_cast<double>(count);
  return std::sqrt((1.0 + std::log1p(t)) / (1.0 + t));
}

enum class ParamMode { kTheoretical, kManual };

struct ParamOverrides {
  std::optional<double> alpha_theta;
  std::optional<double> alpha_p;
  std::optional<double> beta;
};

// Exploration constants shared by every policy, plus the inputs they were
// derived from (echoed into run metadata).
struct PolicyParams {
  double alpha_theta = 0.0;  // estimate separation scale
  double alpha_p = 0.0;      // frequency separation scale
  double beta = 0.0;         // UCB width

  ParamMode mode = ParamMode::kTheoretical;
  double noise_std = 0.0;
  double lambda_x = 0.0;
  int dim = 0;
  long horizon = 0;
  int n_clusters = 0;
  int n_users = 0;
};

// Theoretical values:
//   alpha_theta = 4 R sqrt(d / lambda_x)
//   alpha_p     = 2
//   beta        = R sqrt(d ln(1 + T/d) + 2 ln(4 m n_u))
// Manual mode requires all three constants in the overrides; either mode
// lets an override win over the derived value.
inline PolicyParams derive_params(ParamMode mode, double noise_std,
                                  double lambda_x, int dim, long horizon,
                                  int n_clusters, int n_users,
                                  const ParamOverrides& overrides = {}) {
  if (dim < 1) throw std::invalid_argument("derive_params: dim must be >= 1");
  if (horizon < 1) {
    throw std::invalid_argument("derive_params: horizon must be >= 1");
  }
  if (n_clusters < 1) {
    throw std::invalid_argument("derive_params: n_clusters must be >= 1");
  }
  if (n_users < 1) {
    throw std::invalid_argument("derive_params: n_users must be >= 1");
  }
  PolicyParams p;
  p.mode = mode;
  p.noise_std = noise_std;
  p.lambda_x = lambda_x;
  p.dim = dim;
  p.horizon = horizon;
  p.n_clusters = n_clusters;
  p.n_users = n_users;
  if (mode == ParamMode::kTheoretical) {
    if (noise_std <= 0.0) {
      throw std::invalid_argument(
          "derive_params: theoretical mode needs noise_std > 0");
    }
    if (lambda_x <= 0.0) {
      throw std::invalid_argument(
          "derive_params: theoretical mode needs lambda_x > 0");
    }
    const double d = static_cast<double>(dim);
    const double t = static_cast<double>(horizon);
    p.alpha_theta = 4.0 * noise_std * std::sqrt(d / lambda_x);
    p.alpha_p = 2.0;
    p.beta = noise_std *
             std::sqrt(d * std::log1p(t / d) +
                       2.0 * std::log(4.0 * static_cast<double>(n_clusters) *
                                      static_cast<double>(n_users)));
  } else {
    if (!overrides.alpha_theta || !overrides.alpha_p || !overrides.beta) {
      throw std::invalid_argument(
          "derive_params: manual mode needs alpha_theta, alpha_p and beta");
    }
  }
  if (overrides.alpha_theta) p.alpha_theta = *overrides.alpha_theta;
  if (overrides.alpha_p) p.alpha_p = *overrides.alpha_p;
  if (overrides.beta) p.beta = *overrides.beta;
  if (p.alpha_theta <= 0.0 || p.alpha_p <= 0.0 || p.beta <= 0.0) {
    throw std::invalid_argument("derive_params: constants must be positive");
  }
  return p;
}

// Separation tests used by the adaptive policies. All distances are
// Euclidean on the estimates; counts feed the confidence radius.

inline bool split_on_estimate(const Eigen::VectorXd& user_estimate,
                              const Eigen::VectorXd& pivot_estimate,
                              long user_count, long pivot_count,
                              double alpha_theta) {
  return (user_estimate - pivot_estimate).norm() >
         alpha_theta *
             (confidence_radius(user_count) + confidence_radius(pivot_count));
}

// The served user leaves if its frequency estimate is far from any member's;
// the extremes are enough since all the estimates share the denominator.
inline bool split_on_frequency(double p_user, double p_member_min,
                               double p_member_max, long round,
                               double alpha_p) {
  const double spread = std::max(std::abs(p_user - p_member_min),
                                 std::abs(p_user - p_member_max));
  return spread > 2.0 * alpha_p * confidence_radius(round);
}

inline bool merge_on_estimates(const Eigen::VectorXd& estimate_a,
                               const Eigen::VectorXd& estimate_b, long count_a,
                               long count_b, double alpha_theta) {
  return (estimate_a - estimate_b).norm() <
         0.5 * alpha_theta *
             (confidence_radius(count_a) + confidence_radius(count_b));
}

inline bool merge_on_frequency(double p_a, double p_b, long round,
                               double alpha_p) {
  return std::abs(p_a - p_b) < alpha_p * confidence_radius(round);
}

inline bool edge_is_stale(const Eigen::VectorXd& estimate_a,
                          const Eigen::VectorXd& estimate_b, long count_a,
                          long count_b, double alpha_theta) {
  return (estimate_a - estimate_b).norm() >
         alpha_theta *
             (confidence_radius(count_a) + confidence_radius(count_b));
}

}  // namespace bandits
