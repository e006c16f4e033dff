#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bandit_clusters/rng.hpp"

namespace bandits {

enum class FrequencyMode { kUniform, kPerCluster, kPerUser };

inline const char* to_string(FrequencyMode m) {
  switch (m) {
    case FrequencyMode::kUniform:
      return "uniform";
    case FrequencyMode::kPerCluster:
      return "per_cluster";
    case FrequencyMode::kPerUser:
      return "per_user";
  }
  return "?";
}

struct EnvironmentSpec {
  int n_users = 0;
  int n_clusters = 0;
  int dim = 0;  // ambient dimension after the lift
  int items_per_round = 0;
  double noise_std = 0.1;
  FrequencyMode frequency_mode = FrequencyMode::kUniform;
  std::vector<double> frequency_weights;  // optional, unnormalized
  std::optional<std::uint64_t> rng_seed;  // resolved to the run base seed if unset
  int lambda_x_samples = 100000;

  void validate() const {
    if (n_users < 1) {
      throw std::invalid_argument("environment.n_users must be >= 1 (got " +
                                  std::to_string(n_users) + ")");
    }
    if (n_clusters < 1 || n_clusters > n_users) {
      throw std::invalid_argument(
          "environment.n_clusters must be in [1, n_users] (got " +
          std::to_string(n_clusters) + " with n_users " +
          std::to_string(n_users) + ")");
    }
    if (dim < 2) {
      throw std::invalid_argument("environment.dim must be >= 2 (got " +
                                  std::to_string(dim) +
                                  "); the lift reserves one coordinate");
    }
    if (items_per_round < 1) {
      throw std::invalid_argument(
          "environment.items_per_round must be >= 1 (got " +
          std::to_string(items_per_round) + ")");
    }
    if (!(noise_std >= 0.0)) {
      throw std::invalid_argument("environment.noise_std must be >= 0");
    }
    if (lambda_x_samples < 1000) {
      throw std::invalid_argument(
          "environment.lambda_x_samples must be >= 1000 (got " +
          std::to_string(lambda_x_samples) + ")");
    }
    if (!frequency_weights.empty()) {
      if (frequency_mode == FrequencyMode::kUniform) {
        throw std::invalid_argument(
            "environment.frequency_weights is not accepted in uniform mode");
      }
      const std::size_t want = frequency_mode == FrequencyMode::kPerCluster
                                  ? static_cast<std::size_t>(n_clusters)
                                  : static_cast<std::size_t>(n_users);
      if (frequency_weights.size() != want) {
        throw std::invalid_argument(
            "environment.frequency_weights must have " + std::to_string(want) +
            " entries (got " + std::to_string(frequency_weights.size()) + ")");
      }
      for (double w : frequency_weights) {
        if (!(w > 0.0)) {
          throw std::invalid_argument(
              "environment.frequency_weights entries must be positive");
        }
      }
    }
  }
};

// Maps a nonzero raw vector in R^{d-1} onto the sphere slice
//   x = (raw / (sqrt2 |raw|), 1/sqrt2)
// so that |x| = 1 and thetaT x lands in [0, 1] for theta built the same way.
inline Eigen::VectorXd lift_to_sphere(const Eigen::VectorXd& raw) {
  const double n = raw.norm();
  if (!(n > 0.0)) {
    throw std::invalid_argument("lift_to_sphere: raw vector must be nonzero");
  }
  Eigen::VectorXd out(raw.size() + 1);
  out.head(raw.size()) = raw / (std::sqrt(2.0) * n);
  out(raw.size()) = 1.0 / std::sqrt(2.0);
  return out;
}

// Smallest eigenvalue of E[x xT] for lifted Gaussian items, by Monte Carlo.
inline double estimate_lambda_x(int dim, int samples, RngStream& rng) {
  if (dim < 2) throw std::invalid_argument("estimate_lambda_x: dim must be >= 2");
  if (samples < 1000) {
    throw std::invalid_argument("estimate_lambda_x: samples must be >= 1000");
  }
  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd raw(dim - 1);
  for (int s = 0; s < samples; ++s) {
    do {
      for (int k = 0; k < dim - 1; ++k) raw(k) = rng.gaussian();
    } while (!(raw.norm() > 0.0));
    const Eigen::VectorXd x = lift_to_sphere(raw);
    second_moment.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  second_moment /= static_cast<double>(samples);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(second_moment);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("estimate_lambda_x: eigensolver failed");
  }
  return es.eigenvalues().minCoeff();
}

// A population of users on the unit sphere with a sampling frequency per
// user, plus the item generator and reward channel. Built either
// synthetically (n_clusters distinct preference vectors, contiguous equal
// blocks of users) or from a file of raw weight vectors (one user per row,
// no cluster ground truth).
class Environment {
 public:
  struct Round {
    int user = 0;
    Eigen::MatrixXd items;  // dim x items_per_round, one item per column
  };
  struct Best {
    double value = 0.0;
    int index = 0;
  };

  static Environment build(const EnvironmentSpec& spec) {
    spec.validate();
    Environment env;
    env.spec_ = spec;
    env.synthetic_truth_ = true;
    const std::uint64_t seed = spec.rng_seed.value_or(0);
    RngStream rng(stream_seed(seed, stream::kEnvBuild));

    // Distinct cluster preference vectors. Equality of two continuous draws
    // has probability zero; the retry cap guards a broken generator.
    Eigen::MatrixXd centers(spec.dim, spec.n_clusters);
    Eigen::VectorXd raw(spec.dim - 1);
    for (int c = 0; c < spec.n_clusters; ++c) {
      bool distinct = false;
      for (int attempt = 0; attempt < 100 && !distinct; ++attempt) {
        do {
          for (int k = 0; k < spec.dim - 1; ++k) raw(k) = rng.gaussian();
        } while (!(raw.norm() > 0.0));
        centers.col(c) = lift_to_sphere(raw);
        distinct = true;
        for (int c2 = 0; c2 < c; ++c2) {
          if ((centers.col(c) - centers.col(c2)).norm() < 1e-9) {
            distinct = false;
            break;
          }
        }
      }
      if (!distinct) {
        throw std::runtime_error(
            "build_environment: could not draw distinct cluster vectors");
      }
    }

    // Contiguous blocks, remainder spread round-robin over the first
    // clusters: sizes differ by at most one.
    env.cluster_of_.resize(spec.n_users);
    env.thetas_.resize(spec.dim, spec.n_users);
    const int base = spec.n_users / spec.n_clusters;
    const int rem = spec.n_users % spec.n_clusters;
    int next = 0;
    for (int c = 0; c < spec.n_clusters; ++c) {
      const int size = base + (c < rem ? 1 : 0);
      for (int k = 0; k < size; ++k, ++next) {
        env.cluster_of_[next] = c;
        env.thetas_.col(next) = centers.col(c);
      }
    }

    env.init_frequencies_(rng);
    env.finish_build_(seed, centers);
    return env;
  }

  // One user preference vector per CSV row of dim-1 raw coordinates. Rows
  // define n_users; spec values of 0 mean "take them from the file".
  static Environment from_weight_file(EnvironmentSpec spec,
                                      const std::string& path) {
    std::ifstream in(path);
    if (!in) {
      throw std::runtime_error("weights file '" + path + "': cannot open");
    }
    std::vector<Eigen::VectorXd> rows;
    std::string line;
    long line_no = 0;
    int width = -1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<double> fields;
      std::size_t pos = 0;
      while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        std::size_t lo = pos, hi = comma;
        while (lo < hi && (line[lo] == ' ' || line[lo] == '\t')) ++lo;
        while (hi > lo && (line[hi - 1] == ' ' || line[hi - 1] == '\t' ||
                           line[hi - 1] == '\r')) {
          --hi;
        }
        double value = 0.0;
        const auto res = std::from_chars(line.data() + lo, line.data() + hi, value);
        if (res.ec != std::errc() || res.ptr != line.data() + hi || lo == hi) {
          throw std::runtime_error(
              "weights file '" + path + "' line " + std::to_string(line_no) +
              ": field " + std::to_string(fields.size() + 1) +
              " is not a number: '" + line.substr(lo, hi - lo) + "'");
        }
        fields.push_back(value);
        pos = comma + 1;
      }
      if (width < 0) {
        width = static_cast<int>(fields.size());
      } else if (static_cast<int>(fields.size()) != width) {
        throw std::runtime_error(
            "weights file '" + path + "' line " + std::to_string(line_no) +
            ": expected " + std::to_string(width) + " fields, found " +
            std::to_string(fields.size()));
      }
      Eigen::VectorXd raw =
          Eigen::Map<const Eigen::VectorXd>(fields.data(), fields.size());
      if (!(raw.norm() > 0.0)) {
        throw std::runtime_error("weights file '" + path + "' line " +
                                 std::to_string(line_no) +
                                 ": zero vector cannot be lifted");
      }
      rows.push_back(std::move(raw));
    }
    if (rows.empty()) {
      throw std::runtime_error("weights file '" + path + "': no data rows");
    }
    const int n_users = static_cast<int>(rows.size());
    const int dim = width + 1;
    if (spec.n_users != 0 && spec.n_users != n_users) {
      throw std::runtime_error(
          "weights file '" + path + "': has " + std::to_string(n_users) +
          " rows but environment.n_users is " + std::to_string(spec.n_users));
    }
    if (spec.dim != 0 && spec.dim != dim) {
      throw std::runtime_error(
          "weights file '" + path + "': rows have " + std::to_string(width) +
          " fields (dim " + std::to_string(dim) + ") but environment.dim is " +
          std::to_string(spec.dim));
    }
    spec.n_users = n_users;
    spec.dim = dim;
    // No ground-truth clustering for ingested users.
    spec.n_clusters = n_users;
    spec.validate();

    Environment env;
    env.spec_ = spec;
    env.synthetic_truth_ = false;
    env.thetas_.resize(dim, n_users);
    for (int u = 0; u < n_users; ++u) {
      env.thetas_.col(u) = lift_to_sphere(rows[u]);
    }
    env.cluster_of_.resize(n_users);
    for (int u = 0; u < n_users; ++u) env.cluster_of_[u] = u;

    const std::uint64_t seed = spec.rng_seed.value_or(0);
    RngStream rng(stream_seed(seed, stream::kEnvBuild));
    env.init_frequencies_(rng);
    env.finish_build_(seed, env.thetas_);
    return env;
  }

  const EnvironmentSpec& spec() const { return spec_; }
  int n_users() const { return spec_.n_users; }
  int dim() const { return spec_.dim; }
  bool synthetic_truth() const { return synthetic_truth_; }
  const std::vector<int>& true_clusters() const { return cluster_of_; }
  const std::vector<double>& frequencies() const { return frequencies_; }
  const Eigen::MatrixXd& thetas() const { return thetas_; }
  double lambda_x() const { return lambda_x_; }
  double gap_theta() const { return gap_theta_; }
  double gap_frequency() const { return gap_frequency_; }

  // User by inverse CDF on the frequencies, then items_per_round lifted
  // Gaussian items.
  Round draw_round(RngStream& rng) const {
    Round r;
    const double u = rng.uniform01();
    const auto it = std::upper_bound(cum_freq_.begin(), cum_freq_.end(), u);
    r.user = static_cast<int>(
        std::min<std::ptrdiff_t>(it - cum_freq_.begin(),
                                 static_cast<std::ptrdiff_t>(spec_.n_users) - 1));
    r.items.resize(spec_.dim, spec_.items_per_round);
    Eigen::VectorXd raw(spec_.dim - 1);
    for (int j = 0; j < spec_.items_per_round; ++j) {
      do {
        for (int k = 0; k < spec_.dim - 1; ++k) raw(k) = rng.gaussian();
      } while (!(raw.norm() > 0.0));
      r.items.col(j) = lift_to_sphere(raw);
    }
    return r;
  }

  double mean_reward(int user, const Eigen::VectorXd& item) const {
    check_user_(user);
    return thetas_.col(user).dot(item);
  }

  // Mean plus noise_std * standard normal. The draw happens even when the
  // noise scale is zero so stream positions do not depend on it.
  double reward(int user, const Eigen::VectorXd& item, RngStream& noise) const {
    return mean_reward(user, item) + spec_.noise_std * noise.gaussian();
  }

  // Highest mean reward over the columns; ties go to the lowest index.
  Best best_reward(int user, const Eigen::MatrixXd& items) const {
    check_user_(user);
    if (items.cols() < 1) {
      throw std::invalid_argument("best_reward: empty item set");
    }
    Best b;
    b.value = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < items.cols(); ++j) {
      const double v = thetas_.col(user).dot(items.col(j));
      if (v > b.value) {
        b.value = v;
        b.index = j;
      }
    }
    return b;
  }

 private:
  void check_user_(int user) const {
    if (user < 0 || user >= spec_.n_users) {
      throw std::invalid_argument("environment: user index out of range");
    }
  }

  void init_frequencies_(RngStream& rng) {
    const int n = spec_.n_users;
    frequencies_.assign(n, 0.0);
    switch (spec_.frequency_mode) {
      case FrequencyMode::kUniform: {
        for (double& f : frequencies_) f = 1.0 / n;
        break;
      }
      case FrequencyMode::kPerCluster: {
        const int m = spec_.n_clusters;
        std::vector<double> w = spec_.frequency_weights;
        if (w.empty()) {
          w.resize(m);
          for (double& x : w) x = rng.exponential();
        }
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        std::vector<int> size(m, 0);
        for (int u = 0; u < n; ++u) size[cluster_of_[u]] += 1;
        // Users of a cluster share its mass equally.
        for (int u = 0; u < n; ++u) {
          const int c = cluster_of_[u];
          frequencies_[u] = w[c] / total / size[c];
        }
        break;
      }
      case FrequencyMode::kPerUser: {
        std::vector<double> w = spec_.frequency_weights;
        if (w.empty()) {
          w.resize(n);
          for (double& x : w) x = rng.exponential();
        }
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (int u = 0; u < n; ++u) frequencies_[u] = w[u] / total;
        break;
      }
    }
    cum_freq_.resize(n);
    double acc = 0.0;
    for (int u = 0; u < n; ++u) {
      acc += frequencies_[u];
      cum_freq_[u] = acc;
    }
    cum_freq_.back() = 1.0;
  }

  // Gap statistics over distinct values plus the spectrum estimate.
  void finish_build_(std::uint64_t seed, const Eigen::MatrixXd& distinct_thetas) {
    gap_theta_ = 0.0;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int a = 0; a < distinct_thetas.cols(); ++a) {
      for (int b = a + 1; b < distinct_thetas.cols(); ++b) {
        const double d = (distinct_thetas.col(a) - distinct_thetas.col(b)).norm();
        if (d > 0.0 && d < best) {
          best = d;
          any = true;
        }
      }
    }
    if (any) gap_theta_ = best;

    gap_frequency_ = 0.0;
    std::vector<double> f = frequencies_;
    std::sort(f.begin(), f.end());
    best = std::numeric_limits<double>::infinity();
    any = false;
    for (std::size_t i = 1; i < f.size(); ++i) {
      const double d = f[i] - f[i - 1];
      if (d > 0.0 && d < best) {
        best = d;
        any = true;
      }
    }
    if (any) gap_frequency_ = best;

    RngStream rng(stream_seed(seed, stream::kLambdaX));
    lambda_x_ = estimate_lambda_x(spec_.dim, spec_.lambda_x_samples, rng);
  }

  EnvironmentSpec spec_;
  bool synthetic_truth_ = true;
  Eigen::MatrixXd thetas_;        // dim x n_users
  std::vector<int> cluster_of_;   // ground truth labels
  std::vector<double> frequencies_;
  std::vector<double> cum_freq_;
  double lambda_x_ = 0.0;
  double gap_theta_ = 0.0;
  double gap_frequency_ = 0.0;
};

}  // namespace bandits
