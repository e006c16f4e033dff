#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "bandit_clusters/club.hpp"
#include "bandit_clusters/environment.hpp"
#include "bandit_clusters/metrics.hpp"
#include "bandit_clusters/params.hpp"
#include "bandit_clusters/policy.hpp"
#include "bandit_clusters/sclub.hpp"

namespace bandits {

enum class Algorithm { kSclub, kClub, kLinucbOne, kLinucbInd };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kSclub:
      return "sclub";
    case Algorithm::kClub:
      return "club";
    case Algorithm::kLinucbOne:
      return "linucb_one";
    case Algorithm::kLinucbInd:
      return "linucb_ind";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "sclub") return Algorithm::kSclub;
  if (s == "club") return Algorithm::kClub;
  if (s == "linucb_one") return Algorithm::kLinucbOne;
  if (s == "linucb_ind") return Algorithm::kLinucbInd;
  throw std::invalid_argument(
      "unknown algorithm '" + s +
      "' (expected sclub, club, linucb_one or linucb_ind)");
}

struct MetricFlags {
  bool cluster_count = true;
  bool rand_index = true;
};

struct ExperimentConfig {
  EnvironmentSpec env;
  std::optional<std::string> weights_file;
  std::vector<Algorithm> algorithms;
  long horizon = 0;
  int repetitions = 1;
  std::uint64_t base_seed = 0;
  ParamMode param_mode = ParamMode::kTheoretical;
  ParamOverrides overrides;
  std::optional<long> record_every;
  MetricFlags metrics;
  ClubOptions::Graph club_graph = ClubOptions::Graph::kComplete;

  // Default trace resolution is 1024 points across the horizon.
  long effective_record_every() const {
    if (record_every) return *record_every;
    return std::max<long>(1, horizon / 1024);
  }

  void validate() const {
    if (weights_file) {
      if (weights_file->empty()) {
        throw std::invalid_argument("environment.weights_file must not be empty");
      }
      // n_users, dim, n_clusters and the weight lengths are checked against
      // the file when it is loaded; the file cannot fix these.
      if (!(env.noise_std >= 0.0)) {
        throw std::invalid_argument("environment.noise_std must be >= 0");
      }
      if (env.items_per_round < 1) {
        throw std::invalid_argument("environment.items_per_round must be >= 1");
      }
      if (env.lambda_x_samples < 1000) {
        throw std::invalid_argument(
            "environment.lambda_x_samples must be >= 1000");
      }
    } else {
      env.validate();
    }
    if (horizon < 1) {
      throw std::invalid_argument("horizon must be >= 1 (got " +
                                  std::to_string(horizon) + ")");
    }
    if (repetitions < 1) {
      throw std::invalid_argument("repetitions must be >= 1 (got " +
                                  std::to_string(repetitions) + ")");
    }
    if (algorithms.empty()) {
      throw std::invalid_argument("algorithms must name at least one policy");
    }
    for (std::size_t i = 0; i < algorithms.size(); ++i) {
      for (std::size_t j = i + 1; j < algorithms.size(); ++j) {
        if (algorithms[i] == algorithms[j]) {
          throw std::invalid_argument(std::string("algorithms: duplicate entry '") +
                                      to_string(algorithms[i]) + "'");
        }
      }
    }
    if (record_every && *record_every < 1) {
      throw std::invalid_argument("record_every must be >= 1");
    }
    if (param_mode == ParamMode::kTheoretical && !(env.noise_std > 0.0)) {
      throw std::invalid_argument(
          "param_mode=theoretical requires environment.noise_std > 0; use "
          "param_mode=manual with explicit constants for noiseless runs");
    }
    if (param_mode == ParamMode::kManual &&
        (!overrides.alpha_theta || !overrides.alpha_p || !overrides.beta)) {
      throw std::invalid_argument(
          "param_mode=manual requires param_overrides.alpha_theta, "
          ".alpha_p and .beta");
    }
  }
};

// One repetition of one algorithm. Regret is measured on means, never on
// noisy rewards. The stream seeds are recorded so any single trace can be
// replayed in isolation.
struct RegretTrace {
  Algorithm algorithm = Algorithm::kSclub;
  int repetition = 0;
  std::uint64_t rounds_seed = 0;
  std::uint64_t noise_seed = 0;
  std::vector<long> rounds;
  std::vector<double> cumulative_regret;
  std::vector<int> cluster_count;    // empty when not tracked
  std::vector<double> rand_index;    // empty when not tracked
};

struct AggregateResult {
  Algorithm algorithm = Algorithm::kSclub;
  int repetitions = 0;
  std::vector<long> rounds;
  std::vector<double> mean_regret;
  std::vector<double> stderr_regret;
  std::vector<double> mean_cluster_count;  // empty when not tracked
  std::vector<double> mean_rand_index;     // empty when not tracked
  double final_regret_mean = 0.0;
  double final_regret_stderr = 0.0;
};

inline Environment build_environment_for(const ExperimentConfig& config) {
  EnvironmentSpec spec = config.env;
  if (!spec.rng_seed) spec.rng_seed = config.base_seed;
  if (config.weights_file) {
    return Environment::from_weight_file(spec, *config.weights_file);
  }
  return Environment::build(spec);
}

// The cluster-aware policies know the true cluster count; the single-model
// and per-user baselines use their own model counts in the width formula.
inline PolicyParams params_for(const ExperimentConfig& config,
                               const Environment& env, Algorithm algorithm) {
  int m = env.spec().n_clusters;
  if (algorithm == Algorithm::kLinucbOne) m = 1;
  if (algorithm == Algorithm::kLinucbInd) m = env.n_users();
  return derive_params(config.param_mode, env.spec().noise_std, env.lambda_x(),
                       env.dim(), config.horizon, m, env.n_users(),
                       config.overrides);
}

inline std::unique_ptr<Policy> make_policy(const ExperimentConfig& config,
                                           const Environment& env,
                                           Algorithm algorithm) {
  const PolicyParams params = params_for(config, env, algorithm);
  switch (algorithm) {
    case Algorithm::kSclub:
      return std::make_unique<SclubPolicy>(env.n_users(), env.dim(), params);
    case Algorithm::kClub: {
      ClubOptions options;
      options.graph = config.club_graph;
      options.graph_seed = config.base_seed;
      return std::make_unique<ClubPolicy>(env.n_users(), env.dim(), params,
                                          options);
    }
    case Algorithm::kLinucbOne:
      return std::make_unique<LinUcbOnePolicy>(env.n_users(), env.dim(), params);
    case Algorithm::kLinucbInd:
      return std::make_unique<LinUcbIndPolicy>(env.n_users(), env.dim(), params);
  }
  throw std::invalid_argument("make_policy: unknown algorithm");
}

// Drives one policy for `horizon` rounds against the given streams. Every
// policy of a repetition must receive streams with identical seeds; the
// round stream decides users and items, the noise stream only perturbs
// rewards, so all policies of a repetition face the same sequence.
inline RegretTrace run_rounds(Policy& policy, const Environment& env,
                              long horizon, RngStream& round_stream,
                              RngStream& noise_stream, long record_every,
                              const MetricFlags& metrics) {
  if (horizon < 1) throw std::invalid_argument("run_rounds: horizon must be >= 1");
  if (record_every < 1) {
    throw std::invalid_argument("run_rounds: record_every must be >= 1");
  }
  RegretTrace trace;
  const bool track_rand = metrics.rand_index && env.synthetic_truth();
  double cumulative = 0.0;
  for (long round = 1; round <= horizon; ++round) {
    const Environment::Round r = env.draw_round(round_stream);
    const int pick = policy.choose(r.user, r.items);
    const Environment::Best best = env.best_reward(r.user, r.items);
    const double mean_picked = env.mean_reward(r.user, r.items.col(pick));
    cumulative += best.value - mean_picked;
    const double payoff = env.reward(r.user, r.items.col(pick), noise_stream);
    policy.learn(r.user, r.items.col(pick), payoff);
    if (round % record_every == 0 || round == horizon) {
      trace.rounds.push_back(round);
      trace.cumulative_regret.push_back(cumulative);
      if (metrics.cluster_count) {
        trace.cluster_count.push_back(policy.cluster_count());
      }
      if (track_rand) {
        trace.rand_index.push_back(
            rand_index(policy.partition(), env.true_clusters()));
      }
    }
  }
  return trace;
}

inline RegretTrace run_single(const ExperimentConfig& config,
                              const Environment& env, Algorithm algorithm,
                              int repetition) {
  std::unique_ptr<Policy> policy = make_policy(config, env, algorithm);
  const std::uint64_t rounds_seed = stream_seed(
      config.base_seed, stream::kRounds, static_cast<std::uint64_t>(repetition));
  const std::uint64_t noise_seed = stream_seed(
      config.base_seed, stream::kNoise, static_cast<std::uint64_t>(repetition));
  RngStream round_stream(rounds_seed);
  RngStream noise_stream(noise_seed);
  RegretTrace trace =
      run_rounds(*policy, env, config.horizon, round_stream, noise_stream,
                 config.effective_record_every(), config.metrics);
  trace.algorithm = algorithm;
  trace.repetition = repetition;
  trace.rounds_seed = rounds_seed;
  trace.noise_seed = noise_seed;
  return trace;
}

inline RegretTrace run_single(const ExperimentConfig& config,
                              Algorithm algorithm, int repetition) {
  return run_single(config, build_environment_for(config), algorithm,
                    repetition);
}

// Pointwise mean and standard error over repetitions of one algorithm.
// Every trace must share the recording grid; one repetition gets zero
// standard error.
inline AggregateResult aggregate(Algorithm algorithm,
                                 const std::vector<const RegretTrace*>& traces) {
  if (traces.empty()) {
    throw std::invalid_argument("aggregate: no traces");
  }
  const std::size_t points = traces.front()->rounds.size();
  for (const RegretTrace* t : traces) {
    if (t->rounds != traces.front()->rounds) {
      throw std::invalid_argument("aggregate: traces have different grids");
    }
  }
  AggregateResult out;
  out.algorithm = algorithm;
  out.repetitions = static_cast<int>(traces.size());
  out.rounds = traces.front()->rounds;
  out.mean_regret.resize(points);
  out.stderr_regret.resize(points);
  const double n = static_cast<double>(traces.size());
  for (std::size_t k = 0; k < points; ++k) {
    double mean = 0.0;
    for (const RegretTrace* t : traces) mean += t->cumulative_regret[k];
    mean /= n;
    double variance = 0.0;
    if (traces.size() > 1) {
      for (const RegretTrace* t : traces) {
        const double d = t->cumulative_regret[k] - mean;
        variance += d * d;
      }
      variance /= (n - 1.0);
    }
    out.mean_regret[k] = mean;
    out.stderr_regret[k] = std::sqrt(variance / n);
  }
  const bool have_cluster = std::all_of(
      traces.begin(), traces.end(),
      [&](const RegretTrace* t) { return t->cluster_count.size() == points; });
  if (have_cluster && points > 0) {
    out.mean_cluster_count.resize(points);
    for (std::size_t k = 0; k < points; ++k) {
      double mean = 0.0;
      for (const RegretTrace* t : traces) mean += t->cluster_count[k];
      out.mean_cluster_count[k] = mean / n;
    }
  }
  const bool have_rand = std::all_of(
      traces.begin(), traces.end(),
      [&](const RegretTrace* t) { return t->rand_index.size() == points; });
  if (have_rand && points > 0) {
    out.mean_rand_index.resize(points);
    for (std::size_t k = 0; k < points; ++k) {
      double mean = 0.0;
      for (const RegretTrace* t : traces) mean += t->rand_index[k];
      out.mean_rand_index[k] = mean / n;
    }
  }
  if (points > 0) {
    out.final_regret_mean = out.mean_regret.back();
    out.final_regret_stderr = out.stderr_regret.back();
  }
  return out;
}

struct ExperimentResult {
  Environment env;
  std::vector<PolicyParams> params;       // parallel to config.algorithms
  std::vector<RegretTrace> traces;        // [algo major, repetition minor]
  std::vector<AggregateResult> aggregates;  // parallel to config.algorithms
  double wall_seconds = 0.0;
  int threads_used = 1;
};

inline int resolve_thread_count(int requested, int jobs) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env_value = std::getenv("BANDIT_CLUSTERS_THREADS")) {
      threads = std::atoi(env_value);
    }
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (threads <= 0) threads = 1;
  return std::min(threads, std::max(jobs, 1));
}

// Runs every (algorithm, repetition) pair. Jobs are handed to a small
// worker pool but land in preallocated slots, so the result is identical
// for any thread count.
inline ExperimentResult run_experiment(
    const ExperimentConfig& config, int max_threads = 0,
    const std::function<void(const std::string&)>& log = {}) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result{build_environment_for(config), {}, {}, {}, 0.0, 1};
  for (Algorithm a : config.algorithms) {
    result.params.push_back(params_for(config, result.env, a));
  }

  const int reps = config.repetitions;
  const int jobs = static_cast<int>(config.algorithms.size()) * reps;
  result.traces.resize(jobs);
  const int threads = resolve_thread_count(max_threads, jobs);
  result.threads_used = threads;

  std::atomic<int> next_job{0};
  std::mutex log_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&]() {
    for (;;) {
      const int job = next_job.fetch_add(1);
      if (job >= jobs) return;
      const Algorithm algorithm = config.algorithms[job / reps];
      const int repetition = job % reps;
      try {
        result.traces[job] =
            run_single(config, result.env, algorithm, repetition);
        if (log) {
          std::lock_guard<std::mutex> hold(log_mutex);
          log(std::string(to_string(algorithm)) + " repetition " +
              std::to_string(repetition + 1) + "/" + std::to_string(reps) +
              " done, final regret " +
              std::to_string(result.traces[job].cumulative_regret.back()));
        }
      } catch (...) {
        std::lock_guard<std::mutex> hold(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    std::vector<const RegretTrace*> group;
    group.reserve(reps);
    for (int r = 0; r < reps; ++r) {
      group.push_back(&result.traces[a * reps + r]);
    }
    result.aggregates.push_back(aggregate(config.algorithms[a], group));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

}  // namespace bandits
