// Acceptance gate for the simulation suite. Each test checks one release
// criterion and prints one [criterion N] PASS/FAIL line; the expensive
// desk-scale runs are shared between criteria through static caches.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "bandit_clusters/config.hpp"
#include "bandit_clusters/harness.hpp"
#include "bandit_clusters/output.hpp"
#include "bandit_clusters/selfnorm.hpp"

namespace bandits {
namespace {

// Prints the verdict when the test scope ends, even if an assertion bailed
// out early.
struct CriterionLine {
  int number;
  const char* text;
  ~CriterionLine() {
    std::cout << "[criterion " << number << "] "
              << (::testing::Test::HasFailure() ? "FAIL" : "PASS") << " "
              << text << std::endl;
  }
};

const AggregateResult& find_aggregate(const ExperimentResult& result,
                                      const ExperimentConfig& config,
                                      Algorithm algorithm) {
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    if (config.algorithms[a] == algorithm) return result.aggregates[a];
  }
  throw std::logic_error("algorithm not part of the experiment");
}

ExperimentConfig desk_config() {
  ExperimentConfig config;
  config.env.n_users = 64;
  config.env.n_clusters = 8;
  config.env.dim = 10;
  config.env.items_per_round = 10;
  config.env.noise_std = 0.1;
  config.algorithms = {Algorithm::kSclub, Algorithm::kClub,
                       Algorithm::kLinucbOne};
  config.horizon = 1L << 17;
  config.repetitions = 5;
  config.base_seed = 2024;
  return config;
}

struct DeskRun {
  ExperimentConfig config;
  ExperimentResult result;
};

const DeskRun& desk_uniform() {
  static const DeskRun run = [] {
    DeskRun r;
    r.config = desk_config();
    std::cout << "[setup] desk scale, uniform frequencies" << std::endl;
    r.result = run_experiment(r.config, 0, [](const std::string& line) {
      std::cout << "[setup]   " << line << std::endl;
    });
    return r;
  }();
  return run;
}

const DeskRun& desk_weighted() {
  static const DeskRun run = [] {
    DeskRun r;
    r.config = desk_config();
    r.config.env.frequency_mode = FrequencyMode::kPerCluster;
    r.config.env.frequency_weights = {8, 4, 2, 1, 1, 1, 1, 1};
    r.config.algorithms = {Algorithm::kSclub, Algorithm::kClub};
    std::cout << "[setup] desk scale, skewed cluster frequencies" << std::endl;
    r.result = run_experiment(r.config, 0, [](const std::string& line) {
      std::cout << "[setup]   " << line << std::endl;
    });
    return r;
  }();
  return run;
}

const DeskRun& single_cluster() {
  static const DeskRun run = [] {
    DeskRun r;
    r.config = desk_config();
    r.config.env.n_users = 32;
    r.config.env.n_clusters = 1;
    r.config.horizon = 1L << 15;
    r.config.algorithms = {Algorithm::kSclub, Algorithm::kLinucbOne};
    std::cout << "[setup] one shared cluster" << std::endl;
    r.result = run_experiment(r.config, 0, [](const std::string& line) {
      std::cout << "[setup]   " << line << std::endl;
    });
    return r;
  }();
  return run;
}

TEST(Acceptance, RegretOrderingAtDeskScale) {
  CriterionLine line{1,
                     "sclub beats club, linucb_one trails sclub by over 1.5x"};
  const DeskRun& run = desk_uniform();
  const double sclub =
      find_aggregate(run.result, run.config, Algorithm::kSclub).final_regret_mean;
  const double club =
      find_aggregate(run.result, run.config, Algorithm::kClub).final_regret_mean;
  const double one = find_aggregate(run.result, run.config, Algorithm::kLinucbOne)
                         .final_regret_mean;
  std::cout << "  final regret: sclub " << sclub << ", club " << club
            << ", linucb_one " << one << std::endl;
  EXPECT_LT(sclub, club);
  EXPECT_GT(one, 1.5 * sclub);
}

TEST(Acceptance, SkewedFrequenciesWidenTheAdvantage) {
  CriterionLine line{
      2, "sclub's relative advantage over club grows with skewed frequencies"};
  const DeskRun& uniform = desk_uniform();
  const DeskRun& weighted = desk_weighted();
  const double u_sclub =
      find_aggregate(uniform.result, uniform.config, Algorithm::kSclub)
          .final_regret_mean;
  const double u_club =
      find_aggregate(uniform.result, uniform.config, Algorithm::kClub)
          .final_regret_mean;
  const double w_sclub =
      find_aggregate(weighted.result, weighted.config, Algorithm::kSclub)
          .final_regret_mean;
  const double w_club =
      find_aggregate(weighted.result, weighted.config, Algorithm::kClub)
          .final_regret_mean;
  const double uniform_improvement = (u_club - u_sclub) / u_club;
  const double weighted_improvement = (w_club - w_sclub) / w_club;
  std::cout << "  relative improvement: uniform " << uniform_improvement
            << ", skewed " << weighted_improvement << std::endl;
  EXPECT_GE(weighted_improvement, uniform_improvement);
}

TEST(Acceptance, SclubRecoversTheTruePartition) {
  CriterionLine line{
      3, "sclub ends at 8 clusters with rand index 1.0 on at least 4 of 5 seeds"};
  const DeskRun& run = desk_uniform();
  const int reps = run.config.repetitions;
  int recovered = 0;
  for (int r = 0; r < reps; ++r) {
    const RegretTrace& trace = run.result.traces[r];  // sclub is listed first
    ASSERT_EQ(trace.algorithm, Algorithm::kSclub);
    ASSERT_FALSE(trace.cluster_count.empty());
    ASSERT_FALSE(trace.rand_index.empty());
    const int clusters = trace.cluster_count.back();
    const double rand = trace.rand_index.back();
    std::cout << "  seed " << r << ": clusters " << clusters << ", rand index "
              << rand << std::endl;
    if (clusters == 8 && rand == 1.0) ++recovered;
  }
  EXPECT_GE(recovered, 4);
}

TEST(Acceptance, SclubRegretGrowsSublinearly) {
  CriterionLine line{
      4, "sclub per-round regret at T is under half its value at T/4"};
  const DeskRun& run = desk_uniform();
  const AggregateResult& agg =
      find_aggregate(run.result, run.config, Algorithm::kSclub);
  const long horizon = run.config.horizon;
  const auto quarter_at = std::find(agg.rounds.begin(), agg.rounds.end(),
                                    horizon / 4);
  ASSERT_NE(quarter_at, agg.rounds.end());
  const double quarter_rate =
      agg.mean_regret[quarter_at - agg.rounds.begin()] /
      static_cast<double>(horizon / 4);
  const double final_rate =
      agg.final_regret_mean / static_cast<double>(horizon);
  std::cout << "  per-round regret: at T/4 " << quarter_rate << ", at T "
            << final_rate << std::endl;
  EXPECT_LT(final_rate, 0.5 * quarter_rate);
}

TEST(Acceptance, SelfNormalizedBoundNeverBreaks) {
  CriterionLine line{
      5, "potential inequality holds on 1000 random streams to 1e-8"};
  const SelfNormReport report = run_selfnorm_suite(2468, 125);
  EXPECT_EQ(static_cast<long>(report.groups.size()) * 125, 1000);
  EXPECT_EQ(report.violations, 0);
  EXPECT_TRUE(report.all_ok());
  for (const auto& group : report.groups) {
    EXPECT_GE(group.worst_quadratic_slack, -1e-8)
        << "dim " << group.dim << " batch " << group.max_batch;
  }
}

TEST(Acceptance, EmpiricalFrequenciesConcentrate) {
  CriterionLine line{
      6, "empirical user frequencies meet the Hoeffding envelope in 98% of trials"};
  EnvironmentSpec spec;
  spec.n_users = 3;
  spec.n_clusters = 1;
  spec.dim = 2;
  spec.items_per_round = 1;
  spec.noise_std = 0.1;
  spec.frequency_mode = FrequencyMode::kPerUser;
  spec.frequency_weights = {0.5, 0.3, 0.2};
  spec.rng_seed = 99;
  spec.lambda_x_samples = 2000;
  const Environment env = Environment::build(spec);
  const double expected[3] = {0.5, 0.3, 0.2};
  const long draws = 10000;
  const int trials = 200;
  // Hoeffding radius at confidence 1 - 0.01 for 10^4 draws.
  const double radius = 0.016276236307187292;
  int pairs_ok = 0;
  for (int trial = 0; trial < trials; ++trial) {
    RngStream stream(stream_seed(4242, stream::kRounds,
                                 static_cast<std::uint64_t>(trial)));
    long counts[3] = {0, 0, 0};
    for (long t = 0; t < draws; ++t) {
      counts[env.draw_round(stream).user] += 1;
    }
    for (int u = 0; u < 3; ++u) {
      const double hat = static_cast<double>(counts[u]) / draws;
      if (std::abs(hat - expected[u]) <= radius) ++pairs_ok;
    }
  }
  std::cout << "  " << pairs_ok << " of " << trials * 3
            << " (trial, user) pairs inside the envelope" << std::endl;
  EXPECT_GE(pairs_ok, static_cast<int>(0.98 * trials * 3));
}

TEST(Acceptance, MaintainedAlgebraTracksDirectSolves) {
  CriterionLine line{
      7, "incremental inverse and retire/combine stay within 1e-8 of rebuilds"};
  const auto start = std::chrono::steady_clock::now();
  RngStream rng(31415);
  const int dim = 10;
  const int users = 8;
  std::vector<RidgeState> parts(users, RidgeState(dim));
  RidgeState combined(dim);
  double worst_inverse = 0.0;
  double worst_rebuild = 0.0;
  for (long step = 1; step <= 10000; ++step) {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.gaussian();
    x /= x.norm();
    const double y = rng.uniform01();
    const int user = static_cast<int>(step % users);
    parts[user].observe(x, y);
    combined.observe(x, y);
    worst_inverse = std::max(
        worst_inverse,
        (combined.inverse() - combined.gramian().inverse()).cwiseAbs().maxCoeff());
    if (step % 500 == 0) {
      // Retire one part, then fold it back; both states must match an
      // aggregate built from scratch.
      combined.remove(parts[user]);
      std::vector<const RidgeState*> rest;
      for (int u = 0; u < users; ++u) {
        if (u != user) rest.push_back(&parts[u]);
      }
      const RidgeState rebuilt_rest = RidgeState::aggregated(dim, rest);
      worst_rebuild = std::max(
          worst_rebuild,
          (combined.inverse() - rebuilt_rest.inverse()).cwiseAbs().maxCoeff());
      worst_rebuild = std::max(
          worst_rebuild,
          (combined.moment() - rebuilt_rest.moment()).cwiseAbs().maxCoeff());
      combined.add(parts[user]);
      std::vector<const RidgeState*> all;
      for (int u = 0; u < users; ++u) all.push_back(&parts[u]);
      const RidgeState rebuilt_all = RidgeState::aggregated(dim, all);
      worst_rebuild = std::max(
          worst_rebuild,
          (combined.inverse() - rebuilt_all.inverse()).cwiseAbs().maxCoeff());
      worst_rebuild = std::max(
          worst_rebuild,
          (combined.estimate() - rebuilt_all.estimate()).cwiseAbs().maxCoeff());
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  std::cout << "  worst inverse drift " << worst_inverse
            << ", worst rebuild gap " << worst_rebuild << ", " << seconds
            << "s" << std::endl;
  EXPECT_LE(worst_inverse, 1e-8);
  EXPECT_LE(worst_rebuild, 1e-8);
  EXPECT_LT(seconds, 10.0);
}

TEST(Acceptance, DegenerateShapesCollapseToBaselines) {
  CriterionLine line{
      8, "one user plays identically everywhere; one cluster matches linucb_one"};
  // A single user: every policy must pick the same item every round.
  EnvironmentSpec spec;
  spec.n_users = 1;
  spec.n_clusters = 1;
  spec.dim = 6;
  spec.items_per_round = 5;
  spec.noise_std = 0.1;
  spec.rng_seed = 5;
  spec.lambda_x_samples = 2000;
  const Environment env = Environment::build(spec);
  const PolicyParams params =
      derive_params(ParamMode::kTheoretical, spec.noise_std, env.lambda_x(),
                    spec.dim, 2000, 1, 1, {});
  SclubPolicy sclub(1, spec.dim, params);
  ClubPolicy club(1, spec.dim, params);
  LinUcbOnePolicy one(1, spec.dim, params);
  LinUcbIndPolicy ind(1, spec.dim, params);
  Policy* policies[4] = {&sclub, &club, &one, &ind};
  RngStream round_streams[4] = {RngStream(stream_seed(5, stream::kRounds, 0)),
                                RngStream(stream_seed(5, stream::kRounds, 0)),
                                RngStream(stream_seed(5, stream::kRounds, 0)),
                                RngStream(stream_seed(5, stream::kRounds, 0))};
  RngStream noise_streams[4] = {RngStream(stream_seed(5, stream::kNoise, 0)),
                                RngStream(stream_seed(5, stream::kNoise, 0)),
                                RngStream(stream_seed(5, stream::kNoise, 0)),
                                RngStream(stream_seed(5, stream::kNoise, 0))};
  long diverged_at = 0;
  for (long t = 1; t <= 2000 && diverged_at == 0; ++t) {
    int picks[4];
    for (int p = 0; p < 4; ++p) {
      const Environment::Round r = env.draw_round(round_streams[p]);
      picks[p] = policies[p]->choose(r.user, r.items);
      const double payoff =
          env.reward(r.user, r.items.col(picks[p]), noise_streams[p]);
      policies[p]->learn(r.user, r.items.col(picks[p]), payoff);
    }
    if (picks[1] != picks[0] || picks[2] != picks[0] || picks[3] != picks[0]) {
      diverged_at = t;
    }
  }
  EXPECT_EQ(diverged_at, 0) << "action sequences split at round " << diverged_at;

  // One true cluster: sclub's final regret must sit within two pooled
  // standard errors of linucb_one's.
  const DeskRun& run = single_cluster();
  const AggregateResult& sclub_agg =
      find_aggregate(run.result, run.config, Algorithm::kSclub);
  const AggregateResult& one_agg =
      find_aggregate(run.result, run.config, Algorithm::kLinucbOne);
  const double gap =
      std::abs(sclub_agg.final_regret_mean - one_agg.final_regret_mean);
  const double pooled = std::sqrt(
      sclub_agg.final_regret_stderr * sclub_agg.final_regret_stderr +
      one_agg.final_regret_stderr * one_agg.final_regret_stderr);
  std::cout << "  single user ok; one-cluster gap " << gap << " vs 2 x pooled "
            << 2.0 * pooled << std::endl;
  EXPECT_LE(gap, 2.0 * pooled);
}

TEST(Acceptance, RerunsAreByteIdentical) {
  CriterionLine line{9, "identical configs write bitwise-identical CSV files"};
  ExperimentConfig config;
  config.env.n_users = 8;
  config.env.n_clusters = 2;
  config.env.dim = 5;
  config.env.items_per_round = 4;
  config.env.noise_std = 0.1;
  config.env.lambda_x_samples = 2000;
  config.algorithms = {Algorithm::kSclub, Algorithm::kClub,
                       Algorithm::kLinucbOne, Algorithm::kLinucbInd};
  config.horizon = 2048;
  config.repetitions = 2;
  config.base_seed = 77;
  const ExperimentResult first = run_experiment(config, 1);
  const ExperimentResult second = run_experiment(config, 2);
  const std::filesystem::path base = std::filesystem::temp_directory_path();
  const std::filesystem::path dir_a = base / "acceptance_rerun_a";
  const std::filesystem::path dir_b = base / "acceptance_rerun_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  const OutputBundle a = write_bundle(dir_a, config, first);
  const OutputBundle b = write_bundle(dir_b, config, second);
  ASSERT_EQ(a.files.size(), b.files.size());
  int compared = 0;
  for (std::size_t k = 0; k < a.files.size(); ++k) {
    if (a.files[k].extension() != ".csv") continue;
    std::ifstream fa(a.files[k], std::ios::binary);
    std::ifstream fb(b.files[k], std::ios::binary);
    std::ostringstream ba, bb;
    ba << fa.rdbuf();
    bb << fb.rdbuf();
    EXPECT_EQ(ba.str(), bb.str()) << a.files[k] << " differs";
    ++compared;
  }
  std::cout << "  " << compared << " csv files compared byte for byte"
            << std::endl;
  EXPECT_EQ(compared, 2 * 4 + 4 + 1);  // traces, aggregates, summary
}

}  // namespace
}  // namespace bandits
