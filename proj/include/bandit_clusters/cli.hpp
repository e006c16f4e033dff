#pragma once

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bandit_clusters/config.hpp"
#include "bandit_clusters/harness.hpp"
#include "bandit_clusters/output.hpp"
#include "bandit_clusters/version.hpp"

namespace bandits {

namespace detail {

inline std::vector<Algorithm> parse_algorithm_list(const std::string& csv) {
  std::vector<Algorithm> out;
  std::stringstream ss(csv);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    out.push_back(algorithm_from_string(name));
  }
  if (out.empty()) {
    throw std::invalid_argument("--algos: no algorithm names given");
  }
  return out;
}

inline int run_command(const std::string& config_path,
                       const std::string& out_dir, int seeds, long horizon,
                       const std::string& algos_csv, int threads,
                       bool dry_run) {
  ExperimentConfig config = load_config_file(config_path);
  if (seeds > 0) config.repetitions = seeds;
  if (horizon > 0) config.horizon = horizon;
  if (!algos_csv.empty()) config.algorithms = parse_algorithm_list(algos_csv);
  config.validate();

  if (dry_run) {
    const Environment env = build_environment_for(config);
    std::cout << "environment: n_users=" << env.n_users()
              << " n_clusters=" << env.spec().n_clusters
              << " dim=" << env.dim()
              << " items_per_round=" << env.spec().items_per_round
              << " noise_std=" << format_double(env.spec().noise_std)
              << " synthetic_truth=" << (env.synthetic_truth() ? "yes" : "no")
              << "\n";
    std::cout << "derived: lambda_x=" << format_double(env.lambda_x())
              << " gap_theta=" << format_double(env.gap_theta())
              << " gap_frequency=" << format_double(env.gap_frequency())
              << "\n";
    for (Algorithm a : config.algorithms) {
      const PolicyParams p = params_for(config, env, a);
      std::cout << to_string(a) << ": alpha_theta=" << format_double(p.alpha_theta)
                << " alpha_p=" << format_double(p.alpha_p)
                << " beta=" << format_double(p.beta) << "\n";
    }
    std::cout << "run: horizon=" << config.horizon
              << " repetitions=" << config.repetitions
              << " record_every=" << config.effective_record_every()
              << " base_seed=" << config.base_seed << "\n";
    std::cout << "dry run, nothing written\n";
    return 0;
  }

  const ExperimentResult result = run_experiment(
      config, threads,
      [](const std::string& line) { std::cerr << line << "\n"; });
  const OutputBundle bundle = write_bundle(out_dir, config, result);
  for (const AggregateResult& a : result.aggregates) {
    std::cout << to_string(a.algorithm) << ": final regret "
              << format_double(a.final_regret_mean) << " +- "
              << format_double(a.final_regret_stderr) << " over "
              << a.repetitions << " repetitions\n";
  }
  std::cout << "wrote " << bundle.files.size() << " files to "
            << bundle.directory.string() << " in "
            << format_coord(result.wall_seconds) << "s\n";
  return 0;
}

inline int plot_command(const std::string& dir) {
  const Algorithm order[] = {Algorithm::kSclub, Algorithm::kClub,
                             Algorithm::kLinucbOne, Algorithm::kLinucbInd};
  std::vector<AggregateResult> aggregates;
  for (Algorithm a : order) {
    const std::filesystem::path path =
        std::filesystem::path(dir) /
        ("aggregate_" + std::string(to_string(a)) + ".csv");
    if (std::filesystem::exists(path)) {
      aggregates.push_back(read_aggregate_csv(path.string(), a));
    }
  }
  if (aggregates.empty()) {
    throw std::runtime_error("no aggregate_<algorithm>.csv files in '" + dir +
                             "'");
  }
  const std::filesystem::path out = std::filesystem::path(dir) / "regret.svg";
  detail::write_file(out, render_regret_svg(aggregates));
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace detail

// Exit codes: 0 success, 1 command line usage, 2 config or validation
// problems, 3 I/O and data file problems.
inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Simulation suite for online clustering of linear bandits"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir, algos_csv, plot_dir;
  int seeds = 0;
  long horizon = 0;
  int threads = 0;
  bool dry_run = false;

  CLI::App* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seeds", seeds, "Override the number of repetitions");
  run->add_option("--horizon", horizon, "Override the horizon");
  run->add_option("--algos", algos_csv,
                  "Comma-separated subset: sclub,club,linucb_one,linucb_ind");
  run->add_option("--threads", threads,
                  "Worker threads (default: BANDIT_CLUSTERS_THREADS, then "
                  "hardware)");
  run->add_flag("--dry-run", dry_run,
                "Validate the config, print derived parameters, write nothing");

  CLI::App* plot =
      app.add_subcommand("plot", "Re-render regret.svg from aggregate CSVs");
  plot->add_option("dir", plot_dir, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Normalize CLI11's code family: help and version are successes, any
    // other usage problem is exit 1.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      return detail::run_command(config_path, out_dir, seeds, horizon,
                                 algos_csv, threads, dry_run);
    }
    return detail::plot_command(plot_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace bandits
