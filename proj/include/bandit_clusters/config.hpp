#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bandit_clusters/harness.hpp"

namespace bandits {

// Schema violations carry the path of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error("config error at " + path + ": " + message),
        path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

using nlohmann::json;

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(path.empty() ? item.key() : path + "." + item.key(),
                        "unknown field");
    }
  }
}

inline std::string join(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

inline long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<long>();
}

inline std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!(j.is_number_unsigned() || (j.is_number_integer() && j.get<long>() >= 0))) {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& root) {
  using detail::join;
  detail::expect_object(root, "(top level)");
  detail::check_keys(root, "",
                     {"environment", "horizon", "repetitions", "base_seed",
                      "algorithms", "param_mode", "param_overrides",
                      "record_every", "metrics", "club_graph"});
  ExperimentConfig config;

  if (!root.contains("environment")) {
    throw ConfigError("environment", "required field is missing");
  }
  const nlohmann::json& env = root.at("environment");
  detail::expect_object(env, "environment");
  detail::check_keys(env, "environment",
                     {"n_users", "n_clusters", "dim", "items_per_round",
                      "noise_std", "frequency_mode", "frequency_weights",
                      "rng_seed", "lambda_x_samples", "weights_file"});
  const bool from_file = env.contains("weights_file");
  if (from_file) {
    config.weights_file =
        detail::get_string(env.at("weights_file"), "environment.weights_file");
    if (env.contains("n_clusters")) {
      throw ConfigError("environment.n_clusters",
                        "not accepted together with weights_file; ingested "
                        "users carry no cluster ground truth");
    }
  }
  for (const char* key : {"n_users", "n_clusters", "dim", "items_per_round"}) {
    const std::string path = join("environment", key);
    const bool required = !from_file || std::string(key) == "items_per_round";
    if (!env.contains(key)) {
      if (required) throw ConfigError(path, "required field is missing");
      continue;
    }
    const long value = detail::get_integer(env.at(key), path);
    if (value < 0 || value > 1'000'000'000) {
      throw ConfigError(path, "out of range");
    }
    if (std::string(key) == "n_users") config.env.n_users = static_cast<int>(value);
    if (std::string(key) == "n_clusters") {
      config.env.n_clusters = static_cast<int>(value);
    }
    if (std::string(key) == "dim") config.env.dim = static_cast<int>(value);
    if (std::string(key) == "items_per_round") {
      config.env.items_per_round = static_cast<int>(value);
    }
  }
  if (env.contains("noise_std")) {
    config.env.noise_std =
        detail::get_number(env.at("noise_std"), "environment.noise_std");
  }
  if (env.contains("frequency_mode")) {
    const std::string mode = detail::get_string(env.at("frequency_mode"),
                                                "environment.frequency_mode");
    if (mode == "uniform") {
      config.env.frequency_mode = FrequencyMode::kUniform;
    } else if (mode == "per_cluster") {
      config.env.frequency_mode = FrequencyMode::kPerCluster;
    } else if (mode == "per_user") {
      config.env.frequency_mode = FrequencyMode::kPerUser;
    } else {
      throw ConfigError("environment.frequency_mode",
                        "expected uniform, per_cluster or per_user (got '" +
                            mode + "')");
    }
  }
  if (env.contains("frequency_weights")) {
    const nlohmann::json& w = env.at("frequency_weights");
    if (!w.is_array()) {
      throw ConfigError("environment.frequency_weights", "expected an array");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      config.env.frequency_weights.push_back(detail::get_number(
          w.at(i),
          "environment.frequency_weights[" + std::to_string(i) + "]"));
    }
  }
  if (env.contains("rng_seed")) {
    config.env.rng_seed =
        detail::get_seed(env.at("rng_seed"), "environment.rng_seed");
  }
  if (env.contains("lambda_x_samples")) {
    config.env.lambda_x_samples = static_cast<int>(detail::get_integer(
        env.at("lambda_x_samples"), "environment.lambda_x_samples"));
  }

  if (!root.contains("horizon")) {
    throw ConfigError("horizon", "required field is missing");
  }
  config.horizon = detail::get_integer(root.at("horizon"), "horizon");
  if (root.contains("repetitions")) {
    config.repetitions = static_cast<int>(
        detail::get_integer(root.at("repetitions"), "repetitions"));
  }
  if (root.contains("base_seed")) {
    config.base_seed = detail::get_seed(root.at("base_seed"), "base_seed");
  }

  if (!root.contains("algorithms")) {
    throw ConfigError("algorithms", "required field is missing");
  }
  const nlohmann::json& algos = root.at("algorithms");
  if (!algos.is_array() || algos.empty()) {
    throw ConfigError("algorithms", "expected a nonempty array of names");
  }
  for (std::size_t i = 0; i < algos.size(); ++i) {
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    try {
      config.algorithms.push_back(
          algorithm_from_string(detail::get_string(algos.at(i), path)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }

  if (root.contains("param_mode")) {
    const std::string mode =
        detail::get_string(root.at("param_mode"), "param_mode");
    if (mode == "theoretical") {
      config.param_mode = ParamMode::kTheoretical;
    } else if (mode == "manual") {
      config.param_mode = ParamMode::kManual;
    } else {
      throw ConfigError("param_mode",
                        "expected theoretical or manual (got '" + mode + "')");
    }
  }
  if (root.contains("param_overrides")) {
    const nlohmann::json& o = root.at("param_overrides");
    detail::expect_object(o, "param_overrides");
    detail::check_keys(o, "param_overrides", {"alpha_theta", "alpha_p", "beta"});
    if (o.contains("alpha_theta")) {
      config.overrides.alpha_theta =
          detail::get_number(o.at("alpha_theta"), "param_overrides.alpha_theta");
    }
    if (o.contains("alpha_p")) {
      config.overrides.alpha_p =
          detail::get_number(o.at("alpha_p"), "param_overrides.alpha_p");
    }
    if (o.contains("beta")) {
      config.overrides.beta =
          detail::get_number(o.at("beta"), "param_overrides.beta");
    }
  }
  if (root.contains("record_every")) {
    config.record_every =
        detail::get_integer(root.at("record_every"), "record_every");
  }
  if (root.contains("metrics")) {
    const nlohmann::json& m = root.at("metrics");
    detail::expect_object(m, "metrics");
    detail::check_keys(m, "metrics", {"cluster_count", "rand_index"});
    if (m.contains("cluster_count")) {
      config.metrics.cluster_count =
          detail::get_bool(m.at("cluster_count"), "metrics.cluster_count");
    }
    if (m.contains("rand_index")) {
      config.metrics.rand_index =
          detail::get_bool(m.at("rand_index"), "metrics.rand_index");
    }
  }
  if (root.contains("club_graph")) {
    const std::string g = detail::get_string(root.at("club_graph"), "club_graph");
    if (g == "complete") {
      config.club_graph = ClubOptions::Graph::kComplete;
    } else if (g == "erdos_renyi") {
      config.club_graph = ClubOptions::Graph::kErdosRenyi;
    } else {
      throw ConfigError("club_graph",
                        "expected complete or erdos_renyi (got '" + g + "')");
    }
  }

  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("(validation)", e.what());
  }
  return config;
}

// Canonical form: defaults resolved, optional fields present only when set.
// Feeding the result back through config_from_json yields the same config
// and the same canonical form.
inline nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json env;
  if (!config.weights_file || config.env.n_users != 0) {
    env["n_users"] = config.env.n_users;
  }
  if (!config.weights_file) env["n_clusters"] = config.env.n_clusters;
  if (!config.weights_file || config.env.dim != 0) env["dim"] = config.env.dim;
  env["items_per_round"] = config.env.items_per_round;
  env["noise_std"] = config.env.noise_std;
  env["frequency_mode"] = to_string(config.env.frequency_mode);
  if (!config.env.frequency_weights.empty()) {
    env["frequency_weights"] = config.env.frequency_weights;
  }
  if (config.env.rng_seed) env["rng_seed"] = *config.env.rng_seed;
  env["lambda_x_samples"] = config.env.lambda_x_samples;
  if (config.weights_file) env["weights_file"] = *config.weights_file;

  nlohmann::json root;
  root["environment"] = std::move(env);
  root["horizon"] = config.horizon;
  root["repetitions"] = config.repetitions;
  root["base_seed"] = config.base_seed;
  nlohmann::json algos = nlohmann::json::array();
  for (Algorithm a : config.algorithms) algos.push_back(to_string(a));
  root["algorithms"] = std::move(algos);
  root["param_mode"] =
      config.param_mode == ParamMode::kTheoretical ? "theoretical" : "manual";
  if (config.overrides.alpha_theta || config.overrides.alpha_p ||
      config.overrides.beta) {
    nlohmann::json o;
    if (config.overrides.alpha_theta) o["alpha_theta"] = *config.overrides.alpha_theta;
    if (config.overrides.alpha_p) o["alpha_p"] = *config.overrides.alpha_p;
    if (config.overrides.beta) o["beta"] = *config.overrides.beta;
    root["param_overrides"] = std::move(o);
  }
  if (config.record_every) root["record_every"] = *config.record_every;
  nlohmann::json metrics;
  metrics["cluster_count"] = config.metrics.cluster_count;
  metrics["rand_index"] = config.metrics.rand_index;
  root["metrics"] = std::move(metrics);
  root["club_graph"] = config.club_graph == ClubOptions::Graph::kComplete
                           ? "complete"
                           : "erdos_renyi";
  return root;
}

// Parses a config file; a relative weights_file is taken relative to the
// config file's directory.
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("(syntax)",
                      "file '" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig config = config_from_json(root);
  if (config.weights_file) {
    const std::filesystem::path w(*config.weights_file);
    if (w.is_relative()) {
      config.weights_file =
          (std::filesystem::path(path).parent_path() / w).string();
    }
  }
  return config;
}

}  // namespace bandits
