#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "bandit_clusters/config.hpp"
#include "bandit_clusters/harness.hpp"
#include "bandit_clusters/version.hpp"

namespace bandits {

// Shortest round-trip decimal form, independent of locale.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// Fixed two decimals, for plot coordinates.
inline std::string format_coord(double value) {
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

inline void write_trace_csv(std::ostream& out, const RegretTrace& trace) {
  const bool clusters = !trace.cluster_count.empty();
  const bool rand = !trace.rand_index.empty();
  out << "round,cumulative_regret";
  if (clusters) out << ",cluster_count";
  if (rand) out << ",rand_index";
  out << "\n";
  for (std::size_t k = 0; k < trace.rounds.size(); ++k) {
    out << trace.rounds[k] << ',' << format_double(trace.cumulative_regret[k]);
    if (clusters) out << ',' << trace.cluster_count[k];
    if (rand) out << ',' << format_double(trace.rand_index[k]);
    out << "\n";
  }
}

inline void write_aggregate_csv(std::ostream& out,
                                const AggregateResult& aggregate) {
  const bool clusters = !aggregate.mean_cluster_count.empty();
  const bool rand = !aggregate.mean_rand_index.empty();
  out << "round,mean_regret,stderr_regret";
  if (clusters) out << ",mean_cluster_count";
  if (rand) out << ",mean_rand_index";
  out << "\n";
  for (std::size_t k = 0; k < aggregate.rounds.size(); ++k) {
    out << aggregate.rounds[k] << ',' << format_double(aggregate.mean_regret[k])
        << ',' << format_double(aggregate.stderr_regret[k]);
    if (clusters) out << ',' << format_double(aggregate.mean_cluster_count[k]);
    if (rand) out << ',' << format_double(aggregate.mean_rand_index[k]);
    out << "\n";
  }
}

inline void write_summary_csv(std::ostream& out,
                              const std::vector<AggregateResult>& aggregates) {
  out << "algorithm,repetitions,final_regret_mean,final_regret_stderr\n";
  for (const AggregateResult& a : aggregates) {
    out << to_string(a.algorithm) << ',' << a.repetitions << ','
        << format_double(a.final_regret_mean) << ','
        << format_double(a.final_regret_stderr) << "\n";
  }
}

// Reads back what write_aggregate_csv wrote; used by the plot command.
inline AggregateResult read_aggregate_csv(const std::string& path,
                                          Algorithm algorithm) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("'" + path + "': empty file");
  }
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.size() < 3 || header[0] != "round" || header[1] != "mean_regret" ||
      header[2] != "stderr_regret") {
    throw std::runtime_error("'" + path + "': not an aggregate trace file");
  }
  AggregateResult out;
  out.algorithm = algorithm;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      const auto res =
          std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw std::runtime_error("'" + path + "' line " +
                                 std::to_string(line_no) +
                                 ": not a number: '" + field + "'");
      }
      values.push_back(v);
    }
    if (values.size() != header.size()) {
      throw std::runtime_error("'" + path + "' line " + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " fields");
    }
    out.rounds.push_back(static_cast<long>(values[0]));
    out.mean_regret.push_back(values[1]);
    out.stderr_regret.push_back(values[2]);
  }
  if (out.rounds.empty()) {
    throw std::runtime_error("'" + path + "': no data rows");
  }
  out.final_regret_mean = out.mean_regret.back();
  out.final_regret_stderr = out.stderr_regret.back();
  return out;
}

inline const char* algorithm_color(Algorithm a) {
  switch (a) {
    case Algorithm::kSclub:
      return "red";
    case Algorithm::kClub:
      return "black";
    case Algorithm::kLinucbOne:
      return "green";
    case Algorithm::kLinucbInd:
      return "yellow";
  }
  return "gray";
}

namespace detail {

// Largest of 1/2/5 * 10^k not above the raw step.
inline double nice_step(double raw) {
  if (!(raw > 0.0)) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double mantissa = raw / mag;
  if (mantissa >= 5.0) return 5.0 * mag;
  if (mantissa >= 2.0) return 2.0 * mag;
  return mag;
}

inline std::string tick_label(double value) {
  if (value == 0.0) return "0";
  if (std::abs(value) >= 10000.0) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value / 1000.0,
                                   std::chars_format::general, 6);
    return std::string(buf, res.ptr) + "k";
  }
  char buf[64];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Mean regret curves with standard error bars at eight points per curve.
// Self-contained SVG, deterministic byte for byte.
inline std::string render_regret_svg(
    const std::vector<AggregateResult>& aggregates) {
  if (aggregates.empty()) {
    throw std::invalid_argument("render_regret_svg: nothing to plot");
  }
  const double width = 960, height = 600;
  const double left = 76, right = 18, top = 20, bottom = 52;
  double x_max = 1.0, y_max = 0.0;
  for (const AggregateResult& a : aggregates) {
    if (a.rounds.empty()) {
      throw std::invalid_argument("render_regret_svg: empty aggregate");
    }
    x_max = std::max(x_max, static_cast<double>(a.rounds.back()));
    for (std::size_t k = 0; k < a.rounds.size(); ++k) {
      y_max = std::max(y_max, a.mean_regret[k] + a.stderr_regret[k]);
    }
  }
  if (!(y_max > 0.0)) y_max = 1.0;
  y_max *= 1.05;
  const auto sx = [&](double round) {
    return left + (width - left - right) * (round / x_max);
  };
  const auto sy = [&](double value) {
    return height - bottom - (height - top - bottom) * (value / y_max);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  // Axes with ticks.
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << format_coord(left) << "\" y1=\""
      << format_coord(height - bottom) << "\" x2=\""
      << format_coord(width - right) << "\" y2=\""
      << format_coord(height - bottom) << "\"/>\n";
  svg << "<line x1=\"" << format_coord(left) << "\" y1=\"" << format_coord(top)
      << "\" x2=\"" << format_coord(left) << "\" y2=\""
      << format_coord(height - bottom) << "\"/>\n";
  svg << "</g>\n";

  const double x_step = detail::nice_step(x_max / 6.0);
  svg << "<g font-family=\"sans-serif\" font-size=\"13\" fill=\"black\">\n";
  for (double v = 0.0; v <= x_max * (1.0 + 1e-9); v += x_step) {
    const double px = sx(v);
    svg << "<line x1=\"" << format_coord(px) << "\" y1=\""
        << format_coord(height - bottom) << "\" x2=\"" << format_coord(px)
        << "\" y2=\"" << format_coord(height - bottom + 5)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << format_coord(px) << "\" y=\""
        << format_coord(height - bottom + 20) << "\" text-anchor=\"middle\">"
        << detail::tick_label(v) << "</text>\n";
  }
  const double y_step = detail::nice_step(y_max / 6.0);
  for (double v = 0.0; v <= y_max * (1.0 + 1e-9); v += y_step) {
    const double py = sy(v);
    svg << "<line x1=\"" << format_coord(left - 5) << "\" y1=\""
        << format_coord(py) << "\" x2=\"" << format_coord(left) << "\" y2=\""
        << format_coord(py) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << format_coord(left - 9) << "\" y=\""
        << format_coord(py + 4) << "\" text-anchor=\"end\">"
        << detail::tick_label(v) << "</text>\n";
  }
  svg << "<text x=\"" << format_coord((left + width - right) / 2.0) << "\" y=\""
      << format_coord(height - 10) << "\" text-anchor=\"middle\">round</text>\n";
  svg << "<text x=\"18\" y=\"" << format_coord((top + height - bottom) / 2.0)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << format_coord((top + height - bottom) / 2.0)
      << ")\">cumulative regret</text>\n";
  svg << "</g>\n";

  for (const AggregateResult& a : aggregates) {
    const char* color = algorithm_color(a.algorithm);
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t k = 0; k < a.rounds.size(); ++k) {
      if (k) svg << ' ';
      svg << format_coord(sx(static_cast<double>(a.rounds[k]))) << ','
          << format_coord(sy(a.mean_regret[k]));
    }
    svg << "\"/>\n";

    // Error bars at eight evenly spaced recorded points.
    const std::size_t n = a.rounds.size();
    svg << "<g stroke=\"" << color << "\" stroke-width=\"1.2\">\n";
    std::size_t previous = static_cast<std::size_t>(-1);
    for (int i = 0; i < 8; ++i) {
      const std::size_t k =
          n < 2 ? 0 : (static_cast<std::size_t>(i) + 1) * (n - 1) / 8;
      if (k == previous) continue;
      previous = k;
      const double px = sx(static_cast<double>(a.rounds[k]));
      const double lo = sy(a.mean_regret[k] - a.stderr_regret[k]);
      const double hi = sy(a.mean_regret[k] + a.stderr_regret[k]);
      svg << "<line x1=\"" << format_coord(px) << "\" y1=\"" << format_coord(lo)
          << "\" x2=\"" << format_coord(px) << "\" y2=\"" << format_coord(hi)
          << "\"/>\n";
      svg << "<line x1=\"" << format_coord(px - 4) << "\" y1=\""
          << format_coord(lo) << "\" x2=\"" << format_coord(px + 4)
          << "\" y2=\"" << format_coord(lo) << "\"/>\n";
      svg << "<line x1=\"" << format_coord(px - 4) << "\" y1=\""
          << format_coord(hi) << "\" x2=\"" << format_coord(px + 4)
          << "\" y2=\"" << format_coord(hi) << "\"/>\n";
    }
    svg << "</g>\n";
  }

  svg << "<g font-family=\"sans-serif\" font-size=\"14\">\n";
  double legend_y = top + 16;
  for (const AggregateResult& a : aggregates) {
    const char* color = algorithm_color(a.algorithm);
    svg << "<line x1=\"" << format_coord(left + 14) << "\" y1=\""
        << format_coord(legend_y - 4) << "\" x2=\"" << format_coord(left + 46)
        << "\" y2=\"" << format_coord(legend_y - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2.5\"/>\n";
    svg << "<text x=\"" << format_coord(left + 52) << "\" y=\""
        << format_coord(legend_y) << "\" fill=\"black\">" << to_string(a.algorithm)
        << "</text>\n";
    legend_y += 20;
  }
  svg << "</g>\n";
  svg << "</svg>\n";
  return svg.str();
}

// Everything needed to reproduce or audit a run: the canonical config, the
// derived quantities, and the exact generator recipe.
inline nlohmann::json run_metadata(const ExperimentConfig& config,
                                   const ExperimentResult& result,
                                   const std::vector<std::string>& warnings) {
  nlohmann::json meta;
  meta["config"] = config_to_json(config);
  nlohmann::json derived;
  derived["n_users"] = result.env.n_users();
  derived["dim"] = result.env.dim();
  derived["synthetic_truth"] = result.env.synthetic_truth();
  derived["lambda_x"] = result.env.lambda_x();
  derived["gap_theta"] = result.env.gap_theta();
  derived["gap_frequency"] = result.env.gap_frequency();
  derived["record_every"] = config.effective_record_every();
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    nlohmann::json p;
    p["algorithm"] = to_string(config.algorithms[a]);
    p["alpha_theta"] = result.params[a].alpha_theta;
    p["alpha_p"] = result.params[a].alpha_p;
    p["beta"] = result.params[a].beta;
    params.push_back(std::move(p));
  }
  derived["params"] = std::move(params);
  meta["derived"] = std::move(derived);

  nlohmann::json generator;
  generator["engine"] = "mt19937_64";
  generator["seed_mixing"] = "splitmix64(splitmix64(base ^ splitmix64(kind)) + index)";
  generator["uniform"] = "(next_u64 >> 11) * 2^-53";
  generator["gaussian"] = "box_muller";
  nlohmann::json streams;
  streams["env_build"] = {{"kind", stream::kEnvBuild}};
  streams["lambda_x"] = {{"kind", stream::kLambdaX}};
  streams["rounds"] = {{"kind", stream::kRounds}, {"index", "repetition"}};
  streams["noise"] = {{"kind", stream::kNoise}, {"index", "repetition"}};
  streams["club_graph"] = {{"kind", stream::kClubGraph}};
  generator["streams"] = std::move(streams);
  meta["generator"] = std::move(generator);

  nlohmann::json software;
  software["name"] = "bandit-clusters";
  software["version"] = kVersion;
  meta["software"] = std::move(software);

  meta["wall_seconds"] = result.wall_seconds;
  meta["threads"] = result.threads_used;
  meta["warnings"] = warnings;
  return meta;
}

struct OutputBundle {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
};

namespace detail {

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  out << content;
  if (!out) {
    throw std::runtime_error("write failed for '" + path.string() + "'");
  }
}

}  // namespace detail

// Lays out one run directory:
//   traces/<algorithm>_rep<k>.csv   per-repetition traces
//   aggregate_<algorithm>.csv       pointwise mean and standard error
//   summary.csv                     final regret per algorithm
//   regret.svg                      the comparison plot
//   metadata.json                   config echo + derivations + generator
inline OutputBundle write_bundle(const std::filesystem::path& directory,
                                 const ExperimentConfig& config,
                                 const ExperimentResult& result,
                                 const std::vector<std::string>& warnings = {}) {
  std::error_code ec;
  std::filesystem::create_directories(directory / "traces", ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" +
                             (directory / "traces").string() +
                             "': " + ec.message());
  }
  OutputBundle bundle;
  bundle.directory = directory;
  const int reps = config.repetitions;
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    for (int r = 0; r < reps; ++r) {
      const RegretTrace& trace = result.traces[a * reps + r];
      std::ostringstream body;
      write_trace_csv(body, trace);
      const auto path = directory / "traces" /
                        (std::string(to_string(trace.algorithm)) + "_rep" +
                         std::to_string(r) + ".csv");
      detail::write_file(path, body.str());
      bundle.files.push_back(path);
    }
    std::ostringstream body;
    write_aggregate_csv(body, result.aggregates[a]);
    const auto path =
        directory / ("aggregate_" +
                     std::string(to_string(config.algorithms[a])) + ".csv");
    detail::write_file(path, body.str());
    bundle.files.push_back(path);
  }
  {
    std::ostringstream body;
    write_summary_csv(body, result.aggregates);
    detail::write_file(directory / "summary.csv", body.str());
    bundle.files.push_back(directory / "summary.csv");
  }
  detail::write_file(directory / "regret.svg",
                     render_regret_svg(result.aggregates));
  bundle.files.push_back(directory / "regret.svg");
  detail::write_file(directory / "metadata.json",
                     run_metadata(config, result, warnings).dump(2) + "\n");
  bundle.files.push_back(directory / "metadata.json");
  return bundle;
}

}  // namespace bandits
