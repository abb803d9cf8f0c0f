// SPDX-License-Identifier: Apache-2.0
//
// Experiment config files and result export.
//
// Config files are flat `key = value` lines; `#` starts a comment, blank lines
// are ignored, and unknown or repeated keys are errors. Lists are comma
// separated. Example:
//
//   n_ues = 200
//   n_clusters = 20
//   snr_db = 10
//   sweep = pilot_len: 20, 30, 40, 50, 60
//   estimators = ep, msbl, oracle_mmse
//   solver.damping = 0.7

#ifndef JUICE_IO_HPP
#define JUICE_IO_HPP

#include "juice/common.hpp"
#include "juice/harness.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace juice {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.push_back("");
  return parts;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects a number, got '" + v + "'");
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects an integer, got '" + v + "'");
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long u = std::stoull(v, &used);
    if (used == v.size() && v.find('-') == std::string::npos) return u;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects an unsigned integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "'" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

/// Applies one key/value pair to `config`.
inline void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  using namespace detail;
  const auto as_int = [&] { return static_cast<int>(parse_integer(key, value)); };
  const auto as_double = [&] { return parse_double(key, value); };
  auto& s = config.scenario;

  if (key == "n_ues") s.n_ues = as_int();
  else if (key == "n_clusters") s.n_clusters = as_int();
  else if (key == "n_antennas") s.n_antennas = as_int();
  else if (key == "pilot_len") s.pilot_len = as_int();
  else if (key == "k_active_clusters") s.k_active_clusters = as_int();
  else if (key == "l_c") s.l_c = as_int();
  else if (key == "activity_mode") {
    if (value == "exact") s.activity_mode = ActivityMode::exact;
    else if (value == "uniform") s.activity_mode = ActivityMode::uniform;
    else throw Error(ErrorCode::InvalidConfig, "activity_mode must be exact or uniform");
  } else if (key == "path_gains") {
    if (value == "unit") s.path_gain_mode = PathGainMode::unit;
    else if (value == "log_uniform") s.path_gain_mode = PathGainMode::log_uniform;
    else throw Error(ErrorCode::InvalidConfig, "path_gains must be unit or log_uniform");
  } else if (key == "orthonormal_pilots") s.orthonormal_pilots = parse_bool(key, value);
  else if (key == "noise_var") config.noise_var = as_double();
  else if (key == "snr_db") config.snr_db = as_double();
  else if (key == "n_trials") config.n_trials = as_int();
  else if (key == "master_seed") config.master_seed = parse_unsigned(key, value);
  else if (key == "threads") config.threads = as_int();
  else if (key == "sweep") {
    const auto colon = value.find(':');
    if (trim(value) == "none") {
      config.sweep_name = "none";
      config.sweep_values = {0.0};
    } else {
      require(colon != std::string::npos, ErrorCode::InvalidConfig, "sweep expects 'name: v1, v2, ...'");
      config.sweep_name = trim(value.substr(0, colon));
      config.sweep_values.clear();
      for (const auto& v : split(value.substr(colon + 1), ',')) config.sweep_values.push_back(parse_double(key, v));
    }
  } else if (key == "estimators") {
    config.estimators = split(value, ',');
  } else if (key == "solver.max_iters") config.solver.max_iters = as_int();
  else if (key == "solver.damping") config.solver.damping = as_double();
  else if (key == "solver.tol") config.solver.tol = as_double();
  else if (key == "solver.detection_threshold") config.solver.detection_threshold = as_double();
  else if (key == "solver.update_slab_vars") config.solver.update_slab_vars = parse_bool(key, value);
  else if (key == "solver.slab_var_init") config.solver.slab_var_init = as_double();
  else if (key == "solver.eps") config.ep_eps = as_double();
  else if (key == "solver.min_site_var") config.solver.min_site_var = as_double();
  else if (key == "solver.slab_update_start") config.solver.slab_update_start = as_int();
  else if (key == "ep_uncoupled.eps") config.ep_uncoupled_eps = as_double();
  else if (key == "ep_uncoupled.detection_threshold") config.ep_uncoupled_threshold = as_double();
  else if (key == "msbl.detection_threshold") config.msbl_threshold = as_double();
  else if (key == "irw_l21.detection_threshold") config.irw_threshold = as_double();
  else if (key == "baseline.max_iters") config.baseline.max_iters = as_int();
  else if (key == "baseline.tol") config.baseline.tol = as_double();
  else if (key == "baseline.reg_epsilon") config.baseline.reg_epsilon = as_double();
  else if (key == "baseline.lambda") config.irw_lambda = as_double();
  else if (key == "baseline.lambda_scale") config.irw_lambda_scale = as_double();
  else if (key == "baseline.prune_threshold") config.baseline.prune_threshold = as_double();
  else throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    require(eq != std::string::npos, ErrorCode::InvalidConfig, where + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    require(seen.insert(key).second, ErrorCode::InvalidConfig, where + ": duplicate key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, where + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

enum class ExportFormat { csv, json };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "json") return ExportFormat::json;
  throw Error(ErrorCode::InvalidConfig, "format must be csv or json, got '" + s + "'");
}

inline constexpr const char* kCsvHeader = "trial,sweep_name,sweep_value,estimator,nmse,srr,iterations,wall_time_s,converged";

namespace detail {

inline std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

inline bool record_order(const ResultRecord& a, const ResultRecord& b) {
  // Sweep position is carried by the record order itself; within a sweep
  // value rows are sorted by trial then estimator.
  if (a.trial_index != b.trial_index) return a.trial_index < b.trial_index;
  return a.estimator_name < b.estimator_name;
}

// Stable grouping by sweep value in first-appearance order, then
// (trial, estimator) ascending inside each group.
inline std::vector<ResultRecord> ordered(const std::vector<ResultRecord>& records) {
  std::vector<double> sweep_order;
  for (const auto& r : records)
    if (std::find(sweep_order.begin(), sweep_order.end(), r.sweep_value) == sweep_order.end())
      sweep_order.push_back(r.sweep_value);
  std::vector<ResultRecord> out;
  for (double v : sweep_order) {
    std::vector<ResultRecord> group;
    for (const auto& r : records)
      if (r.sweep_value == v) group.push_back(r);
    std::stable_sort(group.begin(), group.end(), record_order);
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<ResultRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : detail::ordered(records)) {
    out << r.trial_index << ',' << r.sweep_name << ',' << detail::sci(r.sweep_value) << ',' << r.estimator_name << ','
        << detail::sci(r.nmse) << ',' << detail::sci(r.srr) << ',' << r.iterations << ','
        << detail::sci(r.wall_time_seconds) << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

inline nlohmann::json to_json(const std::vector<ResultRecord>& records) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : detail::ordered(records)) {
    rows.push_back({{"trial", r.trial_index},
                    {"sweep_name", r.sweep_name},
                    {"sweep_value", r.sweep_value},
                    {"estimator", r.estimator_name},
                    {"nmse", r.nmse},
                    {"srr", r.srr},
                    {"iterations", r.iterations},
                    {"wall_time_s", r.wall_time_seconds},
                    {"converged", r.converged}});
  }
  return {{"records", rows}};
}

inline void export_results(const std::vector<ResultRecord>& records, const std::string& path, ExportFormat format) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path + "' for writing");
  if (format == ExportFormat::csv) {
    write_csv(out, records);
  } else {
    out << to_json(records).dump(2) << '\n';
  }
  out.flush();
  require(static_cast<bool>(out), ErrorCode::Io, "failed while writing '" + path + "'");
}

inline std::vector<ResultRecord> read_csv(std::istream& in, const std::string& origin = "<csv>") {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io, origin + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kCsvHeader, ErrorCode::Io, origin + ": unexpected header '" + line + "'");
  std::vector<ResultRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    require(f.size() == 9, ErrorCode::Io, origin + ":" + std::to_string(line_no) + ": expected 9 fields");
    ResultRecord r;
    r.trial_index = static_cast<int>(detail::parse_integer("trial", f[0]));
    r.sweep_name = f[1];
    r.sweep_value = detail::parse_double("sweep_value", f[2]);
    r.estimator_name = f[3];
    r.nmse = detail::parse_double("nmse", f[4]);
    r.srr = detail::parse_double("srr", f[5]);
    r.iterations = static_cast<int>(detail::parse_integer("iterations", f[6]));
    r.wall_time_seconds = detail::parse_double("wall_time_s", f[7]);
    r.converged = detail::parse_bool("converged", f[8]);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ResultRecord> from_json(const nlohmann::json& doc) {
  std::vector<ResultRecord> records;
  for (const auto& row : doc.at("records")) {
    ResultRecord r;
    r.trial_index = row.at("trial").get<int>();
    r.sweep_name = row.at("sweep_name").get<std::string>();
    r.sweep_value = row.at("sweep_value").get<double>();
    r.estimator_name = row.at("estimator").get<std::string>();
    r.nmse = row.at("nmse").get<double>();
    r.srr = row.at("srr").get<double>();
    r.iterations = row.at("iterations").get<int>();
    r.wall_time_seconds = row.at("wall_time_s").get<double>();
    r.converged = row.at("converged").get<bool>();
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<ResultRecord> import_results(const std::string& path, ExportFormat format) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open '" + path + "'");
  if (format == ExportFormat::csv) return read_csv(in, path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, path + ": " + e.what());
  }
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "sweep_name,sweep_value,estimator,trials,median_nmse,median_nmse_db,mean_nmse,median_srr,mean_srr,"
         "converged_fraction\n";
  for (const auto& r : rows) {
    out << r.sweep_name << ',' << detail::sci(r.sweep_value) << ',' << r.estimator << ',' << r.trials << ','
        << detail::sci(r.median_nmse) << ',' << detail::sci(to_db(r.median_nmse)) << ',' << detail::sci(r.mean_nmse)
        << ',' << detail::sci(r.median_srr) << ',' << detail::sci(r.mean_srr) << ','
        << detail::sci(r.converged_fraction) << '\n';
  }
}

}  // namespace juice

#endif  // JUICE_IO_HPP
