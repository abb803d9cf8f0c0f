// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo experiment runner: configuration, per-trial estimation with
// every selected estimator on one shared realization, threshold/lambda
// calibration, and CSV/JSON export of per-trial records.

#ifndef JUICE_HARNESS_HPP
#define JUICE_HARNESS_HPP

#include "juice/baselines.hpp"
#include "juice/common.hpp"
#include "juice/ep_solver.hpp"
#include "juice/metrics.hpp"
#include "juice/model.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace juice {

inline const std::vector<std::string>& known_estimators() {
  static const std::vector<std::string> names{"ep", "ep_uncoupled", "irw_l21", "msbl", "oracle_mmse"};
  return names;
}

inline const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names{"none",     "snr_db",           "noise_var", "pilot_len",
                                              "n_antennas", "k_active_clusters", "l_c"};
  return names;
}

struct ExperimentConfig {
  ScenarioParams scenario;  // scenario.noise_var is overwritten from noise_var / snr_db
  std::optional<double> noise_var;
  double snr_db = 10.0;
  int n_trials = 500;
  std::uint64_t master_seed = 1;
  std::string sweep_name = "none";
  std::vector<double> sweep_values{0.0};
  std::vector<std::string> estimators{"ep", "ep_uncoupled", "irw_l21", "msbl", "oracle_mmse"};

  SolverConfig solver;
  /// Unset: eps = k_active_clusters / n_clusters.
  std::optional<double> ep_eps;
  /// Unset: eps = expected fraction of active UEs.
  std::optional<double> ep_uncoupled_eps;
  double ep_uncoupled_threshold = 1.0;

  BaselineConfig baseline;
  /// Unset: lambda = irw_lambda_scale * sqrt(noise_var * M).
  std::optional<double> irw_lambda;
  double irw_lambda_scale = 2.0;
  double msbl_threshold = 1.0;
  double irw_threshold = 1.0;

  int threads = 1;

  double base_noise_var() const { return noise_var ? *noise_var : std::pow(10.0, -snr_db / 10.0); }

  void validate() const {
    const auto& s = scenario;
    require(s.n_ues >= 1 && s.n_clusters >= 1 && s.n_antennas >= 1 && s.pilot_len >= 1, ErrorCode::InvalidConfig,
            "n_ues, n_clusters, n_antennas and pilot_len must be positive");
    require(s.n_ues % s.n_clusters == 0, ErrorCode::NonDivisible, "n_clusters must divide n_ues");
    require(s.k_active_clusters >= 1 && s.k_active_clusters <= s.n_clusters, ErrorCode::BadCount,
            "k_active_clusters must lie in [1, n_clusters]");
    require(s.l_c >= 1 && s.l_c <= s.n_ues / s.n_clusters, ErrorCode::BadCount, "l_c must lie in [1, cluster size]");
    require(!s.orthonormal_pilots || s.pilot_len >= s.n_ues, ErrorCode::InvalidConfig,
            "orthonormal_pilots requires pilot_len >= n_ues");
    require(base_noise_var() > 0.0, ErrorCode::InvalidConfig, "noise variance must be positive");
    require(n_trials >= 1, ErrorCode::InvalidConfig, "n_trials must be positive");
    require(std::find(sweepable_parameters().begin(), sweepable_parameters().end(), sweep_name) !=
                sweepable_parameters().end(),
            ErrorCode::InvalidConfig, "unknown sweep parameter '" + sweep_name + "'");
    require(!sweep_values.empty(), ErrorCode::InvalidConfig, "sweep needs at least one value");
    require(!estimators.empty(), ErrorCode::InvalidConfig, "at least one estimator is required");
    for (const auto& e : estimators)
      require(std::find(known_estimators().begin(), known_estimators().end(), e) != known_estimators().end(),
              ErrorCode::InvalidConfig, "unknown estimator '" + e + "'");
    require(threads >= 1, ErrorCode::InvalidConfig, "threads must be positive");
    require(ep_uncoupled_threshold > 0.0 && msbl_threshold > 0.0 && irw_threshold > 0.0, ErrorCode::InvalidConfig,
            "detection thresholds must be positive");
    require(irw_lambda_scale >= 0.0, ErrorCode::InvalidConfig, "baseline.lambda_scale must be nonnegative");
    solver.validate();
    baseline.validate();
  }
};

/// Copy of `config` with the sweep parameter set to `value` (and the noise
/// variance resolved into the scenario).
inline ExperimentConfig apply_sweep(const ExperimentConfig& config, double value) {
  ExperimentConfig c = config;
  const auto as_int = [&](const char* what) {
    require(std::floor(value) == value, ErrorCode::InvalidConfig, std::string(what) + " sweep values must be integers");
    return static_cast<int>(value);
  };
  const std::string& name = config.sweep_name;
  if (name == "snr_db") {
    c.snr_db = value;
    c.noise_var.reset();
  } else if (name == "noise_var") {
    c.noise_var = value;
  } else if (name == "pilot_len") {
    c.scenario.pilot_len = as_int("pilot_len");
  } else if (name == "n_antennas") {
    c.scenario.n_antennas = as_int("n_antennas");
  } else if (name == "k_active_clusters") {
    c.scenario.k_active_clusters = as_int("k_active_clusters");
  } else if (name == "l_c") {
    c.scenario.l_c = as_int("l_c");
  }
  c.scenario.noise_var = c.base_noise_var();
  c.validate();
  return c;
}

struct ResultRecord {
  int trial_index = 0;
  std::string sweep_name;
  double sweep_value = 0.0;
  std::string estimator_name;
  double nmse = 0.0;
  double srr = 0.0;
  int iterations = 0;
  double wall_time_seconds = 0.0;
  bool converged = false;
};

/// Equality of everything except wall time, which is the only field that is
/// not a function of the configuration.
inline bool same_outcome(const ResultRecord& a, const ResultRecord& b) {
  return a.trial_index == b.trial_index && a.sweep_name == b.sweep_name && a.sweep_value == b.sweep_value &&
         a.estimator_name == b.estimator_name && a.nmse == b.nmse && a.srr == b.srr && a.iterations == b.iterations &&
         a.converged == b.converged;
}

inline bool operator==(const ResultRecord& a, const ResultRecord& b) {
  return same_outcome(a, b) && a.wall_time_seconds == b.wall_time_seconds;
}

/// Raw estimator output before thresholding. A UE is detected iff
/// eligible[i] and score[i] > threshold; scores are energies in units of the
/// noise variance.
struct EstimatorOutput {
  CMatrix means;
  RVector scores;
  std::vector<std::uint8_t> eligible;
  int iterations = 0;
  bool converged = true;
  // EP estimators only.
  std::optional<PosteriorSummary> posterior;
  ClusterMap map;
};

inline std::vector<int> threshold_support(const EstimatorOutput& out, double threshold) {
  std::vector<int> s;
  for (Eigen::Index i = 0; i < out.scores.size(); ++i)
    if (out.eligible[i] && out.scores[i] > threshold) s.push_back(static_cast<int>(i));
  return s;
}

inline double resolved_ep_eps(const ExperimentConfig& c) {
  return c.ep_eps ? *c.ep_eps
                  : static_cast<double>(c.scenario.k_active_clusters) / static_cast<double>(c.scenario.n_clusters);
}

inline double resolved_ep_uncoupled_eps(const ExperimentConfig& c) {
  if (c.ep_uncoupled_eps) return *c.ep_uncoupled_eps;
  const double per_cluster =
      c.scenario.activity_mode == ActivityMode::exact ? c.scenario.l_c : 0.5 * (1.0 + c.scenario.l_c);
  return c.scenario.k_active_clusters * per_cluster / static_cast<double>(c.scenario.n_ues);
}

inline double resolved_irw_lambda(const ExperimentConfig& c) {
  return c.irw_lambda ? *c.irw_lambda
                      : c.irw_lambda_scale * std::sqrt(c.scenario.noise_var * c.scenario.n_antennas);
}

inline double detection_threshold(const ExperimentConfig& c, const std::string& estimator) {
  if (estimator == "ep") return c.solver.detection_threshold;
  if (estimator == "ep_uncoupled") return c.ep_uncoupled_threshold;
  if (estimator == "msbl") return c.msbl_threshold;
  if (estimator == "irw_l21") return c.irw_threshold;
  return 0.0;
}

namespace detail {

inline EstimatorOutput from_ep(const PosteriorSummary& s, const ClusterMap& map, double noise_var) {
  EstimatorOutput out;
  out.means = s.means;
  const double m = static_cast<double>(s.means.rows());
  out.scores = s.means.colwise().squaredNorm().transpose() / (m * noise_var);
  out.eligible.assign(map.n_ues, 0);
  for (int l = 0; l < map.n_clusters; ++l)
    if (s.cluster_probs[l] > 0.5)
      for (int i : map.members[l]) out.eligible[i] = 1;
  out.iterations = s.iterations;
  out.converged = s.converged;
  out.posterior = s;
  out.map = map;
  return out;
}

}  // namespace detail

/// Runs one estimator on one realization. `config` must already have the
/// sweep applied.
inline EstimatorOutput run_estimator(const std::string& name, const SystemRealization& r,
                                     const ExperimentConfig& config) {
  const double s2 = r.noise_var;
  const int n = r.map.n_ues;
  const double m = static_cast<double>(r.received.cols());
  if (name == "ep") {
    SolverConfig sc = config.solver;
    sc.eps = resolved_ep_eps(config);
    return detail::from_ep(ep_infer(r.received, r.pilots, s2, r.map, sc), r.map, s2);
  }
  if (name == "ep_uncoupled") {
    SolverConfig sc = config.solver;
    sc.eps = resolved_ep_uncoupled_eps(config);
    sc.detection_threshold = config.ep_uncoupled_threshold;
    const ClusterMap singletons = build_cluster_map(n, n);
    return detail::from_ep(ep_infer(r.received, r.pilots, s2, singletons, sc), singletons, s2);
  }
  EstimatorOutput out;
  out.eligible.assign(n, 1);
  if (name == "oracle_mmse") {
    const std::vector<int> support = r.activity.support();
    out.means = oracle_mmse(r.received, r.pilots, support, r.path_gains, s2);
    out.scores = RVector::Zero(n);
    for (int i : support) out.scores[i] = std::numeric_limits<double>::infinity();
    return out;
  }
  if (name == "msbl") {
    const MsblResult res = msbl(r.received, r.pilots, s2, config.baseline);
    out.means = res.means;
    out.scores = res.gammas / s2;
    out.iterations = res.iterations;
    out.converged = res.converged;
    return out;
  }
  if (name == "irw_l21") {
    const IrwResult res = irw_l21(r.received, r.pilots, resolved_irw_lambda(config), config.baseline);
    out.means = res.means;
    out.scores = res.means.colwise().squaredNorm().transpose() / (m * s2);
    out.iterations = res.iterations;
    out.converged = res.converged;
    return out;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown estimator '" + name + "'");
}

/// The realization for (trial, sweep point). Every estimator in the trial
/// consumes this same draw.
inline SystemRealization trial_realization(const ExperimentConfig& point, std::uint64_t master_seed, int trial_index,
                                           int sweep_index) {
  Rng rng = seeded_rng(master_seed, static_cast<std::uint64_t>(trial_index), static_cast<std::uint64_t>(sweep_index));
  return draw_realization(point.scenario, rng);
}

inline std::vector<ResultRecord> run_trial(const ExperimentConfig& point, int trial_index, int sweep_index,
                                           double sweep_value) {
  const SystemRealization r = trial_realization(point, point.master_seed, trial_index, sweep_index);
  const std::vector<int> truth = r.activity.support();
  std::vector<std::string> names = point.estimators;
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  std::vector<ResultRecord> records;
  for (const auto& name : names) {
    const auto start = std::chrono::steady_clock::now();
    const EstimatorOutput out = run_estimator(name, r, point);
    const double threshold = detection_threshold(point, name);
    const std::vector<int> support = out.posterior ? detect_support(*out.posterior, out.map, threshold, r.noise_var)
                                                   : threshold_support(out, threshold);
    const auto stop = std::chrono::steady_clock::now();

    ResultRecord rec;
    rec.trial_index = trial_index;
    rec.sweep_name = point.sweep_name;
    rec.sweep_value = sweep_value;
    rec.estimator_name = name;
    rec.nmse = nmse(out.means, r.effective_channels);
    rec.srr = srr(support, truth);
    rec.iterations = out.iterations;
    rec.wall_time_seconds = std::chrono::duration<double>(stop - start).count();
    rec.converged = out.converged;
    records.push_back(std::move(rec));
  }
  return records;
}

/// Runs `jobs` independent tasks on up to `threads` workers; task j writes
/// only slot j so output order never depends on completion order.
template <typename Task>
void parallel_for(int jobs, int threads, Task&& task) {
  threads = std::max(1, std::min(threads, jobs));
  if (threads == 1) {
    for (int j = 0; j < jobs; ++j) task(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int j = next++; j < jobs; j = next++) task(j);
      } catch (...) {
        errors[t] = std::current_exception();
        next = jobs;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<ResultRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const int n_sweep = static_cast<int>(config.sweep_values.size());
  std::vector<ExperimentConfig> points;
  for (double v : config.sweep_values) points.push_back(apply_sweep(config, v));

  const int jobs = n_sweep * config.n_trials;
  std::vector<std::vector<ResultRecord>> slots(jobs);
  parallel_for(jobs, config.threads, [&](int j) {
    const int s = j / config.n_trials;
    const int t = j % config.n_trials;
    slots[j] = run_trial(points[s], t, s, config.sweep_values[s]);
  });

  std::vector<ResultRecord> records;
  for (auto& slot : slots)
    for (auto& rec : slot) records.push_back(std::move(rec));
  return records;
}

struct SummaryRow {
  std::string sweep_name;
  double sweep_value = 0.0;
  std::string estimator;
  int trials = 0;
  double median_nmse = 0.0;
  double mean_nmse = 0.0;
  double median_srr = 0.0;
  double mean_srr = 0.0;
  double converged_fraction = 0.0;
};

/// Per (sweep value, estimator) aggregates, in first-appearance order of the sweep value.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  std::vector<std::pair<double, std::string>> keys;
  std::map<std::pair<double, std::string>, std::vector<const ResultRecord*>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.sweep_value, r.estimator_name);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : keys) {
    const auto& group = groups[key];
    SummaryRow row;
    row.sweep_name = group.front()->sweep_name;
    row.sweep_value = key.first;
    row.estimator = key.second;
    row.trials = static_cast<int>(group.size());
    std::vector<double> e, s;
    double conv = 0.0;
    for (const auto* r : group) {
      e.push_back(r->nmse);
      s.push_back(r->srr);
      conv += r->converged ? 1.0 : 0.0;
    }
    row.median_nmse = median(e);
    row.median_srr = median(s);
    double se = 0.0, ss = 0.0;
    for (double v : e) se += v;
    for (double v : s) ss += v;
    row.mean_nmse = se / e.size();
    row.mean_srr = ss / s.size();
    row.converged_fraction = conv / group.size();
    rows.push_back(row);
  }
  return rows;
}

struct CalibrationResult {
  std::map<std::string, double> thresholds;   // estimator -> best threshold
  std::map<std::string, double> mean_srr;     // estimator -> mean SRR at that threshold
  double irw_lambda_scale = 0.0;
  double irw_median_nmse = 0.0;
};

inline std::vector<double> default_threshold_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 20; ++k) g.push_back(0.1 * k);
  for (double v : {2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0, 100.0}) g.push_back(v);
  return g;
}

/// Grid search on a held-out batch drawn from `calibration_seed` (never the
/// evaluation seed) at the first sweep point. The lambda scale for IRW-l2,1 is
/// chosen first by median NMSE; every threshold then maximizes mean SRR. When
/// several consecutive grid points tie for the best SRR, the middle one is
/// taken, which keeps noiseless runs away from the edge of the plateau.
inline CalibrationResult calibrate(const ExperimentConfig& config, int n_trials, std::uint64_t calibration_seed,
                                   const std::vector<double>& threshold_grid = default_threshold_grid(),
                                   const std::vector<double>& lambda_scale_grid = {0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
  config.validate();
  require(n_trials >= 1 && !threshold_grid.empty(), ErrorCode::InvalidConfig, "calibration needs trials and a grid");
  const ExperimentConfig point = apply_sweep(config, config.sweep_values.front());
  std::vector<std::string> names;
  for (const auto& e : point.estimators)
    if (e != "oracle_mmse") names.push_back(e);
  std::sort(names.begin(), names.end());
  const bool with_irw = std::find(names.begin(), names.end(), "irw_l21") != names.end();

  struct TrialData {
    std::vector<int> truth;
    std::map<std::string, EstimatorOutput> outputs;
    std::vector<EstimatorOutput> irw_by_lambda;
    std::vector<double> irw_nmse_by_lambda;
  };
  std::vector<TrialData> data(n_trials);
  parallel_for(n_trials, config.threads, [&](int t) {
    const SystemRealization r = trial_realization(point, calibration_seed, t, 0);
    TrialData& d = data[t];
    d.truth = r.activity.support();
    for (const auto& name : names)
      if (name != "irw_l21") d.outputs[name] = run_estimator(name, r, point);
    if (with_irw) {
      for (double scale : lambda_scale_grid) {
        ExperimentConfig c = point;
        c.irw_lambda.reset();
        c.irw_lambda_scale = scale;
        d.irw_by_lambda.push_back(run_estimator("irw_l21", r, c));
        d.irw_nmse_by_lambda.push_back(nmse(d.irw_by_lambda.back().means, r.effective_channels));
      }
    }
  });

  CalibrationResult result;
  std::size_t best_lambda = 0;
  if (with_irw) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lambda_scale_grid.size(); ++k) {
      std::vector<double> e;
      for (const auto& d : data) e.push_back(d.irw_nmse_by_lambda[k]);
      const double med = median(e);
      if (med < best) {
        best = med;
        best_lambda = k;
      }
    }
    result.irw_lambda_scale = lambda_scale_grid[best_lambda];
    result.irw_median_nmse = best;
    for (auto& d : data) d.outputs["irw_l21"] = d.irw_by_lambda[best_lambda];
  }

  for (const auto& name : names) {
    std::vector<double> scores;
    for (double thr : threshold_grid) {
      double total = 0.0;
      for (const auto& d : data) total += srr(threshold_support(d.outputs.at(name), thr), d.truth);
      scores.push_back(total / n_trials);
    }
    const auto best = std::max_element(scores.begin(), scores.end());
    const std::size_t first = static_cast<std::size_t>(best - scores.begin());
    std::size_t last = first;
    while (last + 1 < scores.size() && scores[last + 1] == *best) ++last;
    result.thresholds[name] = threshold_grid[first + (last - first) / 2];
    result.mean_srr[name] = *best;
  }
  return result;
}

/// Writes calibrated values back into a configuration.
inline void apply_calibration(ExperimentConfig& config, const CalibrationResult& cal) {
  for (const auto& [name, thr] : cal.thresholds) {
    if (name == "ep") config.solver.detection_threshold = thr;
    if (name == "ep_uncoupled") config.ep_uncoupled_threshold = thr;
    if (name == "msbl") config.msbl_threshold = thr;
    if (name == "irw_l21") config.irw_threshold = thr;
  }
  if (cal.thresholds.count("irw_l21")) {
    config.irw_lambda.reset();
    config.irw_lambda_scale = cal.irw_lambda_scale;
  }
}

}  // namespace juice

#endif  // JUICE_HARNESS_HPP
