// SPDX-License-Identifier: Apache-2.0
//
// juice: Monte Carlo simulator for clustered-activity detection and channel
// estimation.
//
//   juice run CONFIG [--out FILE] [--format csv|json] [--seed N] [--threads N]
//   juice calibrate CONFIG [--trials N] [--seed N] [--threads N]
//   juice oracle [--n-ues N] [--n-clusters C] ... (tiny-instance exact posterior vs EP)

#include "juice/juice.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

void print_summary(const std::vector<juice::SummaryRow>& rows) {
  std::printf("%-12s %12s %-14s %7s %14s %12s %12s\n", "sweep", "value", "estimator", "trials", "median NMSE dB",
              "median SRR", "mean SRR");
  for (const auto& r : rows)
    std::printf("%-12s %12.4g %-14s %7d %14.3f %12.4f %12.4f\n", r.sweep_name.c_str(), r.sweep_value,
                r.estimator.c_str(), r.trials, juice::to_db(r.median_nmse), r.median_srr, r.mean_srr);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered-activity user detection and channel estimation simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a Monte Carlo experiment from a config file");
  std::string run_config, run_out, run_format = "csv", run_summary;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_threads, run_trials;
  run->add_option("config", run_config, "Experiment config file")->required();
  run->add_option("--out", run_out, "Per-trial results file");
  run->add_option("--format", run_format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--seed", run_seed, "Override master_seed");
  run->add_option("--threads", run_threads, "Worker threads (1 = serial)");
  run->add_option("--trials", run_trials, "Override n_trials");
  run->add_option("--summary", run_summary, "Write aggregated medians/means as CSV");

  auto* cal = app.add_subcommand("calibrate", "Grid-search detection thresholds and the IRW-l2,1 weight");
  std::string cal_config;
  int cal_trials = 200;
  std::optional<std::uint64_t> cal_seed;
  std::optional<int> cal_threads;
  cal->add_option("config", cal_config, "Experiment config file")->required();
  cal->add_option("--trials", cal_trials, "Calibration trials");
  cal->add_option("--seed", cal_seed, "Calibration seed (default: master_seed + 1000003)");
  cal->add_option("--threads", cal_threads, "Worker threads");

  auto* orc = app.add_subcommand("oracle", "Exact enumeration vs EP on one tiny random instance");
  int o_n = 4, o_c = 2, o_m = 2, o_tau = 4, o_k = 1;
  double o_noise = 0.1, o_eps = 0.5, o_slab = 1.0;
  std::uint64_t o_seed = 1;
  orc->add_option("--n-ues", o_n, "Number of UEs");
  orc->add_option("--n-clusters", o_c, "Number of clusters (<= 12)");
  orc->add_option("--antennas", o_m, "BS antennas");
  orc->add_option("--pilot-len", o_tau, "Pilot length");
  orc->add_option("--k-active", o_k, "Active clusters in the draw");
  orc->add_option("--noise-var", o_noise, "Noise variance");
  orc->add_option("--eps", o_eps, "Prior cluster activation probability");
  orc->add_option("--slab-var", o_slab, "Slab variance (and path gain) for every UE");
  orc->add_option("--seed", o_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      juice::ExperimentConfig config = juice::load_config(run_config);
      if (run_seed) config.master_seed = *run_seed;
      if (run_threads) config.threads = *run_threads;
      if (run_trials) config.n_trials = *run_trials;
      config.validate();
      const auto records = juice::run_experiment(config);
      if (!run_out.empty()) juice::export_results(records, run_out, juice::parse_format(run_format));
      const auto rows = juice::summarize(records);
      if (!run_summary.empty()) {
        std::ofstream out(run_summary);
        if (!out) throw juice::Error(juice::ErrorCode::Io, "cannot open '" + run_summary + "' for writing");
        juice::write_summary_csv(out, rows);
      }
      print_summary(rows);
    } else if (*cal) {
      juice::ExperimentConfig config = juice::load_config(cal_config);
      if (cal_threads) config.threads = *cal_threads;
      const std::uint64_t seed = cal_seed ? *cal_seed : config.master_seed + 1000003;
      const auto result = juice::calibrate(config, cal_trials, seed);
      std::cout << "# calibrated on " << cal_trials << " trials, seed " << seed << "\n";
      for (const auto& [name, thr] : result.thresholds) {
        const std::string key = name == "ep" ? "solver.detection_threshold" : name + ".detection_threshold";
        std::cout << key << " = " << fmt(thr) << "   # mean SRR " << fmt(result.mean_srr.at(name)) << "\n";
      }
      if (result.thresholds.count("irw_l21"))
        std::cout << "baseline.lambda_scale = " << fmt(result.irw_lambda_scale) << "   # median NMSE "
                  << fmt(juice::to_db(result.irw_median_nmse)) << " dB\n";
    } else if (*orc) {
      juice::ScenarioParams p;
      p.n_ues = o_n;
      p.n_clusters = o_c;
      p.n_antennas = o_m;
      p.pilot_len = o_tau;
      p.k_active_clusters = o_k;
      p.l_c = o_n / o_c;
      p.noise_var = o_noise;
      juice::Rng rng = juice::seeded_rng(o_seed);
      juice::SystemRealization r = juice::draw_realization(p, rng);
      const juice::RVector slab = juice::RVector::Constant(o_n, o_slab);
      if (o_slab != 1.0) {
        r.effective_channels *= std::sqrt(o_slab);
        juice::Rng noise_rng = juice::seeded_rng(o_seed, 1);
        r.received = juice::synthesize_received(r.pilots, r.effective_channels, o_noise, noise_rng);
      }
      const auto exact = juice::enumerate_posterior(r.received, r.pilots, o_noise, slab, o_eps, r.map);
      juice::SolverConfig sc;
      sc.eps = o_eps;
      sc.update_slab_vars = false;
      sc.max_iters = 200;
      const auto ep = juice::ep_infer(r.received, r.pilots, o_noise, r.map, sc, slab);

      nlohmann::json doc;
      doc["active_clusters"] = r.activity.cluster_indicators;
      doc["exact_cluster_probs"] = std::vector<double>(exact.cluster_probs.data(),
                                                       exact.cluster_probs.data() + exact.cluster_probs.size());
      doc["ep_cluster_probs"] =
          std::vector<double>(ep.cluster_probs.data(), ep.cluster_probs.data() + ep.cluster_probs.size());
      doc["log_evidence"] = exact.log_evidence;
      const double denom = exact.means.norm();
      doc["mean_relative_difference"] = denom > 0 ? (ep.means - exact.means).norm() / denom : (ep.means).norm();
      doc["ep_iterations"] = ep.iterations;
      doc["ep_converged"] = ep.converged;
      std::cout << doc.dump(2) << "\n";
    }
  } catch (const juice::Error& e) {
    std::cerr << "juice: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "juice: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
