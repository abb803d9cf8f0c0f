// SPDX-License-Identifier: Apache-2.0
//
// Synthetic grant-free uplink scenarios: clustered devices, correlated
// activity, unit-norm pilots, Rayleigh channels and the received pilot block
//
//   Y = Phi * X^T + W,   X = [x_1 ... x_N],  x_i = gamma_i * h_i.
//
// UE and cluster indices are zero-based throughout.

#ifndef JUICE_MODEL_HPP
#define JUICE_MODEL_HPP

#include "juice/common.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace juice {

/// Contiguous partition of {0..n_ues-1} into equally sized clusters.
struct ClusterMap {
  int n_ues = 0;
  int n_clusters = 0;
  std::vector<std::vector<int>> members;

  int cluster_size() const { return n_clusters > 0 ? n_ues / n_clusters : 0; }
  int cluster_of(int ue) const { return ue / cluster_size(); }
};

inline ClusterMap build_cluster_map(int n_ues, int n_clusters) {
  require(n_ues >= 1 && n_clusters >= 1, ErrorCode::NonDivisible,
          "cluster map needs positive sizes (n_ues=" + std::to_string(n_ues) +
              ", n_clusters=" + std::to_string(n_clusters) + ")");
  require(n_ues % n_clusters == 0, ErrorCode::NonDivisible,
          std::to_string(n_clusters) + " clusters do not divide " + std::to_string(n_ues) + " UEs");
  ClusterMap map;
  map.n_ues = n_ues;
  map.n_clusters = n_clusters;
  const int size = n_ues / n_clusters;
  map.members.resize(n_clusters);
  for (int l = 0; l < n_clusters; ++l) {
    map.members[l].resize(size);
    std::iota(map.members[l].begin(), map.members[l].end(), l * size);
  }
  return map;
}

struct ActivityPattern {
  std::vector<std::uint8_t> cluster_indicators;
  std::vector<std::uint8_t> ue_indicators;

  std::vector<int> support() const {
    std::vector<int> s;
    for (int i = 0; i < static_cast<int>(ue_indicators.size()); ++i)
      if (ue_indicators[i]) s.push_back(i);
    return s;
  }
};

enum class ActivityMode { exact, uniform };

namespace detail {

// First `k` entries of a partial Fisher-Yates shuffle of {0..n-1}.
inline std::vector<int> choose_without_replacement(int n, int k, Rng& rng) {
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<int> pick(j, n - 1);
    std::swap(pool[j], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

inline ActivityPattern sample_activity(const ClusterMap& map, int k_active, int l_c, ActivityMode mode, Rng& rng) {
  const int size = map.cluster_size();
  require(k_active >= 0 && k_active <= map.n_clusters, ErrorCode::BadCount,
          "k_active=" + std::to_string(k_active) + " outside [0, " + std::to_string(map.n_clusters) + "]");
  require(l_c >= 1 && l_c <= size, ErrorCode::BadCount,
          "l_c=" + std::to_string(l_c) + " outside [1, " + std::to_string(size) + "]");

  ActivityPattern pattern;
  pattern.cluster_indicators.assign(map.n_clusters, 0);
  pattern.ue_indicators.assign(map.n_ues, 0);
  for (int l : detail::choose_without_replacement(map.n_clusters, k_active, rng)) {
    pattern.cluster_indicators[l] = 1;
    int count = l_c;
    if (mode == ActivityMode::uniform) {
      std::uniform_int_distribution<int> draw(1, l_c);
      count = draw(rng);
    }
    for (int j : detail::choose_without_replacement(size, count, rng)) pattern.ue_indicators[map.members[l][j]] = 1;
  }
  return pattern;
}

/// i.i.d. CN(0,1) entries with each column scaled to unit norm. With
/// `orthonormal` set (requires tau_p >= n_ues) the columns are additionally
/// orthonormalized by a thin QR factorization.
inline CMatrix generate_pilots(int tau_p, int n_ues, Rng& rng, bool orthonormal = false) {
  require(tau_p >= 1 && n_ues >= 1, ErrorCode::DimensionMismatch, "pilot dimensions must be positive");
  CMatrix phi(tau_p, n_ues);
  for (int i = 0; i < n_ues; ++i)
    for (int t = 0; t < tau_p; ++t) phi(t, i) = complex_normal(rng, 1.0);
  if (orthonormal) {
    require(tau_p >= n_ues, ErrorCode::DimensionMismatch, "orthonormal pilots need tau_p >= n_ues");
    Eigen::HouseholderQR<CMatrix> qr(phi);
    phi = qr.householderQ() * CMatrix::Identity(tau_p, n_ues);
  }
  for (int i = 0; i < n_ues; ++i) phi.col(i) /= phi.col(i).norm();
  return phi;
}

inline CMatrix sample_channels(const RVector& path_gains, int n_antennas, Rng& rng) {
  require(n_antennas >= 1, ErrorCode::DimensionMismatch, "n_antennas must be positive");
  require((path_gains.array() >= 0.0).all(), ErrorCode::NonPositiveVariance, "path gains must be nonnegative");
  CMatrix h(n_antennas, path_gains.size());
  for (Eigen::Index i = 0; i < path_gains.size(); ++i)
    for (int m = 0; m < n_antennas; ++m) h(m, i) = complex_normal(rng, path_gains[i]);
  return h;
}

inline CMatrix effective_channel(const ActivityPattern& activity, const CMatrix& channels) {
  require(static_cast<Eigen::Index>(activity.ue_indicators.size()) == channels.cols(), ErrorCode::DimensionMismatch,
          "activity length does not match channel columns");
  CMatrix x = CMatrix::Zero(channels.rows(), channels.cols());
  for (Eigen::Index i = 0; i < channels.cols(); ++i)
    if (activity.ue_indicators[i]) x.col(i) = channels.col(i);
  return x;
}

/// Y = Phi X^T + W. No noise is drawn (and `rng` is untouched) when noise_var == 0.
inline CMatrix synthesize_received(const CMatrix& pilots, const CMatrix& effective_channels, double noise_var, Rng& rng) {
  require(pilots.cols() == effective_channels.cols(), ErrorCode::DimensionMismatch,
          "pilot count does not match effective channel columns");
  require(noise_var >= 0.0, ErrorCode::NonPositiveVariance, "noise variance must be nonnegative");
  CMatrix y = pilots * effective_channels.transpose();
  if (noise_var > 0.0)
    for (Eigen::Index m = 0; m < y.cols(); ++m)
      for (Eigen::Index t = 0; t < y.rows(); ++t) y(t, m) += complex_normal(rng, noise_var);
  return y;
}

enum class PathGainMode { unit, log_uniform };

/// beta_i = 1, or 10^(u/10) with u ~ U[-10, 0] dB.
inline RVector sample_path_gains(int n_ues, PathGainMode mode, Rng& rng) {
  if (mode == PathGainMode::unit) return RVector::Ones(n_ues);
  std::uniform_real_distribution<double> db(-10.0, 0.0);
  RVector beta(n_ues);
  for (int i = 0; i < n_ues; ++i) beta[i] = std::pow(10.0, db(rng) / 10.0);
  return beta;
}

struct ScenarioParams {
  int n_ues = 200;
  int n_clusters = 20;
  int n_antennas = 10;
  int pilot_len = 40;
  int k_active_clusters = 2;
  int l_c = 8;
  ActivityMode activity_mode = ActivityMode::exact;
  PathGainMode path_gain_mode = PathGainMode::unit;
  bool orthonormal_pilots = false;
  double noise_var = 0.1;
};

struct SystemRealization {
  ClusterMap map;
  CMatrix pilots;         // tau_p x N
  CMatrix channels;       // M x N
  RVector path_gains;     // N
  ActivityPattern activity;
  CMatrix effective_channels;  // M x N
  CMatrix received;       // tau_p x M
  double noise_var = 0.0;
};

/// One full draw. The order of draws from `rng` is fixed: activity, pilots,
/// path gains, channels, noise.
inline SystemRealization draw_realization(const ScenarioParams& p, Rng& rng) {
  SystemRealization r;
  r.map = build_cluster_map(p.n_ues, p.n_clusters);
  r.activity = sample_activity(r.map, p.k_active_clusters, p.l_c, p.activity_mode, rng);
  r.pilots = generate_pilots(p.pilot_len, p.n_ues, rng, p.orthonormal_pilots);
  r.path_gains = sample_path_gains(p.n_ues, p.path_gain_mode, rng);
  r.channels = sample_channels(r.path_gains, p.n_antennas, rng);
  r.effective_channels = effective_channel(r.activity, r.channels);
  r.noise_var = p.noise_var;
  r.received = synthesize_received(r.pilots, r.effective_channels, p.noise_var, rng);
  return r;
}

}  // namespace juice

#endif  // JUICE_MODEL_HPP
