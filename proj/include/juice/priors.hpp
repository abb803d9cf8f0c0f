// SPDX-License-Identifier: Apache-2.0
//
// Structured spike-and-slab prior over the effective channels of one cluster
//
//   p(X_C | c, gbar) = (1 - c) delta(X_C) + c * prod_{i in C} CN(x_i; 0, gbar_i I_M),
//   p(c) = Bernoulli(eps),
//
// plus the closed-form spike/slab evidence ratio that both the EP solver and
// the exact enumeration rely on. The Dirac spike is never evaluated as a
// density; it only appears through point-mass evaluation of Gaussians.

#ifndef JUICE_PRIORS_HPP
#define JUICE_PRIORS_HPP

#include "juice/common.hpp"
#include "juice/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace juice {

inline constexpr double kSlabVarFloor = 1e-12;

struct PriorParams {
  RVector slab_vars;
  double cluster_activation_prob = 0.1;
  ClusterMap cluster_map;
};

/// Validates eps and floors the slab variances.
inline PriorParams make_prior_params(RVector slab_vars, double eps, ClusterMap map) {
  require(eps > 0.0 && eps < 1.0, ErrorCode::InvalidConfig, "cluster activation probability must lie in (0,1)");
  require(slab_vars.size() == map.n_ues, ErrorCode::DimensionMismatch, "slab_vars length must equal n_ues");
  require((slab_vars.array() >= 0.0).all(), ErrorCode::NonPositiveVariance, "slab variances must be nonnegative");
  PriorParams p;
  p.slab_vars = slab_vars.cwiseMax(kSlabVarFloor);
  p.cluster_activation_prob = eps;
  p.cluster_map = std::move(map);
  return p;
}

/// log CN(x; 0, slab_var I_M) = -M log(pi slab_var) - |x|^2 / slab_var.
inline double slab_log_density(const Eigen::Ref<const CVector>& x, double slab_var) {
  require(slab_var > 0.0, ErrorCode::NonPositiveVariance, "slab variance must be positive");
  const double m = static_cast<double>(x.size());
  return -m * std::log(std::numbers::pi * slab_var) - x.squaredNorm() / slab_var;
}

inline double cluster_log_pmf(bool active, double eps) { return active ? std::log(eps) : std::log1p(-eps); }

/// Log prior of one cluster block (M x L). For c = 0 the spike is treated as
/// a unit point mass: 0 at X_C = 0 and -inf elsewhere.
inline double cluster_prior_log_density(const CMatrix& x_cluster, bool active, const RVector& slab_vars) {
  require(x_cluster.cols() == slab_vars.size(), ErrorCode::DimensionMismatch, "one slab variance per cluster column");
  if (!active) return (x_cluster.array() == Complex(0.0, 0.0)).all() ? 0.0 : -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (Eigen::Index i = 0; i < x_cluster.cols(); ++i) total += slab_log_density(x_cluster.col(i), slab_vars[i]);
  return total;
}

/// log [ CN(m; 0, (v + g) I_M) / CN(0; m, v I_M) ] for a Gaussian message
/// CN(x; m, v I_M) meeting the slab versus the spike. Only |m|^2 matters.
inline double slab_spike_log_evidence_ratio(double mean_sq_norm, int n_antennas, double msg_var, double slab_var) {
  const double m = static_cast<double>(n_antennas);
  const double total = msg_var + slab_var;
  return m * std::log(msg_var / total) + mean_sq_norm * slab_var / (msg_var * total);
}

/// log(eps / (1 - eps)), with the limits eps = 0 and eps = 1 mapped to -inf and +inf.
inline double prior_log_odds(double eps) {
  if (eps <= 0.0) return -std::numeric_limits<double>::infinity();
  if (eps >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(eps) - std::log1p(-eps);
}

inline double logistic(double log_odds) {
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double e = std::exp(log_odds);
  return e / (1.0 + e);
}

}  // namespace juice

#endif  // JUICE_PRIORS_HPP
