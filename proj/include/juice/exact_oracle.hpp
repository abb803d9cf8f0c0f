// SPDX-License-Identifier: Apache-2.0
//
// Exact posterior for small instances by enumerating every cluster-activity
// configuration c in {0,1}^{N_c}. Given c (and fixed slab variances) the
// model is linear-Gaussian: columns of inactive clusters are removed and the
// remaining columns carry CN(0, gbar_i) priors, so every configuration has a
// closed-form evidence and posterior mean.

#ifndef JUICE_EXACT_ORACLE_HPP
#define JUICE_EXACT_ORACLE_HPP

#include "juice/common.hpp"
#include "juice/model.hpp"
#include "juice/priors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace juice {

inline constexpr int kMaxEnumeratedClusters = 12;

struct ExactPosterior {
  CMatrix means;                   // M x N
  RVector cluster_probs;           // N_c
  double log_evidence = 0.0;       // log p(Y)
  RVector configuration_weights;   // 2^{N_c}, bit l of the index is c_l
};

/// log p(Y | active set) with CN(0, gbar_i) priors on the active columns and
/// the remaining columns fixed at zero. Optionally returns the posterior mean
/// (M x N, zero off the active set).
inline double configuration_log_evidence(const CMatrix& y, const CMatrix& phi, double noise_var,
                                         const RVector& slab_vars, const std::vector<int>& active,
                                         CMatrix* mean = nullptr) {
  require(noise_var > 0.0, ErrorCode::SingularInput, "noise variance must be positive");
  const Eigen::Index tau = phi.rows();
  const double m = static_cast<double>(y.cols());

  CMatrix cov = CMatrix::Identity(tau, tau) * noise_var;
  CMatrix phi_a(tau, static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) phi_a.col(j) = phi.col(active[j]) * std::sqrt(slab_vars[active[j]]);
  cov.noalias() += phi_a * phi_a.adjoint();

  Eigen::LLT<CMatrix> llt(cov);
  require(llt.info() == Eigen::Success, ErrorCode::SingularInput, "marginal covariance is not positive definite");
  const CMatrix whitened = llt.solve(y);  // C^{-1} Y
  const double log_det = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  const double quad = (y.adjoint() * whitened).trace().real();

  if (mean) {
    *mean = CMatrix::Zero(y.cols(), phi.cols());
    // E[x_i^T] = gbar_i phi_i^H C^{-1} Y
    for (std::size_t j = 0; j < active.size(); ++j) {
      const int i = active[j];
      mean->col(i) = (slab_vars[i] * (phi.col(i).adjoint() * whitened)).transpose();
    }
  }
  return -m * static_cast<double>(tau) * std::log(std::numbers::pi) - m * log_det - quad;
}

inline ExactPosterior enumerate_posterior(const CMatrix& y, const CMatrix& phi, double noise_var,
                                          const RVector& slab_vars, double eps, const ClusterMap& map) {
  require(map.n_clusters <= kMaxEnumeratedClusters, ErrorCode::TooLarge,
          std::to_string(map.n_clusters) + " clusters exceed the enumeration limit of " +
              std::to_string(kMaxEnumeratedClusters));
  require(noise_var > 0.0, ErrorCode::SingularInput, "noise variance must be positive");
  require(phi.cols() == map.n_ues && slab_vars.size() == map.n_ues, ErrorCode::DimensionMismatch,
          "Phi, slab_vars and the cluster map disagree on N");
  require(eps >= 0.0 && eps <= 1.0, ErrorCode::InvalidConfig, "eps must lie in [0,1]");

  const int n_configs = 1 << map.n_clusters;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_w(n_configs, neg_inf);
  std::vector<CMatrix> means(n_configs);

  for (int c = 0; c < n_configs; ++c) {
    double log_prior = 0.0;
    std::vector<int> active;
    for (int l = 0; l < map.n_clusters; ++l) {
      const bool on = (c >> l) & 1;
      log_prior += on ? std::log(eps) : std::log1p(-eps);
      if (on) active.insert(active.end(), map.members[l].begin(), map.members[l].end());
    }
    if (log_prior == neg_inf) continue;
    log_w[c] = log_prior + configuration_log_evidence(y, phi, noise_var, slab_vars, active, &means[c]);
  }

  double peak = neg_inf;
  for (double w : log_w) peak = std::max(peak, w);
  double total = 0.0;
  for (double w : log_w) total += (w == neg_inf) ? 0.0 : std::exp(w - peak);

  ExactPosterior out;
  out.log_evidence = peak + std::log(total);
  out.configuration_weights.resize(n_configs);
  out.means = CMatrix::Zero(y.cols(), phi.cols());
  out.cluster_probs = RVector::Zero(map.n_clusters);
  for (int c = 0; c < n_configs; ++c) {
    const double w = (log_w[c] == neg_inf) ? 0.0 : std::exp(log_w[c] - out.log_evidence);
    out.configuration_weights[c] = w;
    if (w == 0.0) continue;
    out.means += w * means[c];
    for (int l = 0; l < map.n_clusters; ++l)
      if ((c >> l) & 1) out.cluster_probs[l] += w;
  }
  out.cluster_probs = out.cluster_probs.cwiseMin(1.0);
  return out;
}

}  // namespace juice

#endif  // JUICE_EXACT_ORACLE_HPP
