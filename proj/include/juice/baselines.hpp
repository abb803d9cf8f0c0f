// SPDX-License-Identifier: Apache-2.0
//
// Reference estimators: support-aided MMSE, multiple-measurement-vector
// sparse Bayesian learning (M-SBL), and iteratively reweighted l2,1
// minimization solved by reweighted ridge regression.

#ifndef JUICE_BASELINES_HPP
#define JUICE_BASELINES_HPP

#include "juice/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace juice {

struct BaselineConfig {
  int max_iters = 500;
  double tol = 1e-6;
  double reg_epsilon = 1e-3;
  double lambda = 1.0;
  /// Relative to max(gamma): gammas below prune_threshold * max(gamma) are set to zero.
  double prune_threshold = 1e-6;

  void validate() const {
    require(max_iters >= 1, ErrorCode::InvalidConfig, "baseline.max_iters must be positive");
    require(tol > 0.0, ErrorCode::InvalidConfig, "baseline.tol must be positive");
    require(reg_epsilon > 0.0, ErrorCode::InvalidConfig, "baseline.reg_epsilon must be positive");
    require(lambda >= 0.0, ErrorCode::InvalidConfig, "baseline.lambda must be nonnegative");
    require(prune_threshold > 0.0, ErrorCode::InvalidConfig, "baseline.prune_threshold must be positive");
  }
};

/// X_S^T = (Phi_S^H Phi_S + s2 diag(beta_S)^{-1})^{-1} Phi_S^H Y; zero off S.
inline CMatrix oracle_mmse(const CMatrix& y, const CMatrix& phi, const std::vector<int>& true_support,
                           const RVector& path_gains, double noise_var) {
  require(noise_var > 0.0, ErrorCode::SingularInput, "oracle MMSE needs a positive noise variance");
  CMatrix x = CMatrix::Zero(y.cols(), phi.cols());
  if (true_support.empty()) return x;
  const CMatrix phi_s = phi(Eigen::all, true_support);
  CMatrix a = phi_s.adjoint() * phi_s;
  for (std::size_t j = 0; j < true_support.size(); ++j) {
    const double beta = path_gains[true_support[j]];
    require(beta > 0.0, ErrorCode::NonPositiveVariance, "path gains on the support must be positive");
    a(j, j) += noise_var / beta;
  }
  const CMatrix xs_t = a.ldlt().solve(phi_s.adjoint() * y);
  for (std::size_t j = 0; j < true_support.size(); ++j) x.col(true_support[j]) = xs_t.row(j).transpose();
  return x;
}

struct MsblResult {
  CMatrix means;   // M x N
  RVector gammas;  // N
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood;  // per iteration, before the update
};

namespace detail {

// Marginal covariance C = s2 I + Phi diag(g) Phi^H, in factored form.
inline Eigen::LLT<CMatrix> sbl_marginal(const CMatrix& phi, const RVector& gammas, double noise_var) {
  CMatrix c = CMatrix::Identity(phi.rows(), phi.rows()) * noise_var;
  c.noalias() += phi * gammas.cast<Complex>().asDiagonal() * phi.adjoint();
  return Eigen::LLT<CMatrix>(c);
}

}  // namespace detail

namespace detail {

inline double msbl_log_likelihood(const CMatrix& y, const Eigen::LLT<CMatrix>& llt, const CMatrix& c_inv_y) {
  const double m = static_cast<double>(y.cols());
  const double tau = static_cast<double>(y.rows());
  const double log_det = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  return -m * (tau * std::log(std::numbers::pi) + log_det) - (y.adjoint() * c_inv_y).trace().real();
}

// One EM step; optionally reports log p(Y | gamma) before the update.
inline CMatrix msbl_step(const CMatrix& y, const CMatrix& phi, double noise_var, RVector& gammas,
                         double* log_likelihood) {
  std::vector<int> live;
  for (Eigen::Index i = 0; i < gammas.size(); ++i)
    if (gammas[i] > 0.0) live.push_back(static_cast<int>(i));
  const CMatrix phi_live = phi(Eigen::all, live);
  CMatrix c = CMatrix::Identity(phi.rows(), phi.rows()) * noise_var;
  c.noalias() += phi_live * gammas(live).cast<Complex>().asDiagonal() * phi_live.adjoint();
  const Eigen::LLT<CMatrix> llt(c);
  const CMatrix c_inv_y = llt.solve(y);
  if (log_likelihood) *log_likelihood = msbl_log_likelihood(y, llt, c_inv_y);
  const CMatrix c_inv_phi = llt.solve(phi_live);
  const CMatrix proj = phi_live.adjoint() * c_inv_y;  // |live| x M
  const double m = static_cast<double>(y.cols());
  CMatrix means = CMatrix::Zero(y.cols(), phi.cols());
  for (std::size_t j = 0; j < live.size(); ++j) {
    const int i = live[j];
    const double g = gammas[i];
    means.col(i) = g * proj.row(static_cast<Eigen::Index>(j)).transpose();
    const double quad = phi.col(i).dot(c_inv_phi.col(static_cast<Eigen::Index>(j))).real();
    const double post_var = std::max(0.0, g - g * g * quad);
    gammas[i] = means.col(i).squaredNorm() / m + post_var;
  }
  return means;
}

}  // namespace detail

/// log p(Y | gamma) = -M [tau log(pi) + log det C] - tr(Y^H C^{-1} Y).
inline double msbl_log_likelihood(const CMatrix& y, const CMatrix& phi, const RVector& gammas, double noise_var) {
  const auto llt = detail::sbl_marginal(phi, gammas, noise_var);
  return detail::msbl_log_likelihood(y, llt, llt.solve(y));
}

/// One EM step: posterior moments under diag(gamma), then
/// gamma_i <- |mu_i|^2 / M + Sigma_ii. Returns the posterior mean (M x N).
inline CMatrix msbl_em_step(const CMatrix& y, const CMatrix& phi, double noise_var, RVector& gammas) {
  return detail::msbl_step(y, phi, noise_var, gammas, nullptr);
}

inline MsblResult msbl(const CMatrix& y, const CMatrix& phi, double noise_var, const BaselineConfig& config) {
  config.validate();
  require(noise_var > 0.0, ErrorCode::SingularInput, "M-SBL needs a positive noise variance");
  MsblResult out;
  out.gammas = RVector::Ones(phi.cols());
  for (int iter = 0; iter < config.max_iters; ++iter) {
    const RVector previous = out.gammas;
    double log_likelihood = 0.0;
    out.means = detail::msbl_step(y, phi, noise_var, out.gammas, &log_likelihood);
    out.log_likelihood.push_back(log_likelihood);
    const double peak = out.gammas.maxCoeff();
    for (Eigen::Index i = 0; i < out.gammas.size(); ++i)
      if (out.gammas[i] < config.prune_threshold * peak) out.gammas[i] = 0.0;
    out.iterations = iter + 1;
    const double scale = std::max(previous.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((out.gammas - previous).cwiseAbs().maxCoeff() / scale < config.tol) {
      out.converged = true;
      break;
    }
  }
  // Report the posterior mean consistent with the returned gammas.
  RVector final_gammas = out.gammas;
  out.means = msbl_em_step(y, phi, noise_var, final_gammas);
  return out;
}

struct IrwResult {
  CMatrix means;  // M x N
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective;  // surrogate objective after each outer step, starting with the initial ridge solve
};

/// Smoothed group penalty rho(t) = t - eps log(1 + t/eps). Its quadratic
/// majorizer at t_k has curvature 1/(t_k + eps), which is exactly the
/// reweighting w_i = (|x_i| + eps)^{-1}.
inline double irw_penalty(double t, double reg_epsilon) { return t - reg_epsilon * std::log1p(t / reg_epsilon); }

inline double irw_objective(const CMatrix& y, const CMatrix& phi, const CMatrix& x, double lambda, double reg_epsilon) {
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) penalty += irw_penalty(x.col(i).norm(), reg_epsilon);
  return (y - phi * x.transpose()).squaredNorm() + lambda * penalty;
}

namespace detail {

// argmin_B |Y - Phi B|_F^2 + sum_i (lambda/2) w_i |b_i|^2 with B = X^T (N x M).
inline CMatrix weighted_ridge(const CMatrix& y, const CMatrix& phi, const RVector& weights, double lambda) {
  const Eigen::Index tau = phi.rows();
  const Eigen::Index n = phi.cols();
  const double half = lambda / 2.0;
  if (n <= tau || half == 0.0) {
    CMatrix a = phi.adjoint() * phi;
    a.diagonal().real() += half * weights;
    return a.ldlt().solve(phi.adjoint() * y);
  }
  // tau-space form: B = D Phi^H (Phi D Phi^H + half I)^{-1} Y, D = diag(1 / w).
  const RVector d = weights.cwiseInverse();
  CMatrix k = phi * d.cast<Complex>().asDiagonal() * phi.adjoint();
  k.diagonal().real().array() += half;
  return d.cast<Complex>().asDiagonal() * (phi.adjoint() * k.ldlt().solve(y));
}

}  // namespace detail

inline IrwResult irw_l21(const CMatrix& y, const CMatrix& phi, double lambda, const BaselineConfig& config) {
  config.validate();
  require(lambda >= 0.0, ErrorCode::InvalidConfig, "lambda must be nonnegative");
  const Eigen::Index n = phi.cols();
  IrwResult out;
  RVector weights = RVector::Ones(n);
  CMatrix b = detail::weighted_ridge(y, phi, weights, lambda);
  out.means = b.transpose();
  out.objective.push_back(irw_objective(y, phi, out.means, lambda, config.reg_epsilon));

  for (int iter = 0; iter < config.max_iters; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) weights[i] = 1.0 / (b.row(i).norm() + config.reg_epsilon);
    const CMatrix next = detail::weighted_ridge(y, phi, weights, lambda);
    const double change = (next - b).norm() / std::max(next.norm(), std::numeric_limits<double>::min());
    b = next;
    out.means = b.transpose();
    out.objective.push_back(irw_objective(y, phi, out.means, lambda, config.reg_epsilon));
    out.iterations = iter + 1;
    if (change < config.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace juice

#endif  // JUICE_BASELINES_HPP
