// SPDX-License-Identifier: Apache-2.0
//
// Expectation propagation for joint activity detection and channel
// estimation under the clustered spike-and-slab prior.
//
// The posterior over the effective channels is approximated by one global
// Gaussian, shared across the M antennas:
//
//   Q(X) ∝ f1(X) * prod_l q_l(X_{C_l}),
//
// where f1 is the (exact, Gaussian) likelihood and each cluster site q_l is a
// product of isotropic per-UE Gaussians with natural parameters
// (precision lambda_i, shift eta_i in C^M). The Bernoulli cluster prior is
// folded into the cluster site: the tilted distribution of a cluster is a
// two-component mixture (all-zero spike vs. per-UE slab) whose mixing weight
// is the posterior activity probability of that cluster.
//
// Sites are refined one cluster at a time in ascending order. Within a sweep
// the global covariance is kept current with rank-|C_l| Woodbury updates and
// is refactorized from scratch at the start of every sweep.

#ifndef JUICE_EP_SOLVER_HPP
#define JUICE_EP_SOLVER_HPP

#include "juice/common.hpp"
#include "juice/model.hpp"
#include "juice/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace juice {

struct SolverConfig {
  int max_iters = 50;
  /// Weight of the freshly matched site in the natural-parameter convex
  /// combination; 1 disables damping.
  double damping = 0.7;
  /// Stop once |mu_k - mu_{k-1}|_F / |mu_k|_F < tol.
  double tol = 1e-6;
  /// UE energy threshold, in units of the noise variance, used by detect_support.
  double detection_threshold = 1.0;
  bool update_slab_vars = true;
  double slab_var_init = 1.0;
  /// Prior probability that a cluster is active. 0 and 1 are accepted as limits.
  double eps = 0.1;
  /// Tilted variances are floored at min_site_var times the cavity variance,
  /// which caps site precisions in a scale-free way.
  double min_site_var = 1e-8;
  /// Slab-variance updates begin once this many sweeps have completed.
  int slab_update_start = 2;

  void validate() const {
    require(max_iters >= 1, ErrorCode::InvalidConfig, "solver.max_iters must be positive");
    require(damping > 0.0 && damping <= 1.0, ErrorCode::InvalidConfig, "solver.damping must lie in (0,1]");
    require(tol > 0.0, ErrorCode::InvalidConfig, "solver.tol must be positive");
    require(detection_threshold > 0.0, ErrorCode::InvalidConfig, "solver.detection_threshold must be positive");
    require(slab_var_init > 0.0, ErrorCode::InvalidConfig, "solver.slab_var_init must be positive");
    require(eps >= 0.0 && eps <= 1.0, ErrorCode::InvalidConfig, "solver.eps must lie in [0,1]");
    require(min_site_var > 0.0 && min_site_var < 1.0, ErrorCode::InvalidConfig, "solver.min_site_var must lie in (0,1)");
    require(slab_update_start >= 0, ErrorCode::InvalidConfig, "solver.slab_update_start must be nonnegative");
  }
};

/// Diagonal Gaussian site: one precision per UE, shared by all antennas, and
/// an M x n shift whose column i belongs to UE i.
struct GaussianSite {
  RVector precision;
  CMatrix shift;
};

/// The likelihood factor in natural form: precision Phi^H Phi / s2 (N x N)
/// and shift (Phi^H Y / s2)^T (M x N).
struct LikelihoodSite {
  CMatrix precision;
  CMatrix shift;
};

inline LikelihoodSite likelihood_site(const CMatrix& y, const CMatrix& phi, double noise_var) {
  require(noise_var > 0.0, ErrorCode::SingularInput, "likelihood site needs a positive noise variance");
  require(y.rows() == phi.rows(), ErrorCode::DimensionMismatch, "Y and Phi must have the same number of rows");
  LikelihoodSite site;
  site.precision = phi.adjoint() * phi / noise_var;
  site.shift = (phi.adjoint() * y / noise_var).transpose();
  return site;
}

/// First and second moments of one cluster's tilted distribution, projected
/// onto isotropic per-UE Gaussians.
struct TiltedMoments {
  CMatrix mean;         // M x L
  RVector variance;     // L, per antenna
  double activity_prob = 0.0;
  double log_odds = 0.0;
};

inline TiltedMoments tilted_moments(const CMatrix& cavity_means, const RVector& cavity_vars, const RVector& slab_vars,
                                    double eps) {
  const Eigen::Index n = cavity_vars.size();
  const int m = static_cast<int>(cavity_means.rows());
  require(cavity_means.cols() == n && slab_vars.size() == n, ErrorCode::DimensionMismatch,
          "cavity and slab sizes disagree");
  require((cavity_vars.array() > 0.0).all(), ErrorCode::DegenerateCavity, "cavity variances must be positive");

  TiltedMoments t;
  t.log_odds = prior_log_odds(eps);
  for (Eigen::Index i = 0; i < n; ++i)
    t.log_odds += slab_spike_log_evidence_ratio(cavity_means.col(i).squaredNorm(), m, cavity_vars[i], slab_vars[i]);
  const double r = logistic(t.log_odds);
  t.activity_prob = r;

  t.mean.resize(m, n);
  t.variance.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = cavity_vars[i];
    const double g = slab_vars[i];
    const double gain = g / (v + g);
    const CVector slab_mean = gain * cavity_means.col(i);
    const double slab_var = v * gain;
    t.mean.col(i) = r * slab_mean;
    t.variance[i] = r * slab_var + r * (1.0 - r) * slab_mean.squaredNorm() / m;
  }
  return t;
}

struct SiteUpdate {
  GaussianSite site;
  double activity_prob = 0.0;
  TiltedMoments tilted;
  int clipped = 0;
};

/// Moment-matches one cluster against its cavity and returns the damped
/// site. A fresh site that would need negative precision is flattened to zero
/// precision with a mean-matching shift; a damped precision that still ends up
/// negative resets the site to vacuous.
inline SiteUpdate spike_slab_site_update(const CMatrix& cavity_means, const RVector& cavity_vars,
                                         const RVector& slab_vars, double eps, double damping,
                                         const GaussianSite& previous, double min_site_var = 1e-8) {
  SiteUpdate out;
  out.tilted = tilted_moments(cavity_means, cavity_vars, slab_vars, eps);
  out.activity_prob = out.tilted.activity_prob;

  const Eigen::Index n = cavity_vars.size();
  out.site.precision.resize(n);
  out.site.shift.resize(cavity_means.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = cavity_vars[i];
    double var = std::max(out.tilted.variance[i], min_site_var * v);
    if (var > v) {
      // A tilted distribution wider than its cavity would need a negative
      // site precision; keep the site flat in precision but still match the mean.
      var = v;
      ++out.clipped;
    }
    const double fresh_precision = 1.0 / var - 1.0 / v;
    const CVector fresh_shift = out.tilted.mean.col(i) / var - cavity_means.col(i) / v;

    double precision = damping * fresh_precision + (1.0 - damping) * previous.precision[i];
    CVector shift = damping * fresh_shift + (1.0 - damping) * previous.shift.col(i);
    if (precision < 0.0) {
      precision = 0.0;
      shift.setZero();
      ++out.clipped;
    }
    out.site.precision[i] = precision;
    out.site.shift.col(i) = shift;
  }
  return out;
}

struct PosteriorSummary {
  CMatrix means;          // M x N
  RVector variances;      // N, per-antenna marginal variance
  RVector cluster_probs;  // N_c
  RVector slab_vars;      // N
  int iterations = 0;
  bool converged = false;
  int degenerate_skips = 0;
  int clipped_sites = 0;
};

/// EM point update gbar_i = max(floor, (|mu_i|^2 + M v_i) / M).
inline RVector update_slab_vars(const CMatrix& means, const RVector& variances, double floor = kSlabVarFloor) {
  const double m = static_cast<double>(means.rows());
  RVector g(means.cols());
  for (Eigen::Index i = 0; i < means.cols(); ++i)
    g[i] = std::max(floor, (means.col(i).squaredNorm() + m * variances[i]) / m);
  return g;
}

inline RVector update_slab_vars(const PosteriorSummary& summary, double floor = kSlabVarFloor) {
  return update_slab_vars(summary.means, summary.variances, floor);
}

namespace detail {

// The global Gaussian Q(X) with precision P = Phi^H Phi / s2 + diag(lambda)
// and shift h = (lik.shift + sites.shift)^T, one row per UE (N x M).
//
// Two representations are used. When tau < N and every site precision is
// comfortably positive, P^{-1} is never formed: with D = diag(1/lambda) and
// K = s2 I + Phi D Phi^H (tau x tau),
//
//   Sigma = D - D Phi^H K^{-1} Phi D,   mu = g - D Phi^H K^{-1} Phi g,  g = D h,
//
// and a cluster update is a rank-|C| change of K. Otherwise the full N x N
// covariance is kept and updated with the same Woodbury identity in N-space.
class GlobalGaussian {
 public:
  GlobalGaussian(const CMatrix& phi, double noise_var, const LikelihoodSite& lik, const GaussianSite& sites)
      : phi_(phi), noise_var_(noise_var), lik_(lik), sites_(sites) {}

  void refresh() {
    low_rank_ = phi_.rows() < phi_.cols() && sites_comfortably_positive();
    if (low_rank_)
      refresh_low_rank();
    else
      refresh_dense();
  }

  bool low_rank() const { return low_rank_; }

  /// Marginal variances and means (M x |idx|) of the UEs in idx.
  void marginals(const std::vector<int>& idx, RVector& var, CMatrix& mean) const {
    const Eigen::Index l = static_cast<Eigen::Index>(idx.size());
    var.resize(l);
    mean.resize(lik_.shift.rows(), l);
    if (!low_rank_) {
      for (Eigen::Index j = 0; j < l; ++j) {
        var[j] = cov_(idx[j], idx[j]).real();
        mean.col(j) = mean_.row(idx[j]).transpose();
      }
      return;
    }
    const CMatrix phi_c = phi_(Eigen::all, idx);
    const CMatrix a = kinv_ * phi_c;               // tau x L
    const CMatrix t = phi_c.adjoint() * w_;        // L x M
    for (Eigen::Index j = 0; j < l; ++j) {
      const double d = d_[idx[j]];
      var[j] = d - d * d * phi_c.col(j).dot(a.col(j)).real();
      mean.col(j) = (g_.row(idx[j]) - d * t.row(j)).transpose();
    }
  }

  /// Folds in a change of the sites on idx; sites_ must already hold the new
  /// values and old_precision / old_shift (M x L) the previous ones.
  void update(const std::vector<int>& idx, const RVector& old_precision, const CMatrix& old_shift) {
    const Eigen::Index l = static_cast<Eigen::Index>(idx.size());
    RVector d_precision(l);
    CMatrix d_shift_rows(l, old_shift.rows());
    for (Eigen::Index j = 0; j < l; ++j) {
      d_precision[j] = sites_.precision[idx[j]] - old_precision[j];
      d_shift_rows.row(j) = (sites_.shift.col(idx[j]) - old_shift.col(j)).transpose();
    }
    if (!low_rank_) {
      update_dense(idx, d_precision, d_shift_rows);
      return;
    }
    for (int i : idx) {
      if (!comfortably_positive(i)) {
        refresh();
        return;
      }
    }
    update_low_rank(idx);
  }

  /// Posterior mean, M x N.
  CMatrix mean() const {
    if (!low_rank_) return mean_.transpose();
    return (g_ - d_.cast<Complex>().asDiagonal() * (phi_.adjoint() * w_)).transpose();
  }

  RVector variances() const {
    if (!low_rank_) return cov_.diagonal().real();
    const CMatrix a = kinv_ * phi_;
    RVector v(phi_.cols());
    for (Eigen::Index i = 0; i < phi_.cols(); ++i) v[i] = d_[i] - d_[i] * d_[i] * phi_.col(i).dot(a.col(i)).real();
    return v;
  }

 private:
  bool comfortably_positive(Eigen::Index i) const {
    return sites_.precision[i] > 1e-6 * lik_.precision(i, i).real() && sites_.precision[i] > 0.0;
  }

  bool sites_comfortably_positive() const {
    for (Eigen::Index i = 0; i < sites_.precision.size(); ++i)
      if (!comfortably_positive(i)) return false;
    return true;
  }

  CMatrix shift_rows() const { return (lik_.shift + sites_.shift).transpose(); }

  void refresh_dense() {
    const Eigen::Index n = lik_.precision.rows();
    CMatrix p = lik_.precision;
    p.diagonal().real() += sites_.precision;
    Eigen::LLT<CMatrix> llt(p);
    if (llt.info() != Eigen::Success) {
      // Several vacuous sites plus a rank-deficient Gram matrix; regularize minimally.
      const double jitter = 1e-10 * std::max(1.0, p.diagonal().real().maxCoeff());
      p.diagonal().real().array() += jitter;
      llt.compute(p);
    }
    cov_ = llt.solve(CMatrix::Identity(n, n));
    mean_ = cov_ * shift_rows();
  }

  void update_dense(const std::vector<int>& idx, const RVector& d_precision, const CMatrix& d_shift_rows) {
    const Eigen::Index l = static_cast<Eigen::Index>(idx.size());
    const CMatrix u = cov_(Eigen::all, idx);
    const CMatrix s_cc = u(idx, Eigen::all);
    CMatrix a = CMatrix::Identity(l, l);
    a += d_precision.asDiagonal() * s_cc;
    const CMatrix k = a.partialPivLu().solve(CMatrix(d_precision.cast<Complex>().asDiagonal().toDenseMatrix()));
    const CMatrix mean_c = mean_(idx, Eigen::all);
    cov_.noalias() -= u * k * u.adjoint();
    mean_.noalias() -= u * (k * mean_c);
    mean_.noalias() += cov_(Eigen::all, idx) * d_shift_rows;
  }

  void refresh_low_rank() {
    const Eigen::Index tau = phi_.rows();
    d_ = sites_.precision.cwiseInverse();
    g_ = d_.cast<Complex>().asDiagonal() * shift_rows();
    CMatrix k = phi_ * d_.cast<Complex>().asDiagonal() * phi_.adjoint();
    k.diagonal().real().array() += noise_var_;
    kinv_ = k.llt().solve(CMatrix::Identity(tau, tau));
    z_ = phi_ * g_;
    w_ = kinv_ * z_;
  }

  void update_low_rank(const std::vector<int>& idx) {
    const Eigen::Index l = static_cast<Eigen::Index>(idx.size());
    const CMatrix phi_c = phi_(Eigen::all, idx);
    RVector dd(l);
    CMatrix dg(l, g_.cols());
    for (Eigen::Index j = 0; j < l; ++j) {
      const int i = idx[j];
      const double d_new = 1.0 / sites_.precision[i];
      const CVector g_new = d_new * (lik_.shift.col(i) + sites_.shift.col(i));
      dd[j] = d_new - d_[i];
      dg.row(j) = g_new.transpose() - g_.row(i);
      d_[i] = d_new;
      g_.row(i) = g_new.transpose();
    }
    // K <- K + Phi_C diag(dd) Phi_C^H
    const CMatrix a = kinv_ * phi_c;
    CMatrix inner = CMatrix::Identity(l, l);
    inner += dd.asDiagonal() * (phi_c.adjoint() * a);
    const CMatrix right = inner.partialPivLu().solve(dd.cast<Complex>().asDiagonal() * a.adjoint());
    kinv_.noalias() -= a * right;
    z_.noalias() += phi_c * dg;
    w_.noalias() = kinv_ * z_;
  }

  const CMatrix& phi_;
  double noise_var_;
  const LikelihoodSite& lik_;
  const GaussianSite& sites_;
  bool low_rank_ = false;

  // dense representation
  CMatrix cov_;
  CMatrix mean_;
  // low-rank representation
  RVector d_;
  CMatrix g_;
  CMatrix kinv_;
  CMatrix z_;
  CMatrix w_;
};

}  // namespace detail

/// Runs EP to convergence. `known_slab_vars`, when given, replaces the
/// uniform slab_var_init starting point (and, with update_slab_vars off,
/// fixes the slab variances).
inline PosteriorSummary ep_infer(const CMatrix& y, const CMatrix& phi, double noise_var, const ClusterMap& map,
                                 const SolverConfig& config,
                                 const std::optional<RVector>& known_slab_vars = std::nullopt) {
  config.validate();
  const Eigen::Index n = phi.cols();
  const Eigen::Index m = y.cols();
  require(map.n_ues == n, ErrorCode::DimensionMismatch, "cluster map size must equal the number of pilots");
  const LikelihoodSite lik = likelihood_site(y, phi, noise_var);

  PosteriorSummary out;
  out.slab_vars = known_slab_vars ? *known_slab_vars : RVector::Constant(n, config.slab_var_init);
  require(out.slab_vars.size() == n, ErrorCode::DimensionMismatch, "known slab variances must have length N");
  out.slab_vars = out.slab_vars.cwiseMax(kSlabVarFloor);
  out.cluster_probs = RVector::Constant(map.n_clusters, config.eps);

  // Sites start at the prior marginal variance eps * gbar_i rather than
  // vacuous, so the global Gaussian is proper even when Phi^H Phi is rank
  // deficient.
  const double prior_weight = std::max(config.eps, config.min_site_var);
  GaussianSite sites{(prior_weight * out.slab_vars).cwiseInverse(), CMatrix::Zero(m, n)};
  detail::GlobalGaussian global(phi, noise_var, lik, sites);

  RVector marginal_vars;
  CMatrix marginal_means;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    global.refresh();
    const CMatrix previous_mean = global.mean();

    for (int l = 0; l < map.n_clusters; ++l) {
      const std::vector<int>& idx = map.members[l];
      const Eigen::Index size = static_cast<Eigen::Index>(idx.size());
      global.marginals(idx, marginal_vars, marginal_means);

      RVector cavity_vars(size);
      CMatrix cavity_means(m, size);
      GaussianSite old{RVector(size), CMatrix(m, size)};
      RVector slab(size);
      bool degenerate = false;
      for (Eigen::Index j = 0; j < size; ++j) {
        const int i = idx[j];
        const double cavity_precision = 1.0 / marginal_vars[j] - sites.precision[i];
        if (!(marginal_vars[j] > 0.0) || !(cavity_precision > 0.0) || !std::isfinite(cavity_precision)) {
          degenerate = true;
          break;
        }
        cavity_vars[j] = 1.0 / cavity_precision;
        cavity_means.col(j) = cavity_vars[j] * (marginal_means.col(j) / marginal_vars[j] - sites.shift.col(i));
        old.precision[j] = sites.precision[i];
        old.shift.col(j) = sites.shift.col(i);
        slab[j] = out.slab_vars[i];
      }
      if (degenerate) {
        ++out.degenerate_skips;
        continue;
      }

      const SiteUpdate upd =
          spike_slab_site_update(cavity_means, cavity_vars, slab, config.eps, config.damping, old, config.min_site_var);
      out.clipped_sites += upd.clipped;
      out.cluster_probs[l] = upd.activity_prob;
      for (Eigen::Index j = 0; j < size; ++j) {
        sites.precision[idx[j]] = upd.site.precision[j];
        sites.shift.col(idx[j]) = upd.site.shift.col(j);
      }
      global.update(idx, old.precision, old.shift);
    }

    out.iterations = iter + 1;
    const CMatrix current_mean = global.mean();
    const bool slab_phase = config.update_slab_vars && iter >= config.slab_update_start;
    if (slab_phase) out.slab_vars = update_slab_vars(current_mean, global.variances());
    const double scale = std::max(current_mean.norm(), std::numeric_limits<double>::min());
    const double change = (current_mean - previous_mean).norm() / scale;
    if (change < config.tol && (!config.update_slab_vars || slab_phase)) {
      out.converged = true;
      break;
    }
  }

  global.refresh();
  out.means = global.mean();
  out.variances = global.variances().cwiseMax(0.0);
  return out;
}

/// UE i is declared active iff its cluster is more likely active than not
/// and |mu_i|^2 / M exceeds threshold * noise_var.
inline std::vector<int> detect_support(const PosteriorSummary& summary, const ClusterMap& map, double threshold,
                                       double noise_var) {
  std::vector<int> support;
  const double m = static_cast<double>(summary.means.rows());
  for (int l = 0; l < map.n_clusters; ++l) {
    if (!(summary.cluster_probs[l] > 0.5)) continue;
    for (int i : map.members[l])
      if (summary.means.col(i).squaredNorm() / m > threshold * noise_var) support.push_back(i);
  }
  std::sort(support.begin(), support.end());
  return support;
}

}  // namespace juice

#endif  // JUICE_EP_SOLVER_HPP
