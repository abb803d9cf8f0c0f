// SPDX-License-Identifier: Apache-2.0

#include "juice/baselines.hpp"
#include "juice/metrics.hpp"
#include "support/property_checks.hpp"

#include <gtest/gtest.h>

using namespace juice;

TEST(OracleMmse, EmptySupport) {
  const auto inst = checks::random_instance(1, 10, 5, 2, 6, 0.1);
  EXPECT_EQ(oracle_mmse(inst.received, inst.pilots, {}, inst.slab_vars, 0.1).norm(), 0.0);
}

TEST(OracleMmse, MatchedFilterLimit) {
  Rng rng = seeded_rng(2);
  const CMatrix phi = generate_pilots(8, 8, rng, true);
  const CMatrix y = sample_channels(RVector::Ones(3), 8, rng);
  const std::vector<int> s{1, 4, 6};
  const CMatrix x = oracle_mmse(y, phi, s, RVector::Ones(8), 1e-12);
  for (int i : s) EXPECT_LT((x.col(i) - (phi.col(i).adjoint() * y).transpose()).norm(), 1e-9);
  EXPECT_EQ(x.col(0).norm(), 0.0);
}

TEST(OracleMmse, TinyNoise) {
  ScenarioParams p;
  p.noise_var = 1e-8;
  Rng rng = seeded_rng(3);
  const SystemRealization r = draw_realization(p, rng);
  const CMatrix x = oracle_mmse(r.received, r.pilots, r.activity.support(), r.path_gains, p.noise_var);
  EXPECT_LT(nmse(x, r.effective_channels), 1e-6);
}

TEST(Msbl, ZeroObservationCollapses) {
  const auto inst = checks::random_instance(4, 20, 5, 3, 10, 0.1);
  const MsblResult res = msbl(CMatrix::Zero(10, 3), inst.pilots, 0.1, BaselineConfig{});
  EXPECT_LT(res.gammas.maxCoeff(), 1e-3);
  EXPECT_LT(res.means.norm(), 1e-12);
}

TEST(Msbl, SingleUserOrthonormalHighSnr) {
  int success = 0;
  for (int t = 0; t < 100; ++t) {
    Rng rng = seeded_rng(500 + t);
    const int n = 16;
    const CMatrix phi = generate_pilots(n, n, rng, true);
    const int who = std::uniform_int_distribution<int>(0, n - 1)(rng);
    CMatrix x = CMatrix::Zero(4, n);
    x.col(who) = sample_channels(RVector::Ones(1), 4, rng);
    const CMatrix y = synthesize_received(phi, x, 1e-4, rng);
    const MsblResult res = msbl(y, phi, 1e-4, BaselineConfig{});
    std::vector<int> support;
    for (int i = 0; i < n; ++i)
      if (res.gammas[i] / 1e-4 > 100.0) support.push_back(i);
    success += support == std::vector<int>{who};
  }
  EXPECT_GE(success, 99);
}

TEST(Msbl, ConvergedIsFixedPoint) {
  const auto inst = checks::random_instance(6, 24, 6, 3, 12, 0.05);
  BaselineConfig cfg;
  cfg.max_iters = 5000;
  const MsblResult res = msbl(inst.received, inst.pilots, 0.05, cfg);
  ASSERT_TRUE(res.converged);
  RVector again = res.gammas;
  msbl_em_step(inst.received, inst.pilots, 0.05, again);
  EXPECT_LT((again - res.gammas).cwiseAbs().maxCoeff() / res.gammas.maxCoeff(), cfg.tol);
}

TEST(Msbl, LikelihoodMonotone) {
  const auto r = checks::check_msbl_monotone();
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Msbl, LikelihoodHelperMatchesTrace) {
  const auto inst = checks::random_instance(7, 12, 4, 2, 8, 0.1);
  BaselineConfig cfg;
  cfg.max_iters = 1;
  const MsblResult res = msbl(inst.received, inst.pilots, 0.1, cfg);
  EXPECT_NEAR(res.log_likelihood[0], msbl_log_likelihood(inst.received, inst.pilots, RVector::Ones(12), 0.1), 1e-9);
}

TEST(Irw, ZeroLambdaIsLeastSquares) {
  const auto inst = checks::random_instance(8, 6, 3, 2, 10, 0.1);
  const IrwResult res = irw_l21(inst.received, inst.pilots, 0.0, BaselineConfig{});
  const CMatrix residual = inst.received - inst.pilots * res.means.transpose();
  EXPECT_LT((inst.pilots.adjoint() * residual).norm() / inst.received.norm(), 1e-8);
}

TEST(Irw, HugeLambdaShrinksToZero) {
  const auto inst = checks::random_instance(9, 20, 5, 2, 10, 0.1);
  const IrwResult res = irw_l21(inst.received, inst.pilots, 1e9, BaselineConfig{});
  EXPECT_LT(res.means.norm() / inst.truth.norm(), 1e-6);
}

TEST(Irw, ObjectiveMonotone) {
  const auto r = checks::check_irw_monotone();
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Irw, PenaltyMajorizer) {
  // rho(t) <= rho(t0) + rho'(t0) (t^2 - t0^2) / (2 t0) with rho'(t0) = t0 / (t0 + eps).
  const double eps = 0.1;
  for (double t0 : {0.05, 0.3, 2.0})
    for (double t : {0.0, 0.01, 0.2, 1.0, 5.0}) {
      const double bound = irw_penalty(t0, eps) + (t * t - t0 * t0) / (2.0 * (t0 + eps));
      EXPECT_LE(irw_penalty(t, eps), bound + 1e-14);
    }
}

TEST(Irw, BothSolvePathsAgree) {
  const auto inst = checks::random_instance(10, 20, 5, 2, 8, 0.1);
  RVector w(20);
  for (int i = 0; i < 20; ++i) w[i] = 0.3 + 0.2 * i;
  const CMatrix tau_space = detail::weighted_ridge(inst.received, inst.pilots, w, 0.7);
  CMatrix a = inst.pilots.adjoint() * inst.pilots;
  a.diagonal().real() += 0.35 * w;
  const CMatrix n_space = a.ldlt().solve(inst.pilots.adjoint() * inst.received);
  EXPECT_LT(checks::rel_diff(tau_space, n_space), 1e-10);
}

TEST(Baselines, Deterministic) {
  const auto inst = checks::random_instance(11, 20, 5, 2, 8, 0.1);
  EXPECT_EQ(msbl(inst.received, inst.pilots, 0.1, BaselineConfig{}).means,
            msbl(inst.received, inst.pilots, 0.1, BaselineConfig{}).means);
  EXPECT_EQ(irw_l21(inst.received, inst.pilots, 0.5, BaselineConfig{}).means,
            irw_l21(inst.received, inst.pilots, 0.5, BaselineConfig{}).means);
}

TEST(BaselineConfig, Validation) {
  BaselineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.reg_epsilon = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = BaselineConfig{};
  c.lambda = -1.0;
  EXPECT_THROW(c.validate(), Error);
}
