// SPDX-License-Identifier: Apache-2.0

#include "juice/exact_oracle.hpp"
#include "support/property_checks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace juice;

TEST(ExactOracle, SingleClusterForcedActiveIsGaussian) {
  const auto inst = checks::random_instance(1, 5, 1, 3, 4, 0.3);
  RVector g(5);
  g << 0.5, 1.0, 1.5, 2.0, 0.7;
  const ExactPosterior ex = enumerate_posterior(inst.received, inst.pilots, 0.3, g, 1.0, inst.map);
  CMatrix p = inst.pilots.adjoint() * inst.pilots / 0.3;
  p.diagonal().real() += g.cwiseInverse();
  const CMatrix mmse = p.ldlt().solve(inst.pilots.adjoint() * inst.received / 0.3).transpose();
  EXPECT_LT(checks::rel_diff(ex.means, mmse), 1e-12);
  EXPECT_EQ(ex.cluster_probs[0], 1.0);
}

TEST(ExactOracle, NeverActive) {
  const auto inst = checks::random_instance(2, 8, 4, 2, 6, 0.1);
  const ExactPosterior ex = enumerate_posterior(inst.received, inst.pilots, 0.1, inst.slab_vars, 0.0, inst.map);
  EXPECT_EQ(ex.means.norm(), 0.0);
  EXPECT_EQ(ex.cluster_probs.norm(), 0.0);
}

// Y = (2, 0), Phi = I, noise 1, slab variance 1, eps = 1/2. Cluster 1's
// posterior odds are the prior odds (1) times the scalar evidence ratio,
// which a 2-D quadrature puts at e^2 / 2; cluster 2 sees y = 0 and gets 1/2.
TEST(ExactOracle, TwoClusterWorkedExample) {
  const double radius = 12.0;
  const int pts = 1200;
  const double h = 2.0 * radius / pts;
  const Complex y(2.0, 0.0);
  double z = 0.0;
  for (int a = 0; a < pts; ++a)
    for (int b = 0; b < pts; ++b) {
      const Complex x(-radius + (a + 0.5) * h, -radius + (b + 0.5) * h);
      z += std::exp(-std::norm(y - x) - std::norm(x)) / (std::numbers::pi * std::numbers::pi);
    }
  z *= h * h;
  const double spike = std::exp(-std::norm(y)) / std::numbers::pi;
  const double ratio = z / spike;
  EXPECT_NEAR(ratio, std::exp(2.0) / 2.0, 1e-6);

  CMatrix yy(2, 1);
  yy << 2.0, 0.0;
  const ExactPosterior ex =
      enumerate_posterior(yy, CMatrix::Identity(2, 2), 1.0, RVector::Ones(2), 0.5, build_cluster_map(2, 2));
  EXPECT_NEAR(ex.cluster_probs[0], ratio / (1.0 + ratio), 1e-6);
  EXPECT_NEAR(ex.cluster_probs[1], 1.0 / 3.0, 1e-12);
  // The active-branch mean of x_1 is y / 2.
  EXPECT_NEAR(std::abs(ex.means(0, 0) - ex.cluster_probs[0] * 1.0), 0.0, 1e-12);
}

TEST(ExactOracle, WeightsNormalized) {
  for (int k = 0; k < 20; ++k) {
    const auto inst = checks::random_instance(10 + k, 12, 6, 2, 8, 0.05);
    const ExactPosterior ex = enumerate_posterior(inst.received, inst.pilots, 0.05, inst.slab_vars, 0.2, inst.map);
    EXPECT_NEAR(ex.configuration_weights.sum(), 1.0, 1e-12);
    EXPECT_GE(ex.cluster_probs.minCoeff(), 0.0);
    EXPECT_LE(ex.cluster_probs.maxCoeff(), 1.0);
    for (int l = 0; l < 6; ++l) {
      double marginal = 0.0;
      for (int c = 0; c < 64; ++c)
        if ((c >> l) & 1) marginal += ex.configuration_weights[c];
      EXPECT_NEAR(marginal, ex.cluster_probs[l], 1e-12);
    }
  }
}

TEST(ExactOracle, SwappingClustersSwapsProbabilities) {
  const auto inst = checks::random_instance(30, 6, 3, 2, 5, 0.1);
  CMatrix swapped = inst.pilots;
  swapped.col(0).swap(swapped.col(4));
  swapped.col(1).swap(swapped.col(5));
  const ExactPosterior a = enumerate_posterior(inst.received, inst.pilots, 0.1, inst.slab_vars, 0.3, inst.map);
  const ExactPosterior b = enumerate_posterior(inst.received, swapped, 0.1, inst.slab_vars, 0.3, inst.map);
  EXPECT_NEAR(a.cluster_probs[0], b.cluster_probs[2], 1e-12);
  EXPECT_NEAR(a.cluster_probs[2], b.cluster_probs[0], 1e-12);
  EXPECT_NEAR(a.cluster_probs[1], b.cluster_probs[1], 1e-12);
}

TEST(ExactOracle, MoreSignalMoreActivity) {
  // Two single-UE clusters in one dimension sharing the observation.
  CMatrix phi(1, 2);
  phi << 1.0, Complex(0.6, 0.8);
  const ClusterMap map = build_cluster_map(2, 2);
  double previous = -1.0;
  for (double scale : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    const CMatrix y = CMatrix::Constant(1, 1, scale * phi(0, 0));
    const double p = enumerate_posterior(y, phi, 0.2, RVector::Ones(2), 0.3, map).cluster_probs[0];
    EXPECT_GT(p, previous);
    previous = p;
  }
}

TEST(ExactOracle, SpikeRemovesColumns) {
  const auto inst = checks::random_instance(40, 6, 3, 2, 5, 0.1);
  const std::vector<int> active{0, 1, 4, 5};
  const double with_spike = configuration_log_evidence(inst.received, inst.pilots, 0.1, inst.slab_vars, active);
  CMatrix reduced(inst.pilots.rows(), 4);
  reduced << inst.pilots.col(0), inst.pilots.col(1), inst.pilots.col(4), inst.pilots.col(5);
  const double removed = configuration_log_evidence(inst.received, reduced, 0.1, RVector::Ones(4), {0, 1, 2, 3});
  EXPECT_NEAR(with_spike, removed, 1e-10);
}

TEST(ExactOracle, TooLarge) {
  const auto inst = checks::random_instance(41, 13, 13, 1, 4, 0.1);
  try {
    enumerate_posterior(inst.received, inst.pilots, 0.1, inst.slab_vars, 0.2, inst.map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}
