// SPDX-License-Identifier: Apache-2.0

#include "juice/priors.hpp"
#include "support/property_checks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace juice;

TEST(Slab, ValueAtOrigin) {
  EXPECT_NEAR(slab_log_density(CVector::Zero(1), 1.0), -1.144729886, 1e-9);
  EXPECT_NEAR(slab_log_density(CVector::Zero(4), 1.0), -4.0 * std::log(std::numbers::pi), 1e-12);
}

TEST(Slab, RejectsNonPositiveVariance) {
  try {
    slab_log_density(CVector::Zero(2), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveVariance);
  }
}

TEST(Slab, QuadratureNormalization) {
  for (double g : {1.0, 0.5}) {
    EXPECT_NEAR(checks::slab_quadrature(1, g, 400), 1.0, 1e-6);
    EXPECT_NEAR(checks::slab_quadrature(2, g, 40), 1.0, 1e-6);
  }
}

TEST(Slab, StrictlyDecreasingInEnergy) {
  double previous = slab_log_density(CVector::Zero(3), 0.7);
  for (int k = 1; k < 50; ++k) {
    const CVector x = CVector::Constant(3, Complex(0.1 * k, -0.05 * k));
    const double v = slab_log_density(x, 0.7);
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(ClusterPmf, Values) {
  EXPECT_DOUBLE_EQ(cluster_log_pmf(true, 0.5), std::log(0.5));
  EXPECT_NEAR(cluster_log_pmf(false, 0.1), std::log(0.9), 1e-15);
  for (double eps : {1e-9, 0.1, 0.37, 0.999})
    EXPECT_NEAR(std::exp(cluster_log_pmf(false, eps)) + std::exp(cluster_log_pmf(true, eps)), 1.0, 1e-14);
}

TEST(ClusterPrior, SpikeConvention) {
  const RVector g = RVector::Ones(2);
  EXPECT_EQ(cluster_prior_log_density(CMatrix::Zero(1, 2), false, g), 0.0);
  CMatrix x = CMatrix::Zero(1, 2);
  x(0, 1) = 1e-300;
  EXPECT_EQ(cluster_prior_log_density(x, false, g), -std::numeric_limits<double>::infinity());
  EXPECT_NEAR(cluster_prior_log_density(CMatrix::Zero(1, 2), true, g), -2.0 * std::log(std::numbers::pi), 1e-12);
}

TEST(PriorParams, FloorAndValidation) {
  RVector g(3);
  g << 0.0, 1e-20, 2.0;
  const PriorParams p = make_prior_params(g, 0.2, build_cluster_map(3, 1));
  EXPECT_EQ(p.slab_vars[0], kSlabVarFloor);
  EXPECT_EQ(p.slab_vars[1], kSlabVarFloor);
  EXPECT_EQ(p.slab_vars[2], 2.0);
  EXPECT_THROW(make_prior_params(g, 0.0, build_cluster_map(3, 1)), Error);
  EXPECT_THROW(make_prior_params(g, 1.0, build_cluster_map(3, 1)), Error);
  EXPECT_THROW(make_prior_params(RVector::Ones(2), 0.5, build_cluster_map(3, 1)), Error);
}

// The slab/spike log evidence ratio against a direct 2-D quadrature of
// int CN(x; m, v) CN(x; 0, g) dx divided by CN(0; m, v).
TEST(EvidenceRatio, MatchesQuadrature) {
  struct Case {
    Complex mean;
    double v, g;
  };
  for (const Case& c : {Case{{2.0, 0.0}, 1.0, 1.0}, Case{{0.3, -0.4}, 0.5, 2.0}, Case{{-1.0, 1.5}, 2.0, 0.25}}) {
    const double radius = 10.0;
    const int pts = 1000;
    const double h = 2.0 * radius / pts;
    double z = 0.0;
    for (int a = 0; a < pts; ++a)
      for (int b = 0; b < pts; ++b) {
        const Complex x(-radius + (a + 0.5) * h, -radius + (b + 0.5) * h);
        z += std::exp(-std::norm(x - c.mean) / c.v - std::norm(x) / c.g) / (std::numbers::pi * c.v * std::numbers::pi * c.g);
      }
    z *= h * h;
    const double spike = std::exp(-std::norm(c.mean) / c.v) / (std::numbers::pi * c.v);
    EXPECT_NEAR(slab_spike_log_evidence_ratio(std::norm(c.mean), 1, c.v, c.g), std::log(z / spike), 1e-7);
  }
}

TEST(EvidenceRatio, AntennasAdd) {
  const double one = slab_spike_log_evidence_ratio(0.8, 1, 0.3, 1.2);
  const double two = slab_spike_log_evidence_ratio(0.8 + 1.1, 2, 0.3, 1.2);
  EXPECT_NEAR(two, one + slab_spike_log_evidence_ratio(1.1, 1, 0.3, 1.2), 1e-12);
}

TEST(Logistic, StableAndSymmetric) {
  EXPECT_EQ(logistic(std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_EQ(logistic(-std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_NEAR(logistic(800.0), 1.0, 0.0);
  EXPECT_GT(logistic(-700.0), 0.0);
  for (double t : {-3.0, -0.2, 0.0, 1.7})
    EXPECT_NEAR(logistic(t) + logistic(-t), 1.0, 1e-15);
  EXPECT_NEAR(logistic(prior_log_odds(0.3)), 0.3, 1e-15);
  EXPECT_EQ(prior_log_odds(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_EQ(prior_log_odds(1.0), std::numeric_limits<double>::infinity());
}
