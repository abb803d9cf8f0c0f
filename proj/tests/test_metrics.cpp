// SPDX-License-Identifier: Apache-2.0

#include "juice/metrics.hpp"

#include <gtest/gtest.h>

using namespace juice;

TEST(Nmse, Examples) {
  CMatrix x(2, 2);
  x << Complex(1, 2), 0.5, -1.0, Complex(0, 3);
  EXPECT_EQ(nmse(x, x), 0.0);
  EXPECT_DOUBLE_EQ(nmse(CMatrix::Zero(2, 2), x), 1.0);
  EXPECT_DOUBLE_EQ(nmse(2.0 * x, x), 1.0);
}

TEST(Nmse, Errors) {
  try {
    nmse(CMatrix::Ones(2, 2), CMatrix::Zero(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroTruth);
  }
  EXPECT_THROW(nmse(CMatrix::Ones(2, 3), CMatrix::Ones(2, 2)), Error);
}

TEST(Srr, Examples) {
  EXPECT_EQ(srr({1, 5, 9}, {9, 5, 1}), 1.0);
  EXPECT_EQ(srr({1, 2}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(srr({1, 2, 3}, {2, 3, 4}), 0.5);
  EXPECT_EQ(srr({}, {}), 1.0);
  EXPECT_EQ(srr({}, {3}), 0.0);
  EXPECT_DOUBLE_EQ(srr({2, 2, 3}, {2, 3}), 1.0);
}

TEST(Median, OddEvenEmpty) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
  EXPECT_NEAR(to_db(0.1), -10.0, 1e-12);
}
