// SPDX-License-Identifier: Apache-2.0

#ifndef JUICE_METRICS_HPP
#define JUICE_METRICS_HPP

#include "juice/common.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <vector>

namespace juice {

/// |X_hat - X|_F^2 / |X|_F^2.
inline double nmse(const CMatrix& estimate, const CMatrix& truth) {
  require(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(), ErrorCode::DimensionMismatch,
          "estimate and truth must have the same shape");
  const double energy = truth.squaredNorm();
  require(energy > 0.0, ErrorCode::ZeroTruth, "NMSE is undefined for an all-zero truth");
  return (estimate - truth).squaredNorm() / energy;
}

/// Jaccard index |S_hat ∩ S| / |S_hat ∪ S|; 1 when both sets are empty.
inline double srr(std::vector<int> estimated, std::vector<int> truth) {
  std::sort(estimated.begin(), estimated.end());
  estimated.erase(std::unique(estimated.begin(), estimated.end()), estimated.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  if (estimated.empty() && truth.empty()) return 1.0;
  std::vector<int> common;
  std::set_intersection(estimated.begin(), estimated.end(), truth.begin(), truth.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(estimated.size() + truth.size()) - inter);
}

inline double to_db(double ratio) { return 10.0 * std::log10(ratio); }

inline double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace juice

#endif  // JUICE_METRICS_HPP
