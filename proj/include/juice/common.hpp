// SPDX-License-Identifier: Apache-2.0
//
// Shared numeric types and the error type used across the library.

#ifndef JUICE_COMMON_HPP
#define JUICE_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace juice {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Random engine used by every generator. Callers own it; nothing in the
/// library keeps a hidden engine.
using Rng = std::mt19937_64;

enum class ErrorCode {
  NonDivisible,
  BadCount,
  NonPositiveVariance,
  SingularInput,
  DegenerateCavity,
  DimensionMismatch,
  TooLarge,
  ZeroTruth,
  InvalidConfig,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonDivisible: return "NonDivisible";
    case ErrorCode::BadCount: return "BadCount";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::SingularInput: return "SingularInput";
    case ErrorCode::DegenerateCavity: return "DegenerateCavity";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ZeroTruth: return "ZeroTruth";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

/// Circularly-symmetric complex Gaussian draw with E|z|^2 = variance.
inline Complex complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scale = std::sqrt(variance / 2.0);
  const double re = gauss(rng);
  const double im = gauss(rng);
  return {scale * re, scale * im};
}

/// Seeds an engine from a tuple of indices via std::seed_seq so that trials
/// are independent and reproducible.
inline Rng seeded_rng(std::uint64_t master_seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace juice

#endif  // JUICE_COMMON_HPP
