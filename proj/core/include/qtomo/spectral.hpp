#pragma once

#include "qtomo/linalg.hpp"
#include "qtomo/protocol.hpp"

namespace qtomo {

/// B = U S V^dagger with U (m x m) and V (s^2 x s^2) unitary; `singular`
/// holds the min(m, s^2) diagonal entries of S in nonincreasing order.
struct SvdResult {
  MatrixXcd u;
  VectorXd singular;
  MatrixXcd v;
};

SvdResult svd_decompose(const MeasurementMatrix& b);

inline constexpr double kDefaultRankThreshold = 1e-10;

struct SpectralReport {
  VectorXd singular_values;          // nonincreasing, s^2 entries (zero-padded if m < s^2)
  int q = 0;                         // count above threshold * b_max
  double condition_number = 0.0;     // b_max / b_min; +inf when incomplete
  double retained_condition = 0.0;   // b_max / smallest retained value, always finite
  bool complete = false;             // q == s^2
  bool adequate = false;             // m > q
  int m = 0;
  int dim = 0;
  double threshold = kDefaultRankThreshold;
};

/// Singular values are counted as nonzero above `relative_threshold * b_max`.
/// Throws NumericalError when every singular value is zero.
SpectralReport analyze(const MeasurementMatrix& b,
                       double relative_threshold = kDefaultRankThreshold);

inline SpectralReport analyze(const Protocol& protocol,
                              double relative_threshold = kDefaultRankThreshold) {
  return analyze(assemble(protocol), relative_threshold);
}

}  // namespace qtomo
