#include "qtomo/spectral.hpp"

#include <limits>

#include <Eigen/SVD>

#include "qtomo/error.hpp"

namespace qtomo {

SvdResult svd_decompose(const MeasurementMatrix& b) {
  if (!b.entries.allFinite()) {
    throw ValidationError("svd_decompose: measurement matrix has non-finite entries");
  }
  Eigen::JacobiSVD<MatrixXcd> svd(b.entries, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

SpectralReport analyze(const MeasurementMatrix& b, double relative_threshold) {
  if (!b.entries.allFinite()) {
    throw ValidationError("analyze: measurement matrix has non-finite entries");
  }
  Eigen::JacobiSVD<MatrixXcd> svd(b.entries);
  const VectorXd& sv = svd.singularValues();
  const int params = b.dim * b.dim;

  SpectralReport r;
  r.m = b.m();
  r.dim = b.dim;
  r.threshold = relative_threshold;
  r.singular_values = VectorXd::Zero(params);
  r.singular_values.head(sv.size()) = sv;

  const double b_max = sv.size() > 0 ? sv[0] : 0.0;
  if (!(b_max > 0.0)) {
    throw NumericalError("analyze: all singular values are zero (degenerate protocol)");
  }
  const double cut = relative_threshold * b_max;
  r.q = static_cast<int>((sv.array() > cut).count());
  r.retained_condition = b_max / sv[r.q - 1];
  r.complete = r.q == params;
  r.adequate = r.m > r.q;
  r.condition_number =
      r.complete ? r.retained_condition : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace qtomo
