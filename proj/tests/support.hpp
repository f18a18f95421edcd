#pragma once

#include <random>

#include "qtomo/linalg.hpp"
#include "qtomo/state.hpp"

namespace qtomo::support {

inline MatrixXcd random_hermitian(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXcd a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = Complex(g(rng), g(rng));
  }
  return 0.5 * (a + a.adjoint());
}

inline MatrixXcd traceless(MatrixXcd h) {
  const Complex tr = h.trace() / static_cast<double>(h.rows());
  h.diagonal().array() -= tr;
  return h;
}

inline double max_abs_diff(const MatrixXcd& a, const MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace qtomo::support
