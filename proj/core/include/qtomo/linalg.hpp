#pragma once

#include <complex>

#include <Eigen/Dense>

namespace qtomo {

using Complex = std::complex<double>;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Kronecker product of two complex row/column vectors: (a ⊗ b)[i*|b| + j] = a[i] b[j].
inline VectorXcd kron(const VectorXcd& a, const VectorXcd& b) {
  VectorXcd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.segment(i * b.size(), b.size()) = a[i] * b;
  }
  return out;
}

inline MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Real embedding z -> (Re z, Im z) used for all real-parameter calculus.
inline VectorXd real_embed(const VectorXcd& z) {
  VectorXd out(2 * z.size());
  out.head(z.size()) = z.real();
  out.tail(z.size()) = z.imag();
  return out;
}

inline VectorXcd complex_from_real(const VectorXd& x) {
  const Eigen::Index s = x.size() / 2;
  VectorXcd out(s);
  for (Eigen::Index i = 0; i < s; ++i) out[i] = Complex(x[i], x[s + i]);
  return out;
}

}  // namespace qtomo
