#include "qtomo/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "qtomo/error.hpp"

namespace qtomo {

namespace {

// Hermitian square root with eigenvalues clamped at zero.
MatrixXcd psd_sqrt(const MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m);
  // Eigenvalues below the solver's backward error are rounding noise, and their
  // square roots (~1e-8) would otherwise leak into fidelities of rank-deficient states.
  const double floor = m.rows() * std::numeric_limits<double>::epsilon() *
                       es.eigenvalues().cwiseAbs().maxCoeff();
  const VectorXd roots =
      es.eigenvalues().unaryExpr([floor](double x) { return x > floor ? std::sqrt(x) : 0.0; });
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint();
}

VectorXcd ginibre_column(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = Complex(normal(rng), normal(rng));
  return v;
}

}  // namespace

StateVector::StateVector(VectorXcd amplitudes, double tolerance)
    : amps_(std::move(amplitudes)) {
  if (amps_.size() < 2) {
    throw ValidationError("state vector dimension must be at least 2");
  }
  if (!amps_.allFinite()) {
    throw ValidationError("state vector has non-finite amplitudes");
  }
  const double norm = amps_.norm();
  if (std::abs(norm - 1.0) > tolerance) {
    std::ostringstream msg;
    msg << "state vector is not normalized (norm = " << norm << ")";
    throw ValidationError(msg.str());
  }
}

StateVector StateVector::normalized(VectorXcd amplitudes) {
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("cannot normalize a zero or non-finite vector");
  }
  amplitudes /= norm;
  return StateVector(std::move(amplitudes));
}

DensityMatrix::DensityMatrix(MatrixXcd entries) : rho_(std::move(entries)) {
  if (rho_.rows() != rho_.cols() || rho_.rows() < 2) {
    throw ValidationError("density matrix must be square with dimension >= 2");
  }
  if (!rho_.allFinite()) {
    throw ValidationError("density matrix has non-finite entries");
  }
  const double asym = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTolerance) {
    std::ostringstream msg;
    msg << "density matrix is not Hermitian (max deviation " << asym << ")";
    throw ValidationError(msg.str());
  }
  const double tr = rho_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTolerance) {
    std::ostringstream msg;
    msg << "density matrix trace is " << tr << ", expected 1";
    throw ValidationError(msg.str());
  }
  // Store the exactly Hermitian part so downstream eigensolvers see symmetry.
  rho_ = 0.5 * (rho_ + rho_.adjoint()).eval();
  const double min_eig = eigenvalues().minCoeff();
  if (min_eig < -kPsdTolerance) {
    std::ostringstream msg;
    msg << "density matrix is not positive semidefinite (min eigenvalue "
        << min_eig << ")";
    throw ValidationError(msg.str());
  }
}

VectorXd DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

int DensityMatrix::rank(double relative_tol) const {
  const VectorXd ev = eigenvalues();
  const double cut = relative_tol * ev.maxCoeff();
  return static_cast<int>((ev.array() > cut).count());
}

std::optional<StateVector> DensityMatrix::as_pure(double tol) const {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho_);
  const Eigen::Index top = rho_.rows() - 1;
  if (es.eigenvalues()[top] < 1.0 - tol) return std::nullopt;
  return StateVector::normalized(es.eigenvectors().col(top));
}

DensityMatrix density_from_vector(const StateVector& psi) {
  const VectorXcd& c = psi.amplitudes();
  return DensityMatrix(c * c.adjoint());
}

StateVector family_state(double c1, double c2, double phi) {
  const double sq = c1 * c1 + c2 * c2;
  if (sq == 0.0) {
    throw ValidationError("family state needs c1, c2 not both zero");
  }
  if (std::abs(sq - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "family amplitudes must satisfy c1^2 + c2^2 = 1 (got " << sq << ")";
    throw ValidationError(msg.str());
  }
  VectorXcd v = VectorXcd::Zero(4);
  v[0] = c1;
  v[3] = c2 * std::polar(1.0, phi);
  return StateVector::normalized(std::move(v));
}

double fidelity(const StateVector& psi, const DensityMatrix& rho) {
  if (psi.dim() != rho.dim()) {
    throw ValidationError("fidelity: dimension mismatch");
  }
  const VectorXcd& c = psi.amplitudes();
  const double f = c.dot(rho.matrix() * c).real();
  return std::clamp(f, 0.0, 1.0);
}

double fidelity(const StateVector& psi, const StateVector& chi) {
  if (psi.dim() != chi.dim()) {
    throw ValidationError("fidelity: dimension mismatch");
  }
  return std::clamp(std::norm(psi.amplitudes().dot(chi.amplitudes())), 0.0, 1.0);
}

double fidelity(const DensityMatrix& rho0, const DensityMatrix& rho) {
  if (rho0.dim() != rho.dim()) {
    throw ValidationError("fidelity: dimension mismatch");
  }
  if (auto psi = rho0.as_pure()) return fidelity(*psi, rho);
  if (auto psi = rho.as_pure()) return fidelity(*psi, rho0);
  // Singular values of sqrt(rho0) sqrt(rho) are the square roots of the
  // eigenvalues of sqrt(rho0) rho sqrt(rho0).
  const MatrixXcd prod = psd_sqrt(rho0.matrix()) * psd_sqrt(rho.matrix());
  Eigen::JacobiSVD<MatrixXcd> svd(prod);
  const double tr = svd.singularValues().sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

LossScale loss_scale(double fidelity, double z_cap) {
  if (!(fidelity >= 0.0) || fidelity > 1.0 + 1e-10) {
    throw ValidationError("loss_scale: fidelity must lie in [0, 1]");
  }
  const double loss = 1.0 - std::min(fidelity, 1.0);
  if (loss <= std::pow(10.0, -z_cap)) return {z_cap, true};
  return {-std::log10(loss), false};
}

namespace polarization {

VectorXcd H() { return (VectorXcd(2) << 1.0, 0.0).finished(); }
VectorXcd V() { return (VectorXcd(2) << 0.0, 1.0).finished(); }
VectorXcd D() { return (VectorXcd(2) << 1.0, 1.0).finished() / std::numbers::sqrt2; }
VectorXcd A() { return (VectorXcd(2) << 1.0, -1.0).finished() / std::numbers::sqrt2; }
VectorXcd R() {
  return (VectorXcd(2) << Complex(1.0, 0.0), Complex(0.0, -1.0)).finished() /
         std::numbers::sqrt2;
}
VectorXcd L() {
  return (VectorXcd(2) << Complex(1.0, 0.0), Complex(0.0, 1.0)).finished() /
         std::numbers::sqrt2;
}

VectorXcd ket(char name) {
  switch (name) {
    case 'H': return H();
    case 'V': return V();
    case 'D': return D();
    case 'A': return A();
    case 'R': return R();
    case 'L': return L();
    default:
      throw ValidationError(std::string("unknown polarization '") + name + "'");
  }
}

}  // namespace polarization

std::optional<StateVector> named_state(std::string_view name) {
  constexpr double h = 1.0 / std::numbers::sqrt2;
  VectorXcd v = VectorXcd::Zero(4);
  if (name == "phi-") {
    v[0] = h; v[3] = -h;
  } else if (name == "phi+") {
    v[0] = h; v[3] = h;
  } else if (name == "psi-") {
    v[1] = h; v[2] = -h;
  } else if (name == "psi+") {
    v[1] = h; v[2] = h;
  } else if (name == "hh") {
    v[0] = 1.0;
  } else if (name == "hv") {
    v[1] = 1.0;
  } else if (name == "vh") {
    v[2] = 1.0;
  } else if (name == "vv") {
    v[3] = 1.0;
  } else {
    return std::nullopt;
  }
  return StateVector(std::move(v));
}

StateVector random_pure_state(int dim, std::mt19937_64& rng) {
  return StateVector::normalized(ginibre_column(dim, rng));
}

DensityMatrix random_density_matrix(int dim, int rank, std::mt19937_64& rng) {
  if (rank < 1 || rank > dim) {
    throw ValidationError("random_density_matrix: rank must lie in [1, dim]");
  }
  MatrixXcd g(dim, rank);
  for (int k = 0; k < rank; ++k) g.col(k) = ginibre_column(dim, rng);
  MatrixXcd rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

MatrixXcd random_unitary(int dim, std::mt19937_64& rng) {
  MatrixXcd g(dim, dim);
  for (int k = 0; k < dim; ++k) g.col(k) = ginibre_column(dim, rng);
  Eigen::HouseholderQR<MatrixXcd> qr(g);
  MatrixXcd q = qr.householderQ();
  const MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const Complex d = r(k, k);
    q.col(k) *= d / std::abs(d);
  }
  return q;
}

}  // namespace qtomo
