#pragma once

#include <optional>
#include <random>
#include <string_view>

#include "qtomo/linalg.hpp"

namespace qtomo {

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kPsdTolerance = 1e-10;

/// Normalized pure state of an s-dimensional system (s >= 2).
class StateVector {
 public:
  /// Validates the norm to `tolerance`; does not rescale.
  explicit StateVector(VectorXcd amplitudes, double tolerance = kNormTolerance);

  /// Divides by the Euclidean norm first. Throws on a zero vector.
  static StateVector normalized(VectorXcd amplitudes);

  [[nodiscard]] int dim() const { return static_cast<int>(amps_.size()); }
  [[nodiscard]] const VectorXcd& amplitudes() const { return amps_; }
  [[nodiscard]] Complex operator[](int i) const { return amps_[i]; }

 private:
  VectorXcd amps_;
};

/// Hermitian, unit-trace, positive semidefinite s x s matrix.
class DensityMatrix {
 public:
  explicit DensityMatrix(MatrixXcd entries);

  [[nodiscard]] int dim() const { return static_cast<int>(rho_.rows()); }
  [[nodiscard]] const MatrixXcd& matrix() const { return rho_; }
  [[nodiscard]] Complex operator()(int r, int c) const { return rho_(r, c); }

  /// Eigenvalues in ascending order.
  [[nodiscard]] VectorXd eigenvalues() const;
  /// Number of eigenvalues above `relative_tol` times the largest.
  [[nodiscard]] int rank(double relative_tol = 1e-10) const;
  /// Dominant eigenvector when the state is pure within `tol`.
  [[nodiscard]] std::optional<StateVector> as_pure(double tol = 1e-10) const;

 private:
  MatrixXcd rho_;
};

DensityMatrix density_from_vector(const StateVector& psi);

/// c1|HH> + c2 e^{i phi}|VV> in the basis order (HH, HV, VH, VV).
/// (c1, c2) is rescaled when c1^2 + c2^2 is within 1e-6 of 1; otherwise rejected.
StateVector family_state(double c1, double c2, double phi);

/// Uhlmann fidelity [Tr sqrt(sqrt(rho0) rho sqrt(rho0))]^2, clamped to [0, 1].
double fidelity(const DensityMatrix& rho0, const DensityMatrix& rho);
double fidelity(const StateVector& psi, const DensityMatrix& rho);
double fidelity(const StateVector& psi, const StateVector& chi);

inline constexpr double kDefaultZCap = 12.0;

struct LossScale {
  double z = 0.0;
  bool saturated = false;  // 1 - F at or below 10^-cap; z reported as the cap
};

/// Number of nines: z = -log10(1 - F).
LossScale loss_scale(double fidelity, double z_cap = kDefaultZCap);

// Single-qubit polarization kets. |R> = (|H> - i|V>)/sqrt2, |L> = (|H> + i|V>)/sqrt2,
// |D> = (|H> + |V>)/sqrt2, |A> = (|H> - |V>)/sqrt2.
namespace polarization {
VectorXcd H();
VectorXcd V();
VectorXcd D();
VectorXcd A();
VectorXcd R();
VectorXcd L();
/// Ket for one of "H", "V", "D", "A", "R", "L".
VectorXcd ket(char name);
}  // namespace polarization

/// Named two-qubit states: "phi-", "phi+", "psi-", "psi+", "hh", "hv", "vh", "vv".
std::optional<StateVector> named_state(std::string_view name);

/// Haar-random pure state.
StateVector random_pure_state(int dim, std::mt19937_64& rng);

/// Random density matrix of the given rank, rho = G G^dagger / tr with G a
/// complex Ginibre dim x rank matrix (rank = dim gives Hilbert-Schmidt measure).
DensityMatrix random_density_matrix(int dim, int rank, std::mt19937_64& rng);

/// Random Haar unitary (QR of a Ginibre matrix with phase fix).
MatrixXcd random_unitary(int dim, std::mt19937_64& rng);

}  // namespace qtomo
