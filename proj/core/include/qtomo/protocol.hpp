#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/state.hpp"

namespace qtomo {

/// One projective setting: the bra X_j (so the amplitude is X_j c), its
/// exposure time t_j and a human-readable label.
struct MeasurementRow {
  VectorXcd amplitudes;
  double exposure = 1.0;
  std::string label;
};

/// Ordered list of measurement rows (the instrumental matrix X) plus exposures.
class Protocol {
 public:
  Protocol(std::string name, int dim, std::vector<MeasurementRow> rows);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int m() const { return static_cast<int>(rows_.size()); }
  [[nodiscard]] const std::vector<MeasurementRow>& rows() const { return rows_; }
  [[nodiscard]] const MeasurementRow& row(int j) const { return rows_[j]; }

  /// m x s matrix whose rows are the X_j.
  [[nodiscard]] MatrixXcd instrumental_matrix() const;
  [[nodiscard]] VectorXd exposures() const;

  /// Same rows, exposures multiplied by `factor` (> 0).
  [[nodiscard]] Protocol scaled(double factor) const;
  /// Same rows, exposures replaced (length m, all > 0).
  [[nodiscard]] Protocol with_exposures(const VectorXd& exposures) const;

 private:
  std::string name_;
  int dim_;
  std::vector<MeasurementRow> rows_;
};

/// Measurement matrix B (m x s^2). Row j is t_j conj(X_j) ⊗ X_j, which maps the
/// column-major vec(rho) to t_j X_j rho X_j^dagger.
struct MeasurementMatrix {
  MatrixXcd entries;
  int dim = 0;

  [[nodiscard]] int m() const { return static_cast<int>(entries.rows()); }
};

/// Column-major vectorization ("second column lies below the first").
VectorXcd vec(const MatrixXcd& rho);
MatrixXcd unvec(const VectorXcd& v, int dim);

/// Waveplate unitary W(delta, theta) = R(theta) diag(1, e^{i delta}) R(-theta).
Eigen::Matrix2cd waveplate(double retardance, double axis_angle);

/// The 16 Stokes-projection settings HH, HV, VV, VH, RH, RV, DV, DH, DR, DD,
/// RD, HD, VD, VL, HL, RL; unit exposures.
Protocol build_j16();

/// All 16 products of the four single-qubit states with Bloch vectors
/// (1,1,1)/√3, (1,-1,-1)/√3, (-1,1,-1)/√3, (-1,-1,1)/√3; unit exposures.
Protocol build_r16();

struct B144Options {
  double retardance1;
  double retardance2;
  std::vector<double> angles1;  // radians
  std::vector<double> angles2;  // radians

  /// Quarter-wave plates on a 12 x 12 grid of axis angles 0°, 15°, ..., 165°.
  static B144Options defaults();
};

/// Two-plate family: row (α, β) is ⟨HH| (W(δ1, α) ⊗ W(δ2, β)), i.e. a fixed
/// polarizer transmitting H1H2 after the plates.
Protocol build_b144(const B144Options& options = B144Options::defaults());

/// Built-in names: "j16", "r16", "b144".
std::optional<Protocol> builtin_protocol(std::string_view name);
std::vector<std::string> builtin_protocol_names();

MeasurementMatrix assemble(const Protocol& protocol);

/// λ_j = t_j tr(X_j^dagger X_j rho) = t_j X_j rho X_j^dagger.
VectorXd predicted_rates(const Protocol& protocol, const DensityMatrix& rho);
VectorXd predicted_rates(const Protocol& protocol, const StateVector& psi);

/// Rescales all exposures by one factor so that Σ_j t_j tr(X_j^dagger X_j rho_ref) = n.
/// `reference` defaults to the maximally mixed state.
Protocol normalize_exposures(const Protocol& protocol, double n,
                             const std::optional<DensityMatrix>& reference = std::nullopt);

/// Σ_j t_j X_j^dagger X_j.
MatrixXcd exposure_weighted_gram(const Protocol& protocol);

}  // namespace qtomo
