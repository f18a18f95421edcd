#include "qtomo/protocol.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "qtomo/error.hpp"

namespace qtomo {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

VectorXcd bra(const VectorXcd& ket) { return ket.conjugate(); }

VectorXcd bloch_ket(double x, double y, double z) {
  const double theta = std::acos(z);
  const double phi = std::atan2(y, x);
  VectorXcd k(2);
  k << std::cos(theta / 2.0), std::polar(std::sin(theta / 2.0), phi);
  return k;
}

std::string format_degrees(double radians) {
  std::ostringstream os;
  os << std::setprecision(6) << radians / kDegree;
  return os.str();
}

}  // namespace

Protocol::Protocol(std::string name, int dim, std::vector<MeasurementRow> rows)
    : name_(std::move(name)), dim_(dim), rows_(std::move(rows)) {
  if (dim_ < 2) throw ValidationError("protocol dimension must be at least 2");
  if (rows_.empty()) throw ValidationError("protocol needs at least one row");
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const auto& r = rows_[j];
    const std::string where =
        "row " + std::to_string(j + 1) + (r.label.empty() ? "" : " (" + r.label + ")");
    if (r.amplitudes.size() != dim_) {
      throw ValidationError(where + ": expected " + std::to_string(dim_) +
                            " amplitudes, got " + std::to_string(r.amplitudes.size()));
    }
    if (!r.amplitudes.allFinite()) {
      throw ValidationError(where + ": non-finite amplitude");
    }
    if (r.amplitudes.squaredNorm() == 0.0) {
      throw ValidationError(where + ": all amplitudes are zero");
    }
    if (!(r.exposure > 0.0) || !std::isfinite(r.exposure)) {
      throw ValidationError(where + ": exposure must be positive and finite");
    }
  }
}

MatrixXcd Protocol::instrumental_matrix() const {
  MatrixXcd x(m(), dim_);
  for (int j = 0; j < m(); ++j) x.row(j) = rows_[j].amplitudes.transpose();
  return x;
}

VectorXd Protocol::exposures() const {
  VectorXd t(m());
  for (int j = 0; j < m(); ++j) t[j] = rows_[j].exposure;
  return t;
}

Protocol Protocol::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ValidationError("exposure scale factor must be positive and finite");
  }
  auto rows = rows_;
  for (auto& r : rows) r.exposure *= factor;
  return Protocol(name_, dim_, std::move(rows));
}

Protocol Protocol::with_exposures(const VectorXd& exposures) const {
  if (exposures.size() != m()) {
    throw ValidationError("exposure vector length does not match protocol");
  }
  auto rows = rows_;
  for (int j = 0; j < m(); ++j) rows[j].exposure = exposures[j];
  return Protocol(name_, dim_, std::move(rows));
}

VectorXcd vec(const MatrixXcd& rho) {
  return Eigen::Map<const VectorXcd>(rho.data(), rho.size());
}

MatrixXcd unvec(const VectorXcd& v, int dim) {
  if (v.size() != static_cast<Eigen::Index>(dim) * dim) {
    throw ValidationError("unvec: length is not dim^2");
  }
  return Eigen::Map<const MatrixXcd>(v.data(), dim, dim);
}

Eigen::Matrix2cd waveplate(double retardance, double axis_angle) {
  Eigen::Matrix2cd rot;
  const double c = std::cos(axis_angle);
  const double s = std::sin(axis_angle);
  rot << c, -s, s, c;
  Eigen::Matrix2cd phase = Eigen::Matrix2cd::Zero();
  phase(0, 0) = 1.0;
  phase(1, 1) = std::polar(1.0, retardance);
  return rot * phase * rot.transpose();
}

Protocol build_j16() {
  static constexpr const char* kSettings[] = {"HH", "HV", "VV", "VH", "RH", "RV",
                                              "DV", "DH", "DR", "DD", "RD", "HD",
                                              "VD", "VL", "HL", "RL"};
  std::vector<MeasurementRow> rows;
  rows.reserve(16);
  for (const char* s : kSettings) {
    rows.push_back({kron(bra(polarization::ket(s[0])), bra(polarization::ket(s[1]))),
                    1.0, s});
  }
  return Protocol("j16", 4, std::move(rows));
}

Protocol build_r16() {
  const double k = 1.0 / std::sqrt(3.0);
  const VectorXcd tetra[4] = {bloch_ket(k, k, k), bloch_ket(k, -k, -k),
                              bloch_ket(-k, k, -k), bloch_ket(-k, -k, k)};
  std::vector<MeasurementRow> rows;
  rows.reserve(16);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      rows.push_back({kron(bra(tetra[a]), bra(tetra[b])), 1.0,
                      "T" + std::to_string(a + 1) + "T" + std::to_string(b + 1)});
    }
  }
  return Protocol("r16", 4, std::move(rows));
}

B144Options B144Options::defaults() {
  B144Options o;
  o.retardance1 = std::numbers::pi / 2.0;
  o.retardance2 = std::numbers::pi / 2.0;
  for (int i = 0; i < 12; ++i) {
    o.angles1.push_back(15.0 * i * kDegree);
    o.angles2.push_back(15.0 * i * kDegree);
  }
  return o;
}

Protocol build_b144(const B144Options& options) {
  if (options.angles1.empty() || options.angles2.empty()) {
    throw ValidationError("b144: angle grids must be non-empty");
  }
  for (double d : {options.retardance1, options.retardance2}) {
    if (!(d >= 0.0 && d < 2.0 * std::numbers::pi)) {
      throw ValidationError("b144: retardance must lie in [0, 2pi)");
    }
  }
  std::vector<MeasurementRow> rows;
  rows.reserve(options.angles1.size() * options.angles2.size());
  for (double alpha : options.angles1) {
    const VectorXcd first = waveplate(options.retardance1, alpha).row(0).transpose();
    for (double beta : options.angles2) {
      const VectorXcd second = waveplate(options.retardance2, beta).row(0).transpose();
      rows.push_back({kron(first, second), 1.0,
                      "plate(a=" + format_degrees(alpha) + ",b=" + format_degrees(beta) + ")"});
    }
  }
  return Protocol("b144", 4, std::move(rows));
}

std::optional<Protocol> builtin_protocol(std::string_view name) {
  if (name == "j16") return build_j16();
  if (name == "r16") return build_r16();
  if (name == "b144") return build_b144();
  return std::nullopt;
}

std::vector<std::string> builtin_protocol_names() { return {"r16", "j16", "b144"}; }

MeasurementMatrix assemble(const Protocol& protocol) {
  const int s = protocol.dim();
  MeasurementMatrix b;
  b.dim = s;
  b.entries.resize(protocol.m(), static_cast<Eigen::Index>(s) * s);
  for (int j = 0; j < protocol.m(); ++j) {
    const auto& r = protocol.row(j);
    b.entries.row(j) = r.exposure * kron(r.amplitudes.conjugate(), r.amplitudes).transpose();
  }
  return b;
}

VectorXd predicted_rates(const Protocol& protocol, const DensityMatrix& rho) {
  if (rho.dim() != protocol.dim()) {
    throw ValidationError("predicted_rates: state and protocol dimensions differ");
  }
  const MatrixXcd x = protocol.instrumental_matrix();
  const MatrixXcd xr = x * rho.matrix();
  VectorXd rates(protocol.m());
  for (int j = 0; j < protocol.m(); ++j) {
    // X_j rho X_j^dagger; clamp the O(eps) negative drift of PSD inputs
    const double v = xr.row(j).dot(x.row(j)).real();
    rates[j] = protocol.row(j).exposure * std::max(v, 0.0);
  }
  return rates;
}

VectorXd predicted_rates(const Protocol& protocol, const StateVector& psi) {
  if (psi.dim() != protocol.dim()) {
    throw ValidationError("predicted_rates: state and protocol dimensions differ");
  }
  const VectorXcd amp = protocol.instrumental_matrix() * psi.amplitudes();
  return protocol.exposures().cwiseProduct(amp.cwiseAbs2());
}

Protocol normalize_exposures(const Protocol& protocol, double n,
                             const std::optional<DensityMatrix>& reference) {
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("normalize_exposures: n must be positive");
  }
  const DensityMatrix rho = reference.value_or(DensityMatrix(
      MatrixXcd::Identity(protocol.dim(), protocol.dim()) / double(protocol.dim())));
  const double total = predicted_rates(protocol, rho).sum();
  if (!(total > 0.0)) {
    throw NumericalError("normalize_exposures: all predicted rates are zero");
  }
  return protocol.scaled(n / total);
}

MatrixXcd exposure_weighted_gram(const Protocol& protocol) {
  const MatrixXcd x = protocol.instrumental_matrix();
  return x.adjoint() * protocol.exposures().asDiagonal() * x;
}

}  // namespace qtomo
