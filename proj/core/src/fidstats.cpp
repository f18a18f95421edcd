#include "qtomo/fidstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "parallel.hpp"
#include "qtomo/error.hpp"
#include "qtomo/spectral.hpp"

namespace qtomo {

namespace {

void require_complete(const Protocol& protocol) {
  const SpectralReport report = analyze(protocol);
  if (!report.complete) {
    throw NumericalError("loss spectrum needs a complete protocol (q = " +
                         std::to_string(report.q) + " < " +
                         std::to_string(protocol.dim() * protocol.dim()) + ")");
  }
}

void require_positive_n(double n) {
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("sample size n must be positive");
}

// Orthonormal basis of the real tangent space {δc : c^dagger δc = 0}, 2s x (2s-2).
MatrixXd pure_tangent_basis(const VectorXcd& c) {
  const int p = static_cast<int>(2 * c.size());
  MatrixXd seed(p, p + 2);
  seed.col(0) = real_embed(c);
  seed.col(1) = real_embed(Complex(0.0, 1.0) * c);
  seed.rightCols(p) = MatrixXd::Identity(p, p);
  Eigen::HouseholderQR<MatrixXd> qr(seed);
  const MatrixXd q = qr.householderQ();
  return q.block(0, 2, p, p - 2);
}

// Real Hessian of |X δc|^2 in (Re δc, Im δc) coordinates.
MatrixXd amplitude_hessian(const VectorXcd& row) {
  const int s = static_cast<int>(row.size());
  VectorXd re(2 * s), im(2 * s);
  re << row.real(), -row.imag();
  im << row.imag(), row.real();
  return 2.0 * (re * re.transpose() + im * im.transpose());
}

// Asymptotic covariance on the tangent coordinates from the per-row rate
// gradients (tangent coordinates), the rates, and the zero-rate curvature.
MatrixXd tangent_covariance(const MatrixXd& grad, const VectorXd& rates,
                            const std::vector<bool>& zero, const MatrixXd& zero_curvature,
                            IntensityModel intensity) {
  const int k = static_cast<int>(grad.cols());
  const int p = intensity == IntensityModel::Fitted ? k + 1 : k;
  MatrixXd fisher = MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < grad.rows(); ++j) {
    if (zero[j]) continue;
    VectorXd d(p);
    d.head(k) = grad.row(j).transpose();
    if (intensity == IntensityModel::Fitted) d[k] = rates[j];  // ∂λ/∂ln κ
    fisher.noalias() += d * d.transpose() / rates[j];
  }
  MatrixXd curvature = fisher;
  curvature.topLeftCorner(k, k) += zero_curvature;

  Eigen::LDLT<MatrixXd> ldlt(curvature);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("information matrix is singular on the tangent space");
  }
  const MatrixXd a_inv = ldlt.solve(MatrixXd::Identity(p, p));
  const MatrixXd cov = a_inv * fisher * a_inv;
  return cov.topLeftCorner(k, k);
}

VectorXd spectrum_from(const MatrixXd& cov, const MatrixXd& loss_form) {
  Eigen::LLT<MatrixXd> llt(loss_form);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("fidelity-loss form is not positive definite");
  }
  const MatrixXd l = llt.matrixL();
  MatrixXd m = l.transpose() * cov * l;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  VectorXd d = es.eigenvalues().reverse();
  if (!(d.minCoeff() > 0.0)) {
    throw NumericalError("loss spectrum has non-positive coefficients");
  }
  return d;
}

std::vector<bool> zero_rate_mask(const VectorXd& rates, double tol) {
  const double cut = tol * rates.maxCoeff();
  std::vector<bool> zero(rates.size());
  for (Eigen::Index j = 0; j < rates.size(); ++j) zero[j] = rates[j] <= cut;
  return zero;
}

LossSpectrum pure_spectrum(const Protocol& protocol, const StateVector& psi, double n,
                           const SpectrumOptions& options) {
  require_positive_n(n);
  require_complete(protocol);
  const Protocol norm = normalize_exposures(protocol, n, density_from_vector(psi));
  const VectorXd rates = predicted_rates(norm, psi);
  const auto zero = zero_rate_mask(rates, options.zero_rate_tolerance);
  const MatrixXd basis = pure_tangent_basis(psi.amplitudes());
  const MatrixXd grad = rate_jacobian(norm, psi) * basis;

  const int k = static_cast<int>(basis.cols());
  MatrixXd zero_curv = MatrixXd::Zero(k, k);
  for (int j = 0; j < norm.m(); ++j) {
    if (!zero[j]) continue;
    zero_curv += norm.row(j).exposure * basis.transpose() *
                 amplitude_hessian(norm.row(j).amplitudes) * basis;
  }
  const MatrixXd cov = tangent_covariance(grad, rates, zero, zero_curv, options.intensity);

  LossSpectrum spec;
  // The tangent basis is orthonormal and 1 - F = |δc_⊥|^2 to second order.
  spec.d = spectrum_from(cov, MatrixXd::Identity(k, k));
  spec.j_max = k;
  spec.n = n;
  spec.kind = StateModel::Pure;
  return spec;
}

// Second-order Bures form: 1 - F ≈ 1/2 Σ_kl |δρ_kl|^2 / (p_k + p_l) in the eigenbasis.
MatrixXd bures_form(const DensityMatrix& rho, const std::vector<MatrixXcd>& basis) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho.matrix());
  const VectorXd& p = es.eigenvalues();
  const MatrixXcd& u = es.eigenvectors();
  const int s = rho.dim();
  std::vector<MatrixXcd> rotated;
  rotated.reserve(basis.size());
  for (const auto& e : basis) rotated.push_back(u.adjoint() * e * u);
  const int k = static_cast<int>(basis.size());
  MatrixXd g(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      double acc = 0.0;
      for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
          acc += (std::conj(rotated[a](r, c)) * rotated[b](r, c)).real() / (p[r] + p[c]);
        }
      }
      g(a, b) = g(b, a) = 0.5 * acc;
    }
  }
  return g;
}

LossSpectrum mixed_spectrum(const Protocol& protocol, const DensityMatrix& rho, double n,
                            const SpectrumOptions& options) {
  require_positive_n(n);
  require_complete(protocol);
  const Protocol norm = normalize_exposures(protocol, n, rho);
  const VectorXd rates = predicted_rates(norm, rho);
  const auto zero = zero_rate_mask(rates, options.zero_rate_tolerance);
  const MatrixXd grad = rate_jacobian(norm, rho);
  const int k = static_cast<int>(grad.cols());
  const MatrixXd cov =
      tangent_covariance(grad, rates, zero, MatrixXd::Zero(k, k), options.intensity);

  LossSpectrum spec;
  spec.d = spectrum_from(cov, bures_form(rho, hermitian_basis(rho.dim())));
  spec.j_max = k;
  spec.n = n;
  spec.kind = StateModel::Mixed;
  return spec;
}

}  // namespace

std::string to_string(StateModel model) {
  return model == StateModel::Pure ? "pure" : "mixed";
}

StateModel parse_state_model(std::string_view text) {
  if (text == "pure") return StateModel::Pure;
  if (text == "mixed") return StateModel::Mixed;
  throw ValidationError("unknown state model '" + std::string(text) + "' (pure|mixed)");
}

std::vector<MatrixXcd> hermitian_basis(int dim) {
  std::vector<MatrixXcd> basis;
  basis.reserve(static_cast<std::size_t>(dim) * dim - 1);
  const double h = 1.0 / std::sqrt(2.0);
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      MatrixXcd sym = MatrixXcd::Zero(dim, dim);
      sym(j, k) = sym(k, j) = h;
      basis.push_back(sym);
      MatrixXcd anti = MatrixXcd::Zero(dim, dim);
      anti(j, k) = Complex(0.0, -h);
      anti(k, j) = Complex(0.0, h);
      basis.push_back(anti);
    }
  }
  for (int l = 1; l < dim; ++l) {
    MatrixXcd diag = MatrixXcd::Zero(dim, dim);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    for (int i = 0; i < l; ++i) diag(i, i) = norm;
    diag(l, l) = -l * norm;
    basis.push_back(diag);
  }
  return basis;
}

MatrixXd rate_jacobian(const Protocol& protocol, const StateVector& psi) {
  if (psi.dim() != protocol.dim()) {
    throw ValidationError("rate_jacobian: dimension mismatch");
  }
  const int s = protocol.dim();
  const VectorXcd& c = psi.amplitudes();
  const MatrixXcd x = protocol.instrumental_matrix();
  const VectorXcd amp = x * c;
  MatrixXd jac(protocol.m(), 2 * s);
  for (int j = 0; j < protocol.m(); ++j) {
    const double t = protocol.row(j).exposure;
    const Complex mbar = std::conj(amp[j]);
    const double m2 = std::norm(amp[j]);
    for (int a = 0; a < s; ++a) {
      const Complex w = mbar * x(j, a);
      jac(j, a) = t * (2.0 * w.real() - 2.0 * m2 * c[a].real());
      jac(j, s + a) = t * (-2.0 * w.imag() - 2.0 * m2 * c[a].imag());
    }
  }
  return jac;
}

MatrixXd rate_jacobian(const Protocol& protocol, const DensityMatrix& rho) {
  if (rho.dim() != protocol.dim()) {
    throw ValidationError("rate_jacobian: dimension mismatch");
  }
  const auto basis = hermitian_basis(protocol.dim());
  const MatrixXcd x = protocol.instrumental_matrix();
  MatrixXd jac(protocol.m(), basis.size());
  for (std::size_t a = 0; a < basis.size(); ++a) {
    const MatrixXcd xe = x * basis[a];
    for (int j = 0; j < protocol.m(); ++j) {
      jac(j, a) = protocol.row(j).exposure * xe.row(j).dot(x.row(j)).real();
    }
  }
  return jac;
}

InformationMatrix information_matrix(const Protocol& protocol, const StateVector& psi,
                                     double n) {
  require_positive_n(n);
  const Protocol norm = normalize_exposures(protocol, n, density_from_vector(psi));
  const VectorXd rates = predicted_rates(norm, psi);
  const MatrixXd jac = rate_jacobian(norm, psi);
  const auto zero = zero_rate_mask(rates, 1e-12);
  InformationMatrix info{MatrixXd::Zero(jac.cols(), jac.cols()), StateModel::Pure, {}, norm};
  for (int j = 0; j < norm.m(); ++j) {
    if (zero[j]) {
      info.zero_rate_rows.push_back(j);
      continue;
    }
    info.matrix.noalias() += jac.row(j).transpose() * jac.row(j) / rates[j];
  }
  return info;
}

InformationMatrix information_matrix(const Protocol& protocol, const DensityMatrix& rho,
                                     double n) {
  require_positive_n(n);
  const Protocol norm = normalize_exposures(protocol, n, rho);
  const VectorXd rates = predicted_rates(norm, rho);
  const MatrixXd jac = rate_jacobian(norm, rho);
  const auto zero = zero_rate_mask(rates, 1e-12);
  InformationMatrix info{MatrixXd::Zero(jac.cols(), jac.cols()), StateModel::Mixed, {}, norm};
  for (int j = 0; j < norm.m(); ++j) {
    if (zero[j]) {
      info.zero_rate_rows.push_back(j);
      continue;
    }
    info.matrix.noalias() += jac.row(j).transpose() * jac.row(j) / rates[j];
  }
  return info;
}

LossSpectrum loss_spectrum(const Protocol& protocol, const StateVector& psi, double n,
                           const SpectrumOptions& options) {
  if (psi.dim() != protocol.dim()) {
    throw ValidationError("loss_spectrum: dimension mismatch");
  }
  LossSpectrum spec = pure_spectrum(protocol, psi, n, options);
  if (options.model == StateModel::Mixed) {
    spec.warnings.push_back(
        "pure state lies on the boundary of the mixed model; using the pure model");
  }
  return spec;
}

LossSpectrum loss_spectrum(const Protocol& protocol, const DensityMatrix& rho, double n,
                           const SpectrumOptions& options) {
  if (rho.dim() != protocol.dim()) {
    throw ValidationError("loss_spectrum: dimension mismatch");
  }
  const int rank = rho.rank();
  if (options.model == StateModel::Pure || rank == 1) {
    auto psi = rho.as_pure();
    if (!psi) {
      throw ValidationError("pure model requested for a mixed state (rank " +
                            std::to_string(rank) + ")");
    }
    return loss_spectrum(protocol, *psi, n, options);
  }
  if (rank < rho.dim()) {
    throw ValidationError("mixed model needs a full-rank state (rank " +
                          std::to_string(rank) + " < " + std::to_string(rho.dim()) + ")");
  }
  return mixed_spectrum(protocol, rho, n, options);
}

double mean_loss(const LossSpectrum& spectrum) { return spectrum.d.sum(); }

LossSummary summarize(const LossDistribution& dist) {
  LossSummary s;
  const auto& v = dist.samples;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stderr_mean = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  s.median = quantile(v, 0.5);
  return s;
}

LossDistribution sample_loss(const LossSpectrum& spectrum, int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("sample_loss: trials must be at least 1");
  Engine engine(seed);
  std::normal_distribution<double> normal;
  LossDistribution dist;
  dist.samples.resize(trials);
  for (double& sample : dist.samples) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < spectrum.d.size(); ++j) {
      const double xi = normal(engine);
      acc += spectrum.d[j] * xi * xi;
    }
    sample = acc;
  }
  std::sort(dist.samples.begin(), dist.samples.end());
  dist.source = DistributionSource::Theoretical;
  dist.n = spectrum.n;
  dist.trials = trials;
  return dist;
}

double quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw ValidationError("quantile of an empty distribution");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability outside [0, 1]");
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> quantiles(const LossDistribution& dist, const std::vector<double>& probs) {
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile(dist.samples, p));
  return out;
}

EmpiricalLoss empirical_loss(const Protocol& protocol, const DensityMatrix& rho_true,
                             double n, int trials, std::uint64_t seed,
                             const EmpiricalOptions& options) {
  require_positive_n(n);
  if (trials < 1) throw ValidationError("empirical_loss: trials must be at least 1");
  if (rho_true.dim() != protocol.dim()) {
    throw ValidationError("empirical_loss: dimension mismatch");
  }
  const std::optional<StateVector> psi = rho_true.as_pure();
  if (options.model == StateModel::Pure && !psi) {
    throw ValidationError("pure reconstruction model needs a pure true state");
  }

  const Protocol norm = normalize_exposures(protocol, n, rho_true);
  VectorXd rates;
  if (options.generating_protocol) {
    if (options.generating_protocol->m() != norm.m() ||
        options.generating_protocol->dim() != norm.dim()) {
      throw ValidationError("generating protocol shape differs from the analysis protocol");
    }
    rates = predicted_rates(options.generating_protocol->with_exposures(norm.exposures()),
                            rho_true);
  } else {
    rates = predicted_rates(norm, rho_true);
  }

  MleOptions mle = options.mle;
  mle.rank = options.model == StateModel::Pure ? 1 : 0;
  const Reconstructor reconstructor(norm, mle);

  std::vector<double> loss(trials, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(trials, 0), unconverged(trials, 0);
  detail::parallel_for(trials, options.threads, [&](int i) {
    try {
      VectorXd counts;
      if (options.noiseless) {
        counts = rates;
      } else {
        Engine engine(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const auto k = sample_counts(rates, engine, options.sampling);
        counts.resize(static_cast<Eigen::Index>(k.size()));
        for (std::size_t j = 0; j < k.size(); ++j) counts[j] = static_cast<double>(k[j]);
      }
      const ReconstructionResult r = reconstructor(counts);
      double f = 0.0;
      if (psi && r.psi_mle) {
        f = fidelity(*psi, *r.psi_mle);
      } else if (psi) {
        f = fidelity(*psi, r.rho_mle);
      } else {
        f = fidelity(rho_true, r.rho_mle);
      }
      loss[i] = std::max(0.0, 1.0 - f);
      unconverged[i] = r.converged ? 0 : 1;
    } catch (const std::exception&) {
      failed[i] = 1;
    }
  });

  EmpiricalLoss out;
  out.distribution.source = DistributionSource::Empirical;
  out.distribution.n = n;
  out.distribution.trials = trials;
  for (int i = 0; i < trials; ++i) {
    if (failed[i]) {
      ++out.failures;
      continue;
    }
    out.non_converged += unconverged[i];
    out.distribution.samples.push_back(loss[i]);
  }
  std::sort(out.distribution.samples.begin(), out.distribution.samples.end());
  return out;
}

std::vector<double> ZHistogram::centers() const {
  std::vector<double> c;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c.push_back(0.5 * (edges[i] + edges[i + 1]));
  return c;
}

ZHistogram density_over_z(const LossDistribution& dist, const HistogramOptions& options) {
  if (dist.samples.empty()) throw ValidationError("density_over_z: empty distribution");
  if (options.bins < 1) throw ValidationError("density_over_z: bins must be at least 1");
  ZHistogram h;
  h.z_cap = options.z_cap;
  std::vector<double> z;
  z.reserve(dist.samples.size());
  for (double loss : dist.samples) {
    if (loss <= std::pow(10.0, -options.z_cap)) {
      z.push_back(options.z_cap);
      ++h.capped;
    } else {
      z.push_back(-std::log10(std::min(loss, 1.0)));
    }
  }
  if (h.capped > 0) {
    h.warnings.push_back(std::to_string(h.capped) + " sample(s) with z beyond the cap " +
                         std::to_string(options.z_cap) + " counted in the last bin");
  }
  const auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
  double lo = options.z_min.value_or(*zmin_it);
  double hi = options.z_max.value_or(*zmax_it);
  if (!(hi - lo > 1e-12)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / options.bins;
  for (int b = 0; b <= options.bins; ++b) h.edges.push_back(lo + b * width);
  h.density.assign(options.bins, 0.0);
  const double mass = 1.0 / (static_cast<double>(z.size()) * width);
  for (double v : z) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, options.bins - 1);
    h.density[b] += mass;
  }
  return h;
}

FidelityBand theoretical_band(const LossSpectrum& spectrum, std::uint64_t seed, int trials,
                              double p_lo, double p_hi) {
  const LossDistribution dist = sample_loss(spectrum, trials, seed);
  FidelityBand band;
  band.p_lo = p_lo;
  band.p_hi = p_hi;
  band.loss_lo = quantile(dist.samples, p_lo);
  band.loss_hi = quantile(dist.samples, p_hi);
  return band;
}

}  // namespace qtomo
