#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/reconstruct.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/state.hpp"

namespace qtomo {

enum class StateModel { Pure, Mixed };

/// Whether the source intensity is treated as known or fitted alongside the
/// state. The MLE in this library fits it, so Fitted is the matching choice.
enum class IntensityModel { Fitted, Known };

std::string to_string(StateModel model);
StateModel parse_state_model(std::string_view text);

/// Orthonormal traceless Hermitian basis (generalized Gell-Mann, tr(E_a E_b) = δ_ab).
std::vector<MatrixXcd> hermitian_basis(int dim);

/// ∂λ_j/∂θ_a, m x 2s, for λ_j = t_j |X_j c|^2 / |c|^2 with θ = (Re c, Im c).
MatrixXd rate_jacobian(const Protocol& protocol, const StateVector& psi);
/// ∂λ_j/∂θ_a, m x (s^2 - 1), for λ_j = t_j tr(X_j^dagger X_j (rho + Σ θ_a E_a)).
MatrixXd rate_jacobian(const Protocol& protocol, const DensityMatrix& rho);

struct InformationMatrix {
  MatrixXd matrix;
  StateModel model = StateModel::Pure;
  std::vector<int> zero_rate_rows;  // settings whose rate vanishes at the state
  Protocol protocol;                // exposures normalized to n at the state
};

/// Poisson Fisher information H_ab = Σ_j (1/λ_j) ∂_a λ_j ∂_b λ_j with the
/// exposures first rescaled so the expected total at the state is n. Rows with
/// λ_j = 0 contribute nothing and are reported in zero_rate_rows.
InformationMatrix information_matrix(const Protocol& protocol, const StateVector& psi,
                                     double n);
InformationMatrix information_matrix(const Protocol& protocol, const DensityMatrix& rho,
                                     double n);

struct SpectrumOptions {
  StateModel model = StateModel::Pure;
  IntensityModel intensity = IntensityModel::Fitted;
  double zero_rate_tolerance = 1e-12;  // relative to the largest rate
};

/// Coefficients of 1 - F ≈ Σ_j d_j ξ_j^2, ξ_j ~ N(0, 1).
struct LossSpectrum {
  VectorXd d;  // nonincreasing, all > 0
  int j_max = 0;
  double n = 0.0;
  StateModel kind = StateModel::Pure;
  std::vector<std::string> warnings;
};

/// The asymptotic covariance of the MLE on the gauge-free tangent space is
/// C = A^-1 F A^-1, where F is the Fisher information (plus the log-intensity
/// direction when fitted) and A adds the curvature of rows whose true rate is
/// exactly zero. d are the eigenvalues of G^1/2 C G^1/2 with G the second-order
/// fidelity-loss form (|δc_⊥|^2 for pure states, the Bures form for mixed).
/// Throws NumericalError for an incomplete protocol.
LossSpectrum loss_spectrum(const Protocol& protocol, const StateVector& psi, double n,
                           const SpectrumOptions& options = {});
/// Mixed model needs a full-rank state; a rank-1 state falls back to the pure
/// model with a warning.
LossSpectrum loss_spectrum(const Protocol& protocol, const DensityMatrix& rho, double n,
                           const SpectrumOptions& options = {});

/// ⟨1 - F⟩ = Σ d_j.
double mean_loss(const LossSpectrum& spectrum);

enum class DistributionSource { Theoretical, Empirical };

struct LossDistribution {
  std::vector<double> samples;  // sorted nondecreasing values of 1 - F
  DistributionSource source = DistributionSource::Theoretical;
  double n = 0.0;
  int trials = 0;
};

struct LossSummary {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double median = 0.0;
};

LossSummary summarize(const LossDistribution& dist);

/// Monte Carlo draws of Σ d_j ξ_j^2.
LossDistribution sample_loss(const LossSpectrum& spectrum, int trials, std::uint64_t seed);

/// Linear interpolation between adjacent order statistics (position (N-1)p).
double quantile(const std::vector<double>& sorted, double prob);
std::vector<double> quantiles(const LossDistribution& dist, const std::vector<double>& probs);

struct EmpiricalOptions {
  StateModel model = StateModel::Pure;
  SamplingModel sampling = SamplingModel::Poisson;
  bool noiseless = false;  // counts := rates
  int threads = 0;         // 0 = hardware concurrency
  MleOptions mle{};        // rank is overridden by `model`
  // Rates are generated from this protocol (same m, exposures taken from the
  // normalized analysis protocol) while reconstruction uses the nominal one.
  std::optional<Protocol> generating_protocol;
};

struct EmpiricalLoss {
  LossDistribution distribution;
  int failures = 0;        // reconstructions that threw; excluded from samples
  int non_converged = 0;   // included in samples
};

/// Per trial: exposures normalized to n at rho_true, rates, counts, PI + MLE,
/// fidelity against rho_true. Trial i uses derive_seed(seed, i), so the
/// result is independent of thread scheduling.
EmpiricalLoss empirical_loss(const Protocol& protocol, const DensityMatrix& rho_true,
                             double n, int trials, std::uint64_t seed,
                             const EmpiricalOptions& options = {});

struct HistogramOptions {
  int bins = 40;
  std::optional<double> z_min;
  std::optional<double> z_max;
  double z_cap = kDefaultZCap;
};

struct ZHistogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> density;  // integrates to 1 over the edges
  int capped = 0;               // samples with z beyond the cap, put in the last bin
  double z_cap = kDefaultZCap;
  std::vector<std::string> warnings;

  [[nodiscard]] std::vector<double> centers() const;
};

/// Normalized histogram of z = -log10(1 - F).
ZHistogram density_over_z(const LossDistribution& dist, const HistogramOptions& options = {});

/// [p_lo, p_hi] quantiles of the theoretical loss distribution.
struct FidelityBand {
  double loss_lo = 0.0;
  double loss_hi = 0.0;
  double p_lo = 0.01;
  double p_hi = 0.99;

  [[nodiscard]] double fidelity_lo() const { return 1.0 - loss_hi; }
  [[nodiscard]] double fidelity_hi() const { return 1.0 - loss_lo; }
};

FidelityBand theoretical_band(const LossSpectrum& spectrum, std::uint64_t seed,
                              int trials = 100000, double p_lo = 0.01, double p_hi = 0.99);

}  // namespace qtomo
