#pragma once

#include <optional>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/spectral.hpp"
#include "qtomo/state.hpp"

namespace qtomo {

/// Raw linear-inversion estimate together with the diagonalized system
/// S f = Q (Q = U^dagger T, vec(rho) = V f).
struct PseudoInverseEstimate {
  MatrixXcd raw;  // s x s, not necessarily physical
  VectorXcd f;
  VectorXcd q;
};

/// Moore-Penrose solver with the SVD of B computed once.
class PseudoInverseSolver {
 public:
  explicit PseudoInverseSolver(const MeasurementMatrix& b,
                               double relative_threshold = kDefaultRankThreshold);

  [[nodiscard]] PseudoInverseEstimate solve(const VectorXd& counts) const;
  [[nodiscard]] int rank() const { return rank_; }

 private:
  SvdResult svd_;
  int dim_;
  int rank_;
};

PseudoInverseEstimate pseudo_inverse_estimate(const MeasurementMatrix& b,
                                              const VectorXd& counts,
                                              double relative_threshold = kDefaultRankThreshold);

/// Hermitize, clip negative eigenvalues, renormalize the trace.
/// Throws NumericalError when nothing positive survives the clipping.
DensityMatrix project_to_physical(const MatrixXcd& raw);

/// Poisson log-likelihood Σ_j (k_j ln λ_j - λ_j) with λ from the protocol's
/// exposures as given. 0 ln 0 = 0; returns -inf if λ_j = 0 where k_j > 0.
double log_likelihood(const Protocol& protocol, const VectorXd& counts,
                      const DensityMatrix& rho);

/// Gradient of log_likelihood with respect to rho: Σ_j (k_j/λ_j - 1) t_j X_j^dagger X_j.
MatrixXcd likelihood_gradient(const Protocol& protocol, const VectorXd& counts,
                              const DensityMatrix& rho);

struct MleOptions {
  int rank = 0;                    // purification rank r; 0 means s (full mixed model)
  int max_iterations = 10000;
  double loglik_tolerance = 1e-10; // relative change
  double state_tolerance = 1e-8;   // Frobenius change of rho
  double residual_tolerance = 1e-10;  // relative fixed-point residual |M A - mu A| / |M A|
  double stall_residual = 1e-10;      // residual gate on the loglik / state criteria and on stalls
  double rate_floor = 1e-12;       // λ_j >= rate_floor * Σλ inside k_j/λ_j
  double init_mixing = 1e-3;       // full-rank start: eigenvalues lifted to init_mixing / s
  double threshold = kDefaultRankThreshold;  // pseudo-inverse cut

  static MleOptions pure() {
    MleOptions o;
    o.rank = 1;
    return o;
  }
};

struct ReconstructionResult {
  DensityMatrix rho_pi;
  DensityMatrix rho_mle;
  std::optional<StateVector> psi_mle;  // set in pure (rank-1) mode
  // Intensity-profiled Poisson log-likelihood Σ k ln(κλ) - κλ at rho_mle.
  double loglik = 0.0;
  double intensity = 1.0;  // fitted κ = Σk / Σλ(rho_mle)
  int iterations = 0;
  bool converged = false;
  VectorXcd f_new;
  VectorXcd q_vec;
  std::vector<double> loglik_history;  // one entry per accepted step, starting value first
};

/// Likelihood-equation fixed point on a purified state A (s x r),
/// A <- I^-1 J(rho) A, rho = A A^dagger / tr, with I = Σ t_j X_j^dagger X_j and
/// J = Σ (k_j / λ_j) t_j X_j^dagger X_j. Steps that would lower the
/// log-likelihood are damped by halving the blend weight.
class MleSolver {
 public:
  MleSolver(const Protocol& protocol, MleOptions options = {});

  [[nodiscard]] ReconstructionResult refine(const VectorXd& counts,
                                            const DensityMatrix& init) const;

  [[nodiscard]] const MleOptions& options() const { return options_; }
  [[nodiscard]] int rank() const { return rank_; }

 private:
  MatrixXcd x_;
  VectorXd t_;
  MatrixXcd gram_inv_;
  int dim_;
  int rank_;
  MleOptions options_;
};

ReconstructionResult mle_refine(const Protocol& protocol, const VectorXd& counts,
                                const DensityMatrix& init, const MleOptions& options = {});

/// Pseudo-inverse estimate, physical projection, then MLE refinement.
class Reconstructor {
 public:
  Reconstructor(const Protocol& protocol, MleOptions options = {});

  [[nodiscard]] ReconstructionResult operator()(const VectorXd& counts) const;

 private:
  PseudoInverseSolver pi_;
  MleSolver mle_;
  int m_;
};

ReconstructionResult reconstruct(const Protocol& protocol, const VectorXd& counts,
                                 const MleOptions& options = {});

}  // namespace qtomo
