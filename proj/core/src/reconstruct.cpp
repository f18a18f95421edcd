#include "qtomo/reconstruct.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "qtomo/error.hpp"

namespace qtomo {

namespace {

void check_counts(const VectorXd& counts, int m) {
  if (counts.size() != m) {
    throw ValidationError("counts vector has " + std::to_string(counts.size()) +
                          " entries, protocol expects " + std::to_string(m));
  }
  for (Eigen::Index j = 0; j < counts.size(); ++j) {
    if (!std::isfinite(counts[j]) || counts[j] < 0.0) {
      throw ValidationError("count " + std::to_string(j + 1) + " is negative or not finite");
    }
  }
}

// λ_j = t_j |X_j A|^2 / |A|_F^2
VectorXd purified_rates(const MatrixXcd& x, const VectorXd& t, const MatrixXcd& a) {
  const MatrixXcd xa = x * a;
  return t.cwiseProduct(xa.rowwise().squaredNorm()) / a.squaredNorm();
}

// Σ k ln(κ λ) - κ Σλ with κ = Σk / Σλ; λ floored only inside the logarithm.
double profiled_loglik(const VectorXd& rates, const VectorXd& counts, double floor) {
  const double n_obs = counts.sum();
  const double total = rates.sum();
  if (n_obs <= 0.0) return 0.0;
  const double kappa = n_obs / total;
  double l = -n_obs;
  for (Eigen::Index j = 0; j < rates.size(); ++j) {
    if (counts[j] > 0.0) l += counts[j] * std::log(kappa * std::max(rates[j], floor));
  }
  return l;
}

MatrixXcd gram_weighted(const MatrixXcd& x, const VectorXd& w) {
  return x.adjoint() * w.asDiagonal() * x;
}

MatrixXcd to_rho(const MatrixXcd& a) {
  MatrixXcd rho = a * a.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

}  // namespace

PseudoInverseSolver::PseudoInverseSolver(const MeasurementMatrix& b,
                                         double relative_threshold)
    : svd_(svd_decompose(b)), dim_(b.dim) {
  const double cut = relative_threshold * (svd_.singular.size() ? svd_.singular[0] : 0.0);
  if (!(svd_.singular.size() && svd_.singular[0] > 0.0)) {
    throw NumericalError("pseudo-inverse: measurement matrix is zero");
  }
  rank_ = static_cast<int>((svd_.singular.array() > cut).count());
}

PseudoInverseEstimate PseudoInverseSolver::solve(const VectorXd& counts) const {
  check_counts(counts, static_cast<int>(svd_.u.rows()));
  PseudoInverseEstimate est;
  est.q = svd_.u.adjoint() * counts.cast<Complex>();
  est.f = VectorXcd::Zero(svd_.v.cols());
  for (int i = 0; i < rank_; ++i) est.f[i] = est.q[i] / svd_.singular[i];
  est.raw = unvec(svd_.v * est.f, dim_);
  return est;
}

PseudoInverseEstimate pseudo_inverse_estimate(const MeasurementMatrix& b,
                                              const VectorXd& counts,
                                              double relative_threshold) {
  return PseudoInverseSolver(b, relative_threshold).solve(counts);
}

DensityMatrix project_to_physical(const MatrixXcd& raw) {
  if (raw.rows() != raw.cols() || !raw.allFinite()) {
    throw ValidationError("project_to_physical: input must be a finite square matrix");
  }
  const MatrixXcd herm = 0.5 * (raw + raw.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(herm);
  VectorXd p = es.eigenvalues().cwiseMax(0.0);
  const double total = p.sum();
  if (!(total > 0.0)) {
    throw NumericalError("project_to_physical: no positive eigenvalues survive clipping");
  }
  p /= total;
  const MatrixXcd rho = es.eigenvectors() * p.asDiagonal() * es.eigenvectors().adjoint();
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

double log_likelihood(const Protocol& protocol, const VectorXd& counts,
                      const DensityMatrix& rho) {
  check_counts(counts, protocol.m());
  const VectorXd rates = predicted_rates(protocol, rho);
  double l = 0.0;
  for (Eigen::Index j = 0; j < rates.size(); ++j) {
    if (counts[j] > 0.0) {
      if (rates[j] <= 0.0) return -std::numeric_limits<double>::infinity();
      l += counts[j] * std::log(rates[j]);
    }
    l -= rates[j];
  }
  return l;
}

MatrixXcd likelihood_gradient(const Protocol& protocol, const VectorXd& counts,
                              const DensityMatrix& rho) {
  check_counts(counts, protocol.m());
  const VectorXd rates = predicted_rates(protocol, rho);
  const VectorXd t = protocol.exposures();
  VectorXd w(rates.size());
  for (Eigen::Index j = 0; j < rates.size(); ++j) {
    const double ratio = counts[j] > 0.0 ? counts[j] / rates[j] : 0.0;
    w[j] = (ratio - 1.0) * t[j];
  }
  return gram_weighted(protocol.instrumental_matrix(), w);
}

MleSolver::MleSolver(const Protocol& protocol, MleOptions options)
    : x_(protocol.instrumental_matrix()),
      t_(protocol.exposures()),
      dim_(protocol.dim()),
      rank_(options.rank == 0 ? protocol.dim() : options.rank),
      options_(options) {
  if (rank_ < 1 || rank_ > dim_) {
    throw ValidationError("MLE rank must lie in [1, dim]");
  }
  const MatrixXcd gram = gram_weighted(x_, t_);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()[0] > 1e-12 * es.eigenvalues()[dim_ - 1])) {
    throw NumericalError("MLE: Σ t_j X_j^dagger X_j is singular (incomplete protocol)");
  }
  gram_inv_ = gram.inverse();
}

ReconstructionResult MleSolver::refine(const VectorXd& counts,
                                       const DensityMatrix& init) const {
  check_counts(counts, static_cast<int>(x_.rows()));
  if (init.dim() != dim_) throw ValidationError("MLE: initial state dimension mismatch");

  // Purified start: top-r eigenpairs. In the full-rank model eigenvalues are
  // lifted to at least init_mixing / s, since the multiplicative update can
  // never revive a direction that starts at zero.
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(init.matrix());
  MatrixXcd a(dim_, rank_);
  const double lift = rank_ == 1 ? 0.0 : options_.init_mixing / dim_;
  for (int k = 0; k < rank_; ++k) {
    const int idx = dim_ - 1 - k;
    const double p = std::max(es.eigenvalues()[idx], lift);
    a.col(k) = std::sqrt(p) * es.eigenvectors().col(idx);
  }
  a /= a.norm();

  ReconstructionResult res{.rho_pi = init,
                           .rho_mle = init,
                           .psi_mle = std::nullopt,
                           .loglik = 0.0,
                           .intensity = 1.0,
                           .iterations = 0,
                           .converged = false,
                           .f_new = {},
                           .q_vec = {},
                           .loglik_history = {}};
  const double n_obs = counts.sum();

  auto floor_of = [&](const VectorXd& rates) { return options_.rate_floor * rates.sum(); };

  struct Point {
    MatrixXcd a;
    VectorXd rates;
  };
  auto make_point = [&](MatrixXcd m) {
    m /= m.norm();
    VectorXd r = purified_rates(x_, t_, m);
    return Point{std::move(m), std::move(r)};
  };

  // Change of the profiled log-likelihood from `from` to `to`, summed from
  // relative rate changes so that gains far below the rounding of the
  // likelihood itself are still resolved.
  auto gain = [&](const Point& from, const Point& to) {
    const double f0 = floor_of(from.rates);
    const double f1 = floor_of(to.rates);
    double g = 0.0;
    for (Eigen::Index j = 0; j < counts.size(); ++j) {
      if (counts[j] <= 0.0) continue;
      const double l0 = std::max(from.rates[j], f0);
      const double l1 = std::max(to.rates[j], f1);
      g += counts[j] * std::log1p((l1 - l0) / l0);
    }
    const double s0 = from.rates.sum();
    return g - n_obs * std::log1p((to.rates.sum() - s0) / s0);
  };

  // Fixed-point map A -> I^-1 J(A) A, with its normalized residual
  // |M A - mu A| / |M A|, which vanishes exactly at a stationary point.
  auto fixed_point = [&](const Point& p, double& resid) {
    const double floor = floor_of(p.rates);
    VectorXd w(p.rates.size());
    for (Eigen::Index j = 0; j < p.rates.size(); ++j) {
      w[j] = t_[j] * counts[j] / std::max(p.rates[j], floor);
    }
    MatrixXcd ma = gram_inv_ * gram_weighted(x_, w) * p.a;
    const Complex mu = (p.a.adjoint() * ma).trace() / p.a.squaredNorm();
    resid = (ma - mu * p.a).norm() / ma.norm();
    return ma;
  };

  // Gains this small are rounding noise in the rates; the fixed-point step is
  // still taken so the iteration can close in on the maximum.
  const double tie = 64.0 * std::numeric_limits<double>::epsilon() * n_obs;

  Point cur = make_point(a);
  double ll = profiled_loglik(cur.rates, counts, floor_of(cur.rates));
  res.loglik_history.push_back(ll);

  double last_resid = 1.0;
  auto accept = [&](Point next, double dl) {
    const double drho = (to_rho(next.a) - to_rho(cur.a)).norm();
    cur = std::move(next);
    ll = profiled_loglik(cur.rates, counts, floor_of(cur.rates));
    res.loglik_history.push_back(ll);
    return dl / std::max(1.0, std::abs(ll)) < options_.loglik_tolerance &&
           drho < options_.state_tolerance && last_resid < options_.stall_residual;
  };

  // One damped fixed-point step. Returns false when no ascent was found.
  auto damped_step = [&](bool& done) {
    double resid = 0.0;
    const MatrixXcd ma = fixed_point(cur, resid);
    last_resid = resid;
    if (resid < options_.residual_tolerance) {
      done = true;
      return true;
    }
    const MatrixXcd target = ma / ma.norm();
    for (double gamma = 1.0; gamma > 1e-9; gamma *= 0.5) {
      Point trial = make_point((1.0 - gamma) * cur.a + gamma * target);
      const double dl = gain(cur, trial);
      if (dl >= -tie) {
        done = accept(std::move(trial), dl);
        return true;
      }
    }
    // No ascent along the fixed-point direction: stationary up to rounding
    // when the residual is small.
    done = resid < options_.stall_residual;
    return false;
  };

  if (n_obs <= 0.0) {
    // Flat likelihood: nothing to refine.
    res.converged = true;
  }

  // Two damped steps followed by a squared extrapolation (SQUAREM) along the
  // secant they define, backtracked toward the second step if it loses ground.
  int steps = 0;
  while (!res.converged && steps < options_.max_iterations) {
    const MatrixXcd a0 = cur.a;
    bool done = false;
    bool moved = damped_step(done);
    ++steps;
    if (done || !moved) {
      res.converged = done;
      break;
    }
    if (steps >= options_.max_iterations) break;
    const MatrixXcd a1 = cur.a;
    moved = damped_step(done);
    ++steps;
    if (done || !moved) {
      res.converged = done;
      break;
    }
    const MatrixXcd r = a1 - a0;
    const MatrixXcd v = cur.a - a1 - r;
    const double vn = v.norm();
    if (vn <= 0.0) continue;
    double alpha = -r.norm() / vn;
    while (alpha < -1.0 && steps < options_.max_iterations) {
      Point trial = make_point(a0 - 2.0 * alpha * r + alpha * alpha * v);
      const double dl = gain(cur, trial);
      if (dl > tie) {
        res.converged = accept(std::move(trial), dl);
        ++steps;
        break;
      }
      alpha = 0.5 * (alpha - 1.0);
      if (alpha > -1.01) break;
    }
  }
  res.iterations = steps;
  a = cur.a;
  const VectorXd rates = cur.rates;
  const MatrixXcd rho = to_rho(a);

  if (rank_ == 1) {
    VectorXcd c = a.col(0) / a.col(0).norm();
    // Fix the global phase on the largest component for reproducible output.
    Eigen::Index imax = 0;
    c.cwiseAbs().maxCoeff(&imax);
    c *= std::conj(c[imax]) / std::abs(c[imax]);
    res.psi_mle = StateVector::normalized(c);
    res.rho_mle = density_from_vector(*res.psi_mle);
  } else {
    res.rho_mle = DensityMatrix(rho);
  }
  res.loglik = ll;
  res.intensity = n_obs > 0.0 ? n_obs / rates.sum() : 0.0;
  return res;
}

ReconstructionResult mle_refine(const Protocol& protocol, const VectorXd& counts,
                                const DensityMatrix& init, const MleOptions& options) {
  return MleSolver(protocol, options).refine(counts, init);
}

Reconstructor::Reconstructor(const Protocol& protocol, MleOptions options)
    : pi_(assemble(protocol), options.threshold),
      mle_(protocol, options),
      m_(protocol.m()) {}

ReconstructionResult Reconstructor::operator()(const VectorXd& counts) const {
  check_counts(counts, m_);
  PseudoInverseEstimate est = pi_.solve(counts);
  DensityMatrix rho_pi = project_to_physical(est.raw);
  ReconstructionResult res = mle_.refine(counts, rho_pi);
  res.f_new = std::move(est.f);
  res.q_vec = std::move(est.q);
  return res;
}

ReconstructionResult reconstruct(const Protocol& protocol, const VectorXd& counts,
                                 const MleOptions& options) {
  return Reconstructor(protocol, options)(counts);
}

}  // namespace qtomo
