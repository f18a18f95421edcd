#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "qtomo/error.hpp"
#include "qtomo/fidstats.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/reconstruct.hpp"
#include "qtomo/sampler.hpp"
#include "support.hpp"

using namespace qtomo;

namespace {

VectorXd exact_counts(const Protocol& p, const DensityMatrix& rho) {
  return predicted_rates(p, rho);
}

VectorXd poisson_counts(const VectorXd& rates, Engine& engine) {
  const auto k = sample_counts(rates, engine);
  VectorXd v(static_cast<Eigen::Index>(k.size()));
  for (std::size_t j = 0; j < k.size(); ++j) v[j] = static_cast<double>(k[j]);
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile(v, 0.5);
}

const DensityMatrix& phi_minus() {
  static const DensityMatrix rho = density_from_vector(*named_state("phi-"));
  return rho;
}

}  // namespace

TEST(PseudoInverse, NoiselessPhiMinusThroughR16) {
  const Protocol p = build_r16();
  const PseudoInverseEstimate est =
      pseudo_inverse_estimate(assemble(p), exact_counts(p, phi_minus()));
  EXPECT_LT((est.raw - phi_minus().matrix()).norm(), 1e-9);
  EXPECT_EQ(est.f.size(), 16);
  EXPECT_EQ(est.q.size(), 16);
}

TEST(PseudoInverse, NoiselessMaximallyMixed) {
  const Protocol p = build_j16();
  const DensityMatrix mixed(MatrixXcd::Identity(4, 4) / 4.0);
  const PseudoInverseEstimate est = pseudo_inverse_estimate(assemble(p), exact_counts(p, mixed));
  EXPECT_LT((est.raw - mixed.matrix()).norm(), 1e-9);
}

TEST(PseudoInverse, RoundTripOnRandomStatesForAllBuiltins) {
  std::mt19937_64 rng(21);
  for (const auto& name : builtin_protocol_names()) {
    const Protocol p = *builtin_protocol(name);
    const PseudoInverseSolver solver(assemble(p));
    EXPECT_EQ(solver.rank(), 16);
    for (int i = 0; i < 50; ++i) {
      const DensityMatrix rho = random_density_matrix(4, 1 + i % 4, rng);
      const PseudoInverseEstimate est = solver.solve(exact_counts(p, rho));
      EXPECT_LT((est.raw - rho.matrix()).norm(), 1e-8) << name;
    }
  }
}

// Frobenius error of the raw estimate scales as 1/sqrt(n).
TEST(PseudoInverse, ErrorScalesAsInverseRootN) {
  const Protocol base = build_r16();
  Engine engine(31);
  double err[2] = {0.0, 0.0};
  const double ns[2] = {1e4, 1e6};
  int non_psd = 0;
  for (int k = 0; k < 2; ++k) {
    const Protocol p = normalize_exposures(base, ns[k], phi_minus());
    const PseudoInverseSolver solver(assemble(p));
    const VectorXd rates = predicted_rates(p, phi_minus());
    for (int i = 0; i < 200; ++i) {
      const PseudoInverseEstimate est = solver.solve(poisson_counts(rates, engine));
      const MatrixXcd raw = est.raw / est.raw.trace();
      err[k] += (raw - phi_minus().matrix()).norm() / 200.0;
      if (k == 0) {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (raw + raw.adjoint()));
        non_psd += es.eigenvalues()[0] < 0.0;
      }
    }
  }
  EXPECT_NEAR(err[0] / err[1], 10.0, 1.5);
  EXPECT_GT(non_psd, 100);  // a pure truth sits on the boundary
}

TEST(PseudoInverse, RejectsZeroMatrixAndBadCounts) {
  MeasurementMatrix zero;
  zero.dim = 2;
  zero.entries = MatrixXcd::Zero(4, 4);
  EXPECT_THROW(PseudoInverseSolver{zero}, NumericalError);
  const MeasurementMatrix b = assemble(build_j16());
  EXPECT_THROW(pseudo_inverse_estimate(b, VectorXd::Ones(15)), ValidationError);
  VectorXd neg = VectorXd::Ones(16);
  neg[3] = -1.0;
  EXPECT_THROW(pseudo_inverse_estimate(b, neg), ValidationError);
}

TEST(ProjectToPhysical, IdempotentOnPhysicalInput) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const DensityMatrix rho = random_density_matrix(4, 1 + i % 4, rng);
    const DensityMatrix once = project_to_physical(rho.matrix());
    EXPECT_LT(support::max_abs_diff(once.matrix(), rho.matrix()), 1e-12);
    const DensityMatrix twice = project_to_physical(once.matrix());
    EXPECT_LT(support::max_abs_diff(twice.matrix(), once.matrix()), 1e-12);
  }
}

TEST(ProjectToPhysical, ClipsAndRenormalizes) {
  MatrixXcd raw = MatrixXcd::Zero(2, 2);
  raw(0, 0) = 1.2;
  raw(1, 1) = -0.2;
  const DensityMatrix rho = project_to_physical(raw);
  EXPECT_NEAR(rho(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(rho(1, 1)), 0.0, 1e-15);
}

TEST(ProjectToPhysical, HermitizesFirst) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  MatrixXcd a(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a(r, c) = Complex(g(rng), g(rng));
  }
  const MatrixXcd h = 0.5 * (a + a.adjoint());
  EXPECT_LT(support::max_abs_diff(project_to_physical(a).matrix(),
                                  project_to_physical(h).matrix()),
            1e-12);
  EXPECT_NEAR(project_to_physical(a).matrix().trace().real(), 1.0, 1e-12);
}

TEST(ProjectToPhysical, NothingPositiveThrows) {
  EXPECT_THROW(project_to_physical(MatrixXcd::Zero(3, 3)), NumericalError);
  EXPECT_THROW(project_to_physical(-MatrixXcd::Identity(2, 2)), NumericalError);
}

TEST(LogLikelihood, WorkedExamples) {
  const Protocol p = build_j16();
  const VectorXd lam = predicted_rates(p, phi_minus());
  EXPECT_NEAR(log_likelihood(p, VectorXd::Zero(16), phi_minus()), -lam.sum(), 1e-14);

  // Orthogonal state scores strictly lower on noiseless data.
  const DensityMatrix hh = density_from_vector(*named_state("hh"));  // VV row has zero rate
  const DensityMatrix mixed(MatrixXcd::Identity(4, 4) / 4.0);
  VectorXd counts = 1000.0 * predicted_rates(p, mixed);
  EXPECT_GT(log_likelihood(p, counts, mixed), log_likelihood(p, counts, phi_minus()));
  counts = 1000.0 * lam;
  EXPECT_EQ(log_likelihood(p, counts, hh), -std::numeric_limits<double>::infinity());
  const Protocol scaled = p.scaled(1000.0);
  EXPECT_GT(log_likelihood(scaled, counts, phi_minus()), log_likelihood(scaled, counts, mixed));
}

// k = λ makes each term k ln λ - λ stationary in λ.
TEST(LogLikelihood, StationaryTermWhenCountsEqualRates) {
  const Protocol p("one", 2, {{polarization::H(), 1.0, "h"}});
  const DensityMatrix rho(MatrixXcd::Identity(2, 2) / 2.0);
  VectorXd k(1);
  k[0] = 0.5;
  const double h = 1e-5;
  const double up = log_likelihood(p.scaled(1.0 + h), k, rho);
  const double dn = log_likelihood(p.scaled(1.0 - h), k, rho);
  EXPECT_NEAR((up - dn) / (2.0 * h), 0.0, 1e-9);
}

TEST(LogLikelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const Protocol p = normalize_exposures(build_b144(), 5000.0);
  Engine engine(1);
  for (int i = 0; i < 10; ++i) {
    const DensityMatrix rho = random_density_matrix(4, 4, rng);
    const VectorXd counts = poisson_counts(predicted_rates(p, rho), engine);
    const MatrixXcd e = support::traceless(support::random_hermitian(4, rng)) * 1e-2;
    const MatrixXcd grad = likelihood_gradient(p, counts, rho);
    const double h = 1e-4;
    const double fd = (log_likelihood(p, counts, DensityMatrix(rho.matrix() + h * e)) -
                       log_likelihood(p, counts, DensityMatrix(rho.matrix() - h * e))) /
                      (2.0 * h);
    const double analytic = (grad * e).trace().real();
    EXPECT_NEAR(fd, analytic, 1e-5 * std::max(1.0, std::abs(analytic)));
  }
}

TEST(Mle, NoiselessFullRankStateIsFixedPoint) {
  std::mt19937_64 rng(12);
  const Protocol p = build_r16().scaled(1000.0);
  for (int i = 0; i < 5; ++i) {
    const DensityMatrix rho = random_density_matrix(4, 4, rng);
    const VectorXd counts = exact_counts(p, rho);
    const DensityMatrix init(MatrixXcd::Identity(4, 4) / 4.0);
    const ReconstructionResult r = mle_refine(p, counts, init);
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.rho_mle.matrix() - rho.matrix()).norm(), 1e-6);
    EXPECT_NEAR(r.intensity, 1.0, 1e-8);
    EXPECT_LT(likelihood_gradient(p, counts, r.rho_mle).norm(), 1e-8 * counts.sum());
    // Starting at the truth the gradient vanishes to rounding.
    const ReconstructionResult at_truth = mle_refine(p, counts, rho);
    EXPECT_LT(likelihood_gradient(p, counts, at_truth.rho_mle).norm(), 1e-8);
  }
}

TEST(Mle, PureModeRecoversPureState) {
  const Protocol p = build_j16().scaled(500.0);
  const ReconstructionResult r = reconstruct(p, exact_counts(p, phi_minus()), MleOptions::pure());
  ASSERT_TRUE(r.psi_mle.has_value());
  EXPECT_GT(fidelity(*named_state("phi-"), *r.psi_mle), 1.0 - 1e-12);
  EXPECT_TRUE(r.converged);
}

TEST(Mle, LikelihoodNeverDecreases) {
  Engine engine(77);
  std::mt19937_64 rng(78);
  for (const auto& name : builtin_protocol_names()) {
    const Protocol p = normalize_exposures(*builtin_protocol(name), 2000.0);
    for (int rank : {0, 1}) {
      MleOptions opts;
      opts.rank = rank;
      for (int i = 0; i < 10; ++i) {
        const DensityMatrix truth = random_density_matrix(4, rank == 1 ? 1 : 4, rng);
        const VectorXd counts = poisson_counts(predicted_rates(p, truth), engine);
        const ReconstructionResult r = reconstruct(p, counts, opts);
        for (std::size_t k = 1; k < r.loglik_history.size(); ++k) {
          EXPECT_GE(r.loglik_history[k] - r.loglik_history[k - 1], -1e-9) << name;
        }
        EXPECT_TRUE(std::isfinite(r.loglik));
        EXPECT_GE(r.iterations, 0);
      }
    }
  }
}

TEST(Mle, BeatsClippedPseudoInverse) {
  const Protocol p = normalize_exposures(build_r16(), 1e4, phi_minus());
  const Reconstructor rec(p);
  const VectorXd rates = predicted_rates(p, phi_minus());
  Engine engine(4);
  std::vector<double> f_pi, f_mle;
  for (int i = 0; i < 200; ++i) {
    const ReconstructionResult r = rec(poisson_counts(rates, engine));
    f_pi.push_back(fidelity(*named_state("phi-"), r.rho_pi));
    f_mle.push_back(fidelity(*named_state("phi-"), r.rho_mle));
  }
  EXPECT_GT(median(f_mle), median(f_pi));
}

TEST(Mle, MaximallyMixedStartConverges) {
  const Protocol p = normalize_exposures(build_r16(), 1e4, phi_minus());
  const MleSolver solver(p);
  const VectorXd rates = predicted_rates(p, phi_minus());
  const DensityMatrix init(MatrixXcd::Identity(4, 4) / 4.0);
  Engine engine(6);
  std::vector<double> f;
  for (int i = 0; i < 20; ++i) {
    const ReconstructionResult r = solver.refine(poisson_counts(rates, engine), init);
    f.push_back(fidelity(*named_state("phi-"), r.rho_mle));
  }
  EXPECT_GT(median(f), 0.99);
}

TEST(Mle, NonConvergenceIsReportedNotThrown) {
  const Protocol p = normalize_exposures(build_j16(), 1e4, phi_minus());
  Engine engine(8);
  MleOptions opts;
  opts.max_iterations = 1;
  const ReconstructionResult r =
      reconstruct(p, poisson_counts(predicted_rates(p, phi_minus()), engine), opts);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
}

TEST(Mle, IncompleteProtocolAndBadRank) {
  const Protocol p("two", 4, {build_j16().row(0), build_j16().row(1)});
  EXPECT_THROW(MleSolver{p}, NumericalError);
  MleOptions opts;
  opts.rank = 5;
  EXPECT_THROW(MleSolver(build_j16(), opts), ValidationError);
}

TEST(Mle, ZeroCountsAreFlat) {
  const ReconstructionResult r = reconstruct(build_r16(), VectorXd::Ones(16));
  EXPECT_TRUE(r.converged);
  const DensityMatrix init(MatrixXcd::Identity(4, 4) / 4.0);
  const ReconstructionResult z = mle_refine(build_r16(), VectorXd::Zero(16), init);
  EXPECT_TRUE(z.converged);
}

// Median loss of the full pipeline falls as 1/n.
TEST(Consistency, MedianLossSlopeIsMinusOne) {
  const Protocol p = build_r16();
  std::vector<double> x, y;
  for (double n : {1e3, 1e4, 1e5}) {
    EmpiricalOptions opts;
    const EmpiricalLoss e = empirical_loss(p, phi_minus(), n, 300, 99, opts);
    ASSERT_EQ(e.failures, 0);
    x.push_back(std::log10(n));
    y.push_back(std::log10(quantile(e.distribution.samples, 0.5)));
  }
  const double mx = (x[0] + x[1] + x[2]) / 3.0;
  const double my = (y[0] + y[1] + y[2]) / 3.0;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -1.0, 0.15);
}
