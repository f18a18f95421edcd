#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocol.hpp"

namespace qtomo {

/// Registered-event counts for one run of a protocol.
struct CountsVector {
  std::vector<std::int64_t> counts;
  std::uint64_t seed = 0;
  std::string protocol_name;

  [[nodiscard]] std::int64_t total() const;
  [[nodiscard]] VectorXd as_vector() const;
};

enum class SamplingModel {
  Poisson,      // independent Poisson(λ_j) per setting, fixed acquisition times
  Multinomial,  // fixed total round(Σλ) spread with probabilities λ_j / Σλ
};

using Engine = std::mt19937_64;

/// SplitMix64 mix of (seed, stream): independent per-trial seeds that do not
/// depend on execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Draws one CountsVector. Rates must be finite and nonnegative.
CountsVector sample_counts(const VectorXd& rates, std::uint64_t seed,
                           SamplingModel model = SamplingModel::Poisson);
std::vector<std::int64_t> sample_counts(const VectorXd& rates, Engine& engine,
                                        SamplingModel model = SamplingModel::Poisson);

/// Σ_j t_j tr(X_j^dagger X_j rho).
double expected_total(const Protocol& protocol, const DensityMatrix& rho);
double expected_total(const Protocol& protocol, const StateVector& psi);

}  // namespace qtomo
