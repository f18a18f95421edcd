#include "qtomo/sampler.hpp"

#include <cmath>
#include <numeric>

#include "qtomo/error.hpp"

namespace qtomo {

namespace {

void check_rates(const VectorXd& rates) {
  for (Eigen::Index j = 0; j < rates.size(); ++j) {
    if (!std::isfinite(rates[j]) || rates[j] < 0.0) {
      throw ValidationError("sample_counts: rate " + std::to_string(j + 1) +
                            " is negative or not finite");
    }
  }
}

}  // namespace

std::int64_t CountsVector::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

VectorXd CountsVector::as_vector() const {
  VectorXd v(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) v[j] = static_cast<double>(counts[j]);
  return v;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::int64_t> sample_counts(const VectorXd& rates, Engine& engine,
                                        SamplingModel model) {
  check_rates(rates);
  std::vector<std::int64_t> counts(rates.size(), 0);
  if (model == SamplingModel::Poisson) {
    for (Eigen::Index j = 0; j < rates.size(); ++j) {
      if (rates[j] > 0.0) {
        std::poisson_distribution<std::int64_t> pois(rates[j]);
        counts[j] = pois(engine);
      }
    }
    return counts;
  }
  // Sequential binomial splitting of a fixed total.
  const double total_mass = rates.sum();
  double remaining_mass = total_mass;
  auto remaining = static_cast<std::int64_t>(std::llround(remaining_mass));
  for (Eigen::Index j = 0; j < rates.size() && remaining > 0; ++j) {
    if (rates[j] <= 0.0) continue;
    const bool last = remaining_mass - rates[j] <= 1e-12 * total_mass;
    const double p = last ? 1.0 : std::min(1.0, rates[j] / remaining_mass);
    std::binomial_distribution<std::int64_t> bin(remaining, p);
    counts[j] = bin(engine);
    remaining -= counts[j];
    remaining_mass -= rates[j];
  }
  return counts;
}

CountsVector sample_counts(const VectorXd& rates, std::uint64_t seed,
                           SamplingModel model) {
  Engine engine(seed);
  CountsVector c;
  c.counts = sample_counts(rates, engine, model);
  c.seed = seed;
  return c;
}

double expected_total(const Protocol& protocol, const DensityMatrix& rho) {
  return predicted_rates(protocol, rho).sum();
}

double expected_total(const Protocol& protocol, const StateVector& psi) {
  return predicted_rates(protocol, psi).sum();
}

}  // namespace qtomo
