#include <benchmark/benchmark.h>

#include "qtomo/fidstats.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/reconstruct.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/spectral.hpp"

using namespace qtomo;

namespace {

Protocol protocol_at(int index) {
  switch (index) {
    case 0: return build_r16();
    case 1: return build_j16();
    default: return build_b144();
  }
}

const DensityMatrix& phi_minus() {
  static const DensityMatrix rho = density_from_vector(*named_state("phi-"));
  return rho;
}

void BM_Analyze(benchmark::State& state) {
  const Protocol p = protocol_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(analyze(p));
  state.SetLabel(p.name());
}
BENCHMARK(BM_Analyze)->DenseRange(0, 2);

// One Monte Carlo reconstruction at n = 3000: sampling, pseudo-inverse, MLE.
void BM_Reconstruct(benchmark::State& state) {
  const Protocol p = normalize_exposures(protocol_at(static_cast<int>(state.range(0))), 3000.0,
                                         phi_minus());
  const int rank = static_cast<int>(state.range(1));
  MleOptions options;
  options.rank = rank;
  const Reconstructor rec(p, options);
  const VectorXd rates = predicted_rates(p, phi_minus());
  Engine engine(1);
  for (auto _ : state) {
    const CountsVector k{sample_counts(rates, engine)};
    benchmark::DoNotOptimize(rec(k.as_vector()));
  }
  state.SetLabel(p.name() + (rank == 1 ? " pure" : " mixed"));
}
BENCHMARK(BM_Reconstruct)->ArgsProduct({{0, 1, 2}, {1}})->Args({1, 0})->Unit(benchmark::kMicrosecond);

void BM_LossSpectrum(benchmark::State& state) {
  const Protocol p = protocol_at(static_cast<int>(state.range(0)));
  const StateVector psi = *named_state("phi-");
  for (auto _ : state) benchmark::DoNotOptimize(loss_spectrum(p, psi, 3000.0));
  state.SetLabel(p.name());
}
BENCHMARK(BM_LossSpectrum)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_SampleLoss(benchmark::State& state) {
  const LossSpectrum s = loss_spectrum(build_r16(), *named_state("phi-"), 3000.0);
  for (auto _ : state) benchmark::DoNotOptimize(sample_loss(s, 100000, 7));
}
BENCHMARK(BM_SampleLoss)->Unit(benchmark::kMillisecond);

void BM_EmpiricalLoss(benchmark::State& state) {
  const Protocol p = protocol_at(static_cast<int>(state.range(0)));
  EmpiricalOptions options;
  options.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_loss(p, phi_minus(), 3000.0, 200, 11, options));
  }
  state.SetLabel(p.name() + ", 200 trials");
}
BENCHMARK(BM_EmpiricalLoss)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
