#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qtomo/fidstats.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/reconstruct.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/spectral.hpp"
#include "qtomo/state.hpp"

// JSON and CSV serialization for the file formats used by the CLI. All
// parsers throw ValidationError with a message naming the offending field.
namespace qtomo::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a, used to fingerprint protocols in output provenance.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t value);

// State: {"dim": s, "kind": "pure"|"mixed", "data": [[re, im], ...]}
// (s entries for pure, s*s row-major for mixed).
struct LoadedState {
  DensityMatrix rho;
  std::optional<StateVector> psi;
};
LoadedState parse_state(std::string_view json_text);
std::string state_to_json(const StateVector& psi);
std::string state_to_json(const DensityMatrix& rho);

// Protocol: {"name", "dim", "rows": [{"label", "exposure", "amplitudes": [[re, im] x s]}]}
Protocol parse_protocol(std::string_view json_text);
std::string protocol_to_json(const Protocol& protocol);

// Counts: {"protocol": name, "seed": integer, "counts": [integers]}
CountsVector parse_counts(std::string_view json_text);
std::string counts_to_json(const CountsVector& counts);
/// CSV with one row per setting: label,rate,count.
std::string counts_to_csv(const Protocol& protocol, const VectorXd& rates,
                          const CountsVector& counts);

std::string report_to_json(const SpectralReport& report);
/// Human-readable table for terminals.
std::string report_to_text(const SpectralReport& report, std::string_view protocol_name);

std::string spectrum_to_json(const LossSpectrum& spectrum);

/// CSV columns one_minus_F,z (z capped at `z_cap`).
std::string distribution_to_csv(const LossDistribution& dist, double z_cap = kDefaultZCap);
std::string distribution_to_json(const LossDistribution& dist);
/// CSV columns bin_center,density.
std::string histogram_to_csv(const ZHistogram& hist);

/// Density matrices as row-major [re, im] pairs.
std::string result_to_json(const ReconstructionResult& result,
                           std::optional<double> fidelity = std::nullopt);

}  // namespace qtomo::io
