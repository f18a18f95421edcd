#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qtomo/fidstats.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/state.hpp"

namespace qtomo::cli {

enum class Format { Csv, Json };

// Mirrors the JSON config file; command-line flags override file values.
struct CampaignConfig {
  std::vector<std::string> protocols;
  std::string state = "phi-";
  std::vector<double> n = {3000.0};
  int trials = 1000;
  std::uint64_t seed = 20240101;
  std::optional<StateModel> model;  // default: pure for pure states, mixed otherwise
  std::optional<std::filesystem::path> out_dir;
  Format format = Format::Csv;
  int threads = 0;
  int bins = 40;
  int theory_trials = 100000;

  void validate() const;
};

CampaignConfig load_config(const std::filesystem::path& path);

/// One output document. `name` is the file name used under --out.
struct Artifact {
  std::string name;
  std::string content;
};

struct CommandOutput {
  std::vector<Artifact> artifacts;
  std::string summary;                 // human-readable text for the terminal
  std::vector<std::string> warnings;   // also embedded in the artifacts
};

/// Built-in names first, then protocol files.
Protocol resolve_protocol(const std::string& ref);

struct ResolvedState {
  DensityMatrix rho;
  std::optional<StateVector> psi;
  std::string spec;
};
/// Named state, "family:c1,c2,phi", or a state file.
ResolvedState resolve_state(const std::string& spec);

/// "fnv1a:<hex>" of the protocol's canonical JSON.
std::string protocol_hash(const Protocol& protocol);

CommandOutput cmd_analyze(const CampaignConfig& config);
CommandOutput cmd_simulate(const CampaignConfig& config);
CommandOutput cmd_distribution(const CampaignConfig& config);
CommandOutput cmd_compare(const CampaignConfig& config);
CommandOutput cmd_export_protocol(const CampaignConfig& config);

struct SampleOptions {
  bool noiseless = false;
  SamplingModel sampling = SamplingModel::Poisson;
};
/// Counts file for one protocol, state and expected total n.
CommandOutput cmd_sample(const CampaignConfig& config, const SampleOptions& options = {});

struct ReconstructOptions {
  std::filesystem::path counts_file;
  std::optional<std::string> reference;
};
CommandOutput cmd_reconstruct(const CampaignConfig& config, const ReconstructOptions& options);

/// Writes artifacts under config.out_dir (created if needed).
void write_artifacts(const CampaignConfig& config, const CommandOutput& output);

}  // namespace qtomo::cli
