#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qtomo/error.hpp"
#include "qtomo/protocol.hpp"

namespace {

using qtomo::cli::CampaignConfig;
using qtomo::cli::CommandOutput;

// Raw flag values; applied on top of the optional --config file.
struct Flags {
  std::optional<std::string> config;
  std::vector<std::string> protocols;
  std::optional<std::string> state;
  std::vector<double> n;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<int> threads;
  std::optional<int> bins;
  std::optional<int> theory_trials;
};

void add_common(CLI::App* cmd, Flags& f, bool campaign) {
  cmd->add_option("--config", f.config, "JSON campaign config; flags override its fields");
  cmd->add_option("-p,--protocol", f.protocols, "Built-in name (r16, j16, b144) or protocol file")
      ->take_all();
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  if (!campaign) return;
  cmd->add_option("--state", f.state, "Named state, family:c1,c2,phi, or state file");
  cmd->add_option("--n", f.n, "Sample size(s)")->take_all();
  cmd->add_option("--trials", f.trials, "Monte Carlo trials per point");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--model", f.model, "pure or mixed")->check(CLI::IsMember({"pure", "mixed"}));
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
}

CampaignConfig build_config(const Flags& f) {
  CampaignConfig c = f.config ? qtomo::cli::load_config(*f.config) : CampaignConfig{};
  if (!f.protocols.empty()) c.protocols = f.protocols;
  if (f.state) c.state = *f.state;
  if (!f.n.empty()) c.n = f.n;
  if (f.trials) c.trials = *f.trials;
  if (f.seed) c.seed = *f.seed;
  if (f.model) c.model = qtomo::parse_state_model(*f.model);
  if (f.out) c.out_dir = *f.out;
  if (f.format) c.format = *f.format == "json" ? qtomo::cli::Format::Json : qtomo::cli::Format::Csv;
  if (f.threads) c.threads = *f.threads;
  if (f.bins) c.bins = *f.bins;
  if (f.theory_trials) c.theory_trials = *f.theory_trials;
  c.validate();
  return c;
}

// With --out the artifacts go to files and the summary to stdout; otherwise
// stdout carries the data and the summary goes to stderr.
void emit(const CampaignConfig& config, const CommandOutput& output, bool summary_only) {
  for (const auto& w : output.warnings) std::cerr << "warning: " << w << '\n';
  if (config.out_dir) {
    qtomo::cli::write_artifacts(config, output);
    std::cout << output.summary;
    for (const auto& a : output.artifacts) {
      std::cout << "wrote " << (*config.out_dir / a.name).string() << '\n';
    }
    return;
  }
  if (summary_only) {
    std::cout << output.summary;
    return;
  }
  for (std::size_t i = 0; i < output.artifacts.size(); ++i) {
    if (output.artifacts.size() > 1) std::cout << (i ? "\n" : "") << "## " << output.artifacts[i].name << '\n';
    std::cout << output.artifacts[i].content;
  }
  std::cerr << output.summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtomo: tomography protocol analysis and accuracy simulation"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-protocols", list, "List built-in protocols");

  Flags f;
  qtomo::cli::SampleOptions sample_opts;
  qtomo::cli::ReconstructOptions rec_opts;
  std::string counts_file;
  std::optional<std::string> reference;
  std::string sampling = "poisson";

  auto* analyze = app.add_subcommand("analyze", "Singular values and condition number of protocols");
  add_common(analyze, f, false);

  auto* simulate = app.add_subcommand("simulate", "Mean fidelity against n, theory and Monte Carlo");
  add_common(simulate, f, true);

  auto* distribution = app.add_subcommand("distribution", "z-densities and loss quantiles");
  add_common(distribution, f, true);
  distribution->add_option("--bins", f.bins, "Histogram bins");
  distribution->add_option("--theory-trials", f.theory_trials, "Draws from the asymptotic law");

  auto* compare = app.add_subcommand("compare", "Rank protocols by condition number and loss");
  add_common(compare, f, true);

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct a state from a counts file");
  add_common(reconstruct, f, true);
  reconstruct->add_option("--counts", counts_file, "Counts JSON file")->required();
  reconstruct->add_option("--reference", reference, "Reference state for fidelity and band check");
  reconstruct->add_option("--theory-trials", f.theory_trials, "Draws used for the band");

  auto* sample = app.add_subcommand("sample", "Draw a counts file for a protocol and state");
  add_common(sample, f, true);
  sample->add_flag("--noiseless", sample_opts.noiseless, "Counts equal to rounded rates");
  sample->add_option("--sampling", sampling, "poisson or multinomial")
      ->check(CLI::IsMember({"poisson", "multinomial"}));

  auto* export_protocol = app.add_subcommand("export-protocol", "Write protocols as JSON files");
  add_common(export_protocol, f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list) {
    for (const auto& name : qtomo::builtin_protocol_names()) {
      std::cout << name << "  (" << qtomo::builtin_protocol(name)->m() << " rows)\n";
    }
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    CampaignConfig config = build_config(f);
    CommandOutput out;
    bool summary_only = false;
    if (analyze->parsed()) {
      out = qtomo::cli::cmd_analyze(config);
      summary_only = !f.format;
    } else if (simulate->parsed()) {
      out = qtomo::cli::cmd_simulate(config);
    } else if (distribution->parsed()) {
      out = qtomo::cli::cmd_distribution(config);
    } else if (compare->parsed()) {
      out = qtomo::cli::cmd_compare(config);
    } else if (reconstruct->parsed()) {
      rec_opts.counts_file = counts_file;
      rec_opts.reference = reference;
      out = qtomo::cli::cmd_reconstruct(config, rec_opts);
    } else if (sample->parsed()) {
      sample_opts.sampling =
          sampling == "poisson" ? qtomo::SamplingModel::Poisson : qtomo::SamplingModel::Multinomial;
      out = qtomo::cli::cmd_sample(config, sample_opts);
    } else {
      out = qtomo::cli::cmd_export_protocol(config);
    }
    emit(config, out, summary_only);
  } catch (const qtomo::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const qtomo::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
