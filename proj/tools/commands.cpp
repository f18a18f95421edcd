#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "qtomo/error.hpp"
#include "qtomo/io.hpp"
#include "qtomo/reconstruct.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/spectral.hpp"

namespace qtomo::cli {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string model_name(std::optional<StateModel> m) {
  return m ? to_string(*m) : std::string("auto");
}

json base_provenance(const std::string& command, const CampaignConfig& config,
                     const std::vector<Protocol>& protocols) {
  json protos = json::array();
  for (std::size_t i = 0; i < protocols.size(); ++i) {
    protos.push_back({{"ref", config.protocols[i]},
                      {"name", protocols[i].name()},
                      {"m", protocols[i].m()},
                      {"hash", protocol_hash(protocols[i])}});
  }
  return {{"tool", "qtomo"},     {"version", kVersion},     {"command", command},
          {"protocols", protos}, {"state", config.state},   {"n", config.n},
          {"trials", config.trials}, {"seed", config.seed}, {"model", model_name(config.model)}};
}

// Provenance as '#'-prefixed lines ahead of the CSV header.
std::string csv_preamble(const json& prov) {
  std::ostringstream os;
  for (const auto& [key, value] : prov.items()) {
    os << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
       << '\n';
  }
  return os.str();
}

std::string csv_warnings(const std::vector<std::string>& warnings) {
  std::string out;
  for (const auto& w : warnings) out += "# warning: " + w + '\n';
  return out;
}

std::vector<Protocol> load_protocols(const CampaignConfig& config, std::size_t min_count) {
  if (config.protocols.size() < min_count) {
    throw ValidationError(min_count == 1 ? "at least one --protocol is required"
                                         : "at least " + std::to_string(min_count) +
                                               " protocols are required");
  }
  std::vector<Protocol> out;
  out.reserve(config.protocols.size());
  for (const auto& ref : config.protocols) out.push_back(resolve_protocol(ref));
  return out;
}

StateModel resolve_model(const CampaignConfig& config, const ResolvedState& state) {
  if (!config.model) return state.psi ? StateModel::Pure : StateModel::Mixed;
  if (*config.model == StateModel::Pure && !state.psi) {
    throw ValidationError("--model pure requires a pure state; '" + state.spec + "' is mixed");
  }
  return *config.model;
}

LossSpectrum spectrum_for(const Protocol& protocol, const ResolvedState& state, double n,
                          StateModel model) {
  SpectrumOptions opts;
  opts.model = model;
  if (model == StateModel::Pure) return loss_spectrum(protocol, *state.psi, n, opts);
  return loss_spectrum(protocol, state.rho, n, opts);
}

std::uint64_t point_seed(std::uint64_t seed, double n) {
  return derive_seed(seed, static_cast<std::uint64_t>(std::llround(n)));
}

constexpr std::uint64_t kTheoryStream = 0x7468656f7279ULL;

EmpiricalLoss run_empirical(const Protocol& protocol, const ResolvedState& state, double n,
                            const CampaignConfig& config, StateModel model) {
  EmpiricalOptions opts;
  opts.model = model;
  opts.threads = config.threads;
  return empirical_loss(protocol, state.rho, n, config.trials, point_seed(config.seed, n), opts);
}

void note_failures(const EmpiricalLoss& emp, const std::string& where, int trials,
                   std::vector<std::string>& warnings) {
  if (emp.failures > 0.05 * trials) {
    warnings.push_back(where + ": " + std::to_string(emp.failures) + " of " +
                       std::to_string(trials) + " reconstructions failed");
  }
}

std::vector<double> z_values(const LossDistribution& dist, double cap) {
  std::vector<double> z;
  z.reserve(dist.samples.size());
  for (double loss : dist.samples) z.push_back(loss_scale(1.0 - loss, cap).z);
  std::sort(z.begin(), z.end());
  return z;
}

const std::vector<double> kQuantileProbs = {0.01, 0.25, 0.5, 0.75, 0.99};

}  // namespace

void CampaignConfig::validate() const {
  if (trials < 1) throw ValidationError("trials must be at least 1");
  if (n.empty()) throw ValidationError("at least one sample size n is required");
  for (double v : n) {
    if (!std::isfinite(v) || v < 1.0) throw ValidationError("every n must be at least 1");
  }
  if (bins < 1) throw ValidationError("bins must be at least 1");
  if (theory_trials < 2) throw ValidationError("theory trials must be at least 2");
  if (threads < 0) throw ValidationError("threads must be nonnegative");
}

CampaignConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError("config file: invalid JSON (" + std::string(e.what()) + ")");
  }
  if (!doc.is_object()) throw ValidationError("config file: expected a JSON object");
  CampaignConfig c;
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "protocols" || key == "protocol") {
        c.protocols = v.is_array() ? v.get<std::vector<std::string>>()
                                   : std::vector<std::string>{v.get<std::string>()};
      } else if (key == "state") {
        c.state = v.get<std::string>();
      } else if (key == "n") {
        c.n = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      } else if (key == "trials") {
        c.trials = v.get<int>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "model") {
        c.model = parse_state_model(v.get<std::string>());
      } else if (key == "out" || key == "output_dir") {
        c.out_dir = v.get<std::string>();
      } else if (key == "format") {
        const auto f = v.get<std::string>();
        if (f != "csv" && f != "json") throw ValidationError("config file: format must be csv or json");
        c.format = f == "csv" ? Format::Csv : Format::Json;
      } else if (key == "threads") {
        c.threads = v.get<int>();
      } else if (key == "bins") {
        c.bins = v.get<int>();
      } else if (key == "theory_trials") {
        c.theory_trials = v.get<int>();
      } else {
        throw ValidationError("config file: unknown field \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError("config file: wrong value type (" + std::string(e.what()) + ")");
  }
  return c;
}

Protocol resolve_protocol(const std::string& ref) {
  if (auto p = builtin_protocol(ref)) return *p;
  if (!std::filesystem::exists(ref)) {
    std::string names;
    for (const auto& n : builtin_protocol_names()) names += (names.empty() ? "" : ", ") + n;
    throw ValidationError("unknown protocol '" + ref + "' (not a built-in [" + names +
                          "] and no such file)");
  }
  return io::parse_protocol(io::read_file(ref));
}

ResolvedState resolve_state(const std::string& spec) {
  if (auto psi = named_state(spec)) return {density_from_vector(*psi), psi, spec};
  if (spec.rfind("family:", 0) == 0) {
    std::vector<double> v;
    std::stringstream ss(spec.substr(7));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ValidationError("state '" + spec + "': '" + item + "' is not a number");
      }
    }
    if (v.size() != 3) throw ValidationError("state '" + spec + "': expected family:c1,c2,phi");
    const StateVector psi = family_state(v[0], v[1], v[2]);
    return {density_from_vector(psi), psi, spec};
  }
  if (!std::filesystem::exists(spec)) {
    throw ValidationError("unknown state '" + spec +
                          "' (expected a named state, family:c1,c2,phi or a state file)");
  }
  io::LoadedState loaded = io::parse_state(io::read_file(spec));
  return {loaded.rho, loaded.psi, spec};
}

std::string protocol_hash(const Protocol& protocol) {
  return "fnv1a:" + io::hex64(io::fnv1a(io::protocol_to_json(protocol)));
}

CommandOutput cmd_analyze(const CampaignConfig& config) {
  const auto protocols = load_protocols(config, 1);
  json prov = base_provenance("analyze", config, protocols);
  prov.erase("state");
  prov.erase("n");
  prov.erase("trials");
  prov.erase("model");
  prov.erase("seed");

  CommandOutput out;
  json reports = json::array();
  std::ostringstream csv;
  csv << csv_preamble(prov) << "protocol,m,q,K,retained_K,complete,adequate\n";
  for (const auto& p : protocols) {
    const SpectralReport r = analyze(p);
    json rj = json::parse(io::report_to_json(r));
    rj["protocol"] = p.name();
    reports.push_back(rj);
    csv << csv_field(p.name()) << ',' << r.m << ',' << r.q << ',' << num(r.condition_number)
        << ',' << num(r.retained_condition) << ',' << (r.complete ? "complete" : "incomplete")
        << ',' << (r.adequate ? "adequate" : "not-adequate") << '\n';
    out.summary += io::report_to_text(r, p.name()) + '\n';
  }
  if (config.format == Format::Json) {
    out.artifacts.push_back({"analyze.json", json{{"config", prov}, {"reports", reports}}.dump(2) + '\n'});
  } else {
    out.artifacts.push_back({"analyze.csv", csv.str()});
  }
  return out;
}

CommandOutput cmd_simulate(const CampaignConfig& config) {
  config.validate();
  const auto protocols = load_protocols(config, 1);
  const ResolvedState state = resolve_state(config.state);
  const StateModel model = resolve_model(config, state);
  json prov = base_provenance("simulate", config, protocols);
  prov["model"] = to_string(model);

  CommandOutput out;
  json rows = json::array();
  std::ostringstream body;
  body << "protocol,n,F_theory,F_empirical,stderr,trials,seed,failures\n";
  std::ostringstream summary;
  for (const auto& p : protocols) {
    for (double n : config.n) {
      const LossSpectrum spec = spectrum_for(p, state, n, model);
      for (const auto& w : spec.warnings) out.warnings.push_back(p.name() + ": " + w);
      const EmpiricalLoss emp = run_empirical(p, state, n, config, model);
      note_failures(emp, p.name() + " n=" + num(n), config.trials, out.warnings);
      const double f_theory = 1.0 - mean_loss(spec);
      double f_emp = std::numeric_limits<double>::quiet_NaN();
      double se = f_emp;
      if (!emp.distribution.samples.empty()) {
        const LossSummary s = summarize(emp.distribution);
        f_emp = 1.0 - s.mean;
        se = s.stderr_mean;
      }
      const std::uint64_t seed = point_seed(config.seed, n);
      body << csv_field(p.name()) << ',' << num(n) << ',' << num(f_theory) << ',' << num(f_emp)
           << ',' << num(se) << ',' << config.trials << ',' << seed << ',' << emp.failures
           << '\n';
      rows.push_back({{"protocol", p.name()},
                      {"n", n},
                      {"F_theory", f_theory},
                      {"F_empirical", f_emp},
                      {"stderr", se},
                      {"trials", config.trials},
                      {"seed", seed},
                      {"failures", emp.failures},
                      {"non_converged", emp.non_converged},
                      {"d", std::vector<double>(spec.d.data(), spec.d.data() + spec.d.size())}});
      summary << p.name() << "  n=" << num(n) << "  F_theory=" << num(f_theory)
              << "  F_empirical=" << num(f_emp) << " +- " << num(se) << '\n';
    }
  }
  out.summary = summary.str();
  if (config.format == Format::Json) {
    out.artifacts.push_back({"simulate.json",
                             json{{"config", prov}, {"rows", rows}, {"warnings", out.warnings}}
                                     .dump(2) + '\n'});
  } else {
    out.artifacts.push_back(
        {"simulate.csv", csv_preamble(prov) + csv_warnings(out.warnings) + body.str()});
  }
  return out;
}

CommandOutput cmd_distribution(const CampaignConfig& config) {
  config.validate();
  const auto protocols = load_protocols(config, 1);
  const ResolvedState state = resolve_state(config.state);
  const StateModel model = resolve_model(config, state);
  json prov = base_provenance("distribution", config, protocols);
  prov["model"] = to_string(model);
  prov["theory_trials"] = config.theory_trials;
  prov["bins"] = config.bins;
  prov["z_cap"] = kDefaultZCap;

  struct Point {
    std::string protocol;
    double n;
    std::string source;
    LossDistribution dist;
    std::vector<double> z;
  };

  CommandOutput out;
  std::ostringstream hist_csv, quant_csv, summary;
  hist_csv << "protocol,n,source,bin_center,density\n";
  quant_csv << "protocol,n,source,samples,mean_loss,q01,q25,median,q75,q99,z_q25,z_median,"
               "z_q75,z_iqr\n";
  json points = json::array();

  for (double n : config.n) {
    std::vector<Point> pts;
    for (const auto& p : protocols) {
      const LossSpectrum spec = spectrum_for(p, state, n, model);
      for (const auto& w : spec.warnings) out.warnings.push_back(p.name() + ": " + w);
      LossDistribution theory = sample_loss(
          spec, config.theory_trials, derive_seed(point_seed(config.seed, n), kTheoryStream));
      const EmpiricalLoss emp = run_empirical(p, state, n, config, model);
      note_failures(emp, p.name() + " n=" + num(n), config.trials, out.warnings);
      pts.push_back({p.name(), n, "theory", theory, z_values(theory, kDefaultZCap)});
      if (emp.distribution.samples.empty()) {
        out.warnings.push_back(p.name() + " n=" + num(n) + ": no successful reconstructions");
      } else {
        pts.push_back({p.name(), n, "empirical", emp.distribution,
                       z_values(emp.distribution, kDefaultZCap)});
      }
    }
    // One z range per n so histograms of different protocols share bins.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& pt : pts) {
      lo = std::min(lo, pt.z.front());
      hi = std::max(hi, pt.z.back());
    }
    HistogramOptions hopt;
    hopt.bins = config.bins;
    hopt.z_min = lo;
    hopt.z_max = hi;

    for (const auto& pt : pts) {
      const ZHistogram h = density_over_z(pt.dist, hopt);
      for (const auto& w : h.warnings) {
        out.warnings.push_back(pt.protocol + " " + pt.source + ": " + w);
      }
      const auto centers = h.centers();
      for (std::size_t b = 0; b < centers.size(); ++b) {
        hist_csv << csv_field(pt.protocol) << ',' << num(n) << ',' << pt.source << ','
                 << num(centers[b]) << ',' << num(h.density[b]) << '\n';
      }
      const auto q = quantiles(pt.dist, kQuantileProbs);
      const double zq25 = quantile(pt.z, 0.25);
      const double zmed = quantile(pt.z, 0.5);
      const double zq75 = quantile(pt.z, 0.75);
      const double mean = summarize(pt.dist).mean;
      quant_csv << csv_field(pt.protocol) << ',' << num(n) << ',' << pt.source << ','
                << pt.dist.samples.size() << ',' << num(mean);
      for (double v : q) quant_csv << ',' << num(v);
      quant_csv << ',' << num(zq25) << ',' << num(zmed) << ',' << num(zq75) << ','
                << num(zq75 - zq25) << '\n';
      points.push_back({{"protocol", pt.protocol},
                        {"n", n},
                        {"source", pt.source},
                        {"samples", pt.dist.samples.size()},
                        {"mean_loss", mean},
                        {"quantile_probs", kQuantileProbs},
                        {"quantiles", q},
                        {"z_median", zmed},
                        {"z_iqr", zq75 - zq25},
                        {"histogram", {{"bin_center", centers}, {"density", h.density}}}});
      summary << pt.protocol << "  n=" << num(n) << "  " << pt.source << "  q01=" << num(q[0])
              << "  median=" << num(q[2]) << "  q99=" << num(q[4]) << "  z_median=" << num(zmed)
              << '\n';
    }
  }
  out.summary = summary.str();
  if (config.format == Format::Json) {
    out.artifacts.push_back(
        {"distribution.json",
         json{{"config", prov}, {"points", points}, {"warnings", out.warnings}}.dump(2) + '\n'});
  } else {
    const std::string head = csv_preamble(prov) + csv_warnings(out.warnings);
    out.artifacts.push_back({"distribution.csv", head + hist_csv.str()});
    out.artifacts.push_back({"quantiles.csv", head + quant_csv.str()});
  }
  return out;
}

CommandOutput cmd_compare(const CampaignConfig& config) {
  config.validate();
  const auto protocols = load_protocols(config, 2);
  const ResolvedState state = resolve_state(config.state);
  const StateModel model = resolve_model(config, state);
  json prov = base_provenance("compare", config, protocols);
  prov["model"] = to_string(model);

  struct Row {
    std::string protocol;
    double n;
    SpectralReport report;
    double theory = std::numeric_limits<double>::quiet_NaN();
    double empirical = theory;
    double se = theory;
    std::vector<double> q = std::vector<double>(3, theory);
    int failures = 0;
  };

  CommandOutput out;
  std::vector<Row> rows;
  for (double n : config.n) {
    std::vector<Row> block;
    for (const auto& p : protocols) {
      Row r{p.name(), n, analyze(p)};
      if (!r.report.complete) {
        out.warnings.push_back(p.name() + ": incomplete protocol, losses not defined");
      } else {
        r.theory = mean_loss(spectrum_for(p, state, n, model));
        const EmpiricalLoss emp = run_empirical(p, state, n, config, model);
        note_failures(emp, p.name() + " n=" + num(n), config.trials, out.warnings);
        r.failures = emp.failures;
        if (!emp.distribution.samples.empty()) {
          const LossSummary s = summarize(emp.distribution);
          r.empirical = s.mean;
          r.se = s.stderr_mean;
          r.q = quantiles(emp.distribution, {0.01, 0.5, 0.99});
        }
      }
      block.push_back(std::move(r));
    }
    std::stable_sort(block.begin(), block.end(), [](const Row& a, const Row& b) {
      return a.report.condition_number < b.report.condition_number;
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }

  std::ostringstream csv, summary;
  csv << "protocol,n,K,q,complete,mean_loss_theory,mean_loss_empirical,stderr,q01,median,q99,"
         "failures\n";
  json jrows = json::array();
  for (const auto& r : rows) {
    csv << csv_field(r.protocol) << ',' << num(r.n) << ',' << num(r.report.condition_number)
        << ',' << r.report.q << ',' << (r.report.complete ? "yes" : "no") << ','
        << num(r.theory) << ',' << num(r.empirical) << ',' << num(r.se) << ',' << num(r.q[0])
        << ',' << num(r.q[1]) << ',' << num(r.q[2]) << ',' << r.failures << '\n';
    jrows.push_back({{"protocol", r.protocol},
                     {"n", r.n},
                     {"K", std::isfinite(r.report.condition_number)
                               ? json(r.report.condition_number)
                               : json(nullptr)},
                     {"q", r.report.q},
                     {"complete", r.report.complete},
                     {"mean_loss_theory", r.theory},
                     {"mean_loss_empirical", r.empirical},
                     {"stderr", r.se},
                     {"q01", r.q[0]},
                     {"median", r.q[1]},
                     {"q99", r.q[2]},
                     {"failures", r.failures}});
    summary << r.protocol << "  n=" << num(r.n) << "  K=" << num(r.report.condition_number)
            << "  loss(theory)=" << num(r.theory) << "  loss(empirical)=" << num(r.empirical)
            << " +- " << num(r.se) << '\n';
  }
  out.summary = summary.str();
  if (config.format == Format::Json) {
    out.artifacts.push_back(
        {"compare.json",
         json{{"config", prov}, {"rows", jrows}, {"warnings", out.warnings}}.dump(2) + '\n'});
  } else {
    out.artifacts.push_back(
        {"compare.csv", csv_preamble(prov) + csv_warnings(out.warnings) + csv.str()});
  }
  return out;
}

CommandOutput cmd_export_protocol(const CampaignConfig& config) {
  const auto protocols = load_protocols(config, 1);
  CommandOutput out;
  for (const auto& p : protocols) {
    json doc = json::parse(io::protocol_to_json(p));
    doc["config"] = {{"tool", "qtomo"},
                     {"version", kVersion},
                     {"command", "export-protocol"},
                     {"hash", protocol_hash(p)}};
    out.artifacts.push_back({p.name() + ".json", doc.dump(2) + '\n'});
    out.summary += "exported " + p.name() + " (" + std::to_string(p.m()) + " rows)\n";
  }
  return out;
}

CommandOutput cmd_sample(const CampaignConfig& config, const SampleOptions& options) {
  config.validate();
  const auto protocols = load_protocols(config, 1);
  if (protocols.size() != 1 || config.n.size() != 1) {
    throw ValidationError("sample takes exactly one protocol and one n");
  }
  const Protocol& p = protocols.front();
  const ResolvedState state = resolve_state(config.state);
  const double n = config.n.front();
  const Protocol scaled = normalize_exposures(p, n, state.rho);
  const VectorXd rates = predicted_rates(scaled, state.rho);
  CountsVector counts;
  if (options.noiseless) {
    for (Eigen::Index j = 0; j < rates.size(); ++j) {
      counts.counts.push_back(static_cast<std::int64_t>(std::llround(rates[j])));
    }
    counts.seed = config.seed;
  } else {
    counts = sample_counts(rates, config.seed, options.sampling);
  }
  counts.protocol_name = p.name();

  json prov = base_provenance("sample", config, protocols);
  prov.erase("trials");
  prov.erase("model");
  prov["noiseless"] = options.noiseless;
  prov["sampling"] = options.sampling == SamplingModel::Poisson ? "poisson" : "multinomial";

  CommandOutput out;
  if (config.format == Format::Json) {
    json doc = json::parse(io::counts_to_json(counts));
    doc["config"] = prov;
    out.artifacts.push_back({"counts.json", doc.dump(2) + '\n'});
  } else {
    out.artifacts.push_back({"counts.csv", csv_preamble(prov) + io::counts_to_csv(scaled, rates, counts)});
  }
  out.summary = "sampled " + std::to_string(counts.total()) + " events over " +
                std::to_string(p.m()) + " settings of " + p.name() + '\n';
  return out;
}

CommandOutput cmd_reconstruct(const CampaignConfig& config, const ReconstructOptions& options) {
  const auto protocols = load_protocols(config, 1);
  if (protocols.size() != 1) throw ValidationError("reconstruct takes exactly one protocol");
  const Protocol& p = protocols.front();
  const CountsVector counts = io::parse_counts(io::read_file(options.counts_file));
  if (static_cast<int>(counts.counts.size()) != p.m()) {
    throw ValidationError("counts file '" + options.counts_file.string() + "' has " +
                          std::to_string(counts.counts.size()) + " entries; protocol " +
                          p.name() + " expects " + std::to_string(p.m()));
  }
  CommandOutput out;
  if (!counts.protocol_name.empty() && counts.protocol_name != p.name()) {
    out.warnings.push_back("counts were recorded for protocol '" + counts.protocol_name +
                           "', reconstructing with '" + p.name() + "'");
  }

  std::optional<ResolvedState> ref;
  if (options.reference) ref = resolve_state(*options.reference);
  StateModel model = StateModel::Mixed;
  if (config.model) {
    model = *config.model;
    if (ref && model == StateModel::Pure && !ref->psi) {
      throw ValidationError("--model pure requires a pure reference state");
    }
  } else if (ref && ref->psi) {
    model = StateModel::Pure;
  }

  MleOptions mle = model == StateModel::Pure ? MleOptions::pure() : MleOptions{};
  const ReconstructionResult res = reconstruct(p, counts.as_vector(), mle);
  const double n_obs = static_cast<double>(counts.total());

  json prov = base_provenance("reconstruct", config, protocols);
  prov.erase("trials");
  prov.erase("n");
  prov["counts_file"] = options.counts_file.string();
  prov["reference"] = options.reference ? json(*options.reference) : json(nullptr);
  prov["model"] = to_string(model);
  prov["theory_trials"] = config.theory_trials;

  json doc = {{"config", prov},
              {"result", json::parse(io::result_to_json(res))},
              {"n_observed", counts.total()}};
  std::ostringstream summary;
  summary << "n observed   " << counts.total() << '\n'
          << "iterations   " << res.iterations << (res.converged ? " (converged)" : " (not converged)")
          << '\n'
          << "loglik       " << num(res.loglik) << '\n';
  if (!res.converged) out.warnings.push_back("MLE did not converge");

  if (ref) {
    const double f = ref->psi ? fidelity(*ref->psi, res.rho_mle) : fidelity(ref->rho, res.rho_mle);
    doc["fidelity"] = f;
    summary << "fidelity     " << num(f) << '\n';
    if (n_obs <= 0.0) {
      out.warnings.push_back("no registered events; theoretical band not available");
    } else {
      const LossSpectrum spec = spectrum_for(p, *ref, n_obs, model);
      for (const auto& w : spec.warnings) out.warnings.push_back(w);
      const FidelityBand band =
          theoretical_band(spec, derive_seed(config.seed, static_cast<std::uint64_t>(n_obs)),
                           config.theory_trials);
      // Only a loss above the upper quantile signals an excess error; a
      // fidelity better than the band is not evidence of miscalibration.
      const bool below = 1.0 - f > band.loss_hi;
      const std::string verdict = below ? "below-band" : "within-band";
      doc["band"] = {{"p_lo", band.p_lo},
                     {"p_hi", band.p_hi},
                     {"loss_lo", band.loss_lo},
                     {"loss_hi", band.loss_hi},
                     {"fidelity_lo", band.fidelity_lo()},
                     {"fidelity_hi", band.fidelity_hi()},
                     {"mean_loss", mean_loss(spec)}};
      doc["verdict"] = verdict;
      summary << "band         [" << num(band.fidelity_lo()) << ", " << num(band.fidelity_hi())
              << "]\n"
              << "verdict      " << verdict << '\n';
    }
  }
  doc["warnings"] = out.warnings;
  out.summary = summary.str();
  out.artifacts.push_back({"reconstruction.json", doc.dump(2) + '\n'});
  return out;
}

void write_artifacts(const CampaignConfig& config, const CommandOutput& output) {
  if (!config.out_dir) return;
  std::error_code ec;
  std::filesystem::create_directories(*config.out_dir, ec);
  if (ec || !std::filesystem::is_directory(*config.out_dir)) {
    throw ValidationError("cannot create output directory '" + config.out_dir->string() + "'");
  }
  for (const auto& a : output.artifacts) io::write_file(*config.out_dir / a.name, a.content);
}

}  // namespace qtomo::cli
