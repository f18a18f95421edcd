#include "qtomo/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "qtomo/error.hpp"

namespace qtomo::io {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": invalid JSON (" + e.what() + ")");
  }
}

const json& require(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(std::string(where) + ": missing field \"" + key + "\"");
  }
  return obj.at(key);
}

double as_number(const json& v, std::string_view where) {
  if (!v.is_number()) throw ValidationError(std::string(where) + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(std::string(where) + ": non-finite number");
  return x;
}

int as_dim(const json& v, std::string_view where) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    throw ValidationError(std::string(where) + ": \"dim\" must be an integer");
  }
  const auto d = v.get<std::int64_t>();
  if (d < 2 || d > 4096) throw ValidationError(std::string(where) + ": \"dim\" out of range");
  return static_cast<int>(d);
}

Complex as_complex(const json& v, std::string_view where) {
  if (!v.is_array() || v.size() != 2) {
    throw ValidationError(std::string(where) + ": expected an [re, im] pair");
  }
  return {as_number(v[0], where), as_number(v[1], where)};
}

VectorXcd as_complex_vector(const json& v, std::size_t expected, const std::string& where) {
  if (!v.is_array()) throw ValidationError(where + ": expected an array of [re, im] pairs");
  if (v.size() != expected) {
    throw ValidationError(where + ": expected " + std::to_string(expected) +
                          " entries, got " + std::to_string(v.size()));
  }
  VectorXcd out(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    out[static_cast<Eigen::Index>(i)] =
        as_complex(v[i], where + " entry " + std::to_string(i + 1));
  }
  return out;
}

json complex_pair(Complex z) { return json::array({z.real(), z.imag()}); }

json vector_pairs(const VectorXcd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(complex_pair(v[i]));
  return arr;
}

json matrix_pairs_row_major(const MatrixXcd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(complex_pair(m(r, c)));
  }
  return arr;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

LoadedState parse_state(std::string_view json_text) {
  const json doc = parse_json(json_text, "state file");
  const int dim = as_dim(require(doc, "dim", "state file"), "state file");
  const json& kind = require(doc, "kind", "state file");
  const json& data = require(doc, "data", "state file");
  if (!kind.is_string()) throw ValidationError("state file: \"kind\" must be a string");
  const auto k = kind.get<std::string>();
  if (k == "pure") {
    StateVector psi(as_complex_vector(data, dim, "state file data"), 1e-9);
    psi = StateVector::normalized(psi.amplitudes());
    return {density_from_vector(psi), psi};
  }
  if (k == "mixed") {
    const VectorXcd flat = as_complex_vector(data, static_cast<std::size_t>(dim) * dim,
                                             "state file data");
    MatrixXcd rho(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) rho(r, c) = flat[r * dim + c];
    }
    DensityMatrix dm(rho);
    return {dm, dm.as_pure(1e-12)};
  }
  throw ValidationError("state file: \"kind\" must be \"pure\" or \"mixed\"");
}

std::string state_to_json(const StateVector& psi) {
  json doc = {{"dim", psi.dim()}, {"kind", "pure"}, {"data", vector_pairs(psi.amplitudes())}};
  return doc.dump(2);
}

std::string state_to_json(const DensityMatrix& rho) {
  json doc = {{"dim", rho.dim()}, {"kind", "mixed"},
              {"data", matrix_pairs_row_major(rho.matrix())}};
  return doc.dump(2);
}

Protocol parse_protocol(std::string_view json_text) {
  const json doc = parse_json(json_text, "protocol file");
  const int dim = as_dim(require(doc, "dim", "protocol file"), "protocol file");
  std::string name = "custom";
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw ValidationError("protocol file: \"name\" must be a string");
    name = doc["name"].get<std::string>();
  }
  const json& rows = require(doc, "rows", "protocol file");
  if (!rows.is_array() || rows.empty()) {
    throw ValidationError("protocol file: \"rows\" must be a non-empty array");
  }
  std::vector<MeasurementRow> parsed;
  parsed.reserve(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const json& r = rows[j];
    std::string where = "protocol file row " + std::to_string(j + 1);
    if (!r.is_object()) throw ValidationError(where + ": expected an object");
    MeasurementRow row;
    if (r.contains("label")) {
      if (!r["label"].is_string()) throw ValidationError(where + ": \"label\" must be a string");
      row.label = r["label"].get<std::string>();
      where += " (" + row.label + ")";
    }
    row.exposure = r.contains("exposure") ? as_number(r["exposure"], where + " exposure") : 1.0;
    row.amplitudes = as_complex_vector(require(r, "amplitudes", where), dim, where + " amplitudes");
    parsed.push_back(std::move(row));
  }
  return Protocol(std::move(name), dim, std::move(parsed));
}

std::string protocol_to_json(const Protocol& protocol) {
  json rows = json::array();
  for (const auto& r : protocol.rows()) {
    rows.push_back({{"label", r.label},
                    {"exposure", r.exposure},
                    {"amplitudes", vector_pairs(r.amplitudes)}});
  }
  json doc = {{"name", protocol.name()}, {"dim", protocol.dim()}, {"rows", rows}};
  return doc.dump(2);
}

CountsVector parse_counts(std::string_view json_text) {
  const json doc = parse_json(json_text, "counts file");
  CountsVector c;
  if (doc.contains("protocol")) {
    if (!doc["protocol"].is_string()) {
      throw ValidationError("counts file: \"protocol\" must be a string");
    }
    c.protocol_name = doc["protocol"].get<std::string>();
  }
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      throw ValidationError("counts file: \"seed\" must be a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  const json& counts = require(doc, "counts", "counts file");
  if (!counts.is_array()) throw ValidationError("counts file: \"counts\" must be an array");
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const json& v = counts[j];
    const std::string where = "counts file entry " + std::to_string(j + 1);
    std::int64_t k = 0;
    if (v.is_number_integer() || v.is_number_unsigned()) {
      k = v.get<std::int64_t>();
    } else if (v.is_number_float()) {
      const double x = v.get<double>();
      if (!std::isfinite(x) || x != std::floor(x) || std::abs(x) > 9.0e15) {
        throw ValidationError(where + ": counts must be integers");
      }
      k = static_cast<std::int64_t>(x);
    } else {
      throw ValidationError(where + ": counts must be integers");
    }
    if (k < 0) throw ValidationError(where + ": counts must be nonnegative");
    c.counts.push_back(k);
  }
  return c;
}

std::string counts_to_json(const CountsVector& counts) {
  json doc = {{"protocol", counts.protocol_name}, {"seed", counts.seed}, {"counts", counts.counts}};
  return doc.dump(2);
}

std::string counts_to_csv(const Protocol& protocol, const VectorXd& rates,
                          const CountsVector& counts) {
  if (rates.size() != protocol.m() || static_cast<int>(counts.counts.size()) != protocol.m()) {
    throw ValidationError("counts_to_csv: lengths differ from the protocol row count");
  }
  std::ostringstream os;
  os << "label,rate,count\n";
  for (int j = 0; j < protocol.m(); ++j) {
    os << '"' << protocol.row(j).label << "\"," << fmt(rates[j]) << ',' << counts.counts[j] << '\n';
  }
  return os.str();
}

std::string report_to_json(const SpectralReport& report) {
  json doc = {{"singular_values", std::vector<double>(report.singular_values.data(),
                                                      report.singular_values.data() +
                                                          report.singular_values.size())},
              {"q", report.q},
              {"condition_number", finite_or_null(report.condition_number)},
              {"condition_infinite", !std::isfinite(report.condition_number)},
              {"retained_condition_number", report.retained_condition},
              {"complete", report.complete},
              {"adequate", report.adequate},
              {"m", report.m},
              {"dim", report.dim},
              {"threshold", report.threshold}};
  return doc.dump(2);
}

std::string report_to_text(const SpectralReport& report, std::string_view protocol_name) {
  std::ostringstream os;
  os << "protocol            " << protocol_name << '\n'
     << "rows (m)            " << report.m << '\n'
     << "parameters (s^2)    " << report.dim * report.dim << '\n'
     << "rank (q)            " << report.q << '\n';
  os << "condition number K  ";
  if (std::isfinite(report.condition_number)) {
    os << std::setprecision(6) << report.condition_number << '\n';
  } else {
    os << "inf (retained subspace: " << std::setprecision(6) << report.retained_condition
       << ")\n";
  }
  os << "complete            " << (report.complete ? "yes" : "no (incomplete)") << '\n'
     << "adequate            " << (report.adequate ? "yes (m > q)" : "no (m = q)") << '\n'
     << "singular values    ";
  for (Eigen::Index i = 0; i < report.singular_values.size(); ++i) {
    os << ' ' << std::setprecision(5) << report.singular_values[i];
  }
  os << '\n';
  return os.str();
}

std::string spectrum_to_json(const LossSpectrum& spectrum) {
  json doc = {{"d", std::vector<double>(spectrum.d.data(), spectrum.d.data() + spectrum.d.size())},
              {"j_max", spectrum.j_max},
              {"n", spectrum.n},
              {"state_kind", to_string(spectrum.kind)},
              {"mean_loss", mean_loss(spectrum)},
              {"warnings", spectrum.warnings}};
  return doc.dump(2);
}

std::string distribution_to_csv(const LossDistribution& dist, double z_cap) {
  std::ostringstream os;
  os << "one_minus_F,z\n";
  for (double loss : dist.samples) {
    const double z = loss <= std::pow(10.0, -z_cap) ? z_cap : -std::log10(std::min(loss, 1.0));
    os << fmt(loss) << ',' << fmt(z) << '\n';
  }
  return os.str();
}

std::string distribution_to_json(const LossDistribution& dist) {
  json doc = {{"source", dist.source == DistributionSource::Theoretical ? "theoretical" : "empirical"},
              {"n", dist.n},
              {"trials", dist.trials},
              {"samples", dist.samples}};
  return doc.dump(2);
}

std::string histogram_to_csv(const ZHistogram& hist) {
  std::ostringstream os;
  os << "bin_center,density\n";
  const auto centers = hist.centers();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    os << fmt(centers[i]) << ',' << fmt(hist.density[i]) << '\n';
  }
  return os.str();
}

std::string result_to_json(const ReconstructionResult& result, std::optional<double> fidelity) {
  json doc = {{"rho_pi", matrix_pairs_row_major(result.rho_pi.matrix())},
              {"rho_mle", matrix_pairs_row_major(result.rho_mle.matrix())},
              {"dim", result.rho_mle.dim()},
              {"loglik", result.loglik},
              {"intensity", result.intensity},
              {"iterations", result.iterations},
              {"converged", result.converged}};
  if (fidelity) doc["fidelity"] = *fidelity;
  return doc.dump(2);
}

}  // namespace qtomo::io
