#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recert/bound_calculator.hpp"
#include "recert/core_types.hpp"
#include "recert/design_sampler.hpp"
#include "recert/io.hpp"
#include "recert/parallel.hpp"
#include "recert/re_certifier.hpp"
#include "recert/robust_solvers.hpp"
#include "recert/version.hpp"

namespace recert {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { audit, bounds, certify, verify_lemmas, theorem_mc, solve };

inline std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::audit: return "audit";
    case ExperimentKind::bounds: return "bounds";
    case ExperimentKind::certify: return "certify";
    case ExperimentKind::verify_lemmas: return "verify-lemmas";
    case ExperimentKind::theorem_mc: return "theorem-mc";
    case ExperimentKind::solve: return "solve";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct CovarianceDesc {
  std::string kind = "identity";  // identity | diagonal | ar1 | dense
  double phi = 0.0;
  std::vector<double> entries;
  std::string file;
};

struct ContaminationDesc {
  std::vector<Index> rows;              // outlier set O (1-based)
  std::string deterministic = "none";   // none | constant-row | explicit
  std::vector<double> mu_e;
  std::string file;                     // explicit E_D
  std::optional<CovarianceDesc> random; // Sigma_E
};

struct ConeDesc {
  std::string space = "vector";  // vector | matrix
  std::vector<Index> S;
  std::vector<Index> O;
  std::string j_file;  // matrix space: p x p 0/1 mask, entry (i,j) <=> i in J_j
  double c = 2.0;
  std::optional<double> gamma;  // absent = auto (1.1 sqrt(log p / log n))
};

struct CorollaryDesc {
  Index s = 0;
  Index o = 0;
  double c = 2.0;
  double gamma = 1.1;
  double c0 = 0.065;
};

struct SolverDesc {
  std::string kind = "lasso";  // lasso | multitask
  std::optional<double> lambda_b;      // absent = auto
  std::optional<double> lambda_theta;  // absent = auto
  Index max_iters = 10000;
  double tol = 1e-8;
  std::string y_file, x_file, m_file, b_star_file, theta_star_file;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::audit;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int workers = 1;

  Index p = 0;
  Index n = 0;

  std::optional<CovarianceDesc> covariance;
  std::optional<ContaminationDesc> contamination;
  std::optional<ConeDesc> cone;

  std::optional<BoundParams> params;  // general-mode parameters
  double corruption = 0.0;            // supplied spectral term (bounds kind)
  std::optional<CorollaryDesc> corollary;

  Index trials = 1;
  Index points = 1000;
  Index refine_iters = 200;
  std::string mode = "special";  // special | general
  double r1 = 1.0;
  double r2 = 1.0;
  double t = 0.3;
  std::string lemma = "both";  // aux1 | aux2 | both

  std::optional<SolverDesc> solver;

  std::string raw_text;
};

namespace config_detail {

struct RawEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

[[noreturn]] inline void fail(int line, const std::string& key,
                              const std::string& message) {
  std::ostringstream out;
  out << "config error";
  if (line > 0) out << " (line " << line << ")";
  if (!key.empty()) out << " at key '" << key << "'";
  out << ": " << message;
  throw ConfigError(out.str());
}

inline double to_double(const RawEntry& e) {
  try {
    return parse_number(e.value);
  } catch (const std::exception&) {
    fail(e.line, e.key, "expected a number, got '" + e.value + "'");
  }
}

inline Index to_index(const RawEntry& e, Index min_value) {
  const double v = to_double(e);
  if (v != std::floor(v)) fail(e.line, e.key, "expected an integer");
  if (v < static_cast<double>(min_value))
    fail(e.line, e.key, "must be >= " + std::to_string(min_value));
  return static_cast<Index>(v);
}

inline std::uint64_t to_u64(const RawEntry& e) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    fail(e.line, e.key, "expected an unsigned integer, got '" + e.value + "'");
  }
}

inline std::vector<double> to_double_list(const RawEntry& e) {
  std::vector<double> values;
  for (const std::string& field : split_csv_line(e.value)) {
    const std::string item = trim(field);
    if (item.empty()) fail(e.line, e.key, "empty list element");
    try {
      values.push_back(parse_number(item));
    } catch (const std::exception&) {
      fail(e.line, e.key, "expected a number, got '" + item + "'");
    }
  }
  if (values.empty()) fail(e.line, e.key, "expected a non-empty list");
  return values;
}

inline std::vector<Index> to_index_list(const RawEntry& e) {
  // "none" denotes the empty set explicitly.
  if (trim(e.value) == "none") return {};
  std::vector<Index> values;
  for (const double v : to_double_list(e)) {
    if (v != std::floor(v) || v < 1)
      fail(e.line, e.key, "expected 1-based indices");
    values.push_back(static_cast<Index>(v));
  }
  return values;
}

}  // namespace config_detail

// Strict parser for the flat "key = value" format with bracketed section
// headers.  Unknown sections or keys, duplicate keys, and out-of-range
// values are rejected with the offending key and line number.
inline ExperimentConfig parse_config(const std::string& text) {
  using config_detail::RawEntry;
  using config_detail::fail;

  static const std::map<std::string, std::set<std::string>> kSchema = {
      {"experiment", {"kind", "seed", "out", "workers"}},
      {"dimensions", {"p", "n"}},
      {"covariance", {"kind", "phi", "entries", "file"}},
      {"contamination",
       {"rows", "deterministic", "mu_e", "file", "random", "random_phi",
        "random_entries", "random_file"}},
      {"cone", {"space", "S", "O", "J_file", "c", "gamma"}},
      {"bounds",
       {"preset", "epsilon", "alpha", "beta", "sigma", "tau", "corruption"}},
      {"corollary", {"s", "o", "c", "gamma", "c0"}},
      {"mc",
       {"trials", "points", "refine_iters", "mode", "r1", "r2", "t", "lemma"}},
      {"solver",
       {"kind", "lambda_b", "lambda_theta", "max_iters", "tol", "y_file",
        "x_file", "m_file", "b_star_file", "theta_star_file"}},
  };

  std::vector<RawEntry> entries;
  std::set<std::string> seen;
  std::set<std::string> sections_present;
  {
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
      if (stripped.front() == '[') {
        if (stripped.back() != ']')
          fail(line_no, "", "malformed section header '" + stripped + "'");
        section = trim(stripped.substr(1, stripped.size() - 2));
        if (kSchema.find(section) == kSchema.end())
          fail(line_no, "", "unknown section '" + section + "'");
        sections_present.insert(section);
        continue;
      }
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        fail(line_no, "", "expected 'key = value', got '" + stripped + "'");
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (section.empty())
        fail(line_no, key, "key outside of any [section]");
      const auto& allowed = kSchema.at(section);
      if (allowed.find(key) == allowed.end())
        fail(line_no, key, "unknown key in section [" + section + "]");
      if (!seen.insert(section + "." + key).second)
        fail(line_no, key, "duplicate key in section [" + section + "]");
      if (value.empty()) fail(line_no, key, "empty value");
      entries.push_back({section, key, value, line_no});
    }
  }

  const auto find = [&](const std::string& section,
                        const std::string& key) -> const RawEntry* {
    for (const RawEntry& e : entries)
      if (e.section == section && e.key == key) return &e;
    return nullptr;
  };

  ExperimentConfig cfg;
  cfg.raw_text = text;

  const RawEntry* kind_entry = find("experiment", "kind");
  if (!kind_entry) fail(0, "kind", "missing required key [experiment] kind");
  const std::string kind = kind_entry->value;
  if (kind == "audit") cfg.kind = ExperimentKind::audit;
  else if (kind == "bounds") cfg.kind = ExperimentKind::bounds;
  else if (kind == "certify") cfg.kind = ExperimentKind::certify;
  else if (kind == "verify-lemmas") cfg.kind = ExperimentKind::verify_lemmas;
  else if (kind == "theorem-mc") cfg.kind = ExperimentKind::theorem_mc;
  else if (kind == "solve") cfg.kind = ExperimentKind::solve;
  else
    fail(kind_entry->line, "kind",
         "must be one of audit|bounds|certify|verify-lemmas|theorem-mc|solve");

  if (const RawEntry* e = find("experiment", "seed")) cfg.seed = config_detail::to_u64(*e);
  if (const RawEntry* e = find("experiment", "out")) cfg.out_dir = e->value;
  if (const RawEntry* e = find("experiment", "workers")) {
    cfg.workers = static_cast<int>(config_detail::to_index(*e, 1));
  }

  if (const RawEntry* e = find("dimensions", "p")) cfg.p = config_detail::to_index(*e, 1);
  if (const RawEntry* e = find("dimensions", "n")) cfg.n = config_detail::to_index(*e, 1);

  if (sections_present.count("covariance")) {
    CovarianceDesc desc;
    if (const RawEntry* e = find("covariance", "kind")) {
      desc.kind = e->value;
      if (desc.kind != "identity" && desc.kind != "diagonal" &&
          desc.kind != "ar1" && desc.kind != "dense")
        fail(e->line, "kind", "must be identity|diagonal|ar1|dense");
    }
    if (const RawEntry* e = find("covariance", "phi")) {
      desc.phi = config_detail::to_double(*e);
      if (std::abs(desc.phi) >= 1.0)
        fail(e->line, "phi", "must be in (-1, 1)");
    }
    if (const RawEntry* e = find("covariance", "entries"))
      desc.entries = config_detail::to_double_list(*e);
    if (const RawEntry* e = find("covariance", "file")) desc.file = e->value;
    cfg.covariance = std::move(desc);
  }

  if (sections_present.count("contamination")) {
    ContaminationDesc desc;
    if (const RawEntry* e = find("contamination", "rows"))
      desc.rows = config_detail::to_index_list(*e);
    if (const RawEntry* e = find("contamination", "deterministic")) {
      desc.deterministic = e->value;
      if (desc.deterministic != "none" && desc.deterministic != "constant-row" &&
          desc.deterministic != "explicit")
        fail(e->line, "deterministic", "must be none|constant-row|explicit");
    }
    if (const RawEntry* e = find("contamination", "mu_e"))
      desc.mu_e = config_detail::to_double_list(*e);
    if (const RawEntry* e = find("contamination", "file")) desc.file = e->value;
    if (const RawEntry* e = find("contamination", "random")) {
      if (e->value != "none") {
        CovarianceDesc random;
        random.kind = e->value;
        if (random.kind != "identity" && random.kind != "diagonal" &&
            random.kind != "ar1" && random.kind != "dense")
          fail(e->line, "random", "must be none|identity|diagonal|ar1|dense");
        if (const RawEntry* f = find("contamination", "random_phi")) {
          random.phi = config_detail::to_double(*f);
          if (std::abs(random.phi) >= 1.0) fail(f->line, "random_phi", "must be in (-1, 1)");
        }
        if (const RawEntry* f = find("contamination", "random_entries"))
          random.entries = config_detail::to_double_list(*f);
        if (const RawEntry* f = find("contamination", "random_file"))
          random.file = f->value;
        desc.random = std::move(random);
      }
    }
    cfg.contamination = std::move(desc);
  }

  if (sections_present.count("cone")) {
    ConeDesc desc;
    if (const RawEntry* e = find("cone", "space")) {
      desc.space = e->value;
      if (desc.space != "vector" && desc.space != "matrix")
        fail(e->line, "space", "must be vector|matrix");
    }
    if (const RawEntry* e = find("cone", "J_file")) desc.j_file = e->value;
    if (const RawEntry* e = find("cone", "S")) desc.S = config_detail::to_index_list(*e);
    if (const RawEntry* e = find("cone", "O")) desc.O = config_detail::to_index_list(*e);
    if (const RawEntry* e = find("cone", "c")) {
      desc.c = config_detail::to_double(*e);
      if (desc.c <= 0.0) fail(e->line, "c", "must be > 0");
    }
    if (const RawEntry* e = find("cone", "gamma")) {
      if (e->value != "auto") {
        const double g = config_detail::to_double(*e);
        if (g <= 0.0) fail(e->line, "gamma", "must be > 0 (or 'auto')");
        desc.gamma = g;
      }
    }
    cfg.cone = std::move(desc);
  }

  {
    // Bound parameters: the published preset overlaid with any explicit values.
    BoundParams params = BoundParams::paper();
    bool touched = sections_present.count("bounds") > 0;
    if (const RawEntry* e = find("bounds", "preset")) {
      if (e->value != "paper") fail(e->line, "preset", "only 'paper' is defined");
    }
    const auto override_param = [&](const char* key, double* slot,
                                    double lo, double hi, const char* range) {
      if (const RawEntry* e = find("bounds", key)) {
        const double v = config_detail::to_double(*e);
        if (v <= lo || v >= hi)
          fail(e->line, key, std::string("must be in ") + range);
        *slot = v;
      }
    };
    override_param("epsilon", &params.epsilon, 0.0, 0.75, "(0, 3/4)");
    override_param("alpha", &params.alpha, 0.0, kInf, "(0, inf)");
    override_param("beta", &params.beta, 0.0, kInf, "(0, inf)");
    override_param("sigma", &params.sigma, 0.0, kInf, "(0, inf)");
    override_param("tau", &params.tau, 0.0, kInf, "(0, inf)");
    if (const RawEntry* e = find("bounds", "corruption")) {
      cfg.corruption = config_detail::to_double(*e);
      if (cfg.corruption < 0.0) fail(e->line, "corruption", "must be >= 0");
    }
    if (touched) cfg.params = params;
  }

  if (sections_present.count("corollary")) {
    CorollaryDesc desc;
    if (const RawEntry* e = find("corollary", "s")) desc.s = config_detail::to_index(*e, 0);
    if (const RawEntry* e = find("corollary", "o")) desc.o = config_detail::to_index(*e, 0);
    if (const RawEntry* e = find("corollary", "c")) {
      desc.c = config_detail::to_double(*e);
      if (desc.c <= 1.0) fail(e->line, "c", "must be > 1");
    }
    if (const RawEntry* e = find("corollary", "gamma")) {
      desc.gamma = config_detail::to_double(*e);
      if (desc.gamma <= 0.0) fail(e->line, "gamma", "must be > 0");
    }
    if (const RawEntry* e = find("corollary", "c0")) {
      desc.c0 = config_detail::to_double(*e);
      if (desc.c0 <= 0.0) fail(e->line, "c0", "must be > 0");
    }
    cfg.corollary = desc;
  }

  if (sections_present.count("mc")) {
    if (const RawEntry* e = find("mc", "trials")) cfg.trials = config_detail::to_index(*e, 1);
    if (const RawEntry* e = find("mc", "points")) cfg.points = config_detail::to_index(*e, 1);
    if (const RawEntry* e = find("mc", "refine_iters"))
      cfg.refine_iters = config_detail::to_index(*e, 0);
    if (const RawEntry* e = find("mc", "mode")) {
      cfg.mode = e->value;
      if (cfg.mode != "special" && cfg.mode != "general")
        fail(e->line, "mode", "must be special|general");
    }
    if (const RawEntry* e = find("mc", "r1")) {
      cfg.r1 = config_detail::to_double(*e);
      if (cfg.r1 < 0.0) fail(e->line, "r1", "must be >= 0");
    }
    if (const RawEntry* e = find("mc", "r2")) {
      cfg.r2 = config_detail::to_double(*e);
      if (cfg.r2 < 0.0) fail(e->line, "r2", "must be >= 0");
    }
    if (const RawEntry* e = find("mc", "t")) {
      cfg.t = config_detail::to_double(*e);
      if (cfg.t <= 0.0) fail(e->line, "t", "must be > 0");
    }
    if (const RawEntry* e = find("mc", "lemma")) {
      cfg.lemma = e->value;
      if (cfg.lemma != "aux1" && cfg.lemma != "aux2" && cfg.lemma != "both")
        fail(e->line, "lemma", "must be aux1|aux2|both");
    }
  }

  if (sections_present.count("solver")) {
    SolverDesc desc;
    if (const RawEntry* e = find("solver", "kind")) {
      desc.kind = e->value;
      if (desc.kind != "lasso" && desc.kind != "multitask")
        fail(e->line, "kind", "must be lasso|multitask");
    }
    const auto lambda_of = [&](const char* key) -> std::optional<double> {
      if (const RawEntry* e = find("solver", key)) {
        if (e->value == "auto") return std::nullopt;
        const double v = e->value == "inf" ? kInf : config_detail::to_double(*e);
        if (v < 0.0) fail(e->line, key, "must be >= 0 (or auto|inf)");
        return v;
      }
      return std::nullopt;
    };
    desc.lambda_b = lambda_of("lambda_b");
    desc.lambda_theta = lambda_of("lambda_theta");
    if (const RawEntry* e = find("solver", "max_iters"))
      desc.max_iters = config_detail::to_index(*e, 1);
    if (const RawEntry* e = find("solver", "tol")) {
      desc.tol = config_detail::to_double(*e);
      if (desc.tol <= 0.0) fail(e->line, "tol", "must be > 0");
    }
    if (const RawEntry* e = find("solver", "y_file")) desc.y_file = e->value;
    if (const RawEntry* e = find("solver", "x_file")) desc.x_file = e->value;
    if (const RawEntry* e = find("solver", "m_file")) desc.m_file = e->value;
    if (const RawEntry* e = find("solver", "b_star_file")) desc.b_star_file = e->value;
    if (const RawEntry* e = find("solver", "theta_star_file"))
      desc.theta_star_file = e->value;
    cfg.solver = std::move(desc);
  }

  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

// ---------------------------------------------------------------------------
// Builders from config descriptors
// ---------------------------------------------------------------------------

namespace config_detail {

inline CovarianceSpec build_covariance(const CovarianceDesc& desc, Index p) {
  if (desc.kind == "identity") return CovarianceSpec::identity(p);
  if (desc.kind == "diagonal") {
    if (static_cast<Index>(desc.entries.size()) != p)
      throw ConfigError("covariance entries must have exactly p values");
    Vector d(p);
    for (Index i = 0; i < p; ++i) d[i] = desc.entries[static_cast<std::size_t>(i)];
    return CovarianceSpec::diagonal(std::move(d));
  }
  if (desc.kind == "ar1") return CovarianceSpec::ar1(p, desc.phi);
  if (desc.file.empty())
    throw ConfigError("dense covariance requires a file");
  Matrix m = read_matrix_file(desc.file);
  if (m.rows() != p) throw ConfigError("dense covariance must be p x p");
  return CovarianceSpec::dense(std::move(m));
}

inline ContaminationSpec build_contamination(
    const std::optional<ContaminationDesc>& desc, Index p, Index n) {
  if (!desc) return ContaminationSpec::clean(n);
  ContaminationSpec spec;
  spec.outlier_rows = SupportSet(desc->rows, n);
  if (desc->deterministic == "constant-row") {
    spec.deterministic = ContaminationSpec::DeterministicKind::constant_row;
    if (static_cast<Index>(desc->mu_e.size()) != p)
      throw ConfigError("mu_e must have exactly p values");
    spec.mu_e = Vector(p);
    for (Index i = 0; i < p; ++i) spec.mu_e[i] = desc->mu_e[static_cast<std::size_t>(i)];
  } else if (desc->deterministic == "explicit") {
    spec.deterministic = ContaminationSpec::DeterministicKind::explicit_matrix;
    if (desc->file.empty()) throw ConfigError("explicit E_D requires a file");
    spec.e_d = read_matrix_file(desc->file);
  }
  if (desc->random) spec.random_part = build_covariance(*desc->random, p);
  return spec;
}

inline ConeSpecVector build_cone(const ConeDesc& desc, Index p, Index n) {
  const double gamma =
      desc.gamma.value_or(1.1 * std::sqrt(std::log(static_cast<double>(p)) /
                                          std::log(static_cast<double>(n))));
  return ConeSpecVector({SupportSet(desc.S, p), SupportSet(desc.O, n)}, desc.c,
                        gamma);
}

inline ConeSpecMatrix build_matrix_cone(const ConeDesc& desc, Index p, Index n) {
  if (desc.j_file.empty())
    throw ConfigError("matrix cone requires J_file (p x p support mask)");
  const Matrix mask = read_matrix_file(desc.j_file);
  if (mask.rows() != p || mask.cols() != p)
    throw ConfigError("J_file mask must be p x p");
  std::vector<SupportSet> cols;
  cols.reserve(static_cast<std::size_t>(p));
  for (Index j = 0; j < p; ++j) {
    std::vector<Index> idx;
    for (Index i = 0; i < p; ++i)
      if (mask(i, j) != 0.0) idx.push_back(i + 1);
    cols.emplace_back(idx, p);
  }
  const double gamma =
      desc.gamma.value_or(1.1 * std::sqrt(std::log(static_cast<double>(p)) /
                                          std::log(static_cast<double>(n))));
  return ConeSpecMatrix(SupportCollection(std::move(cols)), SupportSet(desc.O, n),
                        desc.c, gamma);
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct RunReport {
  ExperimentKind kind = ExperimentKind::audit;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> summary;
  bool property_failure = false;
  std::string records_path;
  std::string summary_path;

  std::string records_csv() const {
    std::ostringstream out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i > 0) out << ",";
      out << columns[i];
    }
    out << "\n";
    for (const auto& row : records) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) out << ",";
        out << row[i];
      }
      out << "\n";
    }
    return out.str();
  }
};

namespace run_detail {

// All summary statistics are aggregated from the formatted record cells, so
// recomputing them from the CSV file reproduces the summary exactly.
inline double cell_value(const std::vector<std::string>& row, std::size_t col) {
  return parse_number(row[col]);
}

inline std::string flag(bool value) { return value ? "1" : "0"; }

}  // namespace run_detail

// ---------------------------------------------------------------------------
// Per-kind runners
// ---------------------------------------------------------------------------

inline void run_audit(const ExperimentConfig&, RunReport& report) {
  const AuditReport audit = paper_constants_audit();
  report.columns = {"name", "computed", "paper_value", "direction_ok"};
  for (const AuditRow& row : audit.rows)
    report.records.push_back({row.name, format_number(row.computed),
                              format_number(row.paper_value),
                              run_detail::flag(row.direction_ok)});
  bool all_ok = true;
  for (const auto& row : report.records)
    all_ok &= run_detail::cell_value(row, 3) == 1.0;
  report.summary.push_back("constants_checked = " +
                           std::to_string(report.records.size()));
  report.summary.push_back(std::string("all_directions_ok = ") +
                           (all_ok ? "true" : "false"));
  report.summary.push_back(std::string("n_min_discrepancy_flag = ") +
                           (audit.n_min_discrepancy ? "true" : "false"));
  report.property_failure = !all_ok;
}

inline void run_bounds(const ExperimentConfig& cfg, RunReport& report) {
  if (cfg.n < 1 || cfg.p < 1)
    throw ConfigError("bounds requires [dimensions] p and n");
  const BoundParams params = cfg.params.value_or(BoundParams::paper());
  const BoundReport bounds = make_bound_report(params, cfg.n, cfg.corruption);

  report.columns = {"n",
                    "p",
                    "epsilon",
                    "alpha",
                    "beta",
                    "sigma",
                    "tau",
                    "corruption",
                    "mu_eps",
                    "rho",
                    "lead_constant",
                    "l1_coefficient",
                    "theta_coefficient",
                    "n_min_derived",
                    "n_min_paper",
                    "failure_probability",
                    "gamma_min",
                    "gamma_ok",
                    "alternate_branch",
                    "condition_value",
                    "condition_ok",
                    "kappa",
                    "c_n",
                    "re_constant",
                    "verdict"};
  std::vector<std::string> row = {
      std::to_string(cfg.n),
      std::to_string(cfg.p),
      format_number(params.epsilon),
      format_number(params.alpha),
      format_number(params.beta),
      format_number(params.sigma),
      format_number(params.tau),
      format_number(cfg.corruption),
      format_number(bounds.mu_eps),
      format_number(bounds.rho),
      format_number(bounds.lead_constant),
      format_number(bounds.l1_coefficient),
      format_number(bounds.theta_coefficient),
      std::to_string(bounds.n_min),
      std::to_string(kSpecialNMin),
      format_number(bounds.failure_probability)};
  if (cfg.corollary) {
    if (!cfg.covariance)
      throw ConfigError("corollary check requires a [covariance] section");
    const CovarianceSpec sigma =
        config_detail::build_covariance(*cfg.covariance, cfg.p);
    std::optional<CovarianceSpec> sigma_e;
    if (cfg.contamination && cfg.contamination->random)
      sigma_e = config_detail::build_covariance(*cfg.contamination->random, cfg.p);
    const CorollaryVerdict verdict = corollary_check(
        cfg.corollary->s, cfg.corollary->o, cfg.corollary->c,
        cfg.corollary->gamma, cfg.corollary->c0, cfg.n, cfg.p, sigma, sigma_e,
        cfg.corruption);
    row.push_back(format_number(verdict.gamma_min));
    row.push_back(run_detail::flag(verdict.gamma_ok));
    row.push_back(run_detail::flag(verdict.alternate_branch_used));
    row.push_back(format_number(verdict.condition_value));
    row.push_back(run_detail::flag(verdict.condition_n_ok));
    row.push_back(format_number(verdict.kappa));
    row.push_back(format_number(verdict.c_n));
    row.push_back(verdict.re_constant ? format_number(*verdict.re_constant) : "");
    row.push_back(verdict.pass ? "pass" : "fail");
    report.summary.push_back(std::string("corollary_verdict = ") +
                             (verdict.pass ? "pass" : "fail"));
    for (const std::string& reason : verdict.reasons)
      report.summary.push_back("corollary_reason = " + reason);
  } else {
    for (int i = 0; i < 9; ++i) row.emplace_back();
  }
  report.records.push_back(std::move(row));
  report.summary.push_back("lead_constant = " + report.records[0][10]);
  report.summary.push_back("n_min_derived = " + report.records[0][13]);
}

inline void run_certify(const ExperimentConfig& cfg, RunReport& report) {
  if (cfg.n < 1 || cfg.p < 1)
    throw ConfigError("certify requires [dimensions] p and n");
  if (!cfg.covariance) throw ConfigError("certify requires [covariance]");
  if (!cfg.cone) throw ConfigError("certify requires [cone]");
  const CovarianceSpec cov =
      config_detail::build_covariance(*cfg.covariance, cfg.p);
  const ContaminationSpec contamination =
      config_detail::build_contamination(cfg.contamination, cfg.p, cfg.n);
  const bool matrix_space = cfg.cone->space == "matrix";
  const BoundMode mode =
      cfg.mode == "special" ? BoundMode::special : BoundMode::general;

  report.columns = {"trial",     "seed",       "kappa_hat",
                    "bound",     "margin",     "num_points",
                    "num_refinements", "violations"};
  report.records.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for_indexed(cfg.trials, cfg.workers, [&](Index trial) {
    const std::uint64_t trial_seed =
        SubstreamRng::derive_seed(cfg.seed, "certify-trial",
                                  static_cast<std::uint64_t>(trial));
    const DesignSample sample =
        sample_design(cfg.p, cfg.n, cov, contamination, trial_seed);
    TheoremContext context;
    context.mode = mode;
    if (mode == BoundMode::general)
      context.params = cfg.params.value_or(BoundParams::paper());
    context.sigma_s = sample.Sigma_S;
    context.corruption_spectral = sample.corruption_spectral();
    ReCertificate cert;
    if (matrix_space) {
      const ConeSpecMatrix cone =
          config_detail::build_matrix_cone(*cfg.cone, cfg.p, cfg.n);
      cert = empirical_re_matrix(sample.X_norm, cone, cfg.points,
                                 cfg.refine_iters, trial_seed, nullptr,
                                 &context);
    } else {
      const ConeSpecVector cone =
          config_detail::build_cone(*cfg.cone, cfg.p, cfg.n);
      cert = empirical_re_vector(sample.X_norm, cone, cfg.points,
                                 cfg.refine_iters, trial_seed, &context);
    }
    report.records[static_cast<std::size_t>(trial)] = {
        std::to_string(trial),
        std::to_string(trial_seed),
        format_number(cert.kappa_hat),
        cert.bound ? format_number(*cert.bound) : "",
        cert.margin ? format_number(*cert.margin) : "",
        std::to_string(cert.num_points),
        std::to_string(cert.num_refinements),
        std::to_string(cert.violations)};
  });

  double min_kappa = kInf;
  double min_margin = kInf;
  Index total_violations = 0;
  bool soundness_ok = true;
  for (const auto& row : report.records) {
    min_kappa = std::min(min_kappa, run_detail::cell_value(row, 2));
    if (!row[4].empty())
      min_margin = std::min(min_margin, run_detail::cell_value(row, 4));
    const double violations = run_detail::cell_value(row, 7);
    total_violations += static_cast<Index>(violations);
    // With no pointwise violation the theoretical bound cannot exceed the
    // empirical estimate; a negative margin then indicates a certifier bug.
    if (violations == 0 && !row[4].empty() &&
        run_detail::cell_value(row, 4) < -1e-9)
      soundness_ok = false;
  }
  report.summary.push_back("min_kappa_hat = " + format_number(min_kappa));
  report.summary.push_back("min_margin = " + format_number(min_margin));
  report.summary.push_back("total_violations = " +
                           std::to_string(total_violations));
  report.summary.push_back(std::string("certificate_soundness = ") +
                           (soundness_ok ? "ok" : "VIOLATED"));
  report.property_failure = !soundness_ok;
}

inline void run_verify_lemmas(const ExperimentConfig& cfg, RunReport& report) {
  if (cfg.n < 1 || cfg.p < 1)
    throw ConfigError("verify-lemmas requires [dimensions] p and n");
  if (!cfg.covariance)
    throw ConfigError("verify-lemmas requires [covariance] (Sigma_S)");
  const CovarianceSpec cov_s =
      config_detail::build_covariance(*cfg.covariance, cfg.p);

  report.columns = {"trial", "seed", "lemma", "statistic", "bound", "violated"};
  bool pass = true;

  if (cfg.lemma == "aux1" || cfg.lemma == "both") {
    const Matrix sigma_s = cov_s.dense_matrix();
    const double bound = lemma_aux1_bound(cfg.n, cfg.p, cfg.t, cfg.r1,
                                          varrho(sigma_s));
    std::vector<double> stats(static_cast<std::size_t>(cfg.trials));
    parallel_for_indexed(cfg.trials, cfg.workers, [&](Index trial) {
      SubstreamRng rng(
          SubstreamRng::derive_seed(cfg.seed, "lemma-aux1",
                                    static_cast<std::uint64_t>(trial)),
          "trial");
      const Matrix x = cov_s.sample_rows(cfg.n, rng) /
                       std::sqrt(static_cast<double>(cfg.n));
      double inf_value = kInf;
      for (Index k = 0; k < cfg.points; ++k) {
        Vector b;
        if (!detail::sample_ellipse_l1_point(sigma_s, 1.0, cfg.r1, rng, b))
          continue;
        inf_value = std::min(inf_value, (x * b).norm());
      }
      stats[static_cast<std::size_t>(trial)] = inf_value;
    });
    Index violations = 0;
    for (Index trial = 0; trial < cfg.trials; ++trial) {
      const double stat = stats[static_cast<std::size_t>(trial)];
      const bool violated = stat < bound;
      violations += violated;
      report.records.push_back({std::to_string(trial), "", "aux1",
                                format_number(stat), format_number(bound),
                                run_detail::flag(violated)});
    }
    const double pb = std::exp(-static_cast<double>(cfg.n) * cfg.t * cfg.t / 2.0);
    const double slack =
        3.0 * std::sqrt(pb * (1.0 - pb) / static_cast<double>(cfg.trials));
    const double freq =
        static_cast<double>(violations) / static_cast<double>(cfg.trials);
    const bool ok = freq <= pb + slack + 1e-15;
    pass = pass && ok;
    report.summary.push_back("aux1_violation_frequency = " + format_number(freq));
    report.summary.push_back("aux1_probability_bound = " + format_number(pb));
    report.summary.push_back(std::string("aux1_within_bound = ") +
                             (ok ? "true" : "false"));
  }

  if (cfg.lemma == "aux2" || cfg.lemma == "both") {
    const Matrix sigma_s = cov_s.dense_matrix();
    const double bound =
        lemma_aux2_bound(cfg.n, cfg.p, cfg.r1, cfg.r2, varrho(sigma_s));
    detail::require(v_feasible(sigma_s, cfg.r1, cfg.r2),
                    "verify-lemmas: V(r1, r2) is empty");
    std::vector<double> stats(static_cast<std::size_t>(cfg.trials));
    parallel_for_indexed(cfg.trials, cfg.workers, [&](Index trial) {
      SubstreamRng rng(
          SubstreamRng::derive_seed(cfg.seed, "lemma-aux2",
                                    static_cast<std::uint64_t>(trial)),
          "trial");
      const Matrix x = cov_s.sample_rows(cfg.n, rng) /
                       std::sqrt(static_cast<double>(cfg.n));
      stats[static_cast<std::size_t>(trial)] =
          sampled_bilinear_sup(x, sigma_s, cfg.r1, cfg.r2, cfg.points, rng);
    });
    for (Index trial = 0; trial < cfg.trials; ++trial)
      report.records.push_back({std::to_string(trial), "", "aux2",
                                format_number(stats[static_cast<std::size_t>(trial)]),
                                format_number(bound), ""});
    // Mean and spread aggregated from the formatted cells so the summary is
    // recomputable from the records file.
    double mean = 0.0;
    std::vector<double> parsed;
    for (const auto& row : report.records)
      if (row[2] == "aux2") {
        parsed.push_back(run_detail::cell_value(row, 3));
        mean += parsed.back();
      }
    mean /= static_cast<double>(cfg.trials);
    double var = 0.0;
    for (const double v : parsed) var += (v - mean) * (v - mean);
    var /= std::max<double>(1.0, static_cast<double>(cfg.trials - 1));
    const double stderr_mean = std::sqrt(var / static_cast<double>(cfg.trials));
    const bool ok = mean <= bound + 3.0 * stderr_mean + 1e-15;
    pass = pass && ok;
    report.summary.push_back("aux2_empirical_mean = " + format_number(mean));
    report.summary.push_back("aux2_bound = " + format_number(bound));
    report.summary.push_back("aux2_standard_error = " +
                             format_number(stderr_mean));
    report.summary.push_back(std::string("aux2_within_bound = ") +
                             (ok ? "true" : "false"));
  }

  report.property_failure = !pass;
}

inline void run_theorem_mc(const ExperimentConfig& cfg, RunReport& report) {
  if (cfg.n < 1 || cfg.p < 1)
    throw ConfigError("theorem-mc requires [dimensions] p and n");
  if (!cfg.covariance) throw ConfigError("theorem-mc requires [covariance]");
  const CovarianceSpec cov =
      config_detail::build_covariance(*cfg.covariance, cfg.p);
  const ContaminationSpec contamination =
      config_detail::build_contamination(cfg.contamination, cfg.p, cfg.n);
  const BoundMode mode =
      cfg.mode == "special" ? BoundMode::special : BoundMode::general;
  const std::optional<BoundParams> params =
      mode == BoundMode::general
          ? std::optional<BoundParams>(cfg.params.value_or(BoundParams::paper()))
          : std::nullopt;

  report.columns = {"trial", "seed", "num_points", "violations", "min_slack"};
  report.records.resize(static_cast<std::size_t>(cfg.trials));
  parallel_for_indexed(cfg.trials, cfg.workers, [&](Index trial) {
    const std::uint64_t trial_seed = SubstreamRng::derive_seed(
        cfg.seed, "design", static_cast<std::uint64_t>(trial));
    const DesignSample sample =
        sample_design(cfg.p, cfg.n, cov, contamination, trial_seed);
    SubstreamRng point_rng(trial_seed, "points");
    const auto points =
        sample_augmented_points(cfg.p, cfg.n, cfg.points, point_rng);
    const ViolationReport vr =
        check_theorem_pointwise(sample, points, mode, params);
    report.records[static_cast<std::size_t>(trial)] = {
        std::to_string(trial), std::to_string(trial_seed),
        std::to_string(vr.num_points), std::to_string(vr.violations),
        format_number(vr.min_slack)};
  });

  Index violating_designs = 0;
  for (const auto& row : report.records)
    violating_designs += run_detail::cell_value(row, 3) > 0.0;
  const double fraction =
      static_cast<double>(violating_designs) / static_cast<double>(cfg.trials);
  const double prob_bound =
      mode == BoundMode::special
          ? std::min(1.0, 2.0 * std::exp(-static_cast<double>(cfg.n) / 297.0))
          : failure_probability(*params, cfg.n);
  const double slack = 3.0 * std::sqrt(prob_bound * (1.0 - prob_bound) /
                                       static_cast<double>(cfg.trials));
  const bool ok = fraction <= prob_bound + slack + 1e-15;
  report.summary.push_back("violating_design_fraction = " +
                           format_number(fraction));
  report.summary.push_back("probability_bound = " + format_number(prob_bound));
  report.summary.push_back("binomial_slack = " + format_number(slack));
  report.summary.push_back(std::string("within_bound = ") +
                           (ok ? "true" : "false"));
  report.property_failure = !ok;
}

inline void run_solve(const ExperimentConfig& cfg, RunReport& report,
                      const std::filesystem::path& out_dir) {
  if (!cfg.solver) throw ConfigError("solve requires a [solver] section");
  const SolverDesc& desc = *cfg.solver;
  if (desc.x_file.empty()) throw ConfigError("solve requires x_file");
  const Matrix x_norm = read_matrix_file(desc.x_file);
  const Index n = x_norm.rows();
  const Index p = x_norm.cols();

  SolverConfig base = default_simulation_config(p, n);
  SolverConfig solver_cfg(desc.lambda_b.value_or(base.lambda_b),
                          desc.lambda_theta.value_or(base.lambda_theta),
                          desc.max_iters, desc.tol);

  report.columns = {"run",  "kind",       "converged", "iterations",
                    "objective", "kkt_violation", "nnz_b", "nnz_theta",
                    "cone_margin"};

  if (desc.kind == "lasso") {
    if (desc.y_file.empty()) throw ConfigError("lasso solve requires y_file");
    const Vector y = read_vector_file(desc.y_file);
    const SolverResult result = solve_robust_lasso(y, x_norm, solver_cfg);
    const double objective = robust_lasso_objective(
        y, x_norm, result.b_hat, result.theta_hat, solver_cfg);
    const double kkt = robust_lasso_kkt_violation(
        y, x_norm, result.b_hat, result.theta_hat, solver_cfg);
    std::string cone_margin;
    if (!desc.b_star_file.empty() && !desc.theta_star_file.empty() && cfg.cone) {
      const Vector b_star = read_vector_file(desc.b_star_file);
      const Vector theta_star = read_vector_file(desc.theta_star_file);
      const ConeSpecVector cone = config_detail::build_cone(*cfg.cone, p, n);
      cone_margin =
          format_number(error_in_cone_check(result, b_star, theta_star, cone));
    }
    report.records.push_back(
        {"0", "lasso", run_detail::flag(result.converged),
         std::to_string(result.iterations), format_number(objective),
         format_number(kkt),
         std::to_string((result.b_hat.array() != 0.0).count()),
         std::to_string((result.theta_hat.array() != 0.0).count()),
         cone_margin});
    write_vector_file((out_dir / "b_hat.csv").string(), result.b_hat);
    write_vector_file((out_dir / "theta_hat.csv").string(), result.theta_hat);
    report.summary.push_back("objective = " + format_number(objective));
    report.summary.push_back(std::string("converged = ") +
                             (result.converged ? "true" : "false"));
  } else {
    if (desc.m_file.empty()) throw ConfigError("multitask solve requires m_file");
    const Matrix m = read_matrix_file(desc.m_file);
    const SolverResult result = solve_multitask_robust(m, x_norm, solver_cfg);
    const double objective = multitask_objective(m, x_norm, result.B_hat,
                                                 result.Theta_hat, solver_cfg);
    const double kkt = multitask_kkt_violation(m, x_norm, result.B_hat,
                                               result.Theta_hat, solver_cfg);
    Index nnz_rows = 0;
    for (Index i = 0; i < result.Theta_hat.rows(); ++i)
      nnz_rows += result.Theta_hat.row(i).norm() > 0.0;
    report.records.push_back(
        {"0", "multitask", run_detail::flag(result.converged),
         std::to_string(result.iterations), format_number(objective),
         format_number(kkt),
         std::to_string((result.B_hat.array() != 0.0).count()),
         std::to_string(nnz_rows), ""});
    write_matrix_file((out_dir / "B_hat.csv").string(), result.B_hat);
    write_matrix_file((out_dir / "Theta_hat.csv").string(), result.Theta_hat);
    report.summary.push_back("objective = " + format_number(objective));
    report.summary.push_back(std::string("converged = ") +
                             (result.converged ? "true" : "false"));
  }
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

// Deterministic given (config, seed): reruns produce byte-identical CSVs.
inline RunReport run_experiment(const ExperimentConfig& config,
                                const RunOverrides& overrides = {}) {
  ExperimentConfig cfg = config;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (overrides.workers) cfg.workers = *overrides.workers;

  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.kind = cfg.kind;

  const std::filesystem::path out_dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + cfg.out_dir);

  switch (cfg.kind) {
    case ExperimentKind::audit: run_audit(cfg, report); break;
    case ExperimentKind::bounds: run_bounds(cfg, report); break;
    case ExperimentKind::certify: run_certify(cfg, report); break;
    case ExperimentKind::verify_lemmas: run_verify_lemmas(cfg, report); break;
    case ExperimentKind::theorem_mc: run_theorem_mc(cfg, report); break;
    case ExperimentKind::solve: run_solve(cfg, report, out_dir); break;
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  std::string stem = kind_name(cfg.kind);
  std::replace(stem.begin(), stem.end(), '-', '_');
  report.records_path = (out_dir / (stem + "_records.csv")).string();
  report.summary_path = (out_dir / (stem + "_summary.txt")).string();

  {
    std::ofstream out(report.records_path);
    if (!out) throw IoError("cannot write " + report.records_path);
    out << report.records_csv();
    if (!out) throw IoError("write failed: " + report.records_path);
  }
  {
    std::ofstream out(report.summary_path);
    if (!out) throw IoError("cannot write " + report.summary_path);
    out << "kind = " << kind_name(cfg.kind) << "\n";
    out << "toolkit_version = " << kToolkitVersion << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "records = " << report.records.size() << "\n";
    for (const std::string& line : report.summary) out << line << "\n";
    out << "status = " << (report.property_failure ? "PROPERTY-FAILURE" : "ok")
        << "\n";
    out << "wall_clock_seconds = " << format_number(elapsed) << "\n";
    out << "config:\n";
    std::istringstream echo(cfg.raw_text);
    std::string line;
    while (std::getline(echo, line)) out << "  " << line << "\n";
    if (!out) throw IoError("write failed: " + report.summary_path);
  }
  return report;
}

}  // namespace recert
