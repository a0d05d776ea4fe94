#include "divdiv/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "divdiv/verification.hpp"

namespace divdiv {

namespace {

const std::vector<std::string> kHybridColumns = {"sigma", "hess", "u0h", "pp_h2", "pp_l2"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::Converge: return "converge";
    case RunMode::Verify: return "verify";
    case RunMode::SingleSolve: return "single-solve";
  }
  return "";
}

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Scientific with ten digits so CSV output is stable across runs.
std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(10) << v;
  return s.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string join_levels(const std::vector<int>& levels) {
  std::string s;
  for (size_t i = 0; i < levels.size(); ++i) s += (i ? "," : "") + std::to_string(levels[i]);
  return s;
}

class LineParser {
 public:
  LineParser(const std::string& source, int line, const std::string& key, const std::string& value)
      : source_(source), line_(line), key_(key), value_(value) {}

  [[noreturn]] void fail(const std::string& expected) const {
    throw Error(ErrorKind::ParseError, source_ + ":" + std::to_string(line_) + ": bad value '" + value_ + "' for '" +
                                           key_ + "' (expected " + expected + ")");
  }

  long long integer(const std::string& text) const {
    long long v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) fail("an integer");
    return v;
  }
  int integer() const { return static_cast<int>(integer(value_)); }

  double real() const {
    // from_chars for double is missing in older libstdc++; strtod on the whole token instead.
    char* end = nullptr;
    const double v = std::strtod(value_.c_str(), &end);
    if (value_.empty() || end != value_.c_str() + value_.size() || !std::isfinite(v)) fail("a number");
    return v;
  }

  bool boolean() const {
    if (value_ == "true") return true;
    if (value_ == "false") return false;
    fail("true or false");
  }

  std::vector<int> integer_list() const {
    std::vector<int> out;
    std::stringstream ss(value_);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(integer(trim(item))));
    if (out.empty() || value_.back() == ',') fail("a comma-separated list of integers");
    return out;
  }

 private:
  std::string source_;
  int line_;
  std::string key_, value_;
};

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"mode", "converge"},
      {"dim", "required for converge and single-solve; verify: both dimensions"},
      {"scheme", "hybridized"},
      {"k", "required for converge and single-solve"},
      {"r", "k-2"},
      {"onepp", "false"},
      {"levels", "required for converge and single-solve"},
      {"case", "sine"},
      {"seed", "2024"},
      {"output", "divdiv_out"},
      {"solver", "cholesky"},
      {"cg_tolerance", "1e-12"},
      {"cg_max_iterations", "100000"},
      {"load_degree_extra", "6"},
      {"min_rate_sigma", "k+1-0.15 (3D: k+1-0.4)"},
      {"min_rate_hess", "k+1-0.15 (3D: unchecked)"},
      {"min_rate_u0h", "k+1-0.2 (3D: unchecked)"},
      {"min_rate_pp_h2", "k+1-0.15 (3D: unchecked)"},
      {"min_rate_pp_l2", "min(2k-2, k+3)-0.2 for k >= 2 (3D: unchecked)"},
      {"min_rate_energy", "k-1-0.15"},
  };
  return keys;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw Error(ErrorKind::ParseError, where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::none_of(keys.begin(), keys.end(), [&](const auto& kv) { return kv.first == key; }))
      throw Error(ErrorKind::ParseError, where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(ErrorKind::ParseError, where + "duplicate key '" + key + "'");
    const LineParser p(source, line_no, key, value);

    if (key == "mode") {
      if (value == "converge") cfg.mode = RunMode::Converge;
      else if (value == "verify") cfg.mode = RunMode::Verify;
      else if (value == "single-solve") cfg.mode = RunMode::SingleSolve;
      else p.fail("converge, verify or single-solve");
    } else if (key == "dim") {
      cfg.dim = p.integer();
    } else if (key == "scheme") {
      if (value == "hybridized") cfg.scheme = SchemeKind::Hybridized;
      else if (value == "cdg") cfg.scheme = SchemeKind::Cdg;
      else p.fail("hybridized or cdg");
    } else if (key == "k") {
      cfg.k = p.integer();
    } else if (key == "r") {
      cfg.r = p.integer();
    } else if (key == "onepp") {
      cfg.onepp = p.boolean();
    } else if (key == "levels") {
      cfg.levels = p.integer_list();
    } else if (key == "case") {
      if (value.empty()) p.fail("a case name");
      cfg.case_id = value;
    } else if (key == "seed") {
      const long long s = p.integer(value);
      if (s < 0 || s > 0xffffffffLL) p.fail("an unsigned 32-bit integer");
      cfg.seed = static_cast<unsigned>(s);
    } else if (key == "output") {
      if (value.empty()) p.fail("a directory");
      cfg.output_dir = value;
    } else if (key == "solver") {
      if (value == "cholesky") cfg.solve.solver = LinearSolver::Cholesky;
      else if (value == "cg") cfg.solve.solver = LinearSolver::ConjugateGradient;
      else p.fail("cholesky or cg");
    } else if (key == "cg_tolerance") {
      cfg.solve.cg_tolerance = p.real();
    } else if (key == "cg_max_iterations") {
      cfg.solve.cg_max_iterations = p.integer();
    } else if (key == "load_degree_extra") {
      cfg.solve.load_degree_extra = p.integer();
    } else {
      const std::string column = key.substr(std::string("min_rate_").size());
      if (value == "none") cfg.disabled_rates.push_back(column);
      else cfg.min_rate[column] = p.real();
    }
  }

  if (cfg.mode != RunMode::Verify) {
    for (const char* required : {"dim", "k", "levels"})
      if (!seen.count(required))
        throw Error(ErrorKind::ConfigError, source + ": missing required key '" + std::string(required) + "'");
  }
  validate(cfg);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string to_config_text(const RunConfig& c) {
  std::ostringstream s;
  s << "mode = " << mode_name(c.mode) << '\n';
  if (c.dim != 0) s << "dim = " << c.dim << '\n';
  s << "scheme = " << (c.scheme == SchemeKind::Cdg ? "cdg" : "hybridized") << '\n';
  if (c.k >= 0) s << "k = " << c.k << '\n';
  if (c.r) s << "r = " << *c.r << '\n';
  s << "onepp = " << (c.onepp ? "true" : "false") << '\n';
  if (!c.levels.empty()) s << "levels = " << join_levels(c.levels) << '\n';
  s << "case = " << c.case_id << '\n';
  s << "seed = " << c.seed << '\n';
  s << "output = " << c.output_dir << '\n';
  s << "solver = " << (c.solve.solver == LinearSolver::Cholesky ? "cholesky" : "cg") << '\n';
  s << "cg_tolerance = " << number(c.solve.cg_tolerance) << '\n';
  s << "cg_max_iterations = " << c.solve.cg_max_iterations << '\n';
  s << "load_degree_extra = " << c.solve.load_degree_extra << '\n';
  for (const auto& [col, v] : c.min_rate) s << "min_rate_" << col << " = " << number(v) << '\n';
  for (const auto& col : c.disabled_rates) s << "min_rate_" << col << " = none\n";
  return s.str();
}

void validate(const RunConfig& c) {
  auto reject = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  if (c.mode == RunMode::Verify) {
    if (c.dim != 0 && c.dim != 2 && c.dim != 3) reject("dim must be 2 or 3");
    return;
  }
  if (c.dim != 2 && c.dim != 3) reject("dim must be 2 or 3");
  if (c.k < 0 || c.k > 6) reject("k must lie in 0..6");
  if (c.scheme == SchemeKind::Cdg) {
    if (c.k < 2) reject("the C0 DG scheme needs k >= 2");
    if (c.onepp || (c.r && *c.r != c.k - 2)) reject("the C0 DG scheme uses r = k-2 without enrichment");
  }
  if (c.onepp) {
    if (c.k != 1) reject("onepp is the k = 1 pair");
    if (c.r) reject("onepp fixes r; remove the r key");
  }
  if (c.r && *c.r != c.k - 2 && *c.r != c.k - 1) reject("r must be k-2 or k-1");
  if (c.r && *c.r == c.k - 1 && c.k < 1) reject("r = k-1 needs k >= 1");
  if (c.levels.empty()) reject("levels must not be empty");
  if (c.levels.front() < 1) reject("levels must be positive");
  for (size_t i = 1; i < c.levels.size(); ++i)
    if (c.levels[i] <= c.levels[i - 1]) reject("levels must be strictly increasing");
  if (c.mode == RunMode::Converge && c.levels.size() < 2) reject("a convergence study needs at least two levels");
  if (c.mode == RunMode::SingleSolve && c.levels.size() != 1) reject("single-solve takes exactly one level");
  if (c.solve.cg_tolerance <= 0 || c.solve.cg_max_iterations < 1) reject("CG tolerance and iteration cap must be positive");
  if (c.solve.load_degree_extra < 0) reject("load_degree_extra must be non-negative");
  for (const auto& [col, v] : c.min_rate)
    if (std::find(c.disabled_rates.begin(), c.disabled_rates.end(), col) != c.disabled_rates.end())
      reject("min_rate_" + col + " is both set and disabled");
  try {
    make_case(c.case_id, c.dim);
  } catch (const Error& e) {
    reject(e.what());
  }
}

SchemeSpec scheme_spec(const RunConfig& c) {
  if (c.onepp) return onepp_scheme();
  if (c.r && *c.r == c.k - 1) return rt_scheme(c.k);
  return standard_scheme(c.k);
}

std::map<std::string, double> effective_rate_thresholds(const RunConfig& c) {
  std::map<std::string, double> t;
  const double k = c.k;
  if (c.scheme == SchemeKind::Cdg) {
    t["energy"] = k - 1 - 0.15;
  } else if (c.dim == 3) {
    // Desk-size 3D meshes are pre-asymptotic; only the stress error is checked by default.
    t["sigma"] = k + 1 - 0.4;
  } else {
    t["sigma"] = k + 1 - 0.15;
    t["hess"] = k + 1 - 0.15;
    t["u0h"] = k + 1 - 0.2;
    t["pp_h2"] = k + 1 - 0.15;
    if (c.k >= 2) t["pp_l2"] = std::min(2 * k - 2, k + 3) - 0.2;
  }
  for (const auto& [col, v] : c.min_rate) t[col] = v;
  for (const auto& col : c.disabled_rates) t.erase(col);
  return t;
}

RunSummary run_study(const RunConfig& c) {
  validate(c);
  if (c.mode == RunMode::Verify) throw Error(ErrorKind::ConfigError, "run_study handles converge and single-solve");
  const ManufacturedCase mc = make_case(c.case_id, c.dim);
  RunSummary out;
  for (int n : c.levels) {
    const SimplicialMesh mesh = build_box_mesh(c.dim, n);
    LevelResult lr;
    if (c.scheme == SchemeKind::Cdg) {
      const Discretization disc(mesh, standard_scheme(c.k));
      const CdgSolution sol = solve_cdg(disc, mc, c.solve);
      lr.row.h = max_cell_diameter(mesh);
      lr.row.unknowns = static_cast<int>(sol.u.size());
      lr.row.assemble_seconds = sol.assemble_seconds;
      lr.row.solve_seconds = sol.solve_seconds;
      lr.energy_error = sol.energy_error;
    } else {
      const Discretization disc(mesh, scheme_spec(c));
      DiscreteSolution sol = solve_hybridized(disc, mc.f, c.solve);
      postprocess(disc, sol);
      lr.row = compute_errors(disc, sol, mc, 2 * disc.spec().k + 6);
    }
    lr.row.n = n;
    out.levels.push_back(lr);
  }
  if (c.mode == RunMode::SingleSolve) return out;

  std::vector<double> h;
  for (const auto& lr : out.levels) h.push_back(lr.row.h);
  auto column = [&](const std::string& name) {
    std::vector<double> e;
    for (const auto& lr : out.levels) {
      const ErrorRow& r = lr.row;
      e.push_back(name == "sigma"   ? r.err_sigma
                  : name == "hess"  ? r.err_hess
                  : name == "u0h"   ? r.err_u0h
                  : name == "pp_h2" ? r.err_pp_h2
                  : name == "pp_l2" ? r.err_pp_l2
                                    : lr.energy_error);
    }
    return e;
  };
  const auto thresholds = effective_rate_thresholds(c);
  const std::vector<std::string> columns =
      c.scheme == SchemeKind::Cdg ? std::vector<std::string>{"energy"} : kHybridColumns;
  for (const std::string& col : columns) {
    RateCheck rc;
    rc.column = col;
    rc.rate = fit_rate(h, column(col));
    const auto it = thresholds.find(col);
    rc.threshold = it == thresholds.end() ? std::nan("") : it->second;
    rc.pass = it == thresholds.end() || rc.rate >= rc.threshold;
    out.pass = out.pass && rc.pass;
    out.rates.push_back(rc);
  }
  return out;
}

void write_error_csv(const RunConfig& c, const RunSummary& s, std::ostream& out) {
  if (c.scheme == SchemeKind::Cdg) {
    out << "n,h,unknowns,err_energy\n";
    for (const auto& lr : s.levels)
      out << lr.row.n << ',' << sci(lr.row.h) << ',' << lr.row.unknowns << ',' << sci(lr.energy_error) << '\n';
    return;
  }
  out << "n,h,unknowns,err_sigma,err_hess,err_u0h,err_pp_h2,err_pp_l2\n";
  for (const auto& lr : s.levels) {
    const ErrorRow& r = lr.row;
    out << r.n << ',' << sci(r.h) << ',' << r.unknowns << ',' << sci(r.err_sigma) << ',' << sci(r.err_hess) << ','
        << sci(r.err_u0h) << ',' << sci(r.err_pp_h2) << ',' << sci(r.err_pp_l2) << '\n';
  }
}

void write_rate_csv(const RunSummary& s, std::ostream& out) {
  out << "column,rate,min_rate,pass\n";
  for (const auto& rc : s.rates)
    out << rc.column << ',' << fixed(rc.rate, 6) << ',' << (std::isnan(rc.threshold) ? "none" : fixed(rc.threshold, 6))
        << ',' << (rc.pass ? 1 : 0) << '\n';
}

void write_markdown(const RunConfig& c, const RunSummary& s, std::ostream& out) {
  const bool cdg = c.scheme == SchemeKind::Cdg;
  out << "# " << (c.mode == RunMode::SingleSolve ? "Single solve" : "Convergence study") << "\n\n";
  out << "- dimension: " << c.dim << "\n- scheme: "
      << (cdg ? "C0 DG, degree " + std::to_string(c.k) : scheme_spec(c).name() + " (hybridized)") << "\n- case: " << c.case_id
      << "\n- seed: " << c.seed << "\n- solver: " << (c.solve.solver == LinearSolver::Cholesky ? "cholesky" : "cg")
      << "\n\n";
  if (cdg) {
    out << "| n | h | unknowns | energy error | assemble [s] | solve [s] |\n|---|---|---|---|---|---|\n";
    for (const auto& lr : s.levels)
      out << "| " << lr.row.n << " | " << sci(lr.row.h) << " | " << lr.row.unknowns << " | " << sci(lr.energy_error)
          << " | " << fixed(lr.row.assemble_seconds, 3) << " | " << fixed(lr.row.solve_seconds, 3) << " |\n";
  } else {
    out << "| n | h | unknowns | stress L2 | weak Hessian | weighted L2 | postprocessed H2 | postprocessed L2 | "
           "assemble [s] | solve [s] |\n|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& lr : s.levels) {
      const ErrorRow& r = lr.row;
      out << "| " << r.n << " | " << sci(r.h) << " | " << r.unknowns << " | " << sci(r.err_sigma) << " | "
          << sci(r.err_hess) << " | " << sci(r.err_u0h) << " | " << sci(r.err_pp_h2) << " | " << sci(r.err_pp_l2)
          << " | " << fixed(r.assemble_seconds, 3) << " | " << fixed(r.solve_seconds, 3) << " |\n";
    }
  }
  if (!s.rates.empty()) {
    out << "\n| column | fitted rate | minimum | result |\n|---|---|---|---|\n";
    for (const auto& rc : s.rates)
      out << "| " << rc.column << " | " << fixed(rc.rate, 3) << " | "
          << (std::isnan(rc.threshold) ? "-" : fixed(rc.threshold, 2)) << " | " << (rc.pass ? "PASS" : "FAIL") << " |\n";
  }
  out << "\nOverall: " << (s.pass ? "PASS" : "FAIL") << '\n';
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  f << text;
}

}  // namespace

int run(const RunConfig& c, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  try {
    fs::create_directories(dir);
    validate(c);
    write_file(dir / "config.txt", to_config_text(c));
    const auto t0 = std::chrono::steady_clock::now();

    if (c.mode == RunMode::Verify) {
      const std::vector<CertificateReport> reports = verify_all(c.dim, c.seed);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::ostringstream text, csv, md;
      int failed = 0;
      for (const auto& r : reports) {
        text << to_text(r) << '\n';
        failed += !r.pass;
      }
      write_csv(reports, csv);
      md << "# Verification certificates\n\n- seed: " << c.seed << "\n- checks: " << reports.size()
         << "\n- failed: " << failed << "\n- wall time [s]: " << fixed(secs, 2) << "\n\n```\n" << text.str() << "```\n";
      write_file(dir / "certificates.txt", text.str());
      write_file(dir / "certificates.csv", csv.str());
      write_file(dir / "report.md", md.str());
      log << text.str() << (failed ? "FAIL" : "PASS") << ": " << reports.size() - failed << "/" << reports.size()
          << " certificates pass\n";
      return failed ? 1 : 0;
    }

    const RunSummary s = run_study(c);
    std::ostringstream errors, rates, md;
    write_error_csv(c, s, errors);
    write_markdown(c, s, md);
    write_file(dir / "errors.csv", errors.str());
    if (c.mode == RunMode::Converge) {
      write_rate_csv(s, rates);
      write_file(dir / "rates.csv", rates.str());
    }
    write_file(dir / "report.md", md.str());
    log << md.str();
    return s.pass ? 0 : 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    try {
      fs::create_directories(dir);
      write_file(dir / "diagnostic.txt", std::string("error: ") + e.what() + "\n\nconfig:\n" + to_config_text(c));
    } catch (const std::exception&) {
      log << "could not write " << (dir / "diagnostic.txt").string() << '\n';
    }
    return 2;
  }
}

}  // namespace divdiv
