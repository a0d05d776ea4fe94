#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "divdiv/solvers.hpp"

namespace divdiv {

enum class RunMode { Converge, Verify, SingleSolve };
enum class SchemeKind { Hybridized, Cdg };

/// Batch run description. Keys of the text format are listed in
/// config_keys(); unset rate thresholds take degree-dependent defaults.
struct RunConfig {
  RunMode mode = RunMode::Converge;
  int dim = 0;  // 0 in verify mode: both dimensions
  SchemeKind scheme = SchemeKind::Hybridized;
  int k = -1;
  std::optional<int> r;  // k-2 (default) or k-1
  bool onepp = false;    // lowest-order enriched pair, k = 1 only
  std::vector<int> levels;
  std::string case_id = "sine";
  unsigned seed = 2024;
  std::string output_dir = "divdiv_out";
  SolveOptions solve;
  // Minimal fitted rates; a missing entry is not checked. Names are the
  // error columns: sigma, hess, u0h, pp_h2, pp_l2, energy.
  std::map<std::string, double> min_rate;
  std::vector<std::string> disabled_rates;
};

/// Accepted keys with their documented defaults, in file order.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Parses "key = value" lines; '#' starts a comment. `source` names the
/// input in messages. Throws ConfigError or ParseError.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig parse_config_file(const std::string& path);
/// Fully resolved config in the same format; parse_config reads it back unchanged.
std::string to_config_text(const RunConfig& config);

/// Checks the scheme/degree preconditions and level ordering (ConfigError).
void validate(const RunConfig& config);

/// Stress/multiplier pair selected by k, r and onepp.
SchemeSpec scheme_spec(const RunConfig& config);

/// Thresholds actually applied: defaults from k, then overrides, minus disabled.
std::map<std::string, double> effective_rate_thresholds(const RunConfig& config);

struct LevelResult {
  ErrorRow row;
  double energy_error = 0.0;  // C0 DG only
};

struct RateCheck {
  std::string column;
  double rate = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct RunSummary {
  std::vector<LevelResult> levels;
  std::vector<RateCheck> rates;
  bool pass = true;
};

/// Runs the levels of a converge or single-solve config without writing files.
RunSummary run_study(const RunConfig& config);

/// Error table as CSV, deterministic (no timings).
void write_error_csv(const RunConfig& config, const RunSummary& summary, std::ostream& out);
void write_rate_csv(const RunSummary& summary, std::ostream& out);
/// Markdown report with the error table, timings and rate checks.
void write_markdown(const RunConfig& config, const RunSummary& summary, std::ostream& out);

/// Executes a config and writes its artifacts into output_dir. Returns
/// 0 when every threshold passes, 1 otherwise, 2 after an error (a
/// diagnostic.txt is written next to the other artifacts).
int run(const RunConfig& config, std::ostream& log);

}  // namespace divdiv
