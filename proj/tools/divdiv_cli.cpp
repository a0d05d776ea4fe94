// Command-line driver: run <config> | verify --all [--dim D] | converge ...
#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "divdiv/runner.hpp"

namespace {

// The config parser already validates level lists; feed it a minimal config.
std::vector<int> parse_levels(const std::string& text) {
  std::istringstream cfg("dim = 2\nk = 1\nlevels = " + text + "\n");
  return divdiv::parse_config(cfg, "--levels").levels;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed and hybridized finite elements for the clamped plate problem"};
  app.require_subcommand(1);
  app.footer("Threads: set DIVDIV_THREADS (default 1). Exit codes: 0 ok, 1 threshold failed, 2 error.");

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Execute a key = value configuration file");
  run_cmd->add_option("config", config_path, "Configuration file")->required();

  bool all = false;
  int verify_dim = 0;
  unsigned verify_seed = 2024;
  std::string verify_out = "divdiv_verify";
  auto* verify_cmd = app.add_subcommand("verify", "Run the verification certificates");
  verify_cmd->add_flag("--all", all, "Run every certificate")->required();
  verify_cmd->add_option("--dim", verify_dim, "Restrict to dimension 2 or 3")->check(CLI::IsMember({2, 3}));
  verify_cmd->add_option("--seed", verify_seed, "Random seed");
  verify_cmd->add_option("--output", verify_out, "Output directory");

  divdiv::RunConfig conv;
  conv.output_dir = "divdiv_converge";
  std::string scheme = "hybridized", levels, solver = "cholesky";
  int r = -100;
  auto* conv_cmd = app.add_subcommand("converge", "Convergence study on uniform box meshes");
  conv_cmd->add_option("--dim", conv.dim, "Dimension")->required()->check(CLI::IsMember({2, 3}));
  conv_cmd->add_option("--k", conv.k, "Stress degree")->required();
  conv_cmd->add_option("--scheme", scheme, "hybridized or cdg")->check(CLI::IsMember({"hybridized", "cdg"}));
  conv_cmd->add_option("--levels", levels, "Comma-separated subdivisions, e.g. 4,8,16")->required();
  conv_cmd->add_option("--r", r, "Cell multiplier degree (k-2 or k-1)");
  conv_cmd->add_flag("--onepp", conv.onepp, "Lowest-order enriched pair (k = 1)");
  conv_cmd->add_option("--case", conv.case_id, "Manufactured case (sine, zero)");
  conv_cmd->add_option("--solver", solver, "cholesky or cg")->check(CLI::IsMember({"cholesky", "cg"}));
  conv_cmd->add_option("--seed", conv.seed, "Random seed");
  conv_cmd->add_option("--output", conv.output_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return divdiv::run(divdiv::parse_config_file(config_path), std::cout);
    if (*verify_cmd) {
      divdiv::RunConfig cfg;
      cfg.mode = divdiv::RunMode::Verify;
      cfg.dim = verify_dim;
      cfg.seed = verify_seed;
      cfg.output_dir = verify_out;
      return divdiv::run(cfg, std::cout);
    }
    conv.scheme = scheme == "cdg" ? divdiv::SchemeKind::Cdg : divdiv::SchemeKind::Hybridized;
    conv.levels = parse_levels(levels);
    if (r != -100) conv.r = r;
    conv.solve.solver = solver == "cg" ? divdiv::LinearSolver::ConjugateGradient : divdiv::LinearSolver::Cholesky;
    divdiv::validate(conv);
    return divdiv::run(conv, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
