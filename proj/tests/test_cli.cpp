#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "divdiv/runner.hpp"

using namespace divdiv;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

ErrorKind failure_kind(const std::string& text, std::string* message = nullptr) {
  try {
    parse(text);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "config was accepted:\n" << text;
  return ErrorKind::Unsupported;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("divdiv_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, MinimalConvergeConfigIsValid) {
  const RunConfig c = parse("dim = 2\nk = 3\nlevels = 4,8,16,32\n");
  EXPECT_EQ(c.mode, RunMode::Converge);
  EXPECT_EQ(c.scheme, SchemeKind::Hybridized);
  EXPECT_EQ(c.levels, (std::vector<int>{4, 8, 16, 32}));
  EXPECT_EQ(c.case_id, "sine");
  EXPECT_EQ(scheme_spec(c).r, 1);
}

TEST(Config, HighOrderCdgIn3dIsValid) {
  const RunConfig c = parse("k = 5\nscheme = cdg\ndim = 3\nlevels = 1,2\n");
  EXPECT_EQ(c.scheme, SchemeKind::Cdg);
  EXPECT_EQ(c.k, 5);
}

TEST(Config, CdgBelowQuadraticsIsRejected) {
  EXPECT_EQ(failure_kind("dim = 2\nscheme = cdg\nk = 1\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nscheme = cdg\nk = 3\nr = 2\nlevels = 4,8\n"), ErrorKind::ConfigError);
}

TEST(Config, MissingKeyIsNamed) {
  std::string msg;
  EXPECT_EQ(failure_kind("dim = 2\nlevels = 4,8\n", &msg), ErrorKind::ConfigError);
  EXPECT_NE(msg.find("'k'"), std::string::npos) << msg;
  EXPECT_EQ(failure_kind("k = 2\nlevels = 4,8\n", &msg), ErrorKind::ConfigError);
  EXPECT_NE(msg.find("'dim'"), std::string::npos) << msg;
}

TEST(Config, BadValueReportsLineNumber) {
  std::string msg;
  EXPECT_EQ(failure_kind("dim = 2\n\n# comment\nk = two\nlevels = 4,8\n", &msg), ErrorKind::ParseError);
  EXPECT_NE(msg.find("test.cfg:4"), std::string::npos) << msg;
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,,8\n", &msg), ErrorKind::ParseError);
  EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\nscheme = mixed\n"), ErrorKind::ParseError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\nonepp = yes\n"), ErrorKind::ParseError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\nseed = -1\n"), ErrorKind::ParseError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\nmin_rate_sigma = fast\n"), ErrorKind::ParseError);
}

TEST(Config, UnknownDuplicateAndMalformedLinesAreRejected) {
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\ncolour = red\n"), ErrorKind::ParseError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nk = 2\nlevels = 4,8\n"), ErrorKind::ParseError);
  EXPECT_EQ(failure_kind("dim = 2\nk 1\nlevels = 4,8\n"), ErrorKind::ParseError);
}

TEST(Config, PreconditionsAreChecked) {
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 8,4\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,4\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("mode = single-solve\ndim = 2\nk = 1\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 4\nk = 1\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 7\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 2\nr = 3\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 0\nr = -1\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 2\nonepp = true\nlevels = 4,8\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\ncase = bumpy\n"), ErrorKind::ConfigError);
  EXPECT_EQ(failure_kind("dim = 2\nk = 1\nlevels = 4,8\nmin_rate_hess = none\nmin_rate_hess = 1\n"),
            ErrorKind::ParseError);
  EXPECT_EQ(parse("mode = verify\n").dim, 0);
}

TEST(Config, SchemeSelection) {
  EXPECT_EQ(scheme_spec(parse("dim = 2\nk = 2\nr = 1\nlevels = 4,8\n")).name(), rt_scheme(2).name());
  EXPECT_EQ(scheme_spec(parse("dim = 2\nk = 1\nonepp = true\nlevels = 4,8\n")).name(), onepp_scheme().name());
  EXPECT_EQ(scheme_spec(parse("dim = 2\nk = 0\nlevels = 4,8\n")).name(), standard_scheme(0).name());
}

TEST(Config, TextRoundTrip) {
  const RunConfig c = parse(
      "mode = converge\ndim = 3\nscheme = hybridized\nk = 2\nr = 1\nlevels = 1,2,3\ncase = zero\nseed = 99\n"
      "output = somewhere\nsolver = cg\ncg_tolerance = 1e-10\ncg_max_iterations = 77\nload_degree_extra = 4\n"
      "min_rate_sigma = 1.25\nmin_rate_pp_l2 = none\n");
  const std::string text = to_config_text(c);
  EXPECT_EQ(to_config_text(parse(text)), text);
  const RunConfig back = parse(text);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.solve.solver, LinearSolver::ConjugateGradient);
  EXPECT_EQ(back.solve.cg_tolerance, 1e-10);
  EXPECT_EQ(back.min_rate.at("sigma"), 1.25);
}

TEST(Config, DefaultThresholds) {
  const auto t3 = effective_rate_thresholds(parse("dim = 2\nk = 3\nlevels = 4,8\n"));
  EXPECT_DOUBLE_EQ(t3.at("sigma"), 3.85);
  EXPECT_DOUBLE_EQ(t3.at("u0h"), 3.8);
  EXPECT_DOUBLE_EQ(t3.at("pp_h2"), 3.85);
  EXPECT_DOUBLE_EQ(t3.at("pp_l2"), 3.8);
  const auto t1 = effective_rate_thresholds(parse("dim = 2\nk = 1\nlevels = 4,8\nmin_rate_hess = none\n"));
  EXPECT_EQ(t1.count("pp_l2"), 0u);
  EXPECT_EQ(t1.count("hess"), 0u);
  const auto t3d = effective_rate_thresholds(parse("dim = 3\nk = 1\nlevels = 2,4\n"));
  EXPECT_DOUBLE_EQ(t3d.at("sigma"), 1.6);
  EXPECT_EQ(t3d.size(), 1u);
  const auto cdg = effective_rate_thresholds(parse("dim = 2\nk = 3\nscheme = cdg\nlevels = 4,8\n"));
  EXPECT_DOUBLE_EQ(cdg.at("energy"), 1.85);
  EXPECT_EQ(cdg.size(), 1u);
}

TEST(Config, FileErrors) {
  EXPECT_THROW(parse_config_file("/nonexistent/divdiv.cfg"), Error);
  const fs::path dir = scratch_dir("file");
  fs::create_directories(dir);
  std::ofstream(dir / "a.cfg") << "dim = 2\nk = 1\nlevels = 2,4\n";
  EXPECT_EQ(parse_config_file((dir / "a.cfg").string()).k, 1);
}

TEST(Run, SingleSolveOfZeroLoadReportsZeroErrors) {
  RunConfig c = parse("mode = single-solve\ndim = 2\nk = 2\nlevels = 3\ncase = zero\n");
  c.output_dir = scratch_dir("zero").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 0) << log.str();
  const std::string csv = slurp(fs::path(c.output_dir) / "errors.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,h,unknowns,err_sigma,err_hess,err_u0h,err_pp_h2,err_pp_l2");
  EXPECT_NE(csv.find("0.0000000000e+00,0.0000000000e+00,0.0000000000e+00,0.0000000000e+00,0.0000000000e+00"),
            std::string::npos);
  EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / "rates.csv"));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "report.md"));
}

TEST(Run, ConvergeOutputsAreByteReproducible) {
  RunConfig c = parse(
      "dim = 2\nk = 1\nlevels = 2,4,8\nmin_rate_sigma = 1.3\nmin_rate_hess = 1.3\nmin_rate_u0h = 1.3\n"
      "min_rate_pp_h2 = 1.3\n");
  c.output_dir = scratch_dir("repro").string();
  std::ostringstream log;
  ASSERT_EQ(run(c, log), 0) << log.str();
  const std::string first = slurp(fs::path(c.output_dir) / "errors.csv");
  const std::string rates = slurp(fs::path(c.output_dir) / "rates.csv");
  ASSERT_EQ(run(c, log), 0);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "errors.csv"), first);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "rates.csv"), rates);
  EXPECT_EQ(slurp(fs::path(c.output_dir) / "config.txt"), to_config_text(c));
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 4);
}

TEST(Run, UnmetThresholdExitsWithOne) {
  RunConfig c = parse("dim = 2\nk = 1\nlevels = 2,4\nmin_rate_sigma = 10\n");
  c.output_dir = scratch_dir("slow").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 1);
  EXPECT_NE(slurp(fs::path(c.output_dir) / "rates.csv").find("sigma,"), std::string::npos);
  EXPECT_NE(log.str().find("FAIL"), std::string::npos);
}

TEST(Run, CdgStudyWritesEnergyColumn) {
  RunConfig c = parse("dim = 2\nk = 2\nscheme = cdg\nlevels = 2,4\nmin_rate_energy = 0.3\n");
  c.output_dir = scratch_dir("cdg").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 0) << log.str();
  const std::string csv = slurp(fs::path(c.output_dir) / "errors.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,h,unknowns,err_energy");
}

TEST(Run, SolverFailureWritesDiagnostic) {
  RunConfig c = parse("dim = 2\nk = 1\nlevels = 3,4\nsolver = cg\ncg_max_iterations = 2\n");
  c.output_dir = scratch_dir("fail").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 2);
  const std::string diag = slurp(fs::path(c.output_dir) / "diagnostic.txt");
  EXPECT_NE(diag.find("solver-failure"), std::string::npos) << diag;
  EXPECT_NE(diag.find("cg_max_iterations = 2"), std::string::npos);
}

TEST(Run, InvalidConfigObjectIsAnError) {
  RunConfig c;
  c.dim = 2;
  c.k = 1;
  c.levels = {4, 2};
  c.output_dir = scratch_dir("invalid").string();
  std::ostringstream log;
  EXPECT_EQ(run(c, log), 2);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "diagnostic.txt"));
}
