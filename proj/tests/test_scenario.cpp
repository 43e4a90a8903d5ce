#include "hypocert/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hypocert;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(name: small
operator:
  kind: kfp_quadratic
  omega: 1.0
certificate:
  source: closed_form
  m: 1.0
  M: 1.0
checks: [t2, gradient_bound, wasserstein, poincare, h1]
numerics:
  N: 40
  dt: 0.01
  t_end: 1.0
  times: [0.5, 1.0]
  trials: 100
  replicates: 3
  paths: 200
  functions: 4
  points: 2
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HYPOCERT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hypocert_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(ParseScenario, ReadsDefaultsAndOverrides) {
  const Scenario s = parse_scenario(kSmall);
  EXPECT_EQ(s.name, "small");
  EXPECT_EQ(s.numerics.N, 40);
  EXPECT_EQ(s.numerics.seed, 42u);
  EXPECT_EQ(s.numerics.scheme, "auto");
  EXPECT_EQ(s.checks.size(), 5u);
}

TEST(ParseScenario, MissingBoundReportsLine) {
  const std::string text = "name: x\noperator:\n  kind: kfp_quadratic\ncertificate:\n  source: closed_form\n  M: 1.0\n"
                           "checks: [t2]\n";
  EXPECT_EQ(error_line(text), 5);
}

TEST(ParseScenario, UnknownKeyReportsLine) {
  std::string text = kSmall;
  text.replace(text.find("  omega: 1.0"), 12, "  omega: 1.0\n  omgea: 2.0");
  EXPECT_EQ(error_line(text), 5);
}

TEST(ParseScenario, RejectsStructuralMistakes) {
  const std::string base = kSmall;
  auto with = [&](const std::string& from, const std::string& to) {
    std::string t = base;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_GT(error_line(with("kind: kfp_quadratic", "kind: langevin")), 0);
  EXPECT_GT(error_line(with("times: [0.5, 1.0]", "times: [0.505, 1.0]")), 0);
  EXPECT_GT(error_line(with("times: [0.5, 1.0]", "times: [1.0, 0.5]")), 0);
  EXPECT_GT(error_line(with("times: [0.5, 1.0]", "times: [0.5, 2.0]")), 0);
  EXPECT_GT(error_line(with("m: 1.0", "m: 1.5")), 0);
  EXPECT_GT(error_line(with("kind: kfp_quadratic", "kind: kfp_perturbed\n  epsilon: 0.1")), 0);
  EXPECT_GT(error_line(with("N: 40", "N: forty")), 0);
  EXPECT_GT(error_line("name: [unclosed"), 0);
}

TEST(RunScenario, InfeasibleCertificateExitsOne) {
  const Scenario s = load_scenario(std::string(HYPOCERT_SCENARIOS) + "/kfp_infeasible.yaml");
  const ScenarioOutcome out = run_scenario(s);
  EXPECT_EQ(out.exit_code, 1);
  EXPECT_EQ(out.report.at("certificate").at("status"), "infeasible");
}

TEST(RunScenario, SmallScenarioPassesAndIsDeterministic) {
  const Scenario s = parse_scenario(kSmall);
  const ScenarioOutcome a = run_scenario(s, 1), b = run_scenario(s, 4);
  EXPECT_EQ(a.exit_code, 0) << a.report.dump(2);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.series_csv, b.series_csv);
  EXPECT_EQ(a.series_csv.substr(0, 29), "check,time,value,stderr,seed\n");
}

TEST(Cli, ExitCodes) {
  const std::string dir = HYPOCERT_SCENARIOS;
  const fs::path out = scratch("exit");
  EXPECT_EQ(run_cli("run --config " + dir + "/kfp_missing_m.yaml --out-dir " + out.string()), 2);
  EXPECT_EQ(run_cli("run --config " + dir + "/kfp_infeasible.yaml --out-dir " + out.string()), 1);
  EXPECT_EQ(run_cli("certify-kfp --m 1 --M 2.25 --slack 0"), 0);
  EXPECT_EQ(run_cli("certify-kfp --m 0.5 --M 7.5 --slack 0"), 1);
  EXPECT_EQ(run_cli("certify-kfp --m -1 --M 2 --slack 0"), 2);
}

TEST(Cli, RerunsAreByteIdentical) {
  const fs::path dir = scratch("rerun");
  const fs::path cfg = dir / "small.yaml";
  std::ofstream(cfg) << kSmall;
  const fs::path a = dir / "a", b = dir / "b";
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --out-dir " + a.string()), 0);
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --jobs 3 --out-dir " + b.string()), 0);
  EXPECT_EQ(slurp(a / "small.report.json"), slurp(b / "small.report.json"));
  EXPECT_EQ(slurp(a / "small.series.csv"), slurp(b / "small.series.csv"));
  EXPECT_EQ(run_cli("report --in " + (a / "small.report.json").string()), 0);
}
