#include "hypocert/kfp_certificate.hpp"
#include "hypocert/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

int certify_kfp(double m, double big_m, double slack) {
  try {
    const auto p = hypocert::kfp::solve_kfp_params(m, big_m, slack);
    std::cout << hypocert::kfp::to_json(p).dump(2) << "\n";
    return 0;
  } catch (const hypocert::InfeasibleCertificate& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 1;
  }
}

int find_sigma(const std::string& config) {
  hypocert::Scenario s = hypocert::load_scenario(config);
  if (s.certificate.source != "sigma_search")
    throw hypocert::ConfigError(0, "find-sigma needs certificate.source: sigma_search");
  try {
    std::cout << hypocert::certify(s).dump(2) << "\n";
    return 0;
  } catch (const hypocert::InfeasibleCertificate& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 1;
  }
}

int run(const std::string& config, int jobs, const std::string& out_dir) {
  const hypocert::Scenario s = hypocert::load_scenario(config);
  const hypocert::ScenarioOutcome out = hypocert::run_scenario(s, jobs);
  std::filesystem::create_directories(out_dir);
  const auto base = std::filesystem::path(out_dir) / s.name;
  std::ofstream(base.string() + ".report.json") << out.report.dump(2) << "\n";
  std::ofstream(base.string() + ".series.csv") << out.series_csv;
  for (const auto& m : out.messages) std::cout << m << "\n";
  std::cout << "wrote " << base.string() << ".report.json\n";
  return out.exit_code;
}

int report(const std::string& in, bool summary) {
  std::ifstream f(in);
  if (!f) {
    std::cerr << "cannot open " << in << "\n";
    return 2;
  }
  const nlohmann::json j = nlohmann::json::parse(f);
  if (!summary) {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << "scenario " << j.at("scenario").at("name").get<std::string>() << "\n";
  const auto& cert = j.at("certificate");
  std::cout << "certificate " << cert.value("status", "?");
  if (cert.contains("rho")) std::cout << " rho=" << cert.at("rho");
  if (cert.contains("a") && cert.contains("b")) std::cout << " a=" << cert.at("a") << " b=" << cert.at("b");
  std::cout << "\n";
  for (const auto& c : j.at("checks"))
    std::cout << "  " << c.at("check").get<std::string>() << ": " << c.at("verdict").get<std::string>()
              << " (margin " << c.at("margin") << ")\n";
  return j.at("summary").at("exit_code").get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypocoercive contraction certificates and their numerical verification"};
  app.require_subcommand(1);

  double m = 0, big_m = 0, slack = 0.0;
  auto* ck = app.add_subcommand("certify-kfp", "Closed-form twisted metric for kinetic Fokker-Planck");
  ck->add_option("--m", m, "lower Hessian bound")->required();
  ck->add_option("--M", big_m, "upper Hessian bound")->required();
  ck->add_option("--slack", slack, "relative widening of [m, M]");

  std::string config;
  auto* fs = app.add_subcommand("find-sigma", "Search a constant metric from a scenario's drift Jacobians");
  fs->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);

  int jobs = 1;
  std::string out_dir = ".";
  auto* rn = app.add_subcommand("run", "Run a scenario and write its report and series");
  rn->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
  rn->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  rn->add_option("--out-dir", out_dir, "output directory");

  std::string in;
  bool summary = false;
  auto* rp = app.add_subcommand("report", "Print a report");
  rp->add_option("--in", in, "report JSON")->required();
  rp->add_flag("--summary", summary, "one line per check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*ck) return certify_kfp(m, big_m, slack);
    if (*fs) return find_sigma(config);
    if (*rn) return run(config, jobs, out_dir);
    if (*rp) return report(in, summary);
  } catch (const hypocert::ConfigError& e) {
    std::cerr << config << ": " << e.what() << "\n";
    return 2;
  } catch (const hypocert::ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
