#pragma once

#include "hypocert/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypocert {

/// Schema violation in a scenario file; `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct OperatorConfig {
  std::string kind;  // kfp_quadratic | kfp_perturbed | kolmogorov | ou
  int n = 1;
  double omega = 1.0;
  double epsilon = 0.0;
  std::optional<Mat> matrix;     // ou drift Jacobian
  std::optional<Mat> diffusion;  // ou diffusion (defaults to identity)
};

struct CertificateConfig {
  std::string source;  // closed_form | sigma_search | user_supplied
  std::optional<double> m, M;
  int samples = 100;
  double radius = 3.0;
  int max_iters = 2000;
  std::optional<Mat> sigma;
  std::optional<double> rho;
};

struct Tolerances {
  double t2 = 1e-8;
  double poincare = 1e-8;
  double h1 = 1e-6;
  double z_score = 3.0;
};

struct NumericsConfig {
  int N = 500;
  double dt = 1e-3;
  double t_end = 5.0;
  std::vector<double> times{0.5, 1.0, 2.0, 5.0};
  std::uint64_t seed = 42;
  double slack = 0.05;
  int trials = 500;
  int replicates = 10;
  int paths = 2000;
  int functions = 20;
  int points = 3;
  std::string scheme = "auto";
  double b_weight = 1.0;
  double k2 = 0.01;
  double assumption_radius = 20.0;
  int assumption_points = 10000;
  Tolerances tolerances;
};

struct Scenario {
  std::string name;
  OperatorConfig op;
  CertificateConfig certificate;
  std::vector<std::string> checks;
  NumericsConfig numerics;
};

/// Strict parse: unknown keys, missing required keys and ill-typed values raise ConfigError.
Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::string& path);

nlohmann::json to_json(const Scenario& s);

struct ScenarioOutcome {
  nlohmann::json report;
  std::string series_csv;
  int exit_code = 0;
  std::vector<std::string> messages;
};

/// Builds the certificate and runs every requested check on a pool of `jobs` workers.
/// exit_code: 0 when nothing failed, 1 on a failed check or infeasible certificate.
ScenarioOutcome run_scenario(const Scenario& s, int jobs = 1);

/// Certificate stage only, as JSON; throws InfeasibleCertificate.
nlohmann::json certify(const Scenario& s);

}  // namespace hypocert
