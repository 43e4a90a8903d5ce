#include "hypocert/scenario.hpp"

#include "hypocert/kfp_certificate.hpp"
#include "hypocert/linalg.hpp"
#include "hypocert/lyapunov.hpp"
#include "hypocert/sigma_search.hpp"
#include "hypocert/verify_harness.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

namespace hypocert {

namespace {

const std::set<std::string> kOperatorKinds{"kfp_quadratic", "kfp_perturbed", "kolmogorov", "ou"};
const std::set<std::string> kSources{"closed_form", "sigma_search", "user_supplied"};
const std::set<std::string> kChecks{"assumption", "t2",          "gradient_bound", "wasserstein",
                                    "corollary",  "poincare",    "h1",             "time_derivative"};

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) throw ConfigError(line_of(map), where + " must be a mapping");
  for (const auto& kv : map) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(line_of(kv.first), "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T as(const YAML::Node& n, const std::string& key, const char* type) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(line_of(n), "'" + key + "' must be " + type);
  }
}

template <typename T>
void read(const YAML::Node& map, const std::string& key, T& out, const char* type) {
  if (const YAML::Node v = map[key]) out = as<T>(v, key, type);
}

template <typename T>
void read(const YAML::Node& map, const std::string& key, std::optional<T>& out, const char* type) {
  if (const YAML::Node v = map[key]) out = as<T>(v, key, type);
}

YAML::Node required(const YAML::Node& map, const std::string& key, const std::string& where) {
  const YAML::Node v = map[key];
  if (!v) throw ConfigError(line_of(map), "missing required key '" + key + "' in " + where);
  return v;
}

Mat read_matrix(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() == 0) throw ConfigError(line_of(n), "'" + key + "' must be a list of rows");
  const std::size_t rows = n.size();
  std::size_t cols = 0;
  Mat m;
  for (std::size_t i = 0; i < rows; ++i) {
    const YAML::Node row = n[i];
    if (!row.IsSequence()) throw ConfigError(line_of(row), "'" + key + "' rows must be lists");
    if (i == 0) {
      cols = row.size();
      m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    }
    if (row.size() != cols) throw ConfigError(line_of(row), "'" + key + "' rows must have equal length");
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = as<double>(row[j], key, "a number");
  }
  return m;
}

bool positive(double x) { return x > 0 && std::isfinite(x); }

bool is_multiple(double t, double dt) {
  const double r = t / dt;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r);
}

int operator_dim(const OperatorConfig& op) {
  if (op.kind == "kolmogorov") return 2;
  if (op.kind == "ou") return op.matrix ? static_cast<int>(op.matrix->rows()) : 0;
  return 2 * op.n;
}

}  // namespace

Scenario parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.mark.line + 1, std::string("malformed YAML: ") + e.msg);
  }
  if (!root || !root.IsMap()) throw ConfigError(1, "scenario must be a mapping");
  check_keys(root, {"name", "operator", "certificate", "checks", "numerics"}, "scenario");

  Scenario s;
  s.name = as<std::string>(required(root, "name", "scenario"), "name", "a string");
  if (s.name.empty() || s.name.find_first_of("/\\ \t") != std::string::npos)
    throw ConfigError(line_of(root["name"]), "'name' must be a non-empty identifier without spaces or slashes");

  // operator
  const YAML::Node opn = required(root, "operator", "scenario");
  check_keys(opn, {"kind", "n", "omega", "epsilon", "matrix", "diffusion"}, "operator");
  s.op.kind = as<std::string>(required(opn, "kind", "operator"), "kind", "a string");
  if (!kOperatorKinds.count(s.op.kind))
    throw ConfigError(line_of(opn["kind"]),
                      "unknown operator kind '" + s.op.kind + "' (kfp_quadratic, kfp_perturbed, kolmogorov, ou)");
  read(opn, "n", s.op.n, "an integer");
  read(opn, "omega", s.op.omega, "a number");
  read(opn, "epsilon", s.op.epsilon, "a number");
  if (opn["matrix"]) s.op.matrix = read_matrix(opn["matrix"], "matrix");
  if (opn["diffusion"]) s.op.diffusion = read_matrix(opn["diffusion"], "diffusion");
  if (s.op.n < 1) throw ConfigError(line_of(opn["n"]), "'n' must be at least 1");
  if (!positive(s.op.omega)) throw ConfigError(line_of(opn["omega"]), "'omega' must be positive");
  if (s.op.kind == "kfp_perturbed" && !opn["epsilon"])
    throw ConfigError(line_of(opn), "missing required key 'epsilon' in operator (kfp_perturbed)");
  if (s.op.kind == "ou") {
    if (!s.op.matrix) throw ConfigError(line_of(opn), "missing required key 'matrix' in operator (ou)");
    if (s.op.matrix->rows() != s.op.matrix->cols())
      throw ConfigError(line_of(opn["matrix"]), "'matrix' must be square");
    if (s.op.diffusion && (s.op.diffusion->rows() != s.op.matrix->rows() ||
                           s.op.diffusion->cols() != s.op.matrix->rows()))
      throw ConfigError(line_of(opn["diffusion"]), "'diffusion' must match the size of 'matrix'");
  } else if (s.op.matrix || s.op.diffusion) {
    throw ConfigError(line_of(opn), "'matrix' and 'diffusion' apply only to operator kind ou");
  }
  const bool kfp = s.op.kind == "kfp_quadratic" || s.op.kind == "kfp_perturbed";

  // certificate
  const YAML::Node cn = required(root, "certificate", "scenario");
  check_keys(cn, {"source", "m", "M", "samples", "radius", "max_iters", "sigma", "rho"}, "certificate");
  s.certificate.source = as<std::string>(required(cn, "source", "certificate"), "source", "a string");
  if (!kSources.count(s.certificate.source))
    throw ConfigError(line_of(cn["source"]), "unknown certificate source '" + s.certificate.source +
                                                 "' (closed_form, sigma_search, user_supplied)");
  read(cn, "m", s.certificate.m, "a number");
  read(cn, "M", s.certificate.M, "a number");
  read(cn, "samples", s.certificate.samples, "an integer");
  read(cn, "radius", s.certificate.radius, "a number");
  read(cn, "max_iters", s.certificate.max_iters, "an integer");
  read(cn, "rho", s.certificate.rho, "a number");
  if (cn["sigma"]) s.certificate.sigma = read_matrix(cn["sigma"], "sigma");
  if (s.certificate.source == "closed_form") {
    if (!kfp) throw ConfigError(line_of(cn["source"]), "closed_form certificates exist only for kfp operators");
    required(cn, "m", "certificate (closed_form)");
    required(cn, "M", "certificate (closed_form)");
    if (!positive(*s.certificate.m) || *s.certificate.M < *s.certificate.m)
      throw ConfigError(line_of(cn["M"]), "closed_form needs 0 < m <= M");
    const double w2 = s.op.omega * s.op.omega, eps = s.op.kind == "kfp_perturbed" ? std::abs(s.op.epsilon) : 0.0;
    if (*s.certificate.m > w2 - eps + 1e-12 || *s.certificate.M < w2 + eps - 1e-12)
      throw ConfigError(line_of(cn["m"]), "[m, M] must contain the Hessian range [" + std::to_string(w2 - eps) +
                                              ", " + std::to_string(w2 + eps) + "] of the potential");
  } else if (s.certificate.source == "sigma_search") {
    if (s.certificate.samples < 1) throw ConfigError(line_of(cn["samples"]), "'samples' must be positive");
    if (!positive(s.certificate.radius)) throw ConfigError(line_of(cn["radius"]), "'radius' must be positive");
  } else {
    required(cn, "sigma", "certificate (user_supplied)");
    required(cn, "rho", "certificate (user_supplied)");
    const int d = operator_dim(s.op);
    if (s.certificate.sigma->rows() != d || s.certificate.sigma->cols() != d)
      throw ConfigError(line_of(cn["sigma"]), "'sigma' must be " + std::to_string(d) + "x" + std::to_string(d));
  }

  // checks
  const YAML::Node ch = required(root, "checks", "scenario");
  if (!ch.IsSequence()) throw ConfigError(line_of(ch), "'checks' must be a list");
  for (const auto& c : ch) {
    const std::string name = as<std::string>(c, "checks", "a string");
    if (!kChecks.count(name)) throw ConfigError(line_of(c), "unknown check '" + name + "'");
    if (std::find(s.checks.begin(), s.checks.end(), name) != s.checks.end())
      throw ConfigError(line_of(c), "duplicate check '" + name + "'");
    if ((name == "poincare" || name == "h1") && s.op.kind != "kfp_quadratic")
      throw ConfigError(line_of(c), "check '" + name + "' needs a quadratic potential (operator kind kfp_quadratic)");
    if (name == "corollary" && s.op.kind != "kfp_quadratic" && s.op.kind != "ou")
      throw ConfigError(line_of(c), "check 'corollary' needs a confining affine drift (kfp_quadratic or ou)");
    if (name == "time_derivative" && s.op.kind == "kfp_perturbed")
      throw ConfigError(line_of(c), "check 'time_derivative' needs an affine drift");
    s.checks.push_back(name);
  }

  // numerics
  if (const YAML::Node nn = root["numerics"]) {
    check_keys(nn,
               {"N", "dt", "t_end", "times", "seed", "slack", "trials", "replicates", "paths", "functions", "points",
                "scheme", "b_weight", "k2", "assumption_radius", "assumption_points", "tolerances"},
               "numerics");
    NumericsConfig& x = s.numerics;
    read(nn, "N", x.N, "an integer");
    read(nn, "dt", x.dt, "a number");
    read(nn, "t_end", x.t_end, "a number");
    read(nn, "times", x.times, "a list of numbers");
    read(nn, "seed", x.seed, "a nonnegative integer");
    read(nn, "slack", x.slack, "a number");
    read(nn, "trials", x.trials, "an integer");
    read(nn, "replicates", x.replicates, "an integer");
    read(nn, "paths", x.paths, "an integer");
    read(nn, "functions", x.functions, "an integer");
    read(nn, "points", x.points, "an integer");
    read(nn, "scheme", x.scheme, "a string");
    read(nn, "b_weight", x.b_weight, "a number");
    read(nn, "k2", x.k2, "a number");
    read(nn, "assumption_radius", x.assumption_radius, "a number");
    read(nn, "assumption_points", x.assumption_points, "an integer");
    if (const YAML::Node tn = nn["tolerances"]) {
      check_keys(tn, {"t2", "poincare", "h1", "z_score"}, "numerics.tolerances");
      read(tn, "t2", x.tolerances.t2, "a number");
      read(tn, "poincare", x.tolerances.poincare, "a number");
      read(tn, "h1", x.tolerances.h1, "a number");
      read(tn, "z_score", x.tolerances.z_score, "a number");
    }
    auto bad = [&](const char* key, const std::string& msg) { throw ConfigError(line_of(nn[key]), msg); };
    if (x.N < 1) bad("N", "'N' must be at least 1");
    if (!positive(x.dt)) bad("dt", "'dt' must be positive");
    if (!positive(x.t_end)) bad("t_end", "'t_end' must be positive");
    if (x.slack < 0 || x.slack >= 1) bad("slack", "'slack' must lie in [0, 1)");
    if (x.trials < 1) bad("trials", "'trials' must be positive");
    if (x.replicates < 2) bad("replicates", "'replicates' must be at least 2");
    if (x.paths < 2) bad("paths", "'paths' must be at least 2");
    if (x.functions < 1) bad("functions", "'functions' must be positive");
    if (x.points < 1) bad("points", "'points' must be positive");
    if (x.assumption_points < 1) bad("assumption_points", "'assumption_points' must be positive");
    if (!positive(x.assumption_radius)) bad("assumption_radius", "'assumption_radius' must be positive");
    if (x.b_weight < 0) bad("b_weight", "'b_weight' must be nonnegative");
    if (x.k2 < 0) bad("k2", "'k2' must be nonnegative");
    try {
      scheme_from_string(x.scheme);
    } catch (const ContractViolation& e) {
      bad("scheme", e.what());
    }
  }
  const NumericsConfig& x = s.numerics;
  const int tline = root["numerics"] && root["numerics"]["times"] ? line_of(root["numerics"]["times"]) : 0;
  if (x.times.empty()) throw ConfigError(tline, "'times' must not be empty");
  for (std::size_t i = 0; i < x.times.size(); ++i) {
    if (!(x.times[i] > 0) || (i && x.times[i] <= x.times[i - 1]))
      throw ConfigError(tline, "'times' must be positive and strictly increasing");
    if (x.times[i] > x.t_end + 1e-12) throw ConfigError(tline, "'times' must not exceed t_end");
    if (!is_multiple(x.times[i], x.dt)) throw ConfigError(tline, "every entry of 'times' must be a multiple of dt");
  }
  if (!is_multiple(x.t_end, x.dt)) throw ConfigError(tline, "'t_end' must be a multiple of dt");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json op = {{"kind", s.op.kind}, {"n", s.op.n}, {"omega", s.op.omega}, {"epsilon", s.op.epsilon}};
  if (s.op.matrix) op["matrix"] = mat_json(*s.op.matrix);
  if (s.op.diffusion) op["diffusion"] = mat_json(*s.op.diffusion);
  nlohmann::json cert = {{"source", s.certificate.source}};
  if (s.certificate.m) cert["m"] = *s.certificate.m;
  if (s.certificate.M) cert["M"] = *s.certificate.M;
  if (s.certificate.source == "sigma_search") {
    cert["samples"] = s.certificate.samples;
    cert["radius"] = s.certificate.radius;
    cert["max_iters"] = s.certificate.max_iters;
  }
  if (s.certificate.sigma) cert["sigma"] = mat_json(*s.certificate.sigma);
  if (s.certificate.rho) cert["rho"] = *s.certificate.rho;
  const NumericsConfig& x = s.numerics;
  nlohmann::json num = {{"N", x.N},
                        {"dt", x.dt},
                        {"t_end", x.t_end},
                        {"times", x.times},
                        {"seed", x.seed},
                        {"slack", x.slack},
                        {"trials", x.trials},
                        {"replicates", x.replicates},
                        {"paths", x.paths},
                        {"functions", x.functions},
                        {"points", x.points},
                        {"scheme", x.scheme},
                        {"b_weight", x.b_weight},
                        {"k2", x.k2},
                        {"assumption_radius", x.assumption_radius},
                        {"assumption_points", x.assumption_points},
                        {"tolerances",
                         {{"t2", x.tolerances.t2},
                          {"poincare", x.tolerances.poincare},
                          {"h1", x.tolerances.h1},
                          {"z_score", x.tolerances.z_score}}}};
  return {{"name", s.name}, {"operator", op}, {"certificate", cert}, {"checks", s.checks}, {"numerics", num}};
}

namespace {

struct Prepared {
  std::optional<kfp::PotentialSpec> potential;
  std::optional<DiffusionOperator> op;
  std::optional<MetricForm> metric;
  double rho = 0.0;
  double a_gamma = 0.0;
  nlohmann::json certificate;
};

Prepared prepare(const Scenario& s) {
  Prepared p;
  const OperatorConfig& oc = s.op;
  if (oc.kind == "kfp_quadratic") p.potential = kfp::quadratic_potential(oc.n, oc.omega);
  else if (oc.kind == "kfp_perturbed") p.potential = kfp::perturbed_potential(oc.n, oc.omega, oc.epsilon);
  if (p.potential) p.op = kfp::build_operator(*p.potential);
  else if (oc.kind == "kolmogorov") p.op = kolmogorov_operator();
  else p.op = ornstein_uhlenbeck(*oc.matrix, oc.diffusion.value_or(Mat::Identity(oc.matrix->rows(), oc.matrix->rows())));

  const CertificateConfig& cc = s.certificate;
  if (cc.source == "closed_form") {
    const kfp::KfpParams params = kfp::solve_kfp_params(*cc.m, *cc.M, s.numerics.slack, oc.n);
    p.metric = params.metric();
    p.rho = params.rho;
    p.certificate = kfp::to_json(params);
    p.certificate["a_gamma_closed_form"] = kfp::gamma_constant(params);
  } else if (cc.source == "sigma_search") {
    std::vector<Mat> js;
    for (const Vec& z : halton_ball(p.op->dim(), cc.radius, cc.samples)) js.push_back(p.op->drift_jacobian(z));
    SigmaSearchOptions so;
    so.max_iters = cc.max_iters;
    const SigmaSearchResult res = find_sigma(js, so);
    if (!res.feasible()) throw InfeasibleCertificate(res.message);
    p.metric = MetricForm(res.certificate->sigma);
    p.rho = res.certificate->rho;
    p.certificate = to_json(*res.certificate);
  } else {
    p.metric = MetricForm(*cc.sigma);
    p.rho = *cc.rho;
    p.certificate = {{"sigma", mat_json(*cc.sigma)}, {"rho", *cc.rho}};
  }
  p.a_gamma = linalg::max_generalized_eigenvalue(p.op->diffusion(), p.metric->matrix());
  p.certificate["source"] = cc.source;
  p.certificate["rho"] = p.rho;
  p.certificate["a_gamma"] = p.a_gamma;
  return p;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Mat gaussian_cloud(int n, int d, const Vec& mean, double sd, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  Mat m(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) m(i, c) = mean(c) + sd * rng.normal();
  return m;
}

std::vector<double> h1_grid(double t_end) {
  std::vector<double> t;
  for (int i = 0; i <= 50; ++i) t.push_back(t_end * i / 50.0);
  return t;
}

}  // namespace

nlohmann::json certify(const Scenario& s) { return prepare(s).certificate; }

ScenarioOutcome run_scenario(const Scenario& s, int jobs) {
  ScenarioOutcome out;
  nlohmann::json report;
  report["scenario"] = to_json(s);
  Prepared prep;
  try {
    prep = prepare(s);
  } catch (const InfeasibleCertificate& e) {
    report["certificate"] = {{"status", "infeasible"}, {"message", e.what()}};
    report["checks"] = nlohmann::json::array();
    report["summary"] = {{"exit_code", 1}, {"failed", {"certificate"}}, {"inconclusive", nlohmann::json::array()}};
    out.report = report;
    out.series_csv = "check,time,value,stderr,seed\n";
    out.exit_code = 1;
    out.messages.push_back(std::string("certificate: ") + e.what());
    return out;
  }
  prep.certificate["status"] = "feasible";
  report["certificate"] = prep.certificate;

  const NumericsConfig& x = s.numerics;
  const DiffusionOperator& op = *prep.op;
  const MetricForm& metric = *prep.metric;
  const SdeSystem sys(op);
  const int d = op.dim();
  const double k = -prep.rho;
  const Scheme scheme = scheme_from_string(x.scheme);
  const bool rate_positive = prep.rho > 0;

  using Task = std::function<std::vector<VerificationReport>()>;
  std::vector<std::pair<std::string, Task>> tasks;
  for (const std::string& c : s.checks) {
    if (c == "assumption") {
      tasks.emplace_back(c, [&] {
        return std::vector{assumption_report(LyapunovCandidate::standard(d), op, metric,
                                             halton_ball(d, x.assumption_radius, x.assumption_points))};
      });
    } else if (c == "t2") {
      tasks.emplace_back(c, [&] {
        T2Options o;
        o.tolerance = x.tolerances.t2;
        return std::vector{check_t2_inequality(op, metric, prep.rho, x.trials, x.seed, o)};
      });
    } else if (c == "gradient_bound") {
      tasks.emplace_back(c, [&] {
        std::vector<TestFunction> fns;
        for (int i = 0; i < x.functions; ++i) {
          FunctionFamily fam;
          fam.kind = i % 2 == 0 ? Family::linear : Family::quadratic;
          fns.push_back(sample_function(fam, d, stream_key(x.seed, 1000 + static_cast<std::uint64_t>(i))));
        }
        GradientOptions o;
        o.dt = x.dt;
        o.scheme = scheme;
        o.z_score = x.tolerances.z_score;
        return std::vector{check_gradient_bound(sys, metric, k, fns, sample_ball(d, 1.0, x.points, x.seed + 7),
                                                x.times, x.paths, x.seed, o)};
      });
    } else if (c == "wasserstein" || c == "corollary") {
      tasks.emplace_back(c, [&, c] {
        WassersteinOptions o;
        o.dt = x.dt;
        o.scheme = scheme;
        o.replicates = x.replicates;
        o.z_score = x.tolerances.z_score;
        o.jobs = jobs;
        const Ensemble nu = make_ensemble(gaussian_cloud(x.N, d, Vec::Constant(d, 2.0), 0.5, x.seed, 0x6e75));
        if (c == "corollary") return std::vector{check_invariant_convergence(sys, metric, k, nu, x.times, x.seed, o)};
        const Ensemble mu = make_ensemble(gaussian_cloud(x.N, d, Vec::Zero(d), 1.0, x.seed, 0x6d75));
        return std::vector{check_wasserstein_contraction(sys, metric, k, mu, nu, x.times, x.seed, o)};
      });
    } else if (c == "poincare") {
      tasks.emplace_back(c, [&] {
        std::vector<TestFunction> fns;
        FunctionFamily fam;
        fam.kind = Family::polynomial;
        for (int i = 0; i < x.functions; ++i)
          fns.push_back(sample_function(fam, d, stream_key(x.seed, 2000 + static_cast<std::uint64_t>(i))));
        Vec u = Vec::Zero(d);
        u(d / 2) = 1.0;
        fns.push_back(TestFunction::from_polynomial(Polynomial::linear(u), Family::linear));
        if (!rate_positive) throw UnsupportedFunction("poincare needs a positive certified rate");
        PoincareOptions o;
        o.tolerance = x.tolerances.poincare;
        return std::vector{check_poincare(*prep.potential, metric, prep.a_gamma, prep.rho, fns, o)};
      });
    } else if (c == "h1") {
      tasks.emplace_back(c, [&] {
        if (!rate_positive) throw UnsupportedFunction("h1 needs a positive certified rate");
        const H1Params hp = make_h1_params(prep.rho, prep.a_gamma, x.b_weight, x.k2);
        std::vector<TestFunction> fns;
        fns.push_back(TestFunction::from_polynomial(Polynomial::variable(d, 0), Family::linear));
        fns.push_back(TestFunction::from_polynomial(Polynomial::variable(d, d - 1), Family::linear));
        FunctionFamily quad;
        quad.kind = Family::quadratic;
        for (int i = 0; i < 2; ++i)
          fns.push_back(sample_function(quad, d, stream_key(x.seed, 3000 + static_cast<std::uint64_t>(i))));
        H1Options o;
        o.exact_tolerance = x.tolerances.h1;
        std::vector<VerificationReport> reps;
        for (std::size_t i = 0; i < fns.size(); ++i) {
          reps.push_back(check_h1_decay(*prep.potential, metric, hp, fns[i], h1_grid(x.t_end), o));
          reps.back().check_name = "h1/f" + std::to_string(i);
        }
        return reps;
      });
    } else if (c == "time_derivative") {
      tasks.emplace_back(c, [&] {
        FunctionFamily quad;
        quad.kind = Family::quadratic;
        const TestFunction f = sample_function(quad, d, stream_key(x.seed, 4000));
        return std::vector{check_time_derivative(op, metric, k, f, sample_ball(d, 1.0, x.points, x.seed + 11))};
      });
    }
  }

  std::vector<std::vector<VerificationReport>> results(tasks.size());
  std::vector<std::string> errors(tasks.size());
  {
    const int workers = std::clamp(jobs, 1, std::max<int>(1, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < tasks.size(); i += static_cast<std::size_t>(workers)) {
          try {
            results[i] = tasks[i].second();
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<VerificationReport> all;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i].empty()) {
      VerificationReport r;
      r.check_name = tasks[i].first;
      r.verdict = Verdict::fail;
      r.margin = -1.0;
      r.notes.push_back("check raised: " + errors[i]);
      all.push_back(std::move(r));
    } else {
      for (auto& r : results[i]) all.push_back(std::move(r));
    }
  }
  std::vector<const VerificationReport*> theorem;
  for (const auto& r : all)
    if (r.check_name == "t2" || r.check_name == "gradient_bound" || r.check_name == "wasserstein")
      theorem.push_back(&r);
  if (theorem.size() >= 2) all.push_back(equivalence_consistency(theorem));

  nlohmann::json checks = nlohmann::json::array();
  nlohmann::json failed = nlohmann::json::array(), inconclusive = nlohmann::json::array();
  std::ostringstream csv;
  csv << "check,time,value,stderr,seed\n";
  for (const auto& r : all) {
    checks.push_back(to_json(r));
    if (r.verdict == Verdict::fail) failed.push_back(r.check_name);
    if (r.verdict == Verdict::inconclusive) inconclusive.push_back(r.check_name);
    for (const auto& p : r.series)
      csv << r.check_name << (p.label.empty() ? "" : "/" + p.label) << ',' << fmt(p.time) << ',' << fmt(p.value)
          << ',' << fmt(p.stderr_) << ',' << p.seed << '\n';
    out.messages.push_back(r.check_name + ": " + to_string(r.verdict) + " (margin " + fmt(r.margin) + ")");
  }
  out.exit_code = failed.empty() ? 0 : 1;
  report["checks"] = checks;
  report["summary"] = {{"exit_code", out.exit_code}, {"failed", failed}, {"inconclusive", inconclusive}};
  out.report = report;
  out.series_csv = csv.str();
  return out;
}

}  // namespace hypocert
