#pragma once

#include "hypocert/dynamics.hpp"
#include "hypocert/kfp_certificate.hpp"
#include "hypocert/lyapunov.hpp"
#include "hypocert/operator_core.hpp"
#include "hypocert/testfn.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypocert {

enum class Verdict { pass, fail, inconclusive, degenerate };
std::string to_string(Verdict v);

struct SeriesPoint {
  double time = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t seed = 0;
  std::string label;  // optional sub-series name
};

struct VerificationReport {
  std::string check_name;
  Verdict verdict = Verdict::fail;
  /// Worst slack observed; negative means the inequality was violated by that much.
  double margin = 0.0;
  double tolerance = 0.0;
  std::vector<SeriesPoint> series;
  nlohmann::json provenance = nlohmann::json::object();
  nlohmann::json witness;  // null when absent
  std::vector<std::string> notes;

  bool failed() const { return verdict == Verdict::fail; }
};

nlohmann::json to_json(const VerificationReport& r);

// ---------------------------------------------------------------------------------------------
// T2 >= rho T, sampled over test functions and points.

struct T2Options {
  std::vector<FunctionFamily> families = standard_families();
  double radius = 1.0;
  /// Points are drawn from the ball of this radius centred here (defaults to the origin).
  std::optional<Vec> center;
  double tolerance = 1e-8;
  /// Called once per trial with (f, x, T2(f)(x), T(f)(x)).
  std::function<void(const TestFunction&, const Vec&, double, double)> observer;
};

VerificationReport check_t2_inequality(const DiffusionOperator& op, const MetricForm& s, double rho, int trials,
                                       std::uint64_t seed, const T2Options& opts = {});

// ---------------------------------------------------------------------------------------------
// T(P_t f) <= exp(2 K t) P_t T(f), with common-random-number finite differences.

struct GradientOptions {
  double dt = 1e-3;
  Scheme scheme = Scheme::automatic;
  double fd_step = 1e-3;
  double inconclusive_rel_se = 0.2;
  double z_score = 3.0;
};

VerificationReport check_gradient_bound(const SdeSystem& sys, const MetricForm& s, double k,
                                        const std::vector<TestFunction>& fns, const std::vector<Vec>& points,
                                        const std::vector<double>& times, int n_paths, std::uint64_t seed,
                                        const GradientOptions& opts = {});

// ---------------------------------------------------------------------------------------------
// W2(P_t* mu, P_t* nu) <= exp(K t) W2(mu, nu).

enum class Coupling { synchronous, independent };

struct WassersteinOptions {
  double dt = 1e-3;
  Scheme scheme = Scheme::automatic;
  Coupling coupling = Coupling::synchronous;
  int replicates = 10;
  int jobs = 1;
  double z_score = 3.0;
  double inconclusive_rel_se = 0.2;
  std::string name = "wasserstein";
};

VerificationReport check_wasserstein_contraction(const SdeSystem& sys, const MetricForm& s, double k,
                                                 const Ensemble& mu0, const Ensemble& nu0,
                                                 const std::vector<double>& times, std::uint64_t seed,
                                                 const WassersteinOptions& opts = {});

/// Draws mu0 from the exact invariant Gaussian of an affine system and checks that nu0 is
/// pulled towards it at the certified rate.
VerificationReport check_invariant_convergence(const SdeSystem& sys, const MetricForm& s, double k,
                                               const Ensemble& nu0, const std::vector<double>& times,
                                               std::uint64_t seed, WassersteinOptions opts = {});

// ---------------------------------------------------------------------------------------------
// Var_mu(f) <= (a / K) int T(f) dmu for the Gaussian invariant measure of a quadratic potential.

struct PoincareOptions {
  int quadrature_nodes = 6;          // per axis, for the polynomial cross-check
  int nonpolynomial_nodes = 24;      // per axis, when f is not a polynomial
  double tolerance = 1e-8;
};

/// Mean and covariance of the invariant measure e^{-V(x) - |v|^2/2} for quadratic V.
GaussianMoments invariant_gaussian(const kfp::PotentialSpec& pot);

VerificationReport check_poincare(const kfp::PotentialSpec& pot, const MetricForm& s, double a_gamma, double k,
                                  const std::vector<TestFunction>& fns, const PoincareOptions& opts = {});

// ---------------------------------------------------------------------------------------------
// Phi(t) = int T(P_t f) dmu + b int (P_t f)^2 dmu decays like exp(-C' t).

struct H1Params {
  double k1 = 0.0;
  double k2 = 0.0;
  double b_weight = 0.0;
  double c_poincare = 0.0;
  double c_prime = 0.0;
};

/// K1 = rho, Poincare constant C = a_gamma / rho (for T), and
/// C' = min(2 rho / (1 + b C), 2 K1, 2 / C).
H1Params make_h1_params(double rho, double a_gamma, double b_weight, double k2);

struct H1Options {
  bool monte_carlo = false;
  int n_samples = 20000;
  std::uint64_t seed = 0;
  double exact_tolerance = 1e-6;
  double z_score = 3.0;
};

VerificationReport check_h1_decay(const kfp::PotentialSpec& pot, const MetricForm& s, const H1Params& params,
                                  const TestFunction& f, const std::vector<double>& times,
                                  const H1Options& opts = {});

// ---------------------------------------------------------------------------------------------
// Small-time consistency: [exp(2Kt) P_t T(f) - T(P_t f)](x) / t >= -O(t).

VerificationReport check_time_derivative(const DiffusionOperator& op, const MetricForm& s, double k,
                                         const TestFunction& f, const std::vector<Vec>& points,
                                         const std::vector<double>& times = {1e-3, 1e-2});

// ---------------------------------------------------------------------------------------------

VerificationReport assumption_report(const LyapunovCandidate& cand, const DiffusionOperator& op,
                                     const MetricForm& s, const std::vector<Vec>& sample);

/// Fails when any pair among the given reports is (pass, fail).
VerificationReport equivalence_consistency(const std::vector<const VerificationReport*>& reports);

}  // namespace hypocert
