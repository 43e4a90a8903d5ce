#pragma once

#include "hypocert/operator_core.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>

namespace hypocert::kfp {

/// Confinement potential V on R^n with Hessian eigenvalues in [m, M].
struct PotentialSpec {
  int n = 1;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
  double m = 1.0;
  double M = 1.0;
  /// Set when V(x) = x^T H x / 2 exactly.
  std::optional<Mat> quadratic_hessian;
  std::string label;
};

/// V(x) = omega^2 |x|^2 / 2.
PotentialSpec quadratic_potential(int n, double omega);
/// V(x) = sum_i omega^2 x_i^2 / 2 + eps cos(x_i); Hessian in [omega^2 - |eps|, omega^2 + |eps|].
PotentialSpec perturbed_potential(int n, double omega, double eps);

/// Largest violation of the eigenvalue bounds over the sample (0 when all inside).
double hessian_bound_violation(const PotentialSpec& pot, const std::vector<Vec>& xs);

/// Twisted-metric certificate for the kinetic Fokker-Planck operator.
///
/// The algebraic parameters (alpha, beta, gamma, delta, a, b, kappa, theta) are those of
/// the twist T(f) = sum_i (alpha d_xi f + beta d_vi f)^2 + (gamma d_xi f + delta d_vi f)^2
/// written for the generator with position drift -v. The simulated system uses x' = v,
/// which is the reflection x -> -x of that generator, so the state-space metric is
/// S = [[1, -a], [-a, b]] (x) I_n with blocks ordered (x, v).
struct KfpParams {
  double m = 0, M = 0;            // Hessian bounds of the potential
  double slack = 0;
  double m_target = 0, M_target = 0;  // widened interval used to solve for (a, b)
  double alpha = 1, beta = 0, gamma = 0, delta = 0;
  double a = 0, b = 0;
  double kappa = 0, theta = 0;
  int n = 1;
  Mat s;                          // 2n x 2n state-space metric
  double rho = 0;                 // T2 >= rho T on Hessians in [m, M]
  double c1 = 1;                  // sqrt(cond S)
  std::string root = "larger";
  double rho_larger_root = 0;
  double rho_smaller_root = 0;
  bool boundary_fallback = false;  // widening was infeasible; solved with zero slack

  MetricForm metric() const { return MetricForm(s); }
};

/// Solves a + b - 2a^2 = (m' + M')/2, b - a = sqrt(m' M') on the widened interval
/// [m (1 - slack), M (1 + slack)]. Throws InfeasibleCertificate when sqrt(M) - sqrt(m) > 1.
KfpParams solve_kfp_params(double m, double M, double slack, int n = 1);

/// The 2x2 form Q(lambda) = [[a, (a+b-lambda)/2], [(a+b-lambda)/2, b - a lambda]].
Mat rate_form(double a, double b, double lambda);
/// Smallest generalized eigenvalue of (Q(lambda), [[1, a], [a, b]]).
double rate_at(double a, double b, double lambda);
/// min over lambda in {m, M} of rate_at; the pencil is affine in lambda so the minimum over
/// the interval sits at an endpoint.
double contraction_rate(const KfpParams& params);

/// Smallest c with Gamma(f) <= c T(f): 1 / (b - a^2).
double gamma_constant(const KfpParams& params);

/// Generator Delta_v + v . grad_x - (v + grad V) . grad_v on (x, v).
DiffusionOperator build_operator(const PotentialSpec& pot);

nlohmann::json to_json(const KfpParams& p);

}  // namespace hypocert::kfp
