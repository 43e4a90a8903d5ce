#pragma once

#include "hypocert/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hypocert {

/// Constant Sigma with -sym(J_k Sigma) >= a I on every sampled drift Jacobian J_k.
///
/// The quadratic form uses J Sigma (not Sigma J): this is the orientation for which the
/// bound certifies T2(f) >= a |grad f|^2 with T(f) = grad f^T Sigma grad f.
struct SigmaCertificate {
  Mat sigma;
  double rate_a = 0.0;
  /// Per-sample lambda_min(-sym(J_k Sigma)) - a.
  std::vector<double> residuals;
  double trace = 0.0;
  /// Contraction rate in the sense T2 >= rho T: min_k lambda_min of the pencil (-sym(J_k Sigma), Sigma).
  double rho = 0.0;
  // Search provenance.
  double a_lo = 0.0;
  double a_hi = 0.0;
  int bisection_steps = 0;
  int descent_iterations = 0;
  bool warm_start_used = false;
};

struct SigmaSearchOptions {
  int max_iters = 2000;      // per feasibility solve
  double tol = 1e-4;         // bisection width, in units of trace / n
  double eps_floor = 1e-6;   // minimum eigenvalue of Sigma, in units of trace / n
  std::optional<double> trace;  // defaults to n
};

struct SigmaSearchResult {
  std::optional<SigmaCertificate> certificate;
  /// Best value of max_k lambda_max(sym(J_k Sigma)) reached; >= 0 means no certificate found.
  double best_phi = 0.0;
  std::string message;
  bool feasible() const { return certificate.has_value(); }
};

SigmaSearchResult find_sigma(const std::vector<Mat>& jacobians, const SigmaSearchOptions& opts = {});

struct ResidualReport {
  std::vector<double> residuals;
  double min_residual = 0.0;
  bool passed = false;
};

/// Recomputes residuals of `cert` on `jacobians` by direct symmetric eigensolves.
ResidualReport verify_certificate(const SigmaCertificate& cert, const std::vector<Mat>& jacobians);

/// lambda_min(-sym(J Sigma)) minimized over the samples.
double certified_a(const Mat& sigma, const std::vector<Mat>& jacobians);
/// min_k lambda_min of the pencil (-sym(J_k Sigma), Sigma).
double certified_rho(const Mat& sigma, const std::vector<Mat>& jacobians);

nlohmann::json to_json(const SigmaCertificate& c);

}  // namespace hypocert
