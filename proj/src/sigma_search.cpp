#include "hypocert/sigma_search.hpp"

#include "hypocert/linalg.hpp"

#include <cmath>
#include <limits>

namespace hypocert {

namespace {

struct Objective {
  double value = 0.0;  // max_k lambda_max(sym(J_k Sigma))
  Mat subgradient;
};

Objective evaluate(const Mat& sigma, const std::vector<Mat>& js) {
  Objective best;
  best.value = -std::numeric_limits<double>::infinity();
  const Mat* arg = nullptr;
  Vec top;
  for (const Mat& j : js) {
    Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(j * sigma));
    const Eigen::Index last = es.eigenvalues().size() - 1;
    if (es.eigenvalues()(last) > best.value) {
      best.value = es.eigenvalues()(last);
      arg = &j;
      top = es.eigenvectors().col(last);
    }
  }
  // d/dSigma of u^T J Sigma u over symmetric Sigma.
  const Mat uu = top * top.transpose();
  best.subgradient = linalg::symmetrize(arg->transpose() * uu);
  return best;
}

// Euclidean projection onto {Sigma symmetric, Sigma >= floor I, tr Sigma = trace}.
Mat project(const Mat& m, double floor, double trace) {
  Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(m));
  const Vec w = es.eigenvalues();
  double lo = w.minCoeff() - trace - 1.0, hi = w.maxCoeff() + 1.0;
  auto sum_at = [&](double tau) { return (w.array() - tau).max(floor).sum(); };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sum_at(mid) > trace) lo = mid;
    else hi = mid;
  }
  Vec lam = (w.array() - 0.5 * (lo + hi)).max(floor);
  lam *= trace / lam.sum();
  return linalg::symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

struct Descent {
  Mat best;
  double best_value;
  int iterations = 0;
};

// Projected subgradient descent on phi(Sigma) = max_k lambda_max(sym(J_k Sigma)); stops once
// phi <= target. Step sizes diminish as 1/sqrt(k) with Polyak steps when a target is set.
Descent descend(const Mat& start, const std::vector<Mat>& js, double floor, double trace, int max_iters,
                double target) {
  const int n = static_cast<int>(start.rows());
  Mat sigma = start;
  Descent d{start, evaluate(start, js).value};
  const double base = 0.02 * trace / n;
  for (int k = 0; k < max_iters; ++k) {
    Objective ob = evaluate(sigma, js);
    ++d.iterations;
    if (ob.value < d.best_value) {
      d.best_value = ob.value;
      d.best = sigma;
    }
    if (d.best_value <= target) break;
    Mat g = ob.subgradient;
    g -= (g.trace() / n) * Mat::Identity(n, n);
    const double gn = g.norm();
    if (gn == 0.0) break;
    double step = base / std::sqrt(k + 1.0);
    if (std::isfinite(target)) step = std::max(step, (ob.value - target) / gn);
    step = std::min(step, 0.25 * trace / n);
    sigma = project(sigma - step * g / gn, floor, trace);
  }
  return d;
}

}  // namespace

double certified_a(const Mat& sigma, const std::vector<Mat>& jacobians) {
  double a = std::numeric_limits<double>::infinity();
  for (const Mat& j : jacobians) a = std::min(a, linalg::min_eigenvalue(-linalg::symmetrize(j * sigma)));
  return a;
}

double certified_rho(const Mat& sigma, const std::vector<Mat>& jacobians) {
  double r = std::numeric_limits<double>::infinity();
  for (const Mat& j : jacobians)
    r = std::min(r, linalg::min_generalized_eigenvalue(-linalg::symmetrize(j * sigma), sigma));
  return r;
}

SigmaSearchResult find_sigma(const std::vector<Mat>& jacobians, const SigmaSearchOptions& opts) {
  require(!jacobians.empty(), "find_sigma: no Jacobian samples");
  const Eigen::Index n = jacobians.front().rows();
  for (const Mat& j : jacobians)
    require(j.rows() == n && j.cols() == n && n >= 1, "find_sigma: Jacobians must be square and of equal size");
  require(opts.max_iters >= 1 && opts.tol > 0 && opts.eps_floor > 0, "find_sigma: invalid options");
  const double target_trace = opts.trace.value_or(static_cast<double>(n));
  require(target_trace > 0, "find_sigma: trace must be positive");

  // Search in the gauge tr Sigma = n, then rescale; the rate scales linearly with Sigma.
  const double tr = static_cast<double>(n);
  const double floor = opts.eps_floor;

  Mat start = Mat::Identity(n, n);
  bool warm = false;
  {
    Mat jbar = Mat::Zero(n, n);
    for (const Mat& j : jacobians) jbar += j;
    jbar /= static_cast<double>(jacobians.size());
    try {
      // sym(Jbar Sigma) = -I, i.e. Jbar Sigma + Sigma Jbar^T + 2 I = 0.
      const Mat x = linalg::solve_lyapunov(jbar, 2.0 * Mat::Identity(n, n));
      if (linalg::min_eigenvalue(x) > 0.0) {
        start = x;
        warm = true;
      }
    } catch (const ContractViolation&) {
    }
  }
  start = project(start * (tr / start.trace()), floor, tr);

  SigmaSearchResult res;
  Descent d0 = descend(start, jacobians, floor, tr, opts.max_iters, -std::numeric_limits<double>::infinity());
  int iterations = d0.iterations;
  res.best_phi = d0.best_value;
  if (!(d0.best_value < 0.0)) {
    res.message = "infeasible: no sampled Sigma made every -sym(J_k Sigma) positive definite; best max "
                  "eigenvalue of sym(J_k Sigma) = " + std::to_string(d0.best_value);
    return res;
  }

  Mat feasible = d0.best;
  double a_lo = certified_a(feasible, jacobians);
  // Grow the upper bracket by doubling while the rate stays attainable.
  double a_hi = std::max(2.0 * a_lo, opts.tol);
  auto try_rate = [&](double a, Mat& out) {
    Descent d = descend(feasible, jacobians, floor, tr, opts.max_iters, -a);
    iterations += d.iterations;
    if (d.best_value <= -a) {
      out = d.best;
      return true;
    }
    return false;
  };
  int steps = 0;
  for (Mat cand; steps < 60 && try_rate(a_hi, cand); ++steps) {
    feasible = cand;
    a_lo = std::max(a_hi, certified_a(feasible, jacobians));
    a_hi = 2.0 * a_lo;
  }
  while (a_hi - a_lo > opts.tol && steps < 200) {
    ++steps;
    const double mid = 0.5 * (a_lo + a_hi);
    Mat cand;
    if (try_rate(mid, cand)) {
      feasible = cand;
      a_lo = std::max(mid, certified_a(feasible, jacobians));
    } else {
      a_hi = mid;
    }
  }

  const double scale = target_trace / tr;
  SigmaCertificate c;
  c.sigma = scale * feasible;
  c.trace = target_trace;
  c.rate_a = certified_a(c.sigma, jacobians);
  for (const Mat& j : jacobians)
    c.residuals.push_back(linalg::min_eigenvalue(-linalg::symmetrize(j * c.sigma)) - c.rate_a);
  c.rho = certified_rho(c.sigma, jacobians);
  c.a_lo = scale * a_lo;
  c.a_hi = scale * std::max(a_hi, a_lo);
  c.bisection_steps = steps;
  c.descent_iterations = iterations;
  c.warm_start_used = warm;
  res.certificate = c;
  res.best_phi = -c.rate_a;
  res.message = "feasible";
  return res;
}

ResidualReport verify_certificate(const SigmaCertificate& cert, const std::vector<Mat>& jacobians) {
  ResidualReport r;
  r.min_residual = std::numeric_limits<double>::infinity();
  for (const Mat& j : jacobians) {
    require(j.rows() == cert.sigma.rows() && j.cols() == cert.sigma.cols(),
            "verify_certificate: dimension mismatch");
    const double res = linalg::min_eigenvalue(-linalg::symmetrize(j * cert.sigma)) - cert.rate_a;
    r.residuals.push_back(res);
    r.min_residual = std::min(r.min_residual, res);
  }
  r.passed = r.min_residual >= -1e-8 && linalg::min_eigenvalue(cert.sigma) > 0.0;
  return r;
}

nlohmann::json to_json(const SigmaCertificate& c) {
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.sigma.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < c.sigma.cols(); ++k) row.push_back(c.sigma(i, k));
    rows.push_back(row);
  }
  j["sigma"] = rows;
  j["rate_a"] = c.rate_a;
  j["rho"] = c.rho;
  j["trace"] = c.trace;
  j["residuals"] = c.residuals;
  j["a_lo"] = c.a_lo;
  j["a_hi"] = c.a_hi;
  j["bisection_steps"] = c.bisection_steps;
  j["descent_iterations"] = c.descent_iterations;
  j["warm_start_used"] = c.warm_start_used;
  return j;
}

}  // namespace hypocert
