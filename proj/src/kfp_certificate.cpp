#include "hypocert/kfp_certificate.hpp"

#include "hypocert/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <sstream>

namespace hypocert::kfp {

PotentialSpec quadratic_potential(int n, double omega) {
  require(n >= 1, "potential dimension must be >= 1");
  const double w2 = omega * omega;
  PotentialSpec p;
  p.n = n;
  p.value = [w2](const Vec& x) { return 0.5 * w2 * x.squaredNorm(); };
  p.grad = [w2](const Vec& x) -> Vec { return w2 * x; };
  p.hess = [w2, n](const Vec&) -> Mat { return w2 * Mat::Identity(n, n); };
  p.m = w2;
  p.M = w2;
  p.quadratic_hessian = w2 * Mat::Identity(n, n);
  std::ostringstream os;
  os << "quadratic(omega=" << omega << ")";
  p.label = os.str();
  return p;
}

PotentialSpec perturbed_potential(int n, double omega, double eps) {
  require(n >= 1, "potential dimension must be >= 1");
  const double w2 = omega * omega;
  PotentialSpec p;
  p.n = n;
  p.value = [=](const Vec& x) {
    double v = 0.5 * w2 * x.squaredNorm();
    for (int i = 0; i < n; ++i) v += eps * std::cos(x(i));
    return v;
  };
  p.grad = [=](const Vec& x) -> Vec {
    Vec g = w2 * x;
    for (int i = 0; i < n; ++i) g(i) -= eps * std::sin(x(i));
    return g;
  };
  p.hess = [=](const Vec& x) -> Mat {
    Mat h = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) h(i, i) = w2 - eps * std::cos(x(i));
    return h;
  };
  p.m = w2 - std::abs(eps);
  p.M = w2 + std::abs(eps);
  if (eps == 0.0) p.quadratic_hessian = w2 * Mat::Identity(n, n);
  std::ostringstream os;
  os << "perturbed(omega=" << omega << ", eps=" << eps << ")";
  p.label = os.str();
  return p;
}

double hessian_bound_violation(const PotentialSpec& pot, const std::vector<Vec>& xs) {
  double worst = 0.0;
  for (const Vec& x : xs) {
    Eigen::SelfAdjointEigenSolver<Mat> es(linalg::symmetrize(pot.hess(x)), Eigen::EigenvaluesOnly);
    worst = std::max({worst, pot.m - es.eigenvalues()(0), es.eigenvalues()(pot.n - 1) - pot.M});
  }
  return worst;
}

Mat rate_form(double a, double b, double lambda) {
  Mat q(2, 2);
  q << a, 0.5 * (a + b - lambda), 0.5 * (a + b - lambda), b - a * lambda;
  return q;
}

double rate_at(double a, double b, double lambda) {
  Mat s2(2, 2);
  s2 << 1, a, a, b;
  return linalg::min_generalized_eigenvalue(rate_form(a, b, lambda), s2);
}

double contraction_rate(const KfpParams& p) { return std::min(rate_at(p.a, p.b, p.m), rate_at(p.a, p.b, p.M)); }

double gamma_constant(const KfpParams& p) { return 1.0 / (p.b - p.a * p.a); }

namespace {

KfpParams assemble(double m, double M, double slack, int n, double m_t, double M_t, bool larger) {
  const double gap = std::sqrt(M_t) - std::sqrt(m_t);
  const double disc = std::sqrt(std::max(0.0, 1.0 - gap * gap));
  KfpParams p;
  p.m = m;
  p.M = M;
  p.slack = slack;
  p.m_target = m_t;
  p.M_target = M_t;
  p.n = n;
  p.a = larger ? 0.5 * (1.0 + disc) : 0.5 * (1.0 - disc);
  p.b = p.a + std::sqrt(m_t * M_t);
  p.alpha = 1.0;
  p.gamma = 0.0;
  p.beta = p.a;
  p.delta = std::sqrt(p.b - p.a * p.a);
  p.kappa = p.a + p.b - 2.0 * p.a * p.a;
  p.theta = p.b - p.a;
  Mat s2(2, 2);
  s2 << 1.0, -p.a, -p.a, p.b;
  p.s = Eigen::kroneckerProduct(s2, Mat::Identity(n, n)).eval();
  p.rho = contraction_rate(p);
  const MetricForm mf(p.s);
  p.c1 = std::sqrt(mf.cond());
  p.root = larger ? "larger" : "smaller";
  return p;
}

}  // namespace

KfpParams solve_kfp_params(double m, double M, double slack, int n) {
  if (!(m > 0.0)) throw ContractViolation("solve_kfp_params: requires m > 0");
  if (!(M >= m)) throw ContractViolation("solve_kfp_params: requires m <= M");
  if (!(slack >= 0.0 && slack < 1.0)) throw ContractViolation("solve_kfp_params: slack must be in [0, 1)");
  require(n >= 1, "solve_kfp_params: n must be >= 1");
  if (std::sqrt(M) - std::sqrt(m) > 1.0) {
    std::ostringstream os;
    os << "infeasible: the twisted-metric system has a solution only when sqrt(M) - sqrt(m) <= 1; got "
       << "sqrt(" << M << ") - sqrt(" << m << ") = " << std::sqrt(M) - std::sqrt(m);
    throw InfeasibleCertificate(os.str());
  }
  double m_t = m * (1.0 - slack), M_t = M * (1.0 + slack);
  bool fallback = false;
  if (std::sqrt(M_t) - std::sqrt(m_t) > 1.0) {
    m_t = m;
    M_t = M;
    fallback = true;
  }
  KfpParams big = assemble(m, M, slack, n, m_t, M_t, true);
  KfpParams small = assemble(m, M, slack, n, m_t, M_t, false);
  // The two roots often certify the same rate; keep the larger unless the smaller is clearly better.
  KfpParams& best = (small.rho > big.rho + 1e-12 * (1.0 + std::abs(big.rho))) ? small : big;
  best.rho_larger_root = big.rho;
  best.rho_smaller_root = small.rho;
  best.boundary_fallback = fallback;
  return best;
}

DiffusionOperator build_operator(const PotentialSpec& pot) {
  const int n = pot.n;
  Mat a = Mat::Zero(2 * n, 2 * n);
  a.bottomRightCorner(n, n) = Mat::Identity(n, n);
  if (pot.quadratic_hessian) {
    Mat j = Mat::Zero(2 * n, 2 * n);
    j.topRightCorner(n, n) = Mat::Identity(n, n);
    j.bottomLeftCorner(n, n) = -*pot.quadratic_hessian;
    j.bottomRightCorner(n, n) = -Mat::Identity(n, n);
    return DiffusionOperator::affine("kfp_" + pot.label, j, Vec::Zero(2 * n), a);
  }
  auto grad = pot.grad;
  auto hess = pot.hess;
  return DiffusionOperator(
      "kfp_" + pot.label, a,
      [grad, n](const Vec& z) -> Vec {
        Vec b(2 * n);
        const Vec x = z.head(n), v = z.tail(n);
        b.head(n) = v;
        b.tail(n) = -v - grad(x);
        return b;
      },
      [hess, n](const Vec& z) -> Mat {
        Mat j = Mat::Zero(2 * n, 2 * n);
        j.topRightCorner(n, n) = Mat::Identity(n, n);
        j.bottomLeftCorner(n, n) = -hess(Vec(z.head(n)));
        j.bottomRightCorner(n, n) = -Mat::Identity(n, n);
        return j;
      });
}

nlohmann::json to_json(const KfpParams& p) {
  nlohmann::json j;
  j["m"] = p.m;
  j["M"] = p.M;
  j["slack"] = p.slack;
  j["m_target"] = p.m_target;
  j["M_target"] = p.M_target;
  j["alpha"] = p.alpha;
  j["beta"] = p.beta;
  j["gamma"] = p.gamma;
  j["delta"] = p.delta;
  j["a"] = p.a;
  j["b"] = p.b;
  j["kappa"] = p.kappa;
  j["theta"] = p.theta;
  j["n"] = p.n;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.s.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < p.s.cols(); ++k) row.push_back(p.s(i, k));
    rows.push_back(row);
  }
  j["S"] = rows;
  j["block_order"] = "x,v";
  j["rho"] = p.rho;
  j["c1"] = p.c1;
  j["root"] = p.root;
  j["rho_larger_root"] = p.rho_larger_root;
  j["rho_smaller_root"] = p.rho_smaller_root;
  j["boundary_fallback"] = p.boundary_fallback;
  return j;
}

}  // namespace hypocert::kfp
