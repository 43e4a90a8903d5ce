#include "hypocert/gaussian.hpp"

#include <cmath>

namespace hypocert::gaussian {

double expectation(const Polynomial& p, const Vec& mean, const Mat& cov) {
  require(mean.size() == p.arity() && cov.rows() == p.arity() && cov.cols() == p.arity(),
          "gaussian expectation: dimension mismatch");
  return p.substitute(linalg::psd_sqrt(cov), mean).standard_normal_mean();
}

double variance(const Polynomial& p, const Vec& mean, const Mat& cov) {
  const double m = expectation(p, mean, cov);
  return expectation(p * p, mean, cov) - m * m;
}

Polynomial metric_square(const Polynomial& p, const Mat& sigma) {
  const int d = p.arity();
  require(sigma.rows() == d && sigma.cols() == d, "metric_square: dimension mismatch");
  std::vector<Polynomial> g;
  for (int i = 0; i < d; ++i) g.push_back(p.derivative(i));
  Polynomial out(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (sigma(i, j) != 0.0) out += sigma(i, j) * (g[i] * g[j]);
  return out;
}

HermiteRule hermite_rule(int q) {
  require(q >= 1 && q <= 64, "hermite_rule: node count out of range");
  // Jacobi matrix of the probabilists' Hermite recurrence: off-diagonal sqrt(k).
  Mat jac = Mat::Zero(q, q);
  for (int k = 1; k < q; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  HermiteRule r;
  r.nodes = es.eigenvalues();
  r.weights = es.eigenvectors().row(0).transpose().array().square();
  r.weights /= r.weights.sum();
  return r;
}

double quadrature(const std::function<double(const Vec&)>& f, const Vec& mean, const Mat& cov, int q) {
  const Eigen::Index d = mean.size();
  require(cov.rows() == d && cov.cols() == d, "gaussian quadrature: dimension mismatch");
  const HermiteRule rule = hermite_rule(q);
  const Mat root = linalg::psd_sqrt(cov);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  double total = 0.0;
  Vec w(d);
  while (true) {
    double weight = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      w(k) = rule.nodes(idx[static_cast<std::size_t>(k)]);
      weight *= rule.weights(idx[static_cast<std::size_t>(k)]);
    }
    total += weight * f(mean + root * w);
    Eigen::Index k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] == q) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == d) break;
  }
  return total;
}

Polynomial propagate(const Polynomial& f, const linalg::LinearTransition& transition) {
  const Eigen::Index d = transition.transition.rows();
  require(f.arity() == d, "propagate: dimension mismatch");
  Mat m(d, 2 * d);
  m << transition.transition, linalg::psd_sqrt(transition.covariance);
  return f.substitute(m, transition.shift).integrate_standard_normal(static_cast<int>(d));
}

}  // namespace hypocert::gaussian
