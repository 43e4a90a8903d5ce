#include "oracles.hpp"

#include "hypocert/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

double fd_generator(const hypocert::DiffusionOperator& op, const std::function<double(const Vec&)>& f, const Vec& x,
                    double h) {
  const int d = op.dim();
  const Mat& a = op.diffusion();
  const Vec b = op.drift(x);
  double out = 0.0;
  for (int i = 0; i < d; ++i) {
    const Vec ei = h * Vec::Unit(d, i);
    out += b(i) * (f(x + ei) - f(x - ei)) / (2 * h);
    for (int j = 0; j < d; ++j) {
      if (a(i, j) == 0.0) continue;
      const Vec ej = h * Vec::Unit(d, j);
      const double dij = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h);
      out += a(i, j) * dij;
    }
  }
  return out;
}

double fd_t2(const hypocert::DiffusionOperator& op, const hypocert::MetricForm& s, const hypocert::TestFunction& f,
             const Vec& x) {
  const int d = op.dim();
  const double h = 1e-4 * (1.0 + x.norm());
  const Mat& sig = s.matrix();
  auto tf = [&](const Vec& y) {
    const Vec g = f.grad(y);
    return g.dot(sig * g);
  };
  // L f from the analytic gradient, with the Hessian differenced once.
  auto lf = [&](const Vec& y) {
    Mat hs(d, d);
    for (int i = 0; i < d; ++i) {
      const Vec ei = h * Vec::Unit(d, i);
      hs.col(i) = (f.grad(y + ei) - f.grad(y - ei)) / (2 * h);
    }
    return (op.diffusion().cwiseProduct(hs)).sum() + op.drift(y).dot(f.grad(y));
  };
  Vec glf(d);
  for (int i = 0; i < d; ++i) {
    const Vec ei = h * Vec::Unit(d, i);
    glf(i) = (lf(x + ei) - lf(x - ei)) / (2 * h);
  }
  const double l_t = fd_generator(op, tf, x, h);
  return 0.5 * (l_t - 2.0 * f.grad(x).dot(sig * glf));
}

double brute_force_w2(const Mat& x, const Mat& y, const hypocert::MetricForm& s) {
  const int n = static_cast<int>(x.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dd = hypocert::induced_distance(s, x.row(i).transpose(), y.row(perm[i]).transpose());
      c += dd * dd;
    }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / n);
}

double brute_force_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double numeric_distance_sup(const hypocert::MetricForm& s, const Vec& d, int iters) {
  // Parametrize the boundary u^T Sigma u = 1 as u = Sigma^{-1/2} w with |w| = 1 and run
  // gradient ascent on the sphere.
  const Mat r = hypocert::linalg::psd_sqrt(s.inverse());
  const Vec grad = r * d;
  Vec w = Vec::Unit(d.size(), 0) + 0.1 * Vec::Ones(d.size());
  w.normalize();
  for (int k = 0; k < iters; ++k) {
    w += 0.05 * (grad - w.dot(grad) * w);
    w.normalize();
  }
  return (r * w).dot(d);
}

}  // namespace oracle
