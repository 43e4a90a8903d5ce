#include "hypocert/transport.hpp"

#include "hypocert/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hypocert {

Mat cost_matrix(const Mat& x, const Mat& y, const MetricForm& s) {
  require(x.cols() == s.dim() && y.cols() == s.dim(), "cost_matrix: dimension mismatch");
  // Whiten once: d_S(a, b)^2 = |W (a - b)|^2 with W^T W = Sigma^{-1}.
  const Eigen::LLT<Mat> llt(s.inverse());
  const Mat w = llt.matrixU();
  const Mat xw = x * w.transpose(), yw = y * w.transpose();
  const Vec xn = xw.rowwise().squaredNorm(), yn = yw.rowwise().squaredNorm();
  Mat c = (-2.0 * xw * yw.transpose()).colwise() + xn;
  c.rowwise() += yn.transpose();
  return c.cwiseMax(0.0);
}

Assignment solve_assignment(const Mat& cost) {
  require(cost.rows() == cost.cols(), "solve_assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  require(n >= 1, "solve_assignment: empty problem");
  const double inf = std::numeric_limits<double>::infinity();
  // The inner loop scans one row at a time.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = cost;
  // 1-based potentials u (rows), v (columns); p[j] = row assigned to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = rows(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment a;
  a.match.assign(n, -1);
  for (int j = 1; j <= n; ++j) a.match[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) a.cost += cost(i, a.match[i]);
  return a;
}

ExactTransport w2_exact_plan(const Mat& x, const Mat& y, const MetricForm& s) {
  require(x.rows() >= 1, "w2_exact: empty ensemble");
  if (x.rows() != y.rows())
    throw UnsupportedFunction("w2_exact: ensembles have different sizes; resample to equal N");
  const Assignment a = solve_assignment(cost_matrix(x, y, s));
  return {std::sqrt(std::max(0.0, a.cost) / static_cast<double>(x.rows())), a.match};
}

double w2_exact(const Mat& x, const Mat& y, const MetricForm& s) { return w2_exact_plan(x, y, s).w2; }

double w2_exact(const Ensemble& x, const Ensemble& y, const MetricForm& s) {
  return w2_exact(x.particles, y.particles, s);
}

double median_cost(const Mat& cost) {
  std::vector<double> v(cost.data(), cost.data() + cost.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

namespace {

double log_sum_exp(const Eigen::Ref<const Vec>& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

}  // namespace

EntropicResult w2_entropic(const Mat& x, const Mat& y, const MetricForm& s, double eps, const EntropicOptions& opts) {
  require(eps > 0 && std::isfinite(eps), "w2_entropic: eps must be positive");
  require(x.rows() >= 1, "w2_entropic: empty ensemble");
  if (x.rows() != y.rows())
    throw UnsupportedFunction("w2_entropic: ensembles have different sizes; resample to equal N");
  const Eigen::Index n = x.rows();
  const Mat c = cost_matrix(x, y, s);
  const double log_w = -std::log(static_cast<double>(n));

  // Dual potentials f (rows), g (columns): P_ij = exp((f_i + g_j - C_ij) / eps) / N^2.
  Vec f = Vec::Zero(n), g = Vec::Zero(n);
  std::vector<double> ladder;
  const double start = opts.anneal_from > 0 ? opts.anneal_from * std::max(median_cost(c), eps) : eps;
  for (double e = start; e > eps; e *= 0.5) ladder.push_back(e);
  ladder.push_back(eps);

  EntropicResult r;
  Vec tmp(n);
  auto plan_log = [&](Eigen::Index i, Eigen::Index j, double e) { return (f(i) + g(j) - c(i, j)) / e + 2 * log_w; };
  auto violation = [&](double e) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0, col = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row += std::exp(plan_log(i, j, e));
        col += std::exp(plan_log(j, i, e));
      }
      v = std::max({v, std::abs(row - std::exp(log_w)), std::abs(col - std::exp(log_w))});
    }
    return v;
  };

  for (std::size_t level = 0; level < ladder.size(); ++level) {
    const double e = ladder[level];
    const bool last = level + 1 == ladder.size();
    for (int it = 0; r.iterations < opts.max_iters; ++it) {
      ++r.iterations;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) tmp(j) = (g(j) - c(i, j)) / e + log_w;
        f(i) = -e * log_sum_exp(tmp);
      }
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) tmp(i) = (f(i) - c(i, j)) / e + log_w;
        g(j) = -e * log_sum_exp(tmp);
      }
      // After the g-update columns are exact; rows carry the residual.
      if (it % 10 == 0 || !last) {
        double viol = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) tmp(j) = plan_log(i, j, e);
          viol = std::max(viol, std::abs(std::exp(log_sum_exp(tmp)) - std::exp(log_w)));
        }
        if (viol <= (last ? opts.marginal_tol : 1e-3 / static_cast<double>(n))) break;
      }
    }
  }
  r.marginal_violation = violation(eps);
  r.converged = r.marginal_violation <= opts.marginal_tol;
  double cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cost += std::exp(plan_log(i, j, eps)) * c(i, j);
  r.transport_cost = cost;
  r.value = std::sqrt(std::max(0.0, cost));
  r.bias_bound = eps * std::log(static_cast<double>(n));
  return r;
}

EntropicResult w2_entropic(const Ensemble& x, const Ensemble& y, const MetricForm& s, double eps,
                           const EntropicOptions& opts) {
  return w2_entropic(x.particles, y.particles, s, eps, opts);
}

double bures_wasserstein(const Vec& m1, const Mat& c1, const Vec& m2, const Mat& c2) {
  require(m1.size() == m2.size() && c1.rows() == m1.size() && c2.rows() == m1.size(),
          "bures_wasserstein: dimension mismatch");
  const Mat r2 = linalg::psd_sqrt(c2);
  const Mat cross = linalg::psd_sqrt(linalg::symmetrize(r2 * c1 * r2));
  const double sq = (m1 - m2).squaredNorm() + (c1 + c2 - 2.0 * cross).trace();
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace hypocert
