#include "hypocert/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace hypocert::linalg {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double min_eigenvalue(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Mat psd_sqrt(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sym));
  const Vec w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

Vec generalized_eigenvalues(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.rows() == a.cols(),
          "generalized eigenproblem: shape mismatch");
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(symmetrize(a), symmetrize(b),
                                                   Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  require(es.info() == Eigen::Success, "generalized eigenproblem: B is not positive definite");
  return es.eigenvalues();
}

double min_generalized_eigenvalue(const Mat& a, const Mat& b) {
  return generalized_eigenvalues(a, b)(0);
}

double max_generalized_eigenvalue(const Mat& a, const Mat& b) {
  const Vec w = generalized_eigenvalues(a, b);
  return w(w.size() - 1);
}

Mat expm(const Mat& m) { return m.exp(); }

Mat solve_lyapunov(const Mat& j, const Mat& q) {
  require(j.rows() == j.cols() && q.rows() == j.rows() && q.cols() == j.cols(),
          "solve_lyapunov: shape mismatch");
  const Eigen::Index n = j.rows();
  const Mat id = Mat::Identity(n, n);
  // vec(J X + X J^T) = (I (x) J + J (x) I) vec(X) in column-major order.
  const Mat big = Eigen::kroneckerProduct(id, j) + Eigen::kroneckerProduct(j, id);
  Eigen::FullPivLU<Mat> lu(big);
  require(lu.isInvertible(), "solve_lyapunov: J has eigenvalues summing to zero");
  const Vec rhs = -Eigen::Map<const Vec>(q.data(), n * n);
  const Vec x = lu.solve(rhs);
  return symmetrize(Eigen::Map<const Mat>(x.data(), n, n));
}

LinearTransition discretize_linear(const Mat& j, const Vec& c, const Mat& noise_cov, double h) {
  const Eigen::Index n = j.rows();
  require(j.cols() == n && c.size() == n && noise_cov.rows() == n && noise_cov.cols() == n,
          "discretize_linear: shape mismatch");
  // Van Loan block exponential: [[-J, Q], [0, J^T]] gives the covariance integral;
  // [[J, c], [0, 0]] gives the affine shift.
  Mat vl = Mat::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -j;
  vl.topRightCorner(n, n) = noise_cov;
  vl.bottomRightCorner(n, n) = j.transpose();
  const Mat e = (vl * h).exp();
  LinearTransition out;
  out.transition = e.bottomRightCorner(n, n).transpose();
  out.covariance = symmetrize(out.transition * e.topRightCorner(n, n));

  Mat aug = Mat::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = j;
  aug.topRightCorner(n, 1) = c;
  out.shift = (aug * h).exp().topRightCorner(n, 1);
  return out;
}

}  // namespace hypocert::linalg
