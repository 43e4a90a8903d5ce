#include "hypocert/linalg.hpp"
#include "hypocert/rng.hpp"

#include <gtest/gtest.h>

using namespace hypocert;

namespace {

Mat random_matrix(int n, CounterRng& rng) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1, 1);
  return m;
}

}  // namespace

TEST(Linalg, ExpmOfNilpotentShear) {
  Mat j(2, 2);
  j << 0, 1, 0, 0;
  const Mat e = linalg::expm(2.5 * j);
  EXPECT_NEAR(e(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(e(0, 1), 2.5, 1e-14);
  EXPECT_NEAR(e(1, 0), 0.0, 1e-15);
}

TEST(Linalg, LyapunovSolveStationaryIdentity) {
  const Mat x = linalg::solve_lyapunov(-Mat::Identity(3, 3), 2.0 * Mat::Identity(3, 3));
  EXPECT_LT((x - Mat::Identity(3, 3)).norm(), 1e-13);
}

TEST(Linalg, LyapunovResidualOnRandomStableMatrices) {
  CounterRng rng(11, 0);
  for (int t = 0; t < 20; ++t) {
    const Mat j = random_matrix(4, rng) - 3.0 * Mat::Identity(4, 4);
    const Mat b = random_matrix(4, rng);
    const Mat q = b * b.transpose();
    const Mat x = linalg::solve_lyapunov(j, q);
    EXPECT_LT((j * x + x * j.transpose() + q).norm(), 1e-11);
  }
}

TEST(Linalg, LyapunovSingularOperatorThrows) {
  EXPECT_THROW(linalg::solve_lyapunov(Mat::Zero(2, 2), Mat::Identity(2, 2)), ContractViolation);
}

TEST(Linalg, ScalarTransitionMatchesClosedForm) {
  // dZ = (-2 Z + 1) dt + sqrt(3) dB over h: variance 3 (1 - e^{-4h}) / 4, mean shift (1 - e^{-2h}) / 2.
  const double h = 0.37;
  const auto tr = linalg::discretize_linear(Mat::Constant(1, 1, -2.0), Vec::Constant(1, 1.0),
                                            Mat::Constant(1, 1, 3.0), h);
  EXPECT_NEAR(tr.transition(0, 0), std::exp(-2 * h), 1e-15);
  EXPECT_NEAR(tr.shift(0), (1 - std::exp(-2 * h)) / 2, 1e-15);
  EXPECT_NEAR(tr.covariance(0, 0), 3 * (1 - std::exp(-4 * h)) / 4, 1e-15);
}

TEST(Linalg, TransitionCovarianceSolvesLyapunovIntegral) {
  CounterRng rng(5, 1);
  const Mat j = random_matrix(3, rng) - 2.0 * Mat::Identity(3, 3);
  const Mat b = random_matrix(3, rng);
  const Mat q = b * b.transpose();
  const double h = 0.8;
  const auto tr = linalg::discretize_linear(j, Vec::Zero(3), q, h);
  // C(h) = C_inf - e^{hJ} C_inf e^{hJ^T}.
  const Mat cinf = linalg::solve_lyapunov(j, q);
  const Mat e = linalg::expm(h * j);
  EXPECT_LT((tr.covariance - (cinf - e * cinf * e.transpose())).norm(), 1e-12);
  EXPECT_LT((tr.transition - e).norm(), 1e-13);
}

TEST(Linalg, GeneralizedEigenvaluesOfDiagonalPencil) {
  Mat a = Mat::Zero(2, 2), b = Mat::Zero(2, 2);
  a.diagonal() << 3, 1;
  b.diagonal() << 2, 4;
  EXPECT_NEAR(linalg::min_generalized_eigenvalue(a, b), 0.25, 1e-15);
  EXPECT_NEAR(linalg::max_generalized_eigenvalue(a, b), 1.5, 1e-15);
}

TEST(Linalg, PsdSqrtSquaresBack) {
  CounterRng rng(3, 3);
  const Mat b = random_matrix(4, rng);
  const Mat p = b * b.transpose();
  const Mat r = linalg::psd_sqrt(p);
  EXPECT_LT((r * r - p).norm(), 1e-12);
  EXPECT_TRUE(linalg::is_symmetric(r, 1e-12));
}
