#include "hypocert/rng.hpp"
#include "hypocert/transport.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hypocert;

namespace {

Mat random_cloud(CounterRng& rng, int n, int d, double scale = 1.0, double shift = 0.0) {
  Mat p(n, d);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = shift + scale * rng.normal();
  return p;
}

MetricForm random_metric(CounterRng& rng, int d) {
  Mat b(d, d);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
  return MetricForm(b * b.transpose() + 0.5 * Mat::Identity(d, d));
}

}  // namespace

TEST(W2Exact, SingleParticleIsInducedDistance) {
  const MetricForm s((Mat(2, 2) << 2, 0.3, 0.3, 1).finished());
  const Vec x = (Vec(2) << 1, -1).finished(), y = (Vec(2) << 0.2, 0.5).finished();
  EXPECT_NEAR(w2_exact(Mat(x.transpose()), Mat(y.transpose()), s), induced_distance(s, x, y), 1e-14);
}

TEST(W2Exact, TwoPointExample) {
  const Mat x = (Mat(2, 1) << 0.0, 1.0).finished();
  const Mat y = (Mat(2, 1) << 0.1, 1.1).finished();
  EXPECT_NEAR(w2_exact(x, y, MetricForm(Mat::Identity(1, 1))), 0.1, 1e-14);
}

TEST(W2Exact, AgreesWithPermutationEnumeration) {
  CounterRng rng(3, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6, d = 1 + trial % 3;
    const MetricForm s = random_metric(rng, d);
    const Mat x = random_cloud(rng, n, d), y = random_cloud(rng, n, d, 1.5, 0.5);
    const Mat c = cost_matrix(x, y, s);
    const Assignment a = solve_assignment(c);
    EXPECT_EQ(a.cost, oracle::brute_force_assignment(c)) << "trial " << trial;
    EXPECT_NEAR(w2_exact(x, y, s), oracle::brute_force_w2(x, y, s), 1e-12) << "trial " << trial;
  }
}

TEST(W2Exact, AssignmentIsPermutation) {
  CounterRng rng(4, 0);
  const Mat c = random_cloud(rng, 40, 40).cwiseAbs();
  const Assignment a = solve_assignment(c);
  std::vector<int> seen(40, 0);
  for (int j : a.match) ++seen[static_cast<std::size_t>(j)];
  for (int k : seen) EXPECT_EQ(k, 1);
}

TEST(W2Exact, GaussianSamplesApproachBuresWasserstein) {
  CounterRng rng(5, 0);
  const int n = 2000;
  const Vec m1 = Vec::Zero(2), m2 = (Vec(2) << 3.0, 1.0).finished();
  const Mat c1 = Mat::Identity(2, 2);
  const Mat c2 = (Mat(2, 2) << 2.0, 0.6, 0.6, 1.0).finished();
  const Mat l2 = c2.llt().matrixL();
  Mat x = random_cloud(rng, n, 2), y = random_cloud(rng, n, 2);
  y = (y * l2.transpose()).rowwise() + m2.transpose();
  const double exact = bures_wasserstein(m1, c1, m2, c2);
  EXPECT_NEAR(w2_exact(x, y, MetricForm(Mat::Identity(2, 2))), exact, 0.05 * exact);
}

TEST(BuresWasserstein, OneDimensionalClosedForm) {
  const Vec m1 = Vec::Constant(1, 1.0), m2 = Vec::Constant(1, -0.5);
  const Mat c1 = Mat::Constant(1, 1, 4.0), c2 = Mat::Constant(1, 1, 0.25);
  EXPECT_NEAR(bures_wasserstein(m1, c1, m2, c2), std::sqrt(1.5 * 1.5 + 1.5 * 1.5), 1e-12);
  EXPECT_NEAR(bures_wasserstein(m1, c1, m1, c1), 0.0, 1e-12);
}

TEST(W2Exact, MetricAxioms) {
  CounterRng rng(6, 0);
  const MetricForm s = random_metric(rng, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat x = random_cloud(rng, 8, 2), y = random_cloud(rng, 8, 2, 2.0), z = random_cloud(rng, 8, 2, 0.5, 1.0);
    const double xy = w2_exact(x, y, s), yx = w2_exact(y, x, s);
    EXPECT_NEAR(xy, yx, 1e-12);
    EXPECT_EQ(w2_exact(x, x, s), 0.0);
    EXPECT_LE(w2_exact(x, z, s), xy + w2_exact(y, z, s) + 1e-12);
  }
}

TEST(W2Exact, ScalingMetricScalesDistance) {
  CounterRng rng(7, 0);
  const MetricForm s = random_metric(rng, 3);
  const Mat x = random_cloud(rng, 10, 3), y = random_cloud(rng, 10, 3, 1.0, 1.0);
  for (double c : {0.5, 2.0, 10.0}) {
    EXPECT_NEAR(w2_exact(x, y, s.scaled(c * c)), w2_exact(x, y, s) / c, 1e-12);
  }
}

TEST(W2Exact, PermutationInvariant) {
  CounterRng rng(8, 0);
  const MetricForm s(Mat::Identity(2, 2));
  const Mat x = random_cloud(rng, 12, 2), y = random_cloud(rng, 12, 2, 1.0, 2.0);
  const Mat yr = y.colwise().reverse();
  EXPECT_NEAR(w2_exact(x, y, s), w2_exact(x, yr, s), 1e-12);
}

TEST(W2Exact, RejectsUnequalOrEmpty) {
  const MetricForm s(Mat::Identity(1, 1));
  EXPECT_THROW(w2_exact(Mat::Zero(3, 1), Mat::Zero(4, 1), s), UnsupportedFunction);
  EXPECT_THROW(w2_exact(Mat::Zero(0, 1), Mat::Zero(0, 1), s), ContractViolation);
}

TEST(W2Entropic, DecreasingRegularizationDecreasesValue) {
  CounterRng rng(9, 0);
  const MetricForm s(Mat::Identity(2, 2));
  const Mat x = random_cloud(rng, 50, 2), y = random_cloud(rng, 50, 2, 1.0, 1.0);
  const double med = median_cost(cost_matrix(x, y, s));
  double prev = std::numeric_limits<double>::infinity();
  for (double f : {1.0, 0.1, 0.01}) {
    const EntropicResult r = w2_entropic(x, y, s, f * med);
    EXPECT_LE(r.marginal_violation, 1e-6);
    EXPECT_LE(r.value, prev + 1e-9);
    prev = r.value;
  }
}

TEST(W2Entropic, CloseToExactAtSmallRegularization) {
  CounterRng rng(10, 0);
  const MetricForm s(Mat::Identity(2, 2));
  const Mat x = random_cloud(rng, 64, 2), y = random_cloud(rng, 64, 2, 1.2, 0.8);
  const double med = median_cost(cost_matrix(x, y, s));
  const EntropicResult r = w2_entropic(x, y, s, 1e-3 * med);
  const double exact = w2_exact(x, y, s);
  // Sinkhorn slows down as eps shrinks; the plan is close to, not exactly on, the marginals.
  EXPECT_LE(r.marginal_violation, 1e-6);
  EXPECT_NEAR(r.value, exact, 0.02 * exact);
  EXPECT_LE(r.value * r.value, exact * exact + r.bias_bound + 1e-9);
  EXPECT_GE(r.value, exact - 1e-9);
}

TEST(W2Entropic, MarginalsSatisfied) {
  CounterRng rng(11, 0);
  const MetricForm s = random_metric(rng, 2);
  const Mat x = random_cloud(rng, 30, 2), y = random_cloud(rng, 30, 2, 0.7, -1.0);
  const EntropicResult r = w2_entropic(x, y, s, 0.05 * median_cost(cost_matrix(x, y, s)));
  EXPECT_LE(r.marginal_violation, 1e-6);
}

TEST(W2Entropic, IdenticalEnsemblesWithinBias) {
  CounterRng rng(12, 0);
  const MetricForm s(Mat::Identity(2, 2));
  const Mat x = random_cloud(rng, 40, 2);
  const EntropicResult r = w2_entropic(x, x, s, 1e-3 * median_cost(cost_matrix(x, x, s)));
  EXPECT_LE(r.value * r.value, r.bias_bound + 1e-12);
}
