#include "hypocert/rng.hpp"
#include "hypocert/verify_harness.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hypocert;

namespace {

struct Fixture {
  kfp::PotentialSpec pot = kfp::quadratic_potential(1, 1.0);
  kfp::KfpParams params = kfp::solve_kfp_params(1.0, 1.0, 0.05);
  DiffusionOperator op = kfp::build_operator(pot);
  MetricForm s{params.s};
};

std::vector<TestFunction> linear_and_quadratic(int count, std::uint64_t seed) {
  std::vector<TestFunction> fns;
  for (int i = 0; i < count; ++i) {
    FunctionFamily fam;
    fam.kind = i % 2 == 0 ? Family::linear : Family::quadratic;
    fns.push_back(sample_function(fam, 2, stream_key(seed, static_cast<std::uint64_t>(i))));
  }
  return fns;
}

Mat gaussian_cloud(int n, double shift, double scale, std::uint64_t stream) {
  CounterRng rng(5, stream);
  Mat p(n, 2);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = shift + scale * rng.normal();
  return p;
}

}  // namespace

TEST(T2Check, CertifiedRatePasses) {
  Fixture fx;
  const auto rep = check_t2_inequality(fx.op, fx.s, fx.params.rho, 300, 1);
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_GE(rep.margin, -1e-8);
  EXPECT_TRUE(rep.witness.is_null());
}

TEST(T2Check, InflatedRateFailsWithWitness) {
  Fixture fx;
  const auto rep = check_t2_inequality(fx.op, fx.s, 10.0, 300, 1);
  EXPECT_EQ(rep.verdict, Verdict::fail);
  EXPECT_LT(rep.margin, 0.0);
  ASSERT_FALSE(rep.witness.is_null());
  EXPECT_TRUE(rep.witness.contains("point"));
}

TEST(T2Check, ObserverSeesEveryTrial) {
  Fixture fx;
  int calls = 0;
  T2Options o;
  o.observer = [&](const TestFunction&, const Vec&, double, double) { ++calls; };
  check_t2_inequality(fx.op, fx.s, fx.params.rho, 50, 2, o);
  EXPECT_EQ(calls, 50);
}

TEST(GradientCheck, PassesAtCertifiedRateAndPathwiseJacobianIsExact) {
  Fixture fx;
  const SdeSystem sys(fx.op);
  const auto rep = check_gradient_bound(sys, fx.s, -fx.params.rho, linear_and_quadratic(4, 3),
                                        sample_ball(2, 1.0, 2, 4), {0.5, 1.0}, 400, 9);
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_LT(rep.provenance.at("pathwise_jacobian_error_vs_expm").get<double>(), 1e-8);
  EXPECT_FALSE(rep.series.empty());
}

TEST(GradientCheck, ImpossibleRateFails) {
  Fixture fx;
  const SdeSystem sys(fx.op);
  const auto rep = check_gradient_bound(sys, fx.s, -5.0, linear_and_quadratic(4, 3), sample_ball(2, 1.0, 2, 4),
                                        {0.5, 1.0}, 400, 9);
  EXPECT_EQ(rep.verdict, Verdict::fail);
}

TEST(WassersteinCheck, PassesAtCertifiedRate) {
  Fixture fx;
  const SdeSystem sys(fx.op);
  WassersteinOptions o;
  o.dt = 0.01;
  o.replicates = 4;
  const auto rep = check_wasserstein_contraction(sys, fx.s, -fx.params.rho, make_ensemble(gaussian_cloud(80, 0, 1, 1)),
                                                 make_ensemble(gaussian_cloud(80, 2, 0.5, 2)), {0.5, 1.0}, 3, o);
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(WassersteinCheck, ImpossibleRateFails) {
  Fixture fx;
  const SdeSystem sys(fx.op);
  WassersteinOptions o;
  o.dt = 0.01;
  o.replicates = 4;
  const auto rep = check_wasserstein_contraction(sys, fx.s, -5.0, make_ensemble(gaussian_cloud(80, 0, 1, 1)),
                                                 make_ensemble(gaussian_cloud(80, 2, 0.5, 2)), {0.5, 1.0}, 3, o);
  EXPECT_EQ(rep.verdict, Verdict::fail);
}

TEST(InvariantConvergence, PassesAtCertifiedRate) {
  Fixture fx;
  const SdeSystem sys(fx.op);
  WassersteinOptions o;
  o.dt = 0.01;
  o.replicates = 4;
  const auto rep = check_invariant_convergence(sys, fx.s, -fx.params.rho, make_ensemble(gaussian_cloud(80, 2, 0.5, 2)),
                                               {0.5, 1.0}, 3, o);
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(InvariantGaussian, BlocksAreInverseHessianAndIdentity) {
  const auto g = invariant_gaussian(kfp::quadratic_potential(2, 2.0));
  Mat expected = Mat::Identity(4, 4);
  expected(0, 0) = expected(1, 1) = 0.25;
  EXPECT_LT((g.cov - expected).norm(), 1e-14);
  EXPECT_EQ(g.mean, Vec::Zero(4));
}

TEST(PoincareCheck, CertifiedConstantPassesAndTightenedFails) {
  Fixture fx;
  std::vector<TestFunction> fns;
  FunctionFamily fam;
  for (int i = 0; i < 10; ++i) fns.push_back(sample_function(fam, 2, stream_key(11, static_cast<std::uint64_t>(i))));
  fns.push_back(TestFunction::from_polynomial(Polynomial::variable(2, 1), Family::linear));
  const double ag = kfp::gamma_constant(fx.params);
  EXPECT_EQ(check_poincare(fx.pot, fx.s, ag, fx.params.rho, fns).verdict, Verdict::pass);
  EXPECT_EQ(check_poincare(fx.pot, fx.s, ag, 1e5 * fx.params.rho, fns).verdict, Verdict::fail);
}

TEST(H1Params, RateFormula) {
  const H1Params p = make_h1_params(0.1, 2.0, 1.0, 0.01);
  const double c = 2.0 / 0.1;
  EXPECT_DOUBLE_EQ(p.c_poincare, c);
  EXPECT_DOUBLE_EQ(p.c_prime, std::min({2 * 0.1 / (1 + c), 2 * 0.1, 2 / c}));
}

TEST(H1Check, ExactDecayPassesAndSmallWeightIsDegenerate) {
  Fixture fx;
  const TestFunction f = TestFunction::from_polynomial(
      Polynomial::variable(2, 0) * Polynomial::variable(2, 1) + Polynomial::variable(2, 0), Family::polynomial);
  const H1Params good = make_h1_params(fx.params.rho, kfp::gamma_constant(fx.params), 1.0, 0.01);
  EXPECT_EQ(check_h1_decay(fx.pot, fx.s, good, f, {0.5, 1.0, 2.0}).verdict, Verdict::pass);
  const H1Params bad = make_h1_params(fx.params.rho, kfp::gamma_constant(fx.params), 0.005, 0.01);
  EXPECT_EQ(check_h1_decay(fx.pot, fx.s, bad, f, {0.5, 1.0}).verdict, Verdict::degenerate);
}

TEST(TimeDerivative, CertifiedRateIsConsistent) {
  Fixture fx;
  const TestFunction f = TestFunction::from_polynomial(Polynomial::variable(2, 0).pow(2) + Polynomial::variable(2, 1));
  const auto rep = check_time_derivative(fx.op, fx.s, -fx.params.rho, f, sample_ball(2, 1.0, 5, 3));
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(Equivalence, PassAndFailDisagree) {
  VerificationReport a, b;
  a.verdict = Verdict::pass;
  b.verdict = Verdict::fail;
  EXPECT_EQ(equivalence_consistency({&a, &b}).verdict, Verdict::fail);
  b.verdict = Verdict::inconclusive;
  EXPECT_EQ(equivalence_consistency({&a, &b}).verdict, Verdict::pass);
}

TEST(ReportJson, NonFiniteValuesBecomeStrings) {
  VerificationReport r;
  r.check_name = "x";
  r.margin = std::numeric_limits<double>::infinity();
  r.series.push_back({1.0, std::nan(""), 0.0, 1, ""});
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("margin").is_string());
  EXPECT_EQ(j.at("verdict"), "fail");
  const std::string dumped = j.dump();
  EXPECT_EQ(dumped.find("NaN"), std::string::npos);
}
