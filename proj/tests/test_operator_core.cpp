#include "hypocert/kfp_certificate.hpp"
#include "hypocert/operator_core.hpp"
#include "hypocert/rng.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace hypocert;

namespace {

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

TestFunction poly_fn(const Polynomial& p) { return TestFunction::from_polynomial(p); }

DiffusionOperator ou_identity(int n) { return ornstein_uhlenbeck(-Mat::Identity(n, n), Mat::Identity(n, n)); }

Mat kfp_metric(double a, double b) { return (Mat(2, 2) << 1, -a, -a, b).finished(); }

std::vector<DiffusionOperator> operator_zoo() {
  Mat j(3, 3);
  j << -1, 0.4, 0, -0.3, -0.5, 0.2, 0.1, 0, -2;
  Mat a(3, 3);
  a << 1, 0.2, 0, 0.2, 0.5, 0, 0, 0, 0;
  return {ou_identity(2), kolmogorov_operator(), kfp::build_operator(kfp::perturbed_potential(1, 1.0, 0.1)),
          kfp::build_operator(kfp::quadratic_potential(2, 1.3)), ornstein_uhlenbeck(j, a)};
}

MetricForm zoo_metric(int d, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  Mat b(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) b(i, k) = rng.uniform(-0.5, 0.5);
  return MetricForm(b * b.transpose() + Mat::Identity(d, d));
}

}  // namespace

TEST(ApplyOperator, ConstantFunctionIsAnnihilated) {
  for (const auto& op : operator_zoo())
    EXPECT_EQ(apply_operator(op, TestFunction::constant(op.dim(), 4.0), Vec::Constant(op.dim(), 0.3)), 0.0);
}

TEST(ApplyOperator, KolmogorovOnPosition) {
  const auto op = kolmogorov_operator();
  EXPECT_DOUBLE_EQ(apply_operator(op, poly_fn(Polynomial::variable(2, 0)), vec2(0, 3)), 3.0);
}

TEST(ApplyOperator, KfpVelocitySquareMatchesFiniteDifference) {
  const auto op = kfp::build_operator(kfp::quadratic_potential(1, 1.0));
  const Polynomial v = Polynomial::variable(2, 1);
  const TestFunction f = poly_fn(v * v);
  const Vec z = vec2(0, 1);
  const double fd = oracle::fd_generator(op, [&](const Vec& y) { return f.value(y); }, z);
  // Delta_v v^2 - 2 v^2 - 2 x v = 2 - 2 at (0, 1).
  EXPECT_NEAR(apply_operator(op, f, z), 0.0, 1e-14);
  EXPECT_NEAR(apply_operator(op, f, z), fd, 1e-6);
}

TEST(ApplyOperator, DimensionMismatchThrows) {
  EXPECT_THROW(apply_operator(ou_identity(2), TestFunction::constant(3, 1.0), Vec::Zero(2)), ContractViolation);
}

TEST(CarreDuChamp, KfpSeesOnlyVelocity) {
  const auto op = kfp::build_operator(kfp::quadratic_potential(1, 1.0));
  const Vec z = vec2(0.4, -0.2);
  EXPECT_DOUBLE_EQ(carre_du_champ(op, poly_fn(Polynomial::variable(2, 1)), z), 1.0);
  EXPECT_DOUBLE_EQ(carre_du_champ(op, poly_fn(Polynomial::variable(2, 0)), z), 0.0);
  EXPECT_DOUBLE_EQ(carre_du_champ(op, TestFunction::constant(2, 2.0), z), 0.0);
}

TEST(CarreDuChamp, DoubledDiffusion) {
  const auto op = ornstein_uhlenbeck(-Mat::Identity(2, 2), 2.0 * Mat::Identity(2, 2));
  EXPECT_DOUBLE_EQ(carre_du_champ(op, poly_fn(Polynomial::linear(Vec::Ones(2))), vec2(1, 1)), 4.0);
}

TEST(CarreDuChamp, MatchesDefiningFormulaOnPolynomials) {
  FunctionFamily fam;
  fam.kind = Family::polynomial;
  for (const auto& op : operator_zoo()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const TestFunction f = sample_function(fam, op.dim(), seed);
      const Polynomial& p = *f.polynomial();
      const TestFunction f2 = poly_fn(p * p);
      for (const Vec& z : sample_ball(op.dim(), 1.0, 5, seed)) {
        const double gamma = 0.5 * (apply_operator(op, f2, z) - 2.0 * f.value(z) * apply_operator(op, f, z));
        const double cdc = carre_du_champ(op, f, z);
        EXPECT_NEAR(cdc, gamma, 1e-8 * (1.0 + std::abs(gamma)));
        EXPECT_GE(cdc, 0.0);
      }
    }
  }
}

TEST(TForm, KfpMetricCrossTerm) {
  const MetricForm s((Mat(2, 2) << 1, 0.3, 0.3, 2).finished());
  EXPECT_DOUBLE_EQ(t_form(s, poly_fn(Polynomial::variable(2, 0)), poly_fn(Polynomial::variable(2, 1)), vec2(1, 2)),
                   0.3);
}

TEST(TForm, LinearFunctionUnitMetric) {
  const MetricForm s(Mat::Identity(3, 3));
  const Vec u = (Vec(3) << 1, -2, 2).finished();
  EXPECT_DOUBLE_EQ(t_form(s, poly_fn(Polynomial::linear(u, 5.0)), Vec::Zero(3)), 9.0);
  EXPECT_DOUBLE_EQ(t_form(s, TestFunction::constant(3, 1.0), poly_fn(Polynomial::linear(u)), Vec::Zero(3)), 0.0);
}

TEST(TForm, SymmetricBilinearAndNonnegative) {
  const MetricForm s = zoo_metric(3, 7);
  const auto fams = standard_families();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TestFunction f = sample_function(fams[seed % fams.size()], 3, seed);
    const TestFunction g = sample_function(fams[(seed + 1) % fams.size()], 3, seed + 500);
    const TestFunction h = sample_function(fams[(seed + 2) % fams.size()], 3, seed + 900);
    const Vec z = sample_ball(3, 1.0, 1, seed).front();
    EXPECT_NEAR(t_form(s, f, g, z), t_form(s, g, f, z), 1e-12);
    EXPECT_GE(t_form(s, f, z), 0.0);
    const TestFunction comb = TestFunction::combine(2.0, g, -3.0, h);
    EXPECT_NEAR(t_form(s, f, comb, z), 2.0 * t_form(s, f, g, z) - 3.0 * t_form(s, f, h, z),
                1e-10 * (1.0 + std::abs(t_form(s, f, comb, z))));
  }
}

TEST(T2Form, LinearFunctionConstantDrift) {
  const auto op = DiffusionOperator::affine("shift", Mat::Zero(2, 2), Vec::Ones(2), Mat::Identity(2, 2));
  const MetricForm s(Mat::Identity(2, 2));
  EXPECT_NEAR(t2_form(op, s, poly_fn(Polynomial::linear(vec2(1, 2))), vec2(0.3, 0.1)), 0.0, 1e-14);
}

TEST(T2Form, OrnsteinUhlenbeckLinear) {
  const MetricForm s(Mat::Identity(3, 3));
  const Vec u = (Vec(3) << 1, 2, -1).finished();
  EXPECT_NEAR(t2_form(ou_identity(3), s, poly_fn(Polynomial::linear(u)), Vec::Constant(3, 0.2)), u.squaredNorm(),
              1e-13);
}

TEST(T2Form, KfpLinearSumClosedForm) {
  // f = x + v, V = x^2/2: T2 = -grad^T sym(J S) grad = 1 - a.
  const double a = 0.9, b = 2.1;
  const auto op = kfp::build_operator(kfp::quadratic_potential(1, 1.0));
  const MetricForm s(kfp_metric(a, b));
  const TestFunction f = poly_fn(Polynomial::linear(vec2(1, 1)));
  EXPECT_NEAR(t2_form(op, s, f, vec2(0.7, -0.4)), 1.0 - a, 1e-14);
}

TEST(T2Form, RequiresThirdDerivatives) {
  const TestFunction f(
      2, Family::polynomial, [](const Vec& z) { return z(0); }, [](const Vec&) { return Vec::Unit(2, 0); },
      [](const Vec&) { return Mat::Zero(2, 2); });
  EXPECT_THROW(t2_form(ou_identity(2), MetricForm(Mat::Identity(2, 2)), f, Vec::Zero(2)), UnsupportedFunction);
}

TEST(T2Form, AgreesWithNestedFiniteDifferences) {
  const auto fams = standard_families();
  for (const auto& op : operator_zoo()) {
    const MetricForm s = zoo_metric(op.dim(), static_cast<std::uint64_t>(op.dim()) * 31);
    for (const auto& fam : fams) {
      double worst = 0.0;
      for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const TestFunction f = sample_function(fam, op.dim(), seed);
        const Vec z = sample_ball(op.dim(), 1.0, 1, seed + 7).front();
        const double exact = t2_form(op, s, f, z);
        const double fd = oracle::fd_t2(op, s, f, z);
        worst = std::max(worst, std::abs(exact - fd) / (1.0 + std::abs(fd)));
      }
      EXPECT_LE(worst, 1e-4) << op.name() << " / " << to_string(fam.kind);
    }
  }
}

TEST(T2LowerMatrix, Examples) {
  const MetricForm id(Mat::Identity(2, 2));
  EXPECT_LT((t2_lower_matrix(-Mat::Identity(2, 2), id) - Mat::Identity(2, 2)).norm(), 1e-15);
  EXPECT_LT((t2_lower_matrix(Mat::Identity(2, 2), id) + Mat::Identity(2, 2)).norm(), 1e-15);
}

TEST(T2LowerMatrix, ValidOnRandomQuadratics) {
  // Both orientations of the cross term, and a general operator.
  const double a = 0.93, b = 2.43;
  const auto kfp_op = kfp::build_operator(kfp::quadratic_potential(1, 1.0));
  std::vector<std::pair<DiffusionOperator, MetricForm>> cases{
      {kfp_op, MetricForm(kfp_metric(a, b))},
      {kfp_op, MetricForm((Mat(2, 2) << 1, a, a, b).finished())},
      {kfp::build_operator(kfp::perturbed_potential(1, 1.0, 0.1)), MetricForm(kfp_metric(a, b))},
      {operator_zoo()[4], zoo_metric(3, 5)}};
  FunctionFamily fam;
  fam.kind = Family::quadratic;
  for (const auto& [op, s] : cases) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const TestFunction f = sample_function(fam, op.dim(), seed);
      const Vec z = sample_ball(op.dim(), 2.0, 1, seed + 1).front();
      const Vec g = f.grad(z);
      worst = std::min(worst, t2_form(op, s, f, z) - g.dot(t2_lower_matrix(op.drift_jacobian(z), s) * g));
    }
    EXPECT_GE(worst, -1e-8);
  }
}

TEST(T2LowerMatrix, TransposedOrientationIsNotALowerBound) {
  // The alternative -sym(Sigma J) fails for a non-normal drift, which fixes the convention.
  const auto op = ornstein_uhlenbeck((Mat(2, 2) << -1, 4, 0, -1).finished(), Mat::Identity(2, 2));
  const MetricForm s((Mat(2, 2) << 2, 0.5, 0.5, 1).finished());
  const Mat j = op.drift_jacobian(Vec::Zero(2));
  const Mat wrong = -0.5 * (s.matrix() * j + j.transpose() * s.matrix());
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TestFunction f = sample_function({Family::linear}, 2, seed);
    const Vec g = f.grad(Vec::Zero(2));
    worst = std::min(worst, t2_form(op, s, f, Vec::Zero(2)) - g.dot(wrong * g));
  }
  EXPECT_LT(worst, -1e-3);
}

TEST(InducedDistance, Examples) {
  const MetricForm id(Mat::Identity(2, 2));
  EXPECT_EQ(induced_distance(id, vec2(1, 2), vec2(1, 2)), 0.0);
  EXPECT_NEAR(induced_distance(id, vec2(0, 0), vec2(3, 4)), 5.0, 1e-15);
  const MetricForm s((Mat(2, 2) << 4, 0, 0, 1).finished());
  EXPECT_NEAR(induced_distance(s, vec2(2, 0), vec2(0, 0)), 1.0, 1e-15);
}

TEST(InducedDistance, EqualsSupremumOverLinearFunctions) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const MetricForm s = zoo_metric(3, seed);
    const Vec x = sample_ball(3, 2.0, 1, seed).front(), y = sample_ball(3, 2.0, 1, seed + 99).front();
    const double d = induced_distance(s, x, y);
    EXPECT_NEAR(oracle::numeric_distance_sup(s, x - y), d, 1e-6 * (1.0 + d));
  }
}

TEST(Operators, JacobianAgreesWithDrift) {
  for (const auto& op : operator_zoo()) EXPECT_LE(max_jacobian_error(op, sample_ball(op.dim(), 2.0, 50, 1)), 1e-5);
}

TEST(Operators, RejectsIndefiniteDiffusion) {
  EXPECT_THROW(ornstein_uhlenbeck(-Mat::Identity(2, 2), (Mat(2, 2) << 1, 0, 0, -1).finished()), ContractViolation);
}

TEST(MetricFormTest, InverseAndValidation) {
  const MetricForm s = zoo_metric(4, 3);
  EXPECT_LT((s.matrix() * s.inverse() - Mat::Identity(4, 4)).norm(), 1e-10);
  EXPECT_GE(s.cond(), 1.0);
  EXPECT_THROW(MetricForm((Mat(2, 2) << 1, 2, 2, 1).finished()), ContractViolation);
  EXPECT_THROW(MetricForm((Mat(2, 2) << 1, 0.1, 0, 1).finished()), ContractViolation);
}
