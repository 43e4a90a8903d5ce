#include "hypocert/operator_core.hpp"

#include "hypocert/linalg.hpp"

#include <cmath>

namespace hypocert {

namespace {
void check_dims(int expected, int got, const char* what) {
  if (expected != got)
    throw ContractViolation(std::string(what) + ": dimension mismatch (" + std::to_string(expected) +
                            " vs " + std::to_string(got) + ")");
}
}  // namespace

DiffusionOperator::DiffusionOperator(std::string name, Mat diffusion, DriftFn drift,
                                     JacobianFn jacobian)
    : name_(std::move(name)),
      diffusion_(std::move(diffusion)),
      drift_(std::move(drift)),
      jacobian_(std::move(jacobian)) {
  require(diffusion_.rows() >= 1 && diffusion_.rows() == diffusion_.cols(),
          "diffusion matrix must be square and non-empty");
  require(linalg::is_symmetric(diffusion_, 1e-12), "diffusion matrix must be symmetric");
  require(linalg::min_eigenvalue(diffusion_) >= -1e-12, "diffusion matrix must be positive semidefinite");
  require(static_cast<bool>(drift_) && static_cast<bool>(jacobian_), "drift and Jacobian required");
}

DiffusionOperator DiffusionOperator::affine(std::string name, const Mat& jacobian, const Vec& offset,
                                            const Mat& diffusion) {
  require(jacobian.rows() == diffusion.rows() && jacobian.cols() == diffusion.cols() &&
              offset.size() == diffusion.rows(),
          "affine operator: shape mismatch");
  DiffusionOperator op(
      std::move(name), diffusion, [jacobian, offset](const Vec& z) -> Vec { return jacobian * z + offset; },
      [jacobian](const Vec&) { return jacobian; });
  op.affine_ = AffineDrift{jacobian, offset};
  return op;
}

Vec DiffusionOperator::drift(const Vec& z) const {
  check_dims(dim(), static_cast<int>(z.size()), "drift");
  return drift_(z);
}

Mat DiffusionOperator::drift_jacobian(const Vec& z) const {
  check_dims(dim(), static_cast<int>(z.size()), "drift_jacobian");
  return jacobian_(z);
}

DiffusionOperator kolmogorov_operator() {
  Mat j(2, 2);
  j << 0, 1, 0, 0;
  Mat a = Mat::Zero(2, 2);
  a(1, 1) = 1.0;
  return DiffusionOperator::affine("kolmogorov", j, Vec::Zero(2), a);
}

DiffusionOperator ornstein_uhlenbeck(const Mat& jacobian, const Mat& diffusion) {
  return DiffusionOperator::affine("ou", jacobian, Vec::Zero(jacobian.rows()), diffusion);
}

double max_jacobian_error(const DiffusionOperator& op, const std::vector<Vec>& points) {
  double worst = 0.0;
  for (const Vec& x : points) {
    const double h = 1e-5 * (1.0 + x.norm());
    const Mat j = op.drift_jacobian(x);
    Mat fd(op.dim(), op.dim());
    for (int i = 0; i < op.dim(); ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      fd.col(i) = (op.drift(xp) - op.drift(xm)) / (2 * h);
    }
    worst = std::max(worst, (j - fd).cwiseAbs().maxCoeff() / (1.0 + j.cwiseAbs().maxCoeff()));
  }
  return worst;
}

MetricForm::MetricForm(const Mat& sigma) {
  require(sigma.rows() >= 1 && sigma.rows() == sigma.cols(), "metric matrix must be square");
  require(linalg::is_symmetric(sigma, 1e-12), "metric matrix must be symmetric");
  matrix_ = linalg::symmetrize(sigma);
  Eigen::SelfAdjointEigenSolver<Mat> es(matrix_);
  min_eig_ = es.eigenvalues()(0);
  max_eig_ = es.eigenvalues()(matrix_.rows() - 1);
  require(min_eig_ > 0.0, "metric matrix must be positive definite");
  cond_ = max_eig_ / min_eig_;
  inverse_ = linalg::symmetrize(es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                                es.eigenvectors().transpose());
}

double apply_operator(const DiffusionOperator& op, const TestFunction& f, const Vec& x) {
  check_dims(op.dim(), f.arity(), "apply_operator");
  return (op.diffusion().cwiseProduct(f.hess(x))).sum() + op.drift(x).dot(f.grad(x));
}

double carre_du_champ(const DiffusionOperator& op, const TestFunction& f, const Vec& x) {
  check_dims(op.dim(), f.arity(), "carre_du_champ");
  const Vec g = f.grad(x);
  return g.dot(op.diffusion() * g);
}

double t_form(const MetricForm& s, const TestFunction& f, const TestFunction& g, const Vec& x) {
  check_dims(s.dim(), f.arity(), "t_form");
  check_dims(s.dim(), g.arity(), "t_form");
  return f.grad(x).dot(s.matrix() * g.grad(x));
}

double t_form(const MetricForm& s, const TestFunction& f, const Vec& x) { return t_form(s, f, f, x); }

double t2_form(const DiffusionOperator& op, const MetricForm& s, const TestFunction& f, const Vec& x) {
  check_dims(op.dim(), f.arity(), "t2_form");
  check_dims(op.dim(), s.dim(), "t2_form");
  if (!f.has_third()) throw UnsupportedFunction("t2_form needs third derivatives of f");
  const Mat& a = op.diffusion();
  const Mat& sig = s.matrix();
  const Vec g = f.grad(x);
  const Mat h = f.hess(x);
  const Tensor3 t = f.third(x);
  const Vec b = op.drift(x);
  const Mat j = op.drift_jacobian(x);

  const Vec sg = sig * g;
  // T(f) = g^T Sigma g: gradient 2 H Sigma g, Hessian 2 (T[.,.,Sigma g] + H Sigma H).
  const Vec grad_t = 2.0 * h * sg;
  const Mat hess_t = 2.0 * (t.contract_first(sg) + h * sig * h);
  const double l_t = a.cwiseProduct(hess_t).sum() + b.dot(grad_t);
  // grad(Lf)_i = sum_kl A_kl T_ikl + sum_k (d_i b_k) g_k + sum_k b_k H_ki.
  const Vec grad_lf = t.contract_last_two(a) + j.transpose() * g + h * b;
  return 0.5 * l_t - sg.dot(grad_lf);
}

Mat t2_lower_matrix(const Mat& jacobian, const MetricForm& s) {
  require(jacobian.rows() == s.dim() && jacobian.cols() == s.dim(), "t2_lower_matrix: dimension mismatch");
  return -linalg::symmetrize(jacobian * s.matrix());
}

double induced_distance(const MetricForm& s, const Vec& x, const Vec& y) {
  check_dims(s.dim(), static_cast<int>(x.size()), "induced_distance");
  check_dims(s.dim(), static_cast<int>(y.size()), "induced_distance");
  const Vec d = x - y;
  return std::sqrt(std::max(0.0, d.dot(s.inverse() * d)));
}

}  // namespace hypocert
