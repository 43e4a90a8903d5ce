#pragma once

#include "hypocert/testfn.hpp"
#include "hypocert/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hypocert {

/// Drift of the form b(z) = J z + c.
struct AffineDrift {
  Mat jacobian;
  Vec offset;
};

/// L = sum_ij A_ij d_i d_j + sum_i b_i(z) d_i with constant positive-semidefinite A.
class DiffusionOperator {
 public:
  using DriftFn = std::function<Vec(const Vec&)>;
  using JacobianFn = std::function<Mat(const Vec&)>;

  DiffusionOperator(std::string name, Mat diffusion, DriftFn drift, JacobianFn jacobian);

  static DiffusionOperator affine(std::string name, const Mat& jacobian, const Vec& offset,
                                  const Mat& diffusion);

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(diffusion_.rows()); }
  const Mat& diffusion() const { return diffusion_; }
  Vec drift(const Vec& z) const;
  Mat drift_jacobian(const Vec& z) const;
  const std::optional<AffineDrift>& affine_drift() const { return affine_; }

 private:
  std::string name_;
  Mat diffusion_;
  DriftFn drift_;
  JacobianFn jacobian_;
  std::optional<AffineDrift> affine_;
};

/// d^2/dv^2 + v d/dx on (x, v).
DiffusionOperator kolmogorov_operator();
/// Drift z -> J z with constant diffusion A.
DiffusionOperator ornstein_uhlenbeck(const Mat& jacobian, const Mat& diffusion);

/// Largest |J(z) - central difference of b at z| over the points, relative to 1 + |J|.
double max_jacobian_error(const DiffusionOperator& op, const std::vector<Vec>& points);

/// Constant symmetric positive-definite Sigma defining T(f) = grad f^T Sigma grad f.
class MetricForm {
 public:
  explicit MetricForm(const Mat& sigma);

  const Mat& matrix() const { return matrix_; }
  const Mat& inverse() const { return inverse_; }
  double cond() const { return cond_; }
  double min_eigenvalue() const { return min_eig_; }
  double max_eigenvalue() const { return max_eig_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }

  MetricForm scaled(double c) const { return MetricForm(c * matrix_); }

 private:
  Mat matrix_;
  Mat inverse_;
  double cond_ = 1.0;
  double min_eig_ = 1.0;
  double max_eig_ = 1.0;
};

double apply_operator(const DiffusionOperator& op, const TestFunction& f, const Vec& x);
double carre_du_champ(const DiffusionOperator& op, const TestFunction& f, const Vec& x);
double t_form(const MetricForm& s, const TestFunction& f, const TestFunction& g, const Vec& x);
double t_form(const MetricForm& s, const TestFunction& f, const Vec& x);

/// T2(f)(x) = 1/2 (L T(f) - 2 T(f, Lf)) from analytic derivatives up to order three.
double t2_form(const DiffusionOperator& op, const MetricForm& s, const TestFunction& f, const Vec& x);

/// B with T2(f) >= grad f^T B grad f for constant A and Sigma at a point with drift
/// Jacobian J. B = -(J Sigma + Sigma J^T) / 2; the Hessian-square term dropped is
/// tr(A H Sigma H) >= 0.
Mat t2_lower_matrix(const Mat& jacobian, const MetricForm& s);

/// sqrt((x - y)^T Sigma^{-1} (x - y)).
double induced_distance(const MetricForm& s, const Vec& x, const Vec& y);

}  // namespace hypocert
