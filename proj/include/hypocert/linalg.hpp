#pragma once

#include "hypocert/types.hpp"

namespace hypocert::linalg {

Mat symmetrize(const Mat& m);
bool is_symmetric(const Mat& m, double tol = 1e-12);

/// Smallest and largest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& sym);
double max_eigenvalue(const Mat& sym);

/// Principal square root of a symmetric positive-semidefinite matrix; negative
/// eigenvalues within round-off are clamped to zero.
Mat psd_sqrt(const Mat& sym);

/// Eigenvalues of the pencil (a, b) with a symmetric and b symmetric positive definite,
/// sorted ascending.
Vec generalized_eigenvalues(const Mat& a, const Mat& b);
double min_generalized_eigenvalue(const Mat& a, const Mat& b);
double max_generalized_eigenvalue(const Mat& a, const Mat& b);

Mat expm(const Mat& m);

/// Solves J X + X J^T + Q = 0 through the Kronecker-vectorized system.
/// Throws ContractViolation when the operator J (+) J is singular.
Mat solve_lyapunov(const Mat& j, const Mat& q);

/// Exact one-step discretization of dZ = (J Z + c) dt + G dB over a step h:
/// Z(h) = transition * Z(0) + shift + N(0, covariance).
struct LinearTransition {
  Mat transition;
  Vec shift;
  Mat covariance;
};
LinearTransition discretize_linear(const Mat& j, const Vec& c, const Mat& noise_cov, double h);

}  // namespace hypocert::linalg
