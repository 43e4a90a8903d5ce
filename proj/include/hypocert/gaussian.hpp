#pragma once

#include "hypocert/linalg.hpp"
#include "hypocert/polynomial.hpp"
#include "hypocert/types.hpp"

#include <functional>

namespace hypocert::gaussian {

/// E[p(Z)] for Z ~ N(mean, cov), exact for polynomials.
double expectation(const Polynomial& p, const Vec& mean, const Mat& cov);

/// Var[p(Z)] for Z ~ N(mean, cov).
double variance(const Polynomial& p, const Vec& mean, const Mat& cov);

/// grad p^T Sigma grad p as a polynomial.
Polynomial metric_square(const Polynomial& p, const Mat& sigma);

/// One-dimensional Gauss-Hermite rule for the standard normal (Golub-Welsch).
struct HermiteRule {
  Vec nodes;
  Vec weights;  // sum to 1
};
HermiteRule hermite_rule(int q);

/// Tensor-product Gauss-Hermite approximation of E[f(Z)], Z ~ N(mean, cov), q nodes per axis.
/// Exact for polynomials of degree <= 2q - 1 in each coordinate.
double quadrature(const std::function<double(const Vec&)>& f, const Vec& mean, const Mat& cov, int q);

/// (P_t f)(z) = E[f(F z + shift + G w)], w ~ N(0, I), where (F, shift, G G^T) is an exact linear transition.
Polynomial propagate(const Polynomial& f, const linalg::LinearTransition& transition);

}  // namespace hypocert::gaussian
