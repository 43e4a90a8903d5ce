#pragma once

#include "hypocert/types.hpp"

#include <map>
#include <vector>

namespace hypocert {

/// Sparse multivariate polynomial with real coefficients over a fixed number of variables.
class Polynomial {
 public:
  using Exponents = std::vector<int>;

  explicit Polynomial(int arity = 0);

  static Polynomial constant(int arity, double c);
  static Polynomial variable(int arity, int index);
  /// u^T z + c0
  static Polynomial linear(const Vec& u, double c0 = 0.0);
  /// 0.5 z^T Q z + c^T z + c0
  static Polynomial quadratic(const Mat& q, const Vec& c, double c0 = 0.0);

  int arity() const { return arity_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  const std::map<Exponents, double>& terms() const { return terms_; }

  void add_term(const Exponents& e, double coeff);
  double coefficient(const Exponents& e) const;

  double operator()(const Vec& z) const;
  Polynomial derivative(int index) const;

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  Polynomial pow(int k) const;

  /// Composition with the affine map z = M y + shift; the result has arity M.cols().
  Polynomial substitute(const Mat& m, const Vec& shift) const;

  /// Integrates variables [first, arity) against independent standard normals and
  /// returns a polynomial in the leading `first` variables.
  Polynomial integrate_standard_normal(int first) const;

  /// E[p(Y)] for Y ~ N(0, I).
  double standard_normal_mean() const;

 private:
  void prune();

  int arity_;
  std::map<Exponents, double> terms_;
};

}  // namespace hypocert
