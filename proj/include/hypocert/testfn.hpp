#pragma once

#include "hypocert/polynomial.hpp"
#include "hypocert/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hypocert {

/// Dense n x n x n array of third partial derivatives, symmetric in all slots for smooth f.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  /// Contraction sum_{kl} A_kl T_{ikl} for each i.
  Vec contract_last_two(const Mat& a) const;
  /// Matrix (sum_i T_{kli} w_i)_{kl}.
  Mat contract_first(const Vec& w) const;
  Tensor3& operator+=(const Tensor3& o);
  Tensor3& operator*=(double s);

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
  }
  int n_ = 0;
  std::vector<double> data_;
};

enum class Family { linear, quadratic, polynomial, trigonometric, gaussian_bump, composite };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Smooth scalar function with analytic derivatives; third derivatives are optional.
class TestFunction {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;
  using ThirdFn = std::function<Tensor3(const Vec&)>;

  TestFunction(int arity, Family family, ValueFn value, GradFn grad, HessFn hess,
               ThirdFn third = {});

  static TestFunction from_polynomial(const Polynomial& p, Family family = Family::polynomial);
  static TestFunction constant(int arity, double c);
  /// c * exp(-|z - center|^2 / (2 width^2))
  static TestFunction gaussian_bump(const Vec& center, double width, double amplitude = 1.0);
  /// sum_k amp_k sin(freq_k . z + phase_k)
  static TestFunction trigonometric(const Mat& freqs, const Vec& amps, const Vec& phases);

  /// a f + b g
  static TestFunction combine(double a, const TestFunction& f, double b, const TestFunction& g);

  int arity() const { return arity_; }
  Family family() const { return family_; }
  bool has_third() const { return static_cast<bool>(third_); }

  double value(const Vec& z) const;
  Vec grad(const Vec& z) const;
  Mat hess(const Vec& z) const;
  Tensor3 third(const Vec& z) const;

  /// Present when the function is a polynomial; used for exact Gaussian propagation.
  const std::optional<Polynomial>& polynomial() const { return poly_; }

 private:
  void check_point(const Vec& z) const;

  int arity_;
  Family family_;
  ValueFn value_;
  GradFn grad_;
  HessFn hess_;
  ThirdFn third_;
  std::optional<Polynomial> poly_;
};

/// Sampling description for a family of test functions.
struct FunctionFamily {
  Family kind = Family::polynomial;
  int max_degree = 4;          // polynomial
  double coefficient_range = 1.0;
  double max_frequency = 2.0;  // trigonometric
  int terms = 3;               // trigonometric
  double min_width = 0.5;      // gaussian_bump
  double max_width = 2.0;
  double center_radius = 1.0;

  bool compact_support() const { return kind == Family::gaussian_bump; }
};

TestFunction sample_function(const FunctionFamily& family, int dim, std::uint64_t seed);

/// The five analytic families in a fixed order, as used by the sampled checks.
std::vector<FunctionFamily> standard_families();

/// Worst relative disagreement, over the given points, between each derivative order
/// and the central difference of the order below it: |a - b| / (1 + |b|).
struct DerivativeCheck {
  double grad_error = 0.0;
  double hess_error = 0.0;
  double third_error = 0.0;
  double worst() const { return std::max({grad_error, hess_error, third_error}); }
};
DerivativeCheck check_derivatives(const TestFunction& f, const std::vector<Vec>& points);

/// Uniform samples from the ball of radius r in R^dim.
std::vector<Vec> sample_ball(int dim, double radius, int count, std::uint64_t seed);

}  // namespace hypocert
