#include "hypocert/testfn.hpp"

#include "hypocert/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hypocert {

// ---------------------------------------------------------------- Polynomial

Polynomial::Polynomial(int arity) : arity_(arity) { require(arity >= 0, "negative arity"); }

Polynomial Polynomial::constant(int arity, double c) {
  Polynomial p(arity);
  p.add_term(Exponents(arity, 0), c);
  return p;
}

Polynomial Polynomial::variable(int arity, int index) {
  require(index >= 0 && index < arity, "variable index out of range");
  Polynomial p(arity);
  Exponents e(arity, 0);
  e[index] = 1;
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::linear(const Vec& u, double c0) {
  const int n = static_cast<int>(u.size());
  Polynomial p = constant(n, c0);
  for (int i = 0; i < n; ++i) p += u(i) * variable(n, i);
  return p;
}

Polynomial Polynomial::quadratic(const Mat& q, const Vec& c, double c0) {
  const int n = static_cast<int>(c.size());
  require(q.rows() == n && q.cols() == n, "quadratic: shape mismatch");
  const Mat qs = 0.5 * (q + q.transpose());
  Polynomial p = linear(c, c0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Exponents e(n, 0);
      e[i] += 1;
      e[j] += 1;
      p.add_term(e, 0.5 * qs(i, j));
    }
  }
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

void Polynomial::add_term(const Exponents& e, double coeff) {
  require(static_cast<int>(e.size()) == arity_, "exponent arity mismatch");
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::coefficient(const Exponents& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::operator()(const Vec& z) const {
  require(z.size() == arity_, "polynomial evaluated at point of wrong dimension");
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = c;
    for (int i = 0; i < arity_; ++i) {
      for (int k = 0; k < e[i]; ++k) m *= z(i);
    }
    sum += m;
  }
  return sum;
}

Polynomial Polynomial::derivative(int index) const {
  require(index >= 0 && index < arity_, "derivative index out of range");
  Polynomial p(arity_);
  for (const auto& [e, c] : terms_) {
    if (e[index] == 0) continue;
    Exponents e2 = e;
    e2[index] -= 1;
    p.add_term(e2, c * e[index]);
  }
  return p;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  require(o.arity_ == arity_, "polynomial arity mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  require(o.arity_ == arity_, "polynomial arity mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  require(a.arity_ == b.arity_, "polynomial arity mismatch");
  Polynomial p(a.arity_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      Polynomial::Exponents e = ea;
      for (int i = 0; i < a.arity_; ++i) e[i] += eb[i];
      p.add_term(e, ca * cb);
    }
  }
  return p;
}

Polynomial Polynomial::pow(int k) const {
  require(k >= 0, "negative power");
  Polynomial r = constant(arity_, 1.0);
  for (int i = 0; i < k; ++i) r = r * *this;
  return r;
}

Polynomial Polynomial::substitute(const Mat& m, const Vec& shift) const {
  require(m.rows() == arity_ && shift.size() == arity_, "substitute: shape mismatch");
  const int out = static_cast<int>(m.cols());
  std::vector<Polynomial> images;
  images.reserve(arity_);
  for (int i = 0; i < arity_; ++i) images.push_back(linear(m.row(i).transpose(), shift(i)));

  // Cache powers of each image; degrees are small.
  std::vector<std::vector<Polynomial>> powers(arity_);
  Polynomial result(out);
  for (const auto& [e, c] : terms_) {
    Polynomial term = constant(out, c);
    for (int i = 0; i < arity_; ++i) {
      if (e[i] == 0) continue;
      auto& pw = powers[i];
      if (pw.empty()) pw.push_back(constant(out, 1.0));
      while (static_cast<int>(pw.size()) <= e[i]) pw.push_back(pw.back() * images[i]);
      term = term * pw[e[i]];
    }
    result += term;
  }
  return result;
}

namespace {
double normal_moment(int k) {
  if (k % 2 != 0) return 0.0;
  double r = 1.0;
  for (int j = k - 1; j > 1; j -= 2) r *= j;
  return r;
}
}  // namespace

Polynomial Polynomial::integrate_standard_normal(int first) const {
  require(first >= 0 && first <= arity_, "integrate: index out of range");
  Polynomial p(first);
  for (const auto& [e, c] : terms_) {
    double w = c;
    for (int i = first; i < arity_ && w != 0.0; ++i) w *= normal_moment(e[i]);
    if (w == 0.0) continue;
    p.add_term(Exponents(e.begin(), e.begin() + first), w);
  }
  return p;
}

double Polynomial::standard_normal_mean() const {
  return integrate_standard_normal(0).coefficient({});
}

// ---------------------------------------------------------------- Tensor3

Vec Tensor3::contract_last_two(const Mat& a) const {
  Vec out = Vec::Zero(n_);
  for (int i = 0; i < n_; ++i)
    for (int k = 0; k < n_; ++k)
      for (int l = 0; l < n_; ++l) out(i) += a(k, l) * (*this)(i, k, l);
  return out;
}

Mat Tensor3::contract_first(const Vec& w) const {
  Mat out = Mat::Zero(n_, n_);
  for (int k = 0; k < n_; ++k)
    for (int l = 0; l < n_; ++l)
      for (int i = 0; i < n_; ++i) out(k, l) += (*this)(k, l, i) * w(i);
  return out;
}

Tensor3& Tensor3::operator+=(const Tensor3& o) {
  require(o.n_ == n_, "tensor dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

// ---------------------------------------------------------------- TestFunction

std::string to_string(Family f) {
  switch (f) {
    case Family::linear: return "linear";
    case Family::quadratic: return "quadratic";
    case Family::polynomial: return "polynomial";
    case Family::trigonometric: return "trigonometric";
    case Family::gaussian_bump: return "gaussian_bump";
    case Family::composite: return "composite";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::linear, Family::quadratic, Family::polynomial, Family::trigonometric,
                   Family::gaussian_bump, Family::composite}) {
    if (to_string(f) == s) return f;
  }
  throw ContractViolation("unsupported function family: " + s);
}

TestFunction::TestFunction(int arity, Family family, ValueFn value, GradFn grad, HessFn hess,
                           ThirdFn third)
    : arity_(arity),
      family_(family),
      value_(std::move(value)),
      grad_(std::move(grad)),
      hess_(std::move(hess)),
      third_(std::move(third)) {
  require(arity >= 1, "test function arity must be positive");
  require(value_ && grad_ && hess_, "test function needs value, gradient and Hessian");
}

void TestFunction::check_point(const Vec& z) const {
  if (z.size() != arity_)
    throw ContractViolation("test function of arity " + std::to_string(arity_) +
                            " evaluated at point of dimension " + std::to_string(z.size()));
}

double TestFunction::value(const Vec& z) const {
  check_point(z);
  return value_(z);
}
Vec TestFunction::grad(const Vec& z) const {
  check_point(z);
  return grad_(z);
}
Mat TestFunction::hess(const Vec& z) const {
  check_point(z);
  return hess_(z);
}
Tensor3 TestFunction::third(const Vec& z) const {
  check_point(z);
  if (!third_) throw UnsupportedFunction("test function provides no third derivatives");
  return third_(z);
}

namespace {
struct PolyStack {
  Polynomial value;
  std::vector<Polynomial> grad;
  std::vector<Polynomial> hess;   // row-major n*n
  std::vector<Polynomial> third;  // n*n*n
};
}  // namespace

TestFunction TestFunction::from_polynomial(const Polynomial& p, Family family) {
  const int n = p.arity();
  auto st = std::make_shared<PolyStack>();
  st->value = p;
  for (int i = 0; i < n; ++i) st->grad.push_back(p.derivative(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) st->hess.push_back(st->grad[i].derivative(j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) st->third.push_back(st->hess[i * n + j].derivative(k));

  TestFunction f(
      n, family, [st](const Vec& z) { return st->value(z); },
      [st, n](const Vec& z) {
        Vec g(n);
        for (int i = 0; i < n; ++i) g(i) = st->grad[i](z);
        return g;
      },
      [st, n](const Vec& z) {
        Mat h(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) h(i, j) = st->hess[i * n + j](z);
        return h;
      },
      [st, n](const Vec& z) {
        Tensor3 t(n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) t(i, j, k) = st->third[(i * n + j) * n + k](z);
        return t;
      });
  f.poly_ = p;
  return f;
}

TestFunction TestFunction::constant(int arity, double c) {
  return from_polynomial(Polynomial::constant(arity, c), Family::polynomial);
}

TestFunction TestFunction::gaussian_bump(const Vec& center, double width, double amplitude) {
  require(width > 0.0, "bump width must be positive");
  const int n = static_cast<int>(center.size());
  const double s2 = width * width;
  auto val = [=](const Vec& z) { return amplitude * std::exp(-(z - center).squaredNorm() / (2 * s2)); };
  return TestFunction(
      n, Family::gaussian_bump, val,
      [=](const Vec& z) -> Vec { return val(z) * (-(z - center) / s2); },
      [=](const Vec& z) -> Mat {
        const Vec r = z - center;
        return val(z) * (r * r.transpose() / (s2 * s2) - Mat::Identity(n, n) / s2);
      },
      [=](const Vec& z) {
        const Vec r = z - center;
        const double f = val(z);
        Tensor3 t(n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              double v = -r(i) * r(j) * r(k) / (s2 * s2 * s2);
              if (i == j) v += r(k) / (s2 * s2);
              if (i == k) v += r(j) / (s2 * s2);
              if (j == k) v += r(i) / (s2 * s2);
              t(i, j, k) = f * v;
            }
        return t;
      });
}

TestFunction TestFunction::trigonometric(const Mat& freqs, const Vec& amps, const Vec& phases) {
  const int n = static_cast<int>(freqs.cols());
  const Eigen::Index m = freqs.rows();
  require(amps.size() == m && phases.size() == m, "trigonometric: shape mismatch");
  return TestFunction(
      n, Family::trigonometric,
      [=](const Vec& z) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) s += amps(k) * std::sin(freqs.row(k).dot(z) + phases(k));
        return s;
      },
      [=](const Vec& z) {
        Vec g = Vec::Zero(n);
        for (Eigen::Index k = 0; k < m; ++k)
          g += amps(k) * std::cos(freqs.row(k).dot(z) + phases(k)) * freqs.row(k).transpose();
        return g;
      },
      [=](const Vec& z) {
        Mat h = Mat::Zero(n, n);
        for (Eigen::Index k = 0; k < m; ++k) {
          const Vec w = freqs.row(k).transpose();
          h -= amps(k) * std::sin(w.dot(z) + phases(k)) * w * w.transpose();
        }
        return h;
      },
      [=](const Vec& z) {
        Tensor3 t(n);
        for (Eigen::Index k = 0; k < m; ++k) {
          const Vec w = freqs.row(k).transpose();
          const double c = -amps(k) * std::cos(w.dot(z) + phases(k));
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int l = 0; l < n; ++l) t(i, j, l) += c * w(i) * w(j) * w(l);
        }
        return t;
      });
}

TestFunction TestFunction::combine(double a, const TestFunction& f, double b, const TestFunction& g) {
  require(f.arity() == g.arity(), "combine: arity mismatch");
  if (f.poly_ && g.poly_) {
    const Family fam = (f.family_ == g.family_) ? f.family_ : Family::polynomial;
    return from_polynomial(a * *f.poly_ + b * *g.poly_, fam);
  }
  ThirdFn third;
  if (f.has_third() && g.has_third()) {
    third = [=](const Vec& z) {
      Tensor3 t = f.third(z);
      t *= a;
      Tensor3 u = g.third(z);
      u *= b;
      t += u;
      return t;
    };
  }
  return TestFunction(
      f.arity(), Family::composite, [=](const Vec& z) { return a * f.value(z) + b * g.value(z); },
      [=](const Vec& z) -> Vec { return a * f.grad(z) + b * g.grad(z); },
      [=](const Vec& z) -> Mat { return a * f.hess(z) + b * g.hess(z); }, third);
}

// ---------------------------------------------------------------- sampling

namespace {

Polynomial random_polynomial(int dim, int degree, double range, CounterRng& rng) {
  Polynomial p(dim);
  // Enumerate exponents with total degree <= degree.
  std::vector<int> e(dim, 0);
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == dim) {
      p.add_term(e, rng.uniform(-range, range));
      return;
    }
    for (int k = 0; k <= left; ++k) {
      e[i] = k;
      rec(i + 1, left - k);
    }
    e[i] = 0;
  };
  rec(0, degree);
  return p;
}

}  // namespace

TestFunction sample_function(const FunctionFamily& family, int dim, std::uint64_t seed) {
  require(dim >= 1, "sample_function: dim must be >= 1");
  CounterRng rng(seed, 0x7465737466ULL);
  const double r = family.coefficient_range;
  switch (family.kind) {
    case Family::linear: {
      Vec u(dim);
      for (int i = 0; i < dim; ++i) u(i) = rng.uniform(-r, r);
      return TestFunction::from_polynomial(Polynomial::linear(u, rng.uniform(-r, r)), Family::linear);
    }
    case Family::quadratic: {
      Mat q(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) q(i, j) = rng.uniform(-r, r);
      Vec c(dim);
      for (int i = 0; i < dim; ++i) c(i) = rng.uniform(-r, r);
      return TestFunction::from_polynomial(Polynomial::quadratic(q + q.transpose(), c, rng.uniform(-r, r)),
                                           Family::quadratic);
    }
    case Family::polynomial: {
      require(family.max_degree >= 0 && family.max_degree <= 4, "polynomial degree must be <= 4");
      return TestFunction::from_polynomial(random_polynomial(dim, family.max_degree, r, rng),
                                           Family::polynomial);
    }
    case Family::trigonometric: {
      const int m = std::max(1, family.terms);
      Mat w(m, dim);
      Vec amp(m), ph(m);
      for (int k = 0; k < m; ++k) {
        for (int i = 0; i < dim; ++i) w(k, i) = rng.uniform(-family.max_frequency, family.max_frequency);
        amp(k) = rng.uniform(-r, r);
        ph(k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
      return TestFunction::trigonometric(w, amp, ph);
    }
    case Family::gaussian_bump: {
      Vec c(dim);
      for (int i = 0; i < dim; ++i) c(i) = rng.uniform(-family.center_radius, family.center_radius);
      const double width = rng.uniform(family.min_width, family.max_width);
      return TestFunction::gaussian_bump(c, width, rng.uniform(0.5, 1.5) * r);
    }
    case Family::composite: break;
  }
  throw ContractViolation("sample_function: unsupported family " + to_string(family.kind));
}

std::vector<FunctionFamily> standard_families() {
  std::vector<FunctionFamily> out;
  for (Family k : {Family::linear, Family::quadratic, Family::polynomial, Family::trigonometric,
                   Family::gaussian_bump}) {
    FunctionFamily f;
    f.kind = k;
    f.max_degree = 4;
    out.push_back(f);
  }
  return out;
}

DerivativeCheck check_derivatives(const TestFunction& f, const std::vector<Vec>& points) {
  const int n = f.arity();
  DerivativeCheck out;
  auto rel = [](double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); };
  for (const Vec& x : points) {
    const double h = 1e-4 * (1.0 + x.norm());
    const Vec g = f.grad(x);
    const Mat hs = f.hess(x);
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      out.grad_error = std::max(out.grad_error, rel(g(i), (f.value(xp) - f.value(xm)) / (2 * h)));
      const Vec dg = (f.grad(xp) - f.grad(xm)) / (2 * h);
      for (int j = 0; j < n; ++j) out.hess_error = std::max(out.hess_error, rel(hs(j, i), dg(j)));
      if (f.has_third()) {
        const Tensor3 t = f.third(x);
        const Mat dh = (f.hess(xp) - f.hess(xm)) / (2 * h);
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) out.third_error = std::max(out.third_error, rel(t(j, k, i), dh(j, k)));
      }
    }
  }
  return out;
}

std::vector<Vec> sample_ball(int dim, double radius, int count, std::uint64_t seed) {
  CounterRng rng(seed, 0x62616c6cULL);
  std::vector<Vec> out;
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    Vec z(dim);
    for (int i = 0; i < dim; ++i) z(i) = rng.normal();
    const double nz = z.norm();
    const double rr = radius * std::pow(rng.uniform(), 1.0 / dim);
    out.push_back(nz > 0 ? Vec(z * (rr / nz)) : Vec(Vec::Zero(dim)));
  }
  return out;
}

}  // namespace hypocert
