#include "hypocert/lyapunov.hpp"

#include "hypocert/linalg.hpp"

#include <cmath>
#include <limits>

namespace hypocert {

LyapunovCandidate LyapunovCandidate::radial_quadratic(const Mat& p) {
  require(linalg::is_symmetric(p) && linalg::min_eigenvalue(p) > 0.0,
          "radial quadratic candidate needs P symmetric positive definite");
  const int n = static_cast<int>(p.rows());
  return {TestFunction::from_polynomial(Polynomial::quadratic(2.0 * p, Vec::Zero(n), 1.0),
                                        Family::quadratic),
          std::nullopt, Kind::radial_quadratic};
}

LyapunovCandidate LyapunovCandidate::standard(int dim) {
  return radial_quadratic(Mat::Identity(dim, dim));
}

LyapunovCandidate LyapunovCandidate::constant_one(int dim) {
  return {TestFunction::constant(dim, 1.0), std::nullopt, Kind::constant_one};
}

LyapunovCandidate LyapunovCandidate::custom(TestFunction u) {
  return {std::move(u), std::nullopt, Kind::other};
}

LyapunovResult check_assumption(const LyapunovCandidate& cand, const DiffusionOperator& op,
                                const MetricForm& s, const std::vector<Vec>& sample) {
  require(!sample.empty(), "check_assumption: empty sample");
  require(cand.u.arity() == op.dim() && s.dim() == op.dim(), "check_assumption: dimension mismatch");
  LyapunovResult r;
  r.sample_size = static_cast<int>(sample.size());
  for (const Vec& z : sample) {
    const double u = cand.u.value(z);
    if (!(u >= 1.0)) {
      if (r.u_at_least_one) r.witness = z;
      r.u_at_least_one = false;
      continue;
    }
    const double ratio = std::max({t_form(s, cand.u, z) / u, apply_operator(op, cand.u, z) / u, 0.0});
    if (!std::isfinite(ratio)) r.c_finite = false;
    else r.c_hat = std::max(r.c_hat, ratio);
  }
  switch (cand.kind) {
    case LyapunovCandidate::Kind::radial_quadratic:
      r.sublevel_compact = true;
      r.note = "sampled, not global; sublevel compactness from radial quadratic family";
      break;
    case LyapunovCandidate::Kind::constant_one:
      // Registered trivial candidate: accepted, though its sublevel sets are not compact.
      r.sublevel_compact = true;
      r.note = "sampled, not global; constant candidate accepted as trivial";
      break;
    case LyapunovCandidate::Kind::other:
      r.sublevel_compact = false;
      r.note = "sampled, not global; candidate not in a registered radially unbounded family";
      break;
  }
  if (cand.claimed_c) r.claimed_c_holds = r.c_hat <= *cand.claimed_c;
  r.passed = r.u_at_least_one && r.c_finite && r.sublevel_compact && r.claimed_c_holds;
  return r;
}

std::vector<Vec> halton_ball(int dim, double radius, int count) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                   59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
  require(dim >= 1 && dim + 1 <= static_cast<int>(std::size(primes)), "halton_ball: dimension too large");
  auto radical = [](int i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
      f /= base;
      r += f * (i % base);
      i /= base;
    }
    return r;
  };
  // Origin first, then Halton points of the cube [-1, 1]^dim kept when inside the unit ball.
  std::vector<Vec> out;
  out.reserve(count);
  if (count > 0) out.push_back(Vec::Zero(dim));
  for (int k = 1; static_cast<int>(out.size()) < count; ++k) {
    Vec z(dim);
    for (int i = 0; i < dim; ++i) z(i) = 2.0 * radical(k, primes[i]) - 1.0;
    if (z.squaredNorm() <= 1.0) out.push_back(radius * z);
  }
  return out;
}

}  // namespace hypocert
