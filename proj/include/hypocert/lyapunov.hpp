#pragma once

#include "hypocert/operator_core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hypocert {

/// Candidate U for the stochastic-completeness assumption:
/// U >= 1, T(U) <= C U, L U <= C U, compact sublevel sets.
struct LyapunovCandidate {
  enum class Kind { radial_quadratic, constant_one, other };

  TestFunction u;
  std::optional<double> claimed_c;
  Kind kind = Kind::other;

  /// U(z) = 1 + z^T P z with P positive definite; radially unbounded.
  static LyapunovCandidate radial_quadratic(const Mat& p);
  /// U(z) = 1 + |z|^2.
  static LyapunovCandidate standard(int dim);
  /// U = 1; registered as the trivial candidate.
  static LyapunovCandidate constant_one(int dim);
  static LyapunovCandidate custom(TestFunction u);
};

struct LyapunovResult {
  double c_hat = 0.0;
  bool u_at_least_one = true;
  bool c_finite = true;
  bool sublevel_compact = false;  // structural: registered family membership
  bool claimed_c_holds = true;
  bool passed = false;
  std::optional<Vec> witness;     // first point where U < 1
  std::string note;
  int sample_size = 0;
};

LyapunovResult check_assumption(const LyapunovCandidate& cand, const DiffusionOperator& op,
                                const MetricForm& s, const std::vector<Vec>& sample);

/// Halton points of the cube kept inside the ball of radius r, origin first.
std::vector<Vec> halton_ball(int dim, double radius, int count);

}  // namespace hypocert
