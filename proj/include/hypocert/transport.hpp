#pragma once

#include "hypocert/dynamics.hpp"
#include "hypocert/operator_core.hpp"
#include "hypocert/types.hpp"

#include <vector>

namespace hypocert {

/// C_ij = d_S(x_i, y_j)^2 for the rows of X and Y.
Mat cost_matrix(const Mat& x, const Mat& y, const MetricForm& s);

struct Assignment {
  std::vector<int> match;  // row i is paired with column match[i]
  double cost = 0.0;       // sum of the matched entries
};

/// Minimum-cost perfect matching on a square matrix (shortest augmenting paths with potentials).
Assignment solve_assignment(const Mat& cost);

struct ExactTransport {
  double w2 = 0.0;
  std::vector<int> match;
};

ExactTransport w2_exact_plan(const Mat& x, const Mat& y, const MetricForm& s);
double w2_exact(const Mat& x, const Mat& y, const MetricForm& s);
double w2_exact(const Ensemble& x, const Ensemble& y, const MetricForm& s);

struct EntropicOptions {
  int max_iters = 20000;
  double marginal_tol = 1e-8;
  /// Anneal eps down from this multiple of the median cost; 0 disables annealing.
  double anneal_from = 1.0;
};

struct EntropicResult {
  /// sqrt of the transport cost of the regularized optimal plan.
  double value = 0.0;
  double transport_cost = 0.0;
  double marginal_violation = 0.0;
  int iterations = 0;
  bool converged = false;
  /// eps * log N: the cost gap to the exact optimum is at most this.
  double bias_bound = 0.0;
};

EntropicResult w2_entropic(const Mat& x, const Mat& y, const MetricForm& s, double eps,
                           const EntropicOptions& opts = {});
EntropicResult w2_entropic(const Ensemble& x, const Ensemble& y, const MetricForm& s, double eps,
                           const EntropicOptions& opts = {});

double median_cost(const Mat& cost);

/// W2 between N(m1, c1) and N(m2, c2) in the Euclidean metric.
double bures_wasserstein(const Vec& m1, const Mat& c1, const Vec& m2, const Mat& c2);

}  // namespace hypocert
