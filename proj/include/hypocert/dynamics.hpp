#pragma once

#include "hypocert/linalg.hpp"
#include "hypocert/operator_core.hpp"
#include "hypocert/rng.hpp"
#include "hypocert/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hypocert {

/// dZ = b(Z) dt + G dB with G G^T = 2 A, so that the generator is L.
class SdeSystem {
 public:
  SdeSystem(DiffusionOperator op, Mat noise_matrix);
  /// Uses G = (2 A)^{1/2}.
  explicit SdeSystem(DiffusionOperator op);

  const DiffusionOperator& op() const { return op_; }
  const Mat& noise_matrix() const { return noise_; }
  int dim() const { return op_.dim(); }
  int noise_dim() const { return static_cast<int>(noise_.cols()); }

 private:
  DiffusionOperator op_;
  Mat noise_;
};

Vec step_euler_maruyama(const SdeSystem& sys, const Vec& state, double dt, const Vec& noise_increment);

enum class Scheme { euler_maruyama, exact_linear, automatic };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Fixed-step propagator. `exact_linear` samples the Gaussian transition of an affine drift
/// exactly; `automatic` picks it whenever the drift is affine.
class Stepper {
 public:
  Stepper(const SdeSystem& sys, double dt, Scheme scheme = Scheme::euler_maruyama);

  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }
  const SdeSystem& system() const { return sys_; }

  /// Advances one state with fresh draws from `rng`.
  Vec step(const Vec& state, CounterRng& rng) const;
  /// Advances every column with the same draw (synchronous coupling / common random numbers).
  void step_shared(Mat& states, CounterRng& rng) const;

 private:
  Vec draw(CounterRng& rng) const;
  void apply(Mat& states, const Vec& xi) const;

  SdeSystem sys_;
  double dt_;
  Scheme scheme_;
  std::optional<linalg::LinearTransition> exact_;
  Mat exact_factor_;
};

/// Number of steps of size dt covering [0, t]; t must be a multiple of dt.
long steps_for(double t, double dt);

struct Ensemble {
  Mat particles;  // N x d
  std::uint64_t seed = 0;
  /// Substream id per particle; empty means particle i uses stream i.
  std::vector<std::uint64_t> streams;
  double dt = 0.0;
  double time = 0.0;

  Eigen::Index size() const { return particles.rows(); }
  Eigen::Index dim() const { return particles.cols(); }
  Vec weights() const;
  std::uint64_t stream(Eigen::Index i) const;
  Vec mean() const;
  Mat covariance() const;
};

Ensemble make_ensemble(const Mat& particles);

struct EvolveOptions {
  Scheme scheme = Scheme::euler_maruyama;
  int jobs = 1;
};

Ensemble evolve_ensemble(const SdeSystem& sys, const Ensemble& ens, double t_end, double dt, std::uint64_t seed,
                         const EvolveOptions& opts = {});

struct CoupledRun {
  std::vector<double> times;
  std::vector<double> dist_series;
  std::vector<Vec> differences;
  Mat metric;
};

struct CoupledOptions {
  Scheme scheme = Scheme::euler_maruyama;
  /// Record every this many steps (the final time is always recorded); 0 picks about 100 records.
  long record_stride = 0;
  std::uint64_t stream = 0;
};

CoupledRun run_coupled(const SdeSystem& sys, const Vec& z1, const Vec& z2, double t_end, double dt,
                       const MetricForm& s, std::uint64_t seed, const CoupledOptions& opts = {});

struct GaussianMoments {
  Vec mean;
  Mat cov;
};

/// Mean and covariance of dZ = J Z dt + G dB at time t: the mean through the matrix exponential,
/// the covariance by adaptive Dormand-Prince integration of C' = J C + C J^T + G G^T.
GaussianMoments linear_oracle_moments(const Mat& j, const Mat& noise, const Vec& mean0, const Mat& cov0, double t,
                                      double rtol = 1e-10);

/// Solution of J C + C J^T + G G^T = 0.
Mat stationary_covariance(const Mat& j, const Mat& noise);

void write_ensemble_csv(std::ostream& os, const Ensemble& ens);
Ensemble read_ensemble_csv(std::istream& is);

}  // namespace hypocert
