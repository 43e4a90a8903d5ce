#include "hypocert/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace hypocert {

namespace {

void check_finite(const Vec& z) {
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (!std::isfinite(z(i)))
      throw PropagationError("non-finite state component " + std::to_string(i), static_cast<int>(i));
}

void check_finite_columns(const Mat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, c)))
        throw PropagationError("non-finite state component " + std::to_string(i), static_cast<int>(i));
}

}  // namespace

SdeSystem::SdeSystem(DiffusionOperator op, Mat noise_matrix) : op_(std::move(op)), noise_(std::move(noise_matrix)) {
  require(noise_.rows() == op_.dim(), "SdeSystem: noise matrix must have one row per state component");
  const Mat target = 2.0 * op_.diffusion();
  const double err = (noise_ * noise_.transpose() - target).cwiseAbs().maxCoeff();
  require(err <= 1e-10 * (1.0 + target.cwiseAbs().maxCoeff()),
          "SdeSystem: noise matrix must satisfy G G^T = 2 A");
}

SdeSystem::SdeSystem(DiffusionOperator op)
    : SdeSystem(op, linalg::psd_sqrt(2.0 * op.diffusion())) {}

Vec step_euler_maruyama(const SdeSystem& sys, const Vec& state, double dt, const Vec& noise_increment) {
  require(dt > 0, "step_euler_maruyama: dt must be positive");
  require(state.size() == sys.dim() && noise_increment.size() == sys.noise_dim(),
          "step_euler_maruyama: dimension mismatch");
  check_finite(state);
  Vec out = state + sys.op().drift(state) * dt + sys.noise_matrix() * noise_increment;
  check_finite(out);
  return out;
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::euler_maruyama: return "euler_maruyama";
    case Scheme::exact_linear: return "exact_linear";
    case Scheme::automatic: return "auto";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "euler_maruyama") return Scheme::euler_maruyama;
  if (s == "exact_linear") return Scheme::exact_linear;
  if (s == "auto") return Scheme::automatic;
  throw ContractViolation("unknown scheme '" + s + "' (expected euler_maruyama, exact_linear or auto)");
}

Stepper::Stepper(const SdeSystem& sys, double dt, Scheme scheme) : sys_(sys), dt_(dt), scheme_(scheme) {
  require(dt > 0 && std::isfinite(dt), "Stepper: dt must be positive");
  const auto& aff = sys.op().affine_drift();
  if (scheme_ == Scheme::automatic) scheme_ = aff ? Scheme::exact_linear : Scheme::euler_maruyama;
  if (scheme_ == Scheme::exact_linear) {
    require(aff.has_value(), "Stepper: exact_linear needs an affine drift");
    const Mat q = sys.noise_matrix() * sys.noise_matrix().transpose();
    exact_ = linalg::discretize_linear(aff->jacobian, aff->offset, q, dt);
    exact_factor_ = linalg::psd_sqrt(exact_->covariance);
  }
}

Vec Stepper::draw(CounterRng& rng) const {
  const Eigen::Index k = exact_ ? sys_.dim() : sys_.noise_dim();
  Vec xi(k);
  for (Eigen::Index i = 0; i < k; ++i) xi(i) = rng.normal();
  if (!exact_) xi *= std::sqrt(dt_);
  return xi;
}

void Stepper::apply(Mat& states, const Vec& xi) const {
  check_finite_columns(states);
  if (exact_) {
    const Vec kick = exact_->shift + exact_factor_ * xi;
    states = exact_->transition * states;
    states.colwise() += kick;
  } else {
    const Vec kick = sys_.noise_matrix() * xi;
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
      const Vec z = states.col(c);
      states.col(c) = z + sys_.op().drift(z) * dt_ + kick;
    }
  }
  check_finite_columns(states);
}

Vec Stepper::step(const Vec& state, CounterRng& rng) const {
  Mat m = state;
  apply(m, draw(rng));
  return m.col(0);
}

void Stepper::step_shared(Mat& states, CounterRng& rng) const { apply(states, draw(rng)); }

long steps_for(double t, double dt) {
  require(t >= 0 && dt > 0, "time and step must be nonnegative and positive");
  const double r = t / dt;
  const long k = std::lround(r);
  require(std::abs(r - static_cast<double>(k)) <= 1e-9 * std::max(1.0, r),
          "time " + std::to_string(t) + " is not a multiple of dt " + std::to_string(dt));
  return k;
}

Vec Ensemble::weights() const {
  return Vec::Constant(size(), 1.0 / static_cast<double>(size()));
}

std::uint64_t Ensemble::stream(Eigen::Index i) const {
  return streams.empty() ? static_cast<std::uint64_t>(i) : streams.at(static_cast<std::size_t>(i));
}

Vec Ensemble::mean() const { return particles.colwise().mean().transpose(); }

Mat Ensemble::covariance() const {
  const Mat c = particles.rowwise() - particles.colwise().mean();
  const double denom = std::max<double>(1.0, static_cast<double>(size()) - 1.0);
  return (c.transpose() * c) / denom;
}

Ensemble make_ensemble(const Mat& particles) {
  require(particles.rows() >= 1, "ensemble needs at least one particle");
  Ensemble e;
  e.particles = particles;
  return e;
}

Ensemble evolve_ensemble(const SdeSystem& sys, const Ensemble& ens, double t_end, double dt, std::uint64_t seed,
                         const EvolveOptions& opts) {
  require(ens.size() >= 1, "evolve_ensemble: empty ensemble");
  require(ens.dim() == sys.dim(), "evolve_ensemble: dimension mismatch");
  require(ens.streams.empty() || static_cast<Eigen::Index>(ens.streams.size()) == ens.size(),
          "evolve_ensemble: one stream id per particle");
  const long steps = steps_for(t_end, dt);
  Ensemble out = ens;
  out.seed = seed;
  out.dt = dt;
  out.time = ens.time + t_end;
  if (steps == 0) return out;
  const Stepper stepper(sys, dt, opts.scheme);

  const Eigen::Index n = ens.size();
  auto work = [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index i = lo; i < hi; ++i) {
      CounterRng rng(seed, ens.stream(i));
      Vec z = ens.particles.row(i).transpose();
      for (long s = 0; s < steps; ++s) z = stepper.step(z, rng);
      out.particles.row(i) = z.transpose();
    }
  };
  const int jobs = std::clamp<int>(opts.jobs, 1, static_cast<int>(std::min<Eigen::Index>(n, 256)));
  if (jobs == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int j = 0; j < jobs; ++j) {
    const Eigen::Index lo = n * j / jobs, hi = n * (j + 1) / jobs;
    pool.emplace_back([&, j, lo, hi] {
      try {
        work(lo, hi);
      } catch (...) {
        errors[static_cast<std::size_t>(j)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

CoupledRun run_coupled(const SdeSystem& sys, const Vec& z1, const Vec& z2, double t_end, double dt,
                       const MetricForm& s, std::uint64_t seed, const CoupledOptions& opts) {
  require(t_end > 0, "run_coupled: t_end must be positive");
  require(z1.size() == sys.dim() && z2.size() == sys.dim() && s.dim() == sys.dim(),
          "run_coupled: dimension mismatch");
  const long steps = steps_for(t_end, dt);
  const long stride = opts.record_stride > 0 ? opts.record_stride : std::max(1L, steps / 100);
  const Stepper stepper(sys, dt, opts.scheme);
  CounterRng rng(seed, opts.stream);

  Mat pair(sys.dim(), 2);
  pair.col(0) = z1;
  pair.col(1) = z2;
  CoupledRun run;
  run.metric = s.matrix();
  auto record = [&](long k) {
    run.times.push_back(static_cast<double>(k) * dt);
    run.differences.push_back(pair.col(0) - pair.col(1));
    run.dist_series.push_back(induced_distance(s, pair.col(0), pair.col(1)));
  };
  record(0);
  for (long k = 1; k <= steps; ++k) {
    stepper.step_shared(pair, rng);
    if (k % stride == 0 || k == steps) record(k);
  }
  return run;
}

GaussianMoments linear_oracle_moments(const Mat& j, const Mat& noise, const Vec& mean0, const Mat& cov0, double t,
                                      double rtol) {
  require(t >= 0, "linear_oracle_moments: t must be nonnegative");
  const Eigen::Index d = j.rows();
  require(j.cols() == d && noise.rows() == d && mean0.size() == d && cov0.rows() == d && cov0.cols() == d,
          "linear_oracle_moments: dimension mismatch");
  GaussianMoments out{linalg::expm(t * j) * mean0, cov0};
  if (t == 0) return out;
  const Mat q = noise * noise.transpose();
  auto f = [&](const Mat& c) -> Mat { return j * c + c * j.transpose() + q; };

  // Dormand-Prince 5(4) with standard step control.
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  Mat c = cov0;
  double time = 0.0;
  double h = std::min(t, 0.01 / (1.0 + j.norm()));
  const double atol = rtol * 1e-2;
  Mat k1 = f(c);
  for (int guard = 0; time < t && guard < 10000000; ++guard) {
    if (time + h > t) h = t - time;
    const Mat k2 = f(c + h * (a21 * k1));
    const Mat k3 = f(c + h * (a31 * k1 + a32 * k2));
    const Mat k4 = f(c + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Mat k5 = f(c + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Mat k6 = f(c + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Mat next = c + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Mat k7 = f(next);
    const Mat err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Mat scale = (atol + rtol * c.cwiseAbs().cwiseMax(next.cwiseAbs()).array()).matrix();
    const double en = std::sqrt((err.array() / scale.array()).square().mean());
    if (en <= 1.0) {
      time += h;
      c = next;
      k1 = k7;
    }
    const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= fac;
  }
  out.cov = linalg::symmetrize(c);
  return out;
}

Mat stationary_covariance(const Mat& j, const Mat& noise) {
  return linalg::symmetrize(linalg::solve_lyapunov(j, noise * noise.transpose()));
}

void write_ensemble_csv(std::ostream& os, const Ensemble& ens) {
  os.precision(17);
  os << "# seed=" << ens.seed << " dt=" << ens.dt << " t=" << ens.time << " n=" << ens.size() << "\n";
  for (Eigen::Index c = 0; c < ens.dim(); ++c) os << (c ? "," : "") << "z" << c;
  os << "\n";
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    for (Eigen::Index c = 0; c < ens.dim(); ++c) os << (c ? "," : "") << ens.particles(i, c);
    os << "\n";
  }
}

Ensemble read_ensemble_csv(std::istream& is) {
  Ensemble e;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "seed") e.seed = std::stoull(val);
        else if (key == "dt") e.dt = std::stod(val);
        else if (key == "t") e.time = std::stod(val);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (!line.empty() && (std::isalpha(static_cast<unsigned char>(line[0])))) continue;
    }
    std::vector<double> row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ContractViolation("ensemble csv: ragged row " + std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "ensemble csv: no particles");
  e.particles.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      e.particles(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return e;
}

}  // namespace hypocert
