#include "hypocert/verify_harness.hpp"

#include "hypocert/gaussian.hpp"
#include "hypocert/linalg.hpp"
#include "hypocert/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace hypocert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

/// JSON cannot hold inf/nan; store them as strings instead of silently writing null.
nlohmann::json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

std::vector<double> sorted_times(std::vector<double> times) {
  require(!times.empty(), "at least one time is required");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(times[i] >= 0 && std::isfinite(times[i]), "times must be finite and nonnegative");
    if (i) require(times[i] > times[i - 1], "times must be strictly increasing");
  }
  return times;
}

template <typename F>
void parallel_for(int count, int jobs, F&& body) {
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&, j] {
      try {
        for (int i = j; i < count; i += jobs) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(j)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Polynomial require_polynomial(const TestFunction& f, const std::string& who) {
  if (!f.polynomial()) throw UnsupportedFunction(who + ": exact propagation needs a polynomial test function");
  return *f.polynomial();
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::degenerate: return "degenerate";
  }
  return "?";
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["check"] = r.check_name;
  j["verdict"] = to_string(r.verdict);
  j["margin"] = num(r.margin);
  j["tolerance"] = num(r.tolerance);
  j["provenance"] = r.provenance;
  j["witness"] = r.witness;
  j["notes"] = r.notes;
  nlohmann::json series = nlohmann::json::array();
  for (const auto& p : r.series)
    series.push_back({{"time", num(p.time)}, {"value", num(p.value)}, {"stderr", num(p.stderr_)},
                      {"seed", p.seed}, {"label", p.label}});
  j["series"] = series;
  return j;
}

// ---------------------------------------------------------------------------------------------

VerificationReport check_t2_inequality(const DiffusionOperator& op, const MetricForm& s, double rho, int trials,
                                       std::uint64_t seed, const T2Options& opts) {
  require(trials >= 1, "check_t2_inequality: trials must be positive");
  require(op.dim() == s.dim(), "check_t2_inequality: dimension mismatch");
  require(!opts.families.empty(), "check_t2_inequality: no function families");
  const int d = op.dim();
  const Vec center = opts.center.value_or(Vec::Zero(d));

  VerificationReport rep;
  rep.check_name = "t2";
  rep.tolerance = opts.tolerance;
  rep.margin = kInf;
  std::map<std::string, double> per_family;
  for (int t = 0; t < trials; ++t) {
    const FunctionFamily& fam = opts.families[static_cast<std::size_t>(t) % opts.families.size()];
    const std::uint64_t key = stream_key(seed, static_cast<std::uint64_t>(t));
    const TestFunction f = sample_function(fam, d, key);
    const Vec x = center + sample_ball(d, opts.radius, 1, key ^ 0x5a5a5a5aULL).front();
    const double t2 = t2_form(op, s, f, x);
    const double tv = t_form(s, f, x);
    if (opts.observer) opts.observer(f, x, t2, tv);
    const double slack = t2 - rho * tv;
    const std::string name = to_string(fam.kind);
    per_family[name] = per_family.count(name) ? std::min(per_family[name], slack) : slack;
    if (slack < rep.margin) {
      rep.margin = slack;
      rep.witness = {{"trial", t}, {"family", name}, {"point", vec_json(x)}, {"t2", t2}, {"t", tv},
                     {"slack", slack}};
    }
  }
  rep.verdict = rep.margin >= -opts.tolerance ? Verdict::pass : Verdict::fail;
  rep.provenance = {{"operator", op.name()}, {"rho", rho}, {"trials", trials}, {"seed", seed},
                    {"radius", opts.radius}, {"center", vec_json(center)}, {"metric", mat_json(s.matrix())}};
  if (rep.verdict == Verdict::pass) {
    rep.provenance["worst_trial"] = rep.witness;
    rep.witness = nullptr;
  }
  nlohmann::json fam_json;
  for (const auto& [k, v] : per_family) fam_json[k] = v;
  rep.provenance["min_slack_by_family"] = fam_json;
  rep.notes.push_back("polynomial and trigonometric families lack compact support; bumps cover that case");
  return rep;
}

// ---------------------------------------------------------------------------------------------

VerificationReport check_gradient_bound(const SdeSystem& sys, const MetricForm& s, double k,
                                        const std::vector<TestFunction>& fns, const std::vector<Vec>& points,
                                        const std::vector<double>& times_in, int n_paths, std::uint64_t seed,
                                        const GradientOptions& opts) {
  require(!fns.empty() && !points.empty(), "check_gradient_bound: need functions and points");
  require(n_paths >= 2, "check_gradient_bound: need at least two paths");
  require(opts.fd_step > 0, "check_gradient_bound: finite-difference step must be positive");
  const int d = sys.dim();
  require(s.dim() == d, "check_gradient_bound: dimension mismatch");
  for (const auto& f : fns) require(f.arity() == d, "check_gradient_bound: function arity mismatch");
  const std::vector<double> times = sorted_times(times_in);
  const auto nt = times.size(), nf = fns.size();
  std::vector<long> steps;
  for (double t : times) steps.push_back(steps_for(t, opts.dt));

  const Stepper stepper(sys, opts.dt, opts.scheme);
  const Mat& sig = s.matrix();
  const auto& aff = sys.op().affine_drift();

  VerificationReport rep;
  rep.check_name = "gradient_bound";
  rep.tolerance = opts.z_score;
  rep.margin = kInf;
  bool any_fail = false, any_inconclusive = false;
  double jac_err_exp = 0.0, jac_err_discrete = 0.0;

  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec& x0 = points[p];
    require(x0.size() == d, "check_gradient_bound: point dimension mismatch");
    const double h = opts.fd_step * (1.0 + x0.norm());
    // Accumulators per (time, function).
    std::vector<Vec> gsum(nt * nf, Vec::Zero(d));
    std::vector<Mat> gsq(nt * nf, Mat::Zero(d, d));
    std::vector<double> tsum(nt * nf, 0.0), tsq(nt * nf, 0.0);
    const std::uint64_t point_key = stream_key(seed, p);

    for (int i = 0; i < n_paths; ++i) {
      CounterRng rng(point_key, static_cast<std::uint64_t>(i));
      Mat z(d, 2 * d + 1);
      z.col(0) = x0;
      for (int c = 0; c < d; ++c) {
        z.col(1 + 2 * c) = x0 + h * Vec::Unit(d, c);
        z.col(2 + 2 * c) = x0 - h * Vec::Unit(d, c);
      }
      long done = 0;
      for (std::size_t ti = 0; ti < nt; ++ti) {
        for (; done < steps[ti]; ++done) stepper.step_shared(z, rng);
        if (i == 0 && aff && times[ti] > 0) {
          Mat jac(d, d);
          for (int c = 0; c < d; ++c) jac.col(c) = (z.col(1 + 2 * c) - z.col(2 + 2 * c)) / (2 * h);
          const Mat ex = linalg::expm(times[ti] * aff->jacobian);
          jac_err_exp = std::max(jac_err_exp, (jac - ex).cwiseAbs().maxCoeff() / (1.0 + ex.cwiseAbs().maxCoeff()));
          Mat disc = Mat::Identity(d, d);
          if (stepper.scheme() == Scheme::euler_maruyama) {
            const Mat one = Mat::Identity(d, d) + opts.dt * aff->jacobian;
            for (long st = 0; st < steps[ti]; ++st) disc = one * disc;
          } else {
            disc = ex;
          }
          jac_err_discrete =
              std::max(jac_err_discrete, (jac - disc).cwiseAbs().maxCoeff() / (1.0 + disc.cwiseAbs().maxCoeff()));
        }
        for (std::size_t fi = 0; fi < nf; ++fi) {
          const TestFunction& f = fns[fi];
          const std::size_t slot = ti * nf + fi;
          Vec g(d);
          if (times[ti] == 0) {
            g = f.grad(x0);
          } else {
            for (int c = 0; c < d; ++c) g(c) = (f.value(z.col(1 + 2 * c)) - f.value(z.col(2 + 2 * c))) / (2 * h);
          }
          const double tv = t_form(s, f, z.col(0));
          gsum[slot] += g;
          gsq[slot] += g * g.transpose();
          tsum[slot] += tv;
          tsq[slot] += tv * tv;
        }
      }
    }

    const double n = n_paths;
    for (std::size_t ti = 0; ti < nt; ++ti) {
      for (std::size_t fi = 0; fi < nf; ++fi) {
        const std::size_t slot = ti * nf + fi;
        const Vec gbar = gsum[slot] / n;
        const Mat gcov = (gsq[slot] - n * gbar * gbar.transpose()) / (n - 1);
        // ghat^T S ghat over-estimates the square of the mean by tr(S Cov)/N.
        const double lhs = std::max(0.0, gbar.dot(sig * gbar) - (sig * gcov).trace() / n);
        const double se_l = std::sqrt(std::max(0.0, 4.0 * gbar.dot(sig * gcov * sig * gbar) / n));
        const double tmean = tsum[slot] / n;
        const double tvar = std::max(0.0, (tsq[slot] - n * tmean * tmean) / (n - 1));
        const double growth = std::exp(2.0 * k * times[ti]);
        const double rhs = growth * tmean;
        const double se_r = growth * std::sqrt(tvar / n);
        const double se = std::hypot(se_l, se_r);
        double ratio, rel_se, margin;
        if (times[ti] == 0) {
          // P_0 is the identity: both sides are T(f)(x) exactly.
          ratio = rhs > 0 ? lhs / rhs : 0.0;
          rel_se = 0.0;
          margin = rhs > 0 ? (rhs - lhs) / rhs : rhs - lhs;
        } else if (rhs <= 1e-300) {
          ratio = 0.0;
          rel_se = 0.0;
          margin = -lhs;
        } else {
          ratio = lhs / rhs;
          rel_se = se / rhs;
          margin = (rhs + opts.z_score * se - lhs) / rhs;
        }
        const bool inconclusive = rel_se > opts.inconclusive_rel_se;
        if (inconclusive) any_inconclusive = true;
        else if (margin < -1e-12) any_fail = true;
        if (!inconclusive && margin < rep.margin) {
          rep.margin = margin;
          rep.witness = {{"point", vec_json(x0)}, {"function", static_cast<int>(fi)},
                         {"family", to_string(fns[fi].family())}, {"time", times[ti]}, {"lhs", lhs},
                         {"rhs", rhs}, {"stderr", se}};
        }
        rep.series.push_back({times[ti], ratio, rel_se, seed,
                              "f" + std::to_string(fi) + "/x" + std::to_string(p)});
      }
    }
  }
  if (!std::isfinite(rep.margin)) rep.margin = 0.0;
  rep.verdict = any_fail ? Verdict::fail : any_inconclusive ? Verdict::inconclusive : Verdict::pass;
  rep.provenance = {{"operator", sys.op().name()}, {"K", k}, {"paths", n_paths}, {"seed", seed},
                    {"dt", opts.dt}, {"scheme", to_string(stepper.scheme())}, {"fd_step", opts.fd_step},
                    {"times", times}, {"functions", static_cast<int>(nf)},
                    {"points", static_cast<int>(points.size())}};
  if (aff) {
    rep.provenance["pathwise_jacobian_error_vs_expm"] = jac_err_exp;
    rep.provenance["pathwise_jacobian_error_vs_discrete_flow"] = jac_err_discrete;
    if (stepper.scheme() == Scheme::exact_linear && jac_err_exp > 1e-8) {
      rep.verdict = Verdict::fail;
      rep.notes.push_back("pathwise Jacobian disagrees with the matrix exponential beyond 1e-8");
    }
  }
  rep.notes.push_back("series value is T(P_t f)/(e^{2Kt} P_t T(f)); stderr column is relative");
  return rep;
}

// ---------------------------------------------------------------------------------------------

VerificationReport check_wasserstein_contraction(const SdeSystem& sys, const MetricForm& s, double k,
                                                 const Ensemble& mu0, const Ensemble& nu0,
                                                 const std::vector<double>& times_in, std::uint64_t seed,
                                                 const WassersteinOptions& opts) {
  require(mu0.size() == nu0.size(), "check_wasserstein_contraction: ensembles must have equal size");
  require(mu0.dim() == sys.dim() && nu0.dim() == sys.dim() && s.dim() == sys.dim(),
          "check_wasserstein_contraction: dimension mismatch");
  require(opts.replicates >= 2, "check_wasserstein_contraction: need at least two replicates");
  const std::vector<double> times = sorted_times(times_in);
  const Eigen::Index n = mu0.size();
  const int d = sys.dim();
  const Stepper stepper(sys, opts.dt, opts.scheme);
  std::vector<long> steps;
  for (double t : times) steps.push_back(steps_for(t, opts.dt));

  VerificationReport rep;
  rep.check_name = opts.name;
  rep.tolerance = opts.z_score;
  const ExactTransport w0 = w2_exact_plan(mu0.particles, nu0.particles, s);
  rep.provenance = {{"operator", sys.op().name()}, {"K", k}, {"N", n}, {"seed", seed}, {"dt", opts.dt},
                    {"scheme", to_string(stepper.scheme())},
                    {"coupling", opts.coupling == Coupling::synchronous ? "synchronous" : "independent"},
                    {"replicates", opts.replicates}, {"times", times}, {"w2_initial", w0.w2}};
  if (w0.w2 < 1e-12) {
    rep.verdict = Verdict::pass;
    rep.margin = 0.0;
    rep.notes.push_back("initial measures coincide; ratios are 0/0 and the check is trivial");
    for (double t : times) rep.series.push_back({t, 0.0, 0.0, seed, "ratio"});
    return rep;
  }

  const auto nt = times.size();
  const auto reps = static_cast<std::size_t>(opts.replicates);
  std::vector<std::vector<double>> ratio(nt, std::vector<double>(reps)), bound(nt, std::vector<double>(reps));
  parallel_for(opts.replicates, opts.jobs, [&](int r) {
    const std::uint64_t rep_key = stream_key(seed, static_cast<std::uint64_t>(r));
    std::vector<Mat> xs(nt, Mat(n, d)), ys(nt, Mat(n, d));
    for (Eigen::Index i = 0; i < n; ++i) {
      Mat pair(d, 2);
      pair.col(0) = mu0.particles.row(i).transpose();
      pair.col(1) = nu0.particles.row(w0.match[static_cast<std::size_t>(i)]).transpose();
      CounterRng rng_a(rep_key, mu0.stream(i));
      CounterRng rng_b(rep_key, static_cast<std::uint64_t>(n) + mu0.stream(i));
      long done = 0;
      for (std::size_t ti = 0; ti < nt; ++ti) {
        for (; done < steps[ti]; ++done) {
          if (opts.coupling == Coupling::synchronous) {
            stepper.step_shared(pair, rng_a);
          } else {
            pair.col(0) = stepper.step(pair.col(0), rng_a);
            pair.col(1) = stepper.step(pair.col(1), rng_b);
          }
        }
        xs[ti].row(i) = pair.col(0).transpose();
        ys[ti].row(i) = pair.col(1).transpose();
      }
    }
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const double scale = std::exp(k * times[ti]) * w0.w2;
      ratio[ti][static_cast<std::size_t>(r)] = w2_exact(xs[ti], ys[ti], s) / scale;
      double coupled = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dd = induced_distance(s, xs[ti].row(i).transpose(), ys[ti].row(i).transpose());
        coupled += dd * dd;
      }
      bound[ti][static_cast<std::size_t>(r)] = std::sqrt(coupled / static_cast<double>(n)) / scale;
    }
  });

  bool any_fail = false, any_inconclusive = false;
  rep.margin = kInf;
  for (std::size_t ti = 0; ti < nt; ++ti) {
    auto stats = [&](const std::vector<double>& v) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size() - 1);
      return std::pair{m, std::sqrt(var / static_cast<double>(v.size()))};
    };
    const auto [m, se] = stats(ratio[ti]);
    const auto [mb, seb] = stats(bound[ti]);
    const double margin = 1.0 + opts.z_score * se + 1e-9 - m;
    if (se > opts.inconclusive_rel_se) any_inconclusive = true;
    else if (margin < 0) any_fail = true;
    if (margin < rep.margin) {
      rep.margin = margin;
      rep.witness = {{"time", times[ti]}, {"mean_ratio", m}, {"stderr", se}};
    }
    rep.series.push_back({times[ti], m, se, seed, "ratio"});
    rep.series.push_back({times[ti], mb, seb, seed, "coupling_bound"});
  }
  rep.verdict = any_fail ? Verdict::fail : any_inconclusive ? Verdict::inconclusive : Verdict::pass;
  rep.notes.push_back("ratio is W2(t) / (e^{Kt} W2(0)); coupling_bound is the root-mean-square coupled distance "
                      "on the same scale and upper-bounds the ratio");
  return rep;
}

VerificationReport check_invariant_convergence(const SdeSystem& sys, const MetricForm& s, double k,
                                               const Ensemble& nu0, const std::vector<double>& times,
                                               std::uint64_t seed, WassersteinOptions opts) {
  const auto& aff = sys.op().affine_drift();
  if (!aff) throw UnsupportedFunction("check_invariant_convergence: the invariant law is known only for affine drift");
  const Vec mean = -aff->jacobian.fullPivLu().solve(aff->offset);
  const Mat cov = stationary_covariance(aff->jacobian, sys.noise_matrix());
  const Mat root = linalg::psd_sqrt(cov);
  CounterRng rng(seed, 0x696e76ULL);
  Mat pts(nu0.size(), nu0.dim());
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Vec w(nu0.dim());
    for (Eigen::Index c = 0; c < w.size(); ++c) w(c) = rng.normal();
    pts.row(i) = (mean + root * w).transpose();
  }
  opts.name = "invariant_convergence";
  VerificationReport rep = check_wasserstein_contraction(sys, s, k, make_ensemble(pts), nu0, times, seed, opts);
  rep.provenance["invariant_mean"] = vec_json(mean);
  rep.provenance["invariant_covariance"] = mat_json(cov);
  rep.notes.push_back("mu is sampled from the exact invariant Gaussian, so P_t* mu has the same law");
  return rep;
}

// ---------------------------------------------------------------------------------------------

GaussianMoments invariant_gaussian(const kfp::PotentialSpec& pot) {
  if (!pot.quadratic_hessian)
    throw UnsupportedFunction("invariant measure is known in closed form only for quadratic potentials");
  const int n = pot.n;
  GaussianMoments g{Vec::Zero(2 * n), Mat::Zero(2 * n, 2 * n)};
  g.cov.topLeftCorner(n, n) = linalg::symmetrize(pot.quadratic_hessian->inverse());
  g.cov.bottomRightCorner(n, n) = Mat::Identity(n, n);
  return g;
}

VerificationReport check_poincare(const kfp::PotentialSpec& pot, const MetricForm& s, double a_gamma, double k,
                                  const std::vector<TestFunction>& fns, const PoincareOptions& opts) {
  require(k > 0 && a_gamma > 0, "check_poincare: constants must be positive");
  const GaussianMoments mu = invariant_gaussian(pot);
  const Mat& sig = s.matrix();
  require(s.dim() == 2 * pot.n, "check_poincare: dimension mismatch");

  VerificationReport rep;
  rep.check_name = "poincare";
  rep.tolerance = opts.tolerance;
  rep.margin = kInf;
  double quad_err = 0.0;
  for (std::size_t i = 0; i < fns.size(); ++i) {
    const TestFunction& f = fns[i];
    require(f.arity() == 2 * pot.n, "check_poincare: function arity mismatch");
    auto tf = [&](const Vec& z) { return t_form(s, f, z); };
    auto fv = [&](const Vec& z) { return f.value(z); };
    auto f2 = [&](const Vec& z) { return f.value(z) * f.value(z); };
    double var, it;
    if (f.polynomial()) {
      const Polynomial& p = *f.polynomial();
      var = gaussian::variance(p, mu.mean, mu.cov);
      it = gaussian::expectation(gaussian::metric_square(p, sig), mu.mean, mu.cov);
      const int q = std::max(opts.quadrature_nodes, p.degree() + 1);
      const double m1 = gaussian::quadrature(fv, mu.mean, mu.cov, q);
      const double var_q = gaussian::quadrature(f2, mu.mean, mu.cov, q) - m1 * m1;
      const double it_q = gaussian::quadrature(tf, mu.mean, mu.cov, q);
      quad_err = std::max({quad_err, std::abs(var - var_q) / (1.0 + std::abs(var)),
                           std::abs(it - it_q) / (1.0 + std::abs(it))});
    } else {
      const int q = opts.nonpolynomial_nodes;
      const double m1 = gaussian::quadrature(fv, mu.mean, mu.cov, q);
      var = gaussian::quadrature(f2, mu.mean, mu.cov, q) - m1 * m1;
      it = gaussian::quadrature(tf, mu.mean, mu.cov, q);
    }
    const double bound = a_gamma / k * it;
    const double margin = (bound - var) / (1.0 + std::abs(var));
    rep.series.push_back({0.0, var, 0.0, 0, "variance/f" + std::to_string(i)});
    rep.series.push_back({0.0, bound, 0.0, 0, "bound/f" + std::to_string(i)});
    if (margin < rep.margin) {
      rep.margin = margin;
      rep.witness = {{"function", static_cast<int>(i)}, {"family", to_string(f.family())}, {"variance", var},
                     {"bound", bound}};
    }
  }
  if (fns.empty()) rep.margin = 0.0;
  rep.verdict = rep.margin >= -opts.tolerance ? Verdict::pass : Verdict::fail;
  rep.provenance = {{"a_gamma", a_gamma}, {"K", k}, {"functions", static_cast<int>(fns.size())},
                    {"quadrature_nodes", opts.quadrature_nodes}, {"moment_quadrature_error", quad_err},
                    {"invariant_covariance", mat_json(mu.cov)}};
  if (quad_err > 1e-10) {
    rep.verdict = Verdict::fail;
    rep.notes.push_back("exact Gaussian moments and quadrature disagree beyond 1e-10");
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------

H1Params make_h1_params(double rho, double a_gamma, double b_weight, double k2) {
  require(rho > 0 && a_gamma > 0, "make_h1_params: rho and a_gamma must be positive");
  H1Params p;
  p.k1 = rho;
  p.k2 = k2;
  p.b_weight = b_weight;
  p.c_poincare = a_gamma / rho;
  p.c_prime = std::min({2.0 * rho / (1.0 + b_weight * p.c_poincare), 2.0 * p.k1, 2.0 / p.c_poincare});
  return p;
}

VerificationReport check_h1_decay(const kfp::PotentialSpec& pot, const MetricForm& s, const H1Params& params,
                                  const TestFunction& f, const std::vector<double>& times_in,
                                  const H1Options& opts) {
  const GaussianMoments mu = invariant_gaussian(pot);
  const std::vector<double> times = sorted_times(times_in);
  const DiffusionOperator op = kfp::build_operator(pot);
  const Mat& j = op.affine_drift()->jacobian;
  const Mat q = 2.0 * op.diffusion();
  const Mat& sig = s.matrix();
  const double b = params.b_weight;

  VerificationReport rep;
  rep.check_name = "h1";
  rep.tolerance = opts.exact_tolerance;
  Polynomial p = require_polynomial(f, "check_h1_decay");
  require(p.arity() == 2 * pot.n, "check_h1_decay: function arity mismatch");
  const double mean = gaussian::expectation(p, mu.mean, mu.cov);
  if (std::abs(mean) > 1e-14) {
    p -= Polynomial::constant(p.arity(), mean);
    rep.notes.push_back("test function centred against the invariant measure (mean " + std::to_string(mean) + ")");
  }

  auto phi_exact = [&](const Polynomial& pf) {
    return gaussian::expectation(gaussian::metric_square(pf, sig), mu.mean, mu.cov) +
           b * gaussian::expectation(pf * pf, mu.mean, mu.cov);
  };
  const double phi0 = phi_exact(p);
  rep.provenance = {{"k1", params.k1}, {"k2", params.k2}, {"b_weight", b}, {"c_poincare", params.c_poincare},
                    {"c_prime", params.c_prime}, {"times", times}, {"phi0", phi0},
                    {"monte_carlo", opts.monte_carlo}};
  const bool degenerate = !(b > params.k2);
  if (phi0 <= 1e-300) {
    rep.verdict = degenerate ? Verdict::degenerate : Verdict::pass;
    rep.margin = 0.0;
    rep.notes.push_back("Phi vanishes identically");
    for (double t : times) rep.series.push_back({t, 0.0, 0.0, 0, "exact"});
    return rep;
  }

  rep.margin = kInf;
  bool mc_fail = false;
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const double t = times[ti];
    const linalg::LinearTransition tr = linalg::discretize_linear(j, Vec::Zero(j.rows()), q, t);
    const Polynomial pf = gaussian::propagate(p, tr);
    const double ratio = phi_exact(pf) * std::exp(params.c_prime * t) / phi0;
    rep.series.push_back({t, ratio, 0.0, 0, "exact"});
    const double margin = 1.0 + opts.exact_tolerance - ratio;
    if (margin < rep.margin) {
      rep.margin = margin;
      rep.witness = {{"time", t}, {"ratio", ratio}};
    }
    if (opts.monte_carlo) {
      // Two independent continuations from each x ~ mu give unbiased products.
      const Mat root_mu = linalg::psd_sqrt(mu.cov), root_t = linalg::psd_sqrt(tr.covariance);
      const Mat ft = tr.transition.transpose();
      const TestFunction pc = TestFunction::from_polynomial(p);
      CounterRng rng(opts.seed, ti);
      const Eigen::Index d = j.rows();
      auto gauss = [&](const Mat& root) {
        Vec w(d);
        for (Eigen::Index c = 0; c < d; ++c) w(c) = rng.normal();
        return Vec(root * w);
      };
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < opts.n_samples; ++i) {
        const Vec x = mu.mean + gauss(root_mu);
        const Vec z1 = tr.transition * x + tr.shift + gauss(root_t);
        const Vec z2 = tr.transition * x + tr.shift + gauss(root_t);
        const Vec g1 = ft * pc.grad(z1), g2 = ft * pc.grad(z2);
        const double val = g1.dot(sig * g2) + b * pc.value(z1) * pc.value(z2);
        sum += val;
        sq += val * val;
      }
      const double n = opts.n_samples;
      const double m = sum / n;
      const double se = std::sqrt(std::max(0.0, (sq - n * m * m) / (n - 1) / n));
      const double scale = std::exp(params.c_prime * t) / phi0;
      rep.series.push_back({t, m * scale, se * scale, opts.seed, "monte_carlo"});
      if (m * scale > 1.0 + opts.z_score * se * scale) mc_fail = true;
    }
  }
  if (degenerate) {
    rep.verdict = Verdict::degenerate;
    rep.notes.push_back("b_weight <= K2: the functional is not provably monotone");
  } else {
    rep.verdict = (rep.margin >= 0 && !mc_fail) ? Verdict::pass : Verdict::fail;
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------

VerificationReport check_time_derivative(const DiffusionOperator& op, const MetricForm& s, double k,
                                         const TestFunction& f, const std::vector<Vec>& points,
                                         const std::vector<double>& times_in) {
  const auto& aff = op.affine_drift();
  if (!aff) throw UnsupportedFunction("check_time_derivative: exact propagation needs an affine drift");
  const Polynomial p = require_polynomial(f, "check_time_derivative");
  const std::vector<double> times = sorted_times(times_in);
  require(times.size() >= 2 && times.front() > 0, "check_time_derivative: need at least two positive times");
  const Polynomial tf = gaussian::metric_square(p, s.matrix());

  VerificationReport rep;
  rep.check_name = "time_derivative";
  rep.margin = kInf;
  std::vector<Polynomial> pt, ptt;
  for (double t : times) {
    const auto tr = linalg::discretize_linear(aff->jacobian, aff->offset, 2.0 * op.diffusion(), t);
    pt.push_back(gaussian::metric_square(gaussian::propagate(p, tr), s.matrix()));
    ptt.push_back(gaussian::propagate(tf, tr));
  }
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const Vec& x = points[pi];
    std::vector<double> dq;
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      dq.push_back((std::exp(2.0 * k * times[ti]) * ptt[ti](x) - pt[ti](x)) / times[ti]);
    const double slope = std::abs(dq.back() - dq.front()) / (times.back() - times.front());
    const double limit = 2.0 * (t2_form(op, s, f, x) + k * t_form(s, f, x));
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      const double allowance = 2.0 * slope * times[ti] + 1e-9 * (1.0 + std::abs(limit));
      const double margin = dq[ti] + allowance;
      rep.series.push_back({times[ti], dq[ti], 0.0, 0, "x" + std::to_string(pi)});
      if (margin < rep.margin) {
        rep.margin = margin;
        rep.witness = {{"point", vec_json(x)}, {"time", times[ti]}, {"difference_quotient", dq[ti]},
                       {"limit", limit}};
      }
    }
  }
  if (points.empty()) rep.margin = 0.0;
  rep.verdict = rep.margin >= 0 ? Verdict::pass : Verdict::fail;
  rep.provenance = {{"K", k}, {"times", times}, {"points", static_cast<int>(points.size())}};
  rep.notes.push_back("difference quotient of e^{2Kt} P_t T(f) - T(P_t f); its t -> 0 limit is 2 (T2(f) + K T(f))");
  return rep;
}

// ---------------------------------------------------------------------------------------------

VerificationReport assumption_report(const LyapunovCandidate& cand, const DiffusionOperator& op,
                                     const MetricForm& s, const std::vector<Vec>& sample) {
  const LyapunovResult r = check_assumption(cand, op, s, sample);
  VerificationReport rep;
  rep.check_name = "assumption";
  rep.verdict = r.passed ? Verdict::pass : Verdict::fail;
  rep.margin = r.passed ? 0.0 : -1.0;
  rep.provenance = {{"c_hat", num(r.c_hat)},  {"u_at_least_one", r.u_at_least_one},
                    {"c_finite", r.c_finite}, {"sublevel_compact", r.sublevel_compact},
                    {"claimed_c_holds", r.claimed_c_holds}, {"sample_size", r.sample_size}};
  if (r.witness) rep.witness = {{"point", vec_json(*r.witness)}};
  if (!r.note.empty()) rep.notes.push_back(r.note);
  return rep;
}

VerificationReport equivalence_consistency(const std::vector<const VerificationReport*>& reports) {
  VerificationReport rep;
  rep.check_name = "equivalence";
  bool pass = false, fail = false;
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto* r : reports) {
    verdicts[r->check_name] = to_string(r->verdict);
    pass |= r->verdict == Verdict::pass;
    fail |= r->verdict == Verdict::fail;
  }
  rep.verdict = (pass && fail) ? Verdict::fail : Verdict::pass;
  rep.margin = (pass && fail) ? -1.0 : 0.0;
  rep.provenance = {{"verdicts", verdicts}};
  if (pass && fail) rep.notes.push_back("statements of the equivalence disagree: one passes while another fails");
  return rep;
}

}  // namespace hypocert
