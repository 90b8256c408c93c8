#include "elfit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elfit/parallel.hpp"
#include "elfit/stats.hpp"

namespace elfit {

namespace {

bool bounded_loss(const LossSpec& spec) {
  return spec.kind == LossKind::TruncatedPower && std::isfinite(spec.trunc_A);
}

double solve_gs(const ConstraintSet& cs, const LossSpec& spec, const SpectralBox& box, const SolverOptions& opts) {
  return minimize_gs(cs, spec, box, opts).gs_value;
}

}  // namespace

// ---------------------------------------------------------------------------
// Universality

UniversalityReport run_universality(int d, int n, const LossSpec& spec, const SpectralBox& box, int seeds,
                                    const RngStream& rng, const SolverOptions& opts,
                                    const UniversalityOptions& uopts) {
  if (seeds < 10) throw std::invalid_argument("run_universality: need seeds >= 10");
  if (d < 1 || n < 1) throw std::invalid_argument("run_universality: need d, n >= 1");
  spec.validate();
  box.validate();
  SolverOptions o = opts;
  o.mode = EnergyMode::PerD2;
  o.validate();

  struct Outcome {
    double value = 0.0;
    bool ok = false;
  };
  std::vector<Outcome> out(std::size_t(2 * seeds));
  parallel_for(2 * seeds, uopts.threads, [&](int job) {
    const Ensemble e = job % 2 == 0 ? uopts.arm_a : uopts.arm_b;
    RngStream sub = rng.split(std::uint64_t(job));
    const ConstraintSet cs = sample_constraint_set(d, n, e, uopts.b, sub);
    try {
      out[std::size_t(job)] = {solve_gs(cs, spec, box, o), true};
    } catch (const NumericError&) {
      out[std::size_t(job)] = {0.0, false};
    }
  });

  UniversalityReport rep;
  rep.d = d;
  rep.n = n;
  rep.b = uopts.b;
  rep.spec = spec;
  rep.box = box;
  rep.arm_a = uopts.arm_a;
  rep.arm_b = uopts.arm_b;
  rep.bounded_loss = bounded_loss(spec);
  for (int s = 0; s < seeds; ++s) {
    const auto& a = out[std::size_t(2 * s)];
    const auto& b = out[std::size_t(2 * s + 1)];
    if (a.ok) rep.gs_a.push_back(a.value); else ++rep.failures_a;
    if (b.ok) rep.gs_b.push_back(b.value); else ++rep.failures_b;
  }
  if (rep.gs_a.size() < 2 || rep.gs_b.size() < 2)
    throw NumericError("run_universality: fewer than two successful seeds in an arm");
  rep.mean_diff = mean(rep.gs_a) - mean(rep.gs_b);
  const double se_a = std_error(rep.gs_a), se_b = std_error(rep.gs_b);
  rep.pooled_stderr = std::sqrt(se_a * se_a + se_b * se_b);
  rep.ks_stat = ks_two_sample(rep.gs_a, rep.gs_b);
  return rep;
}

ConstraintSet interpolated_set(const ConstraintSet& w, const ConstraintSet& g, double t) {
  if (w.d() != g.d() || w.n() != g.n()) throw std::invalid_argument("interpolated_set: shape mismatch");
  if (w.b() != g.b()) throw std::invalid_argument("interpolated_set: targets differ");
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  if (!(t >= 0.0 && t <= kHalfPi)) throw std::invalid_argument("interpolated_set: t must lie in [0, pi/2]");
  if (t == 0.0) return ConstraintSet(Ensemble::Custom, w.design(), w.b());
  if (t == kHalfPi) return ConstraintSet(Ensemble::Custom, g.design(), g.b());
  return ConstraintSet(Ensemble::Custom, std::cos(t) * w.design() + std::sin(t) * g.design(), w.b());
}

std::vector<InterpolationPoint> run_interpolation(int d, int n, const LossSpec& spec, const SpectralBox& box,
                                                  const std::vector<double>& t_grid, const RngStream& rng,
                                                  const SolverOptions& opts, double b, int threads) {
  if (t_grid.empty()) throw std::invalid_argument("run_interpolation: empty t grid");
  SolverOptions o = opts;
  o.mode = EnergyMode::PerD2;
  RngStream w_rng = rng.split(0), g_rng = rng.split(1);
  const ConstraintSet w = sample_constraint_set(d, n, Ensemble::Ell, b, w_rng);
  const ConstraintSet g = sample_constraint_set(d, n, Ensemble::Goe, b, g_rng);
  std::vector<InterpolationPoint> out(t_grid.size());
  parallel_for(int(t_grid.size()), threads, [&](int i) {
    const double t = t_grid[std::size_t(i)];
    out[std::size_t(i)] = {t, solve_gs(interpolated_set(w, g, t), spec, box, o)};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Free entropy

FreeEntropy net_free_entropy(const std::vector<SymMatrixd>& net, const ConstraintSet& cs, const LossSpec& spec,
                             double beta) {
  if (net.empty()) throw std::invalid_argument("net_free_entropy: empty net");
  if (!(beta > 0.0) || std::isinf(beta)) throw std::invalid_argument("net_free_entropy: beta must be finite and > 0");
  spec.validate();
  std::vector<double> h(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) h[i] = energy_from_residuals(residuals(cs, net[i]), spec, 1.0);
  const double h_min = *std::min_element(h.begin(), h.end());
  if (!std::isfinite(h_min)) throw NumericError("net_free_entropy: non-finite energy");

  // log-sum-exp around the minimum: every term is <= 1 and the minimizer contributes exactly 1.
  std::vector<double> terms(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) terms[i] = std::exp(-beta * (h[i] - h_min));
  const double sum = pairwise_sum(terms);
  const double d2 = double(cs.d()) * double(cs.d());
  const double log_size = std::log(double(net.size()));

  FreeEntropy out;
  out.gs_net = h_min / d2;
  const double neg_f = out.gs_net + (log_size - std::log(sum)) / (beta * d2);
  out.F = -neg_f;
  const double slack = 1e-12 * std::max(1.0, std::abs(out.gs_net));
  if (!(neg_f >= out.gs_net - slack && neg_f <= out.gs_net + log_size / (beta * d2) + slack))
    throw NumericError("net_free_entropy: free-entropy sandwich violated");
  return out;
}

std::vector<SymMatrixd> random_net(const SpectralBox& box, int d, int size, const RngStream& rng) {
  if (size < 1) throw std::invalid_argument("random_net: size must be >= 1");
  std::vector<SymMatrixd> net;
  net.reserve(std::size_t(size));
  for (int i = 0; i < size; ++i) {
    RngStream sub = rng.split(std::uint64_t(i));
    net.push_back(random_box_point(box, d, sub));
  }
  return net;
}

// ---------------------------------------------------------------------------
// CLT diagnostic

CltReport clt_diagnostic(const SymMatrixd& s, Ensemble ensemble, int samples, double eta, const RngStream& rng) {
  if (samples < 100) throw std::invalid_argument("clt_diagnostic: need samples >= 100");
  const int d = s.dim();
  const double tr_s2 = s.dot(s);
  if (!(tr_s2 > 0.0)) throw std::invalid_argument("clt_diagnostic: need Tr[S^2] > 0");
  if (ensemble == Ensemble::Custom) throw std::invalid_argument("clt_diagnostic: ensemble cannot be sampled");

  CltReport rep;
  rep.s = s;
  rep.ensemble = ensemble;
  rep.samples = samples;
  rep.eta = eta;
  const Eigen::VectorXd lam = eigenvalues(s);
  const double tr_abs3 = lam.cwiseAbs().array().cube().sum();
  const double dd = double(d);
  rep.be_budget = std::cbrt(tr_abs3 / std::pow(dd, 1.5));
  rep.in_Ad = tr_abs3 <= std::pow(dd, 1.5 - eta);

  const double scale = std::sqrt(2.0 * tr_s2 / dd);
  const double trace = s.trace();
  const Eigen::MatrixXd sd = s.dense();
  RngStream local = rng;
  std::vector<double> z(static_cast<std::size_t>(samples));
  Eigen::VectorXd x(d);
  for (int k = 0; k < samples; ++k) {
    double value;
    if (ensemble == Ensemble::Goe) {
      value = sample_goe(d, local).dot(s);
    } else {
      for (int i = 0; i < d; ++i) x[i] = ensemble == Ensemble::Ell ? local.normal() : local.sign();
      value = (x.dot(sd * x) - trace) / std::sqrt(dd);
    }
    z[std::size_t(k)] = value / scale;
  }
  const auto [lo, hi] = std::minmax_element(z.begin(), z.end());
  if (*hi - *lo <= 1e-12) {
    rep.degenerate = true;
    rep.ks_to_normal = 1.0;
  } else {
    rep.ks_to_normal = ks_one_sample(z, normal_cdf);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Process maxima

namespace {

double abs_power_sum(const Eigen::VectorXd& t, double r) {
  std::vector<double> terms(std::size_t(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) terms[std::size_t(i)] = std::pow(std::abs(t[i]), r);
  return pairwise_sum(terms);
}

Eigen::VectorXd abs_power_grad(const Eigen::VectorXd& t, double r) {
  return t.unaryExpr([r](double v) {
    if (v == 0.0) return 0.0;
    const double g = r == 1.0 ? 1.0 : r * std::pow(std::abs(v), r - 1.0);
    return v > 0 ? g : -g;
  });
}

// Projected ascent of the convex map S -> sum |Tr[X_mu S]|^r. For convex
// objectives any projected step is non-decreasing, and rescaling outward to the
// sphere only increases a positively homogeneous objective.
template <typename Project>
double ascend(const ConstraintSet& cs, double r, SymMatrixd s, const SolverOptions& opts, const Project& project) {
  double f = abs_power_sum(cs.traces(s), r);
  const double reach = opts.step_c0 * double(cs.d());
  for (int k = 0; k < opts.max_iter; ++k) {
    const SymMatrixd g = cs.combine(abs_power_grad(cs.traces(s), r));
    const double gn = g.frobenius_norm();
    if (gn == 0.0) break;
    SymMatrixd next = s;
    next.axpy(reach / gn, g);
    next = project(next);
    const double fn = abs_power_sum(cs.traces(next), r);
    if (!(fn > f * (1.0 + opts.tol))) {
      if (fn > f) f = fn;
      break;
    }
    s = std::move(next);
    f = fn;
  }
  return f;
}

SymMatrixd op_sphere_project(const SymMatrixd& m) {
  const EigDecompd e = eig_sym(m);
  Eigen::VectorXd w = e.eigenvalues.cwiseMax(-1.0).cwiseMin(1.0);
  const double top = w.cwiseAbs().maxCoeff();
  if (top > 0.0) w /= top;
  else w.setOnes();
  return SymMatrixd::from_spectrum(e.eigenvectors, w);
}

}  // namespace

double process_max_op_sphere(const ConstraintSet& cs, double r, const SolverOptions& opts, const RngStream& rng) {
  if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("process_max_op_sphere: r must lie in [1, 2]");
  opts.validate();
  double best = 0.0;
  for (int i = 0; i < opts.restarts; ++i) {
    RngStream sub = rng.split(std::uint64_t(i));
    // Random sign matrix: +-1 eigenvalues in a Haar basis.
    const SymMatrixd start = spectral_map(eig_sym(random_box_point(SpectralBox::interval(-1.0, 1.0), cs.d(), sub)),
                                          [](double x) { return x >= 0 ? 1.0 : -1.0; });
    best = std::max(best, ascend(cs, r, start, opts, op_sphere_project));
  }
  return best / double(cs.n());
}

double process_max_op_sphere(Ensemble ensemble, double r, int d, int n, const SolverOptions& opts,
                             const RngStream& rng) {
  RngStream draw = rng.split(0xd1a7u);
  const ConstraintSet cs = sample_constraint_set(d, n, ensemble, 0.0, draw);
  return process_max_op_sphere(cs, r, opts, rng);
}

double process_max_fro_sphere_goe(double r, int d, int n, const SolverOptions& opts, const RngStream& rng) {
  if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("process_max_fro_sphere_goe: r must lie in [1, 2]");
  opts.validate();
  RngStream draw = rng.split(0xd1a7u);
  const ConstraintSet cs = sample_constraint_set(d, n, Ensemble::Goe, 0.0, draw);
  const double radius = std::sqrt(double(d));
  auto project = [radius](const SymMatrixd& m) {
    const double norm = m.frobenius_norm();
    return norm > 0.0 ? m * (radius / norm) : m;
  };
  double best = 0.0;
  for (int i = 0; i < opts.restarts; ++i) {
    RngStream sub = rng.split(std::uint64_t(i));
    best = std::max(best, ascend(cs, r, project(sample_goe(d, sub)), opts, project));
  }
  return std::pow(best, 1.0 / r) / std::pow(double(n), 1.0 / r);
}

double dual_lower_bound_construction(double beta_frac, double q, int d, int n, const RngStream& rng) {
  if (!(beta_frac > 0.0 && beta_frac <= 1.0))
    throw std::invalid_argument("dual_lower_bound_construction: beta_frac must lie in (0, 1]");
  if (!(q > 1.0 && q < 2.0)) throw std::invalid_argument("dual_lower_bound_construction: q must lie in (1, 2)");
  if (d < 1 || n < 1) throw std::invalid_argument("dual_lower_bound_construction: need d, n >= 1");
  const long p = std::lround(beta_frac * double(n));
  if (p < 1) throw std::invalid_argument("dual_lower_bound_construction: block size p = 0");
  RngStream local = rng;
  Eigen::MatrixXd x(d, p);
  for (long j = 0; j < p; ++j)
    for (int i = 0; i < d; ++i) x(i, j) = local.normal();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  m.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / double(p));
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
  m.diagonal().array() -= 1.0;
  const double s1 = nuclear_norm(SymMatrixd::symmetrized(m));
  return std::pow(double(p), 1.0 - 1.0 / q) / std::sqrt(double(d)) * s1;
}

double sphere_baseline_analytic(double r) {
  if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("sphere_baseline: r must lie in [1, 2]");
  return std::pow(2.0, r) * std::tgamma(0.5 * (r + 1.0)) / std::sqrt(std::numbers::pi);
}

SphereBaseline sphere_baseline(double r, int d, int n, int trials, const RngStream& rng, int threads) {
  const double analytic = sphere_baseline_analytic(r);
  if (d < 1 || n < 1) throw std::invalid_argument("sphere_baseline: need d, n >= 1");
  if (trials < 2) throw std::invalid_argument("sphere_baseline: need trials >= 2");
  std::vector<double> values(static_cast<std::size_t>(trials));
  const SymMatrixd id = SymMatrixd::identity(d);
  parallel_for(trials, threads, [&](int t) {
    RngStream sub = rng.split(std::uint64_t(t));
    Eigen::MatrixXd pts(d, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < d; ++i) pts(i, j) = sub.normal();
    values[std::size_t(t)] = fit_error_original(pts, id, r);
  });
  return {analytic, mean(values), std_error(values)};
}

// ---------------------------------------------------------------------------
// Phase scan

std::optional<double> crossing_estimate(const std::vector<double>& alphas, const std::vector<double>& medians,
                                        double level) {
  if (alphas.size() != medians.size()) throw std::invalid_argument("crossing_estimate: length mismatch");
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (medians[k] <= level) continue;
    if (k == 0) return alphas[0];
    const double m0 = medians[k - 1], m1 = medians[k];
    return alphas[k - 1] + (level - m0) / (m1 - m0) * (alphas[k] - alphas[k - 1]);
  }
  return std::nullopt;
}

PhaseScanResult phase_scan(const PhaseScanConfig& cfg, const RngStream& rng, const SolverOptions& opts) {
  if (cfg.alpha_grid.empty()) throw std::invalid_argument("phase_scan: empty alpha grid");
  if (cfg.d < 2) throw std::invalid_argument("phase_scan: need d >= 2");
  if (cfg.seeds < 1) throw std::invalid_argument("phase_scan: need seeds >= 1");
  cfg.spec.validate();
  cfg.box.validate();
  opts.validate();
  const double d2 = double(cfg.d) * double(cfg.d);
  std::vector<int> ns;
  for (double a : cfg.alpha_grid) {
    if (!(a > 0.0 && a <= 0.5)) throw std::invalid_argument("phase_scan: alpha must lie in (0, 0.5]");
    const int n = int(std::lround(a * d2));
    if (n < 1) throw std::invalid_argument("phase_scan: round(alpha d^2) must be >= 1");
    if (!ns.empty() && !(a > cfg.alpha_grid[ns.size() - 1]))
      throw std::invalid_argument("phase_scan: alpha grid must be strictly increasing");
    ns.push_back(n);
  }
  const int n_max = *std::max_element(ns.begin(), ns.end());
  const int grid = int(cfg.alpha_grid.size());

  std::vector<ConstraintSet> clouds;
  clouds.reserve(std::size_t(cfg.seeds));
  for (int s = 0; s < cfg.seeds; ++s) {
    RngStream sub = rng.split(std::uint64_t(s));
    clouds.push_back(to_original_coordinates(sample_constraint_set(cfg.d, n_max, Ensemble::Ell, 1.0, sub)));
  }

  struct Job {
    double error = 0.0;
    bool certified = false;
    double violation_fraction = 0.0;
    bool ok = false;
    long long ms = 0;
  };
  std::vector<Job> jobs(std::size_t(grid * cfg.seeds));
  parallel_for(grid * cfg.seeds, cfg.threads, [&](int job) {
    const int k = job / cfg.seeds, s = job % cfg.seeds;
    const auto t0 = std::chrono::steady_clock::now();
    const ConstraintSet& full = clouds[std::size_t(s)];
    const int n = ns[std::size_t(k)];
    const ConstraintSet cs(Ensemble::Custom, full.design().leftCols(n), full.b(), full.points()->leftCols(n));
    Job out;
    try {
      const GramSystem gram = gram_system(cs);
      const GSResult gs = minimize_gs(cs, cfg.spec, cfg.box, opts, &gram);
      out.error = gs.gs_value;
      out.violation_fraction = double(count_violations(cs, gs.minimizer, cfg.c_violation)) / double(n);
      out.certified = gram.full_rank() && exact_fit_attempt(gs.minimizer, cs, gram).certified;
      out.ok = true;
    } catch (const NumericError&) {
      out.ok = false;
    }
    out.ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    jobs[std::size_t(job)] = out;
  });

  PhaseScanResult result;
  std::vector<double> alphas, medians;
  for (int k = 0; k < grid; ++k) {
    PhasePoint p;
    p.alpha = cfg.alpha_grid[std::size_t(k)];
    p.d = cfg.d;
    p.n = ns[std::size_t(k)];
    p.seeds = cfg.seeds;
    std::vector<double> errors, violations;
    int certified = 0;
    for (int s = 0; s < cfg.seeds; ++s) {
      const Job& j = jobs[std::size_t(k * cfg.seeds + s)];
      p.runtime_ms += j.ms;
      if (!j.ok) {
        ++p.failures;
        continue;
      }
      errors.push_back(j.error);
      violations.push_back(j.violation_fraction);
      certified += j.certified ? 1 : 0;
    }
    if (!errors.empty()) {
      p.q10 = quantile(errors, 0.1);
      p.q50 = quantile(errors, 0.5);
      p.q90 = quantile(errors, 0.9);
      p.violation_fraction_median = median(violations);
    } else {
      p.q10 = p.q50 = p.q90 = std::numeric_limits<double>::quiet_NaN();
    }
    p.exact_fit_rate = double(certified) / double(cfg.seeds);
    alphas.push_back(p.alpha);
    medians.push_back(p.q50);
    result.points.push_back(p);
  }
  result.crossing = crossing_estimate(alphas, medians, cfg.error_level);
  return result;
}

}  // namespace elfit
