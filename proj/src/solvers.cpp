#include "elfit/solvers.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace elfit {

// ---------------------------------------------------------------------------
// SpectralBox

void SpectralBox::validate() const {
  if (std::isnan(lo) || std::isnan(hi) || !(lo <= hi)) throw std::invalid_argument("SpectralBox: need lo <= hi");
  if (fro_floor && !(*fro_floor >= 0.0 && std::isfinite(*fro_floor)))
    throw std::invalid_argument("SpectralBox: Frobenius floor must be finite and >= 0");
}

double SpectralBox::mid() const {
  const bool lo_finite = std::isfinite(lo), hi_finite = std::isfinite(hi);
  if (lo_finite && hi_finite) return 0.5 * (lo + hi);
  if (lo_finite) return lo + 1.0;
  if (hi_finite) return hi - 1.0;
  return 0.0;
}

bool SpectralBox::contains(const Eigen::VectorXd& eigenvalues, double tol) const {
  return eigenvalues.minCoeff() >= lo - tol && eigenvalues.maxCoeff() <= hi + tol;
}

SymMatrixd SpectralBox::project(const EigDecompd& e) const {
  SymMatrixd out = spectral_map(e, [this](double x) { return std::clamp(x, lo, hi); });
  if (fro_floor && *fro_floor > 0.0) {
    const double norm = out.frobenius_norm();
    if (norm == 0.0) {
      out = SymMatrixd::identity(out.dim()) * (*fro_floor / std::sqrt(double(out.dim())));
    } else if (norm < *fro_floor) {
      out *= *fro_floor / norm;
    }
  }
  return out;
}

SymMatrixd SpectralBox::project(const SymMatrixd& s) const {
  if (is_unconstrained() && !fro_floor) return s;
  return project(eig_sym(s));
}

SymMatrixd random_box_point(const SpectralBox& box, int d, RngStream& rng) {
  double lo = box.lo, hi = box.hi;
  if (std::isinf(lo) && std::isinf(hi)) {
    lo = -1.0;
    hi = 1.0;
  } else if (std::isinf(hi)) {
    hi = lo + 2.0 * std::max(1.0, std::abs(lo));
  } else if (std::isinf(lo)) {
    lo = hi - 2.0 * std::max(1.0, std::abs(hi));
  }
  Eigen::MatrixXd gauss(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) gauss(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix on R's diagonal makes Q Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  Eigen::VectorXd w(d);
  for (int i = 0; i < d; ++i) w[i] = rng.uniform(lo, hi);
  return SymMatrixd::from_spectrum(q, w);
}

// ---------------------------------------------------------------------------
// SolverOptions

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw std::invalid_argument("solver option '" + key + "': cannot parse '" + text + "'");
  return value;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

SolverOptions SolverOptions::from_kv(const std::map<std::string, std::string>& kv) {
  SolverOptions o;
  for (const auto& [key, value] : kv) {
    if (key == "max_iter") o.max_iter = parse_number<int>(key, value);
    else if (key == "feasibility_max_iter") o.feasibility_max_iter = parse_number<int>(key, value);
    else if (key == "nuclear_max_iter") o.nuclear_max_iter = parse_number<int>(key, value);
    else if (key == "restarts") o.restarts = parse_number<int>(key, value);
    else if (key == "tol") o.tol = parse_number<double>(key, value);
    else if (key == "step_c0") o.step_c0 = parse_number<double>(key, value);
    else if (key == "pd_balance") o.pd_balance = parse_number<double>(key, value);
    else if (key == "gap_every") o.gap_every = parse_number<int>(key, value);
    else if (key == "gap_rtol") o.gap_rtol = parse_number<double>(key, value);
    else if (key == "patience") o.patience = parse_number<int>(key, value);
    else if (key == "violation_c") o.violation_c = parse_number<double>(key, value);
    else if (key == "margin") o.margin = parse_number<double>(key, value);
    else if (key == "seed") o.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "method") {
      if (value == "auto") o.method = GsMethod::Auto;
      else if (value == "subgradient") o.method = GsMethod::Subgradient;
      else if (value == "primal_dual") o.method = GsMethod::PrimalDual;
      else throw std::invalid_argument("solver option 'method': expected auto, subgradient or primal_dual");
    } else if (key == "mode") {
      if (value == "per_constraint") o.mode = EnergyMode::PerConstraint;
      else if (value == "per_d2") o.mode = EnergyMode::PerD2;
      else throw std::invalid_argument("solver option 'mode': expected per_constraint or per_d2");
    } else {
      throw std::invalid_argument("unknown solver option '" + key + "'");
    }
  }
  o.validate();
  return o;
}

std::vector<std::pair<std::string, std::string>> SolverOptions::to_kv() const {
  const char* method_name = method == GsMethod::Auto ? "auto"
                            : method == GsMethod::Subgradient ? "subgradient" : "primal_dual";
  return {{"method", method_name},
          {"max_iter", std::to_string(max_iter)},
          {"feasibility_max_iter", std::to_string(feasibility_max_iter)},
          {"nuclear_max_iter", std::to_string(nuclear_max_iter)},
          {"restarts", std::to_string(restarts)},
          {"tol", format_double(tol)},
          {"step_c0", format_double(step_c0)},
          {"pd_balance", format_double(pd_balance)},
          {"gap_every", std::to_string(gap_every)},
          {"gap_rtol", format_double(gap_rtol)},
          {"patience", std::to_string(patience)},
          {"violation_c", format_double(violation_c)},
          {"margin", format_double(margin)},
          {"seed", std::to_string(seed)},
          {"mode", mode == EnergyMode::PerConstraint ? "per_constraint" : "per_d2"}};
}

void SolverOptions::validate() const {
  if (max_iter < 1 || feasibility_max_iter < 1 || nuclear_max_iter < 1)
    throw std::invalid_argument("solver options: iteration caps must be >= 1");
  if (restarts < 1) throw std::invalid_argument("solver options: restarts must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("solver options: tol must be > 0");
  if (!(step_c0 > 0.0) || !std::isfinite(step_c0)) throw std::invalid_argument("solver options: step_c0 must be > 0");
  if (!(pd_balance > 0.0) || !std::isfinite(pd_balance))
    throw std::invalid_argument("solver options: pd_balance must be > 0");
  if (gap_every < 1) throw std::invalid_argument("solver options: gap_every must be >= 1");
  if (!(gap_rtol >= 0.0)) throw std::invalid_argument("solver options: gap_rtol must be >= 0");
  if (patience < 1) throw std::invalid_argument("solver options: patience must be >= 1");
  if (!(violation_c >= 0.0)) throw std::invalid_argument("solver options: violation_c must be >= 0");
  if (!(margin >= 0.0 && margin < 0.5)) throw std::invalid_argument("solver options: margin must lie in [0, 0.5)");
}

ResidualStats residual_stats(const Eigen::VectorXd& res, double c) {
  ResidualStats st;
  const Eigen::ArrayXd a = res.array().abs();
  st.max_abs = a.maxCoeff();
  st.mean_abs = a.mean();
  st.violation_count = int((a > c).count());
  return st;
}

// ---------------------------------------------------------------------------
// Gram system and affine projection

GramSystem gram_system(const ConstraintSet& cs) {
  GramSystem g;
  const auto& a = cs.design();
  g.h = Eigen::MatrixXd::Zero(cs.n(), cs.n());
  g.h.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  g.h.triangularView<Eigen::StrictlyUpper>() = g.h.transpose();

  const long long sym_dim = (long long)cs.d() * (cs.d() + 1) / 2;
  if ((long long)cs.n() > sym_dim) {
    g.rank = GramRank::Deficient;
    g.reason = "n = " + std::to_string(cs.n()) + " exceeds d(d+1)/2 = " + std::to_string(sym_dim);
    return g;
  }

  const double max_diag = g.h.diagonal().maxCoeff();
  auto factor = [&](double jitter) {
    Eigen::MatrixXd m = g.h;
    m.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    Eigen::MatrixXd l = llt.matrixL();
    const double min_pivot = l.diagonal().cwiseAbs2().minCoeff();
    if (!(min_pivot > 1e-13 * max_diag)) return false;
    g.l = std::move(l);
    g.jitter = jitter;
    return true;
  };
  if (max_diag > 0.0 && factor(0.0)) return g;
  const double jitter = 1e-10 * g.h.trace() / double(cs.n());
  if (max_diag > 0.0 && factor(jitter)) return g;
  g.rank = GramRank::Deficient;
  g.reason = "Cholesky factorization failed after jitter";
  return g;
}

Eigen::VectorXd GramSystem::solve(const Eigen::VectorXd& v) const {
  if (!full_rank()) throw GramDeficientError("Gram system is rank deficient: " + reason);
  Eigen::VectorXd x = l.triangularView<Eigen::Lower>().solve(v);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

AffineProjection project_affine(const SymMatrixd& s, const ConstraintSet& cs, const GramSystem& gram) {
  AffineProjection out;
  out.violation = residuals(cs, s);
  const Eigen::VectorXd coef = gram.solve(out.violation);
  out.s = s - cs.combine(coef);
  out.distance = std::sqrt(std::max(0.0, out.violation.dot(coef)));
  return out;
}

SymMatrixd min_fro_solution(const ConstraintSet& cs, const GramSystem& gram) {
  return project_affine(SymMatrixd::zero(cs.d()), cs, gram).s;
}

SymMatrixd min_fro_solution(const ConstraintSet& cs) {
  return min_fro_solution(cs, gram_system(cs));
}

// ---------------------------------------------------------------------------
// Projected subgradient ground-state minimization

namespace {

struct RestartOutcome {
  double best = std::numeric_limits<double>::infinity();
  SymMatrixd best_s;
  int iterations = 0;
  bool hit_cap = false;
};

RestartOutcome run_restart(const ConstraintSet& cs, const LossSpec& spec, const SpectralBox& box,
                           const SolverOptions& opts, const SymMatrixd& start, std::vector<double>* trace,
                           double& global_best) {
  const double norm = normalization(opts.mode, cs.n(), cs.d());
  RestartOutcome out;
  SymMatrixd s = box.project(start);
  Eigen::VectorXd res = residuals(cs, s);
  double e = energy_from_residuals(res, spec, norm);
  if (!std::isfinite(e)) throw NumericError("minimize_gs: non-finite energy at restart start");
  out.best = e;
  out.best_s = s;
  global_best = std::min(global_best, e);
  if (trace) trace->push_back(global_best);

  SymMatrixd g = subgradient_from_residuals(cs, res, spec, norm);
  const double g0 = g.frobenius_norm();
  if (g0 == 0.0 || out.best <= opts.tol) return out;
  const double c0 = opts.step_c0 / g0;

  double reference = out.best;
  int stale = 0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    s.axpy(-c0 / std::sqrt(double(k)), g);
    s = box.project(s);
    res = residuals(cs, s);
    e = energy_from_residuals(res, spec, norm);
    if (!std::isfinite(e)) throw NumericError("minimize_gs: non-finite energy at iteration " + std::to_string(k));
    out.iterations = k;
    if (e < out.best) {
      out.best = e;
      out.best_s = s;
    }
    global_best = std::min(global_best, e);
    if (trace) trace->push_back(global_best);
    if (out.best <= opts.tol) return out;
    if (out.best < reference * (1.0 - opts.tol)) {
      reference = out.best;
      stale = 0;
    } else if (++stale >= opts.patience) {
      return out;
    }
    g = subgradient_from_residuals(cs, res, spec, norm);
  }
  out.hit_cap = true;
  return out;
}

bool is_plain_power(const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::Power: return true;
    case LossKind::SmoothedPower: return spec.smooth_delta == 0.0;
    case LossKind::TruncatedPower: return std::isinf(spec.trunc_A);
  }
  return false;
}

// prox of t|.|^r at x: the a >= 0 with a + t r a^(r-1) = |x|, signed like x.
double prox_abs_power(double x, double t, double r) {
  const double ax = std::abs(x);
  if (ax == 0.0) return 0.0;
  double a;
  if (r == 1.0) {
    a = std::max(0.0, ax - t);
  } else if (r == 2.0) {
    a = ax / (1.0 + 2.0 * t);
  } else {
    // Safeguarded Newton on the increasing concave g(a) = a + t r a^(r-1) - |x|.
    double lo = 0.0, hi = ax;
    a = ax / (1.0 + t * r);
    for (int it = 0; it < 100; ++it) {
      const double p = std::pow(a, r - 2.0);
      const double g = a + t * r * p * a - ax;
      if (g > 0) hi = a; else lo = a;
      const double step = g / (1.0 + t * r * (r - 1.0) * p);
      double next = a - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - a) <= 1e-15 * ax) { a = next; break; }
      a = next;
    }
  }
  return x < 0 ? -a : a;
}

// Convex conjugate of |.|^r.
double abs_power_conjugate(double u, double r) {
  if (r == 1.0) return std::abs(u) <= 1.0 + 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
  const double q = r / (r - 1.0);
  return (r - 1.0) * std::pow(std::abs(u) / r, q);
}

struct PrimalDualContext {
  double norm;
  double tau;
  double sigma;
};

PrimalDualContext primal_dual_context(const ConstraintSet& cs, const SpectralBox& box, const SolverOptions& opts,
                                      double norm) {
  // ||A||^2 = lambda_max(A^T A) by power iteration on the n-dimensional side.
  const auto& a = cs.design();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(cs.n());
  double l2 = 0.0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd w = a.transpose() * (a * v);
    const double wn = w.norm();
    if (wn == 0.0) break;
    const double next = wn / v.norm();
    v = w / wn;
    const bool settled = std::abs(next - l2) <= 1e-6 * next;
    l2 = next;
    if (settled) break;
  }
  const double l = std::sqrt(std::max(l2, 1e-300)) * 1.01;
  // Balance the primal and dual scales: |S| ~ |mid| sqrt(d), |y| ~ norm sqrt(n).
  const double s_ref = std::max(std::abs(box.mid()), 1.0) * std::sqrt(double(cs.d()));
  const double y_ref = norm * std::sqrt(double(cs.n()));
  const double omega = opts.pd_balance * s_ref / y_ref;
  return {norm, 0.99 * omega / l, 0.99 / (omega * l)};
}

struct PrimalDualOutcome {
  RestartOutcome base;
  double gap = std::numeric_limits<double>::infinity();
  bool certified = false;
  bool settled = false;
};

// Chambolle-Pock iteration for min_S F(A S) + indicator_box(S), F(z) = norm sum |z - b|^r.
PrimalDualOutcome run_primal_dual(const ConstraintSet& cs, const LossSpec& spec, const SpectralBox& box,
                                  const SolverOptions& opts, const PrimalDualContext& ctx, const SymMatrixd& start,
                                  std::vector<double>* trace, double& global_best) {
  const double norm = ctx.norm, r = spec.r, b = cs.b();
  PrimalDualOutcome out;
  auto& base = out.base;
  SymMatrixd s = box.project(start);
  Eigen::VectorXd as = cs.traces(s);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(cs.n());
  Eigen::VectorXd res = as.array() - b;
  base.best = energy_from_residuals(res, spec, norm);
  if (!std::isfinite(base.best)) throw NumericError("minimize_gs: non-finite energy at restart start");
  base.best_s = s;
  global_best = std::min(global_best, base.best);
  if (trace) trace->push_back(global_best);
  if (base.best <= opts.tol) {
    out.gap = base.best;
    out.certified = true;
    return out;
  }

  double dual_best = -std::numeric_limits<double>::infinity();
  auto dual_value = [&](const Eigen::VectorXd& yy) {
    const Eigen::VectorXd lam = eigenvalues(cs.combine(yy));
    double support = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double l = lam[i];
      if (l > 0) support += std::isinf(box.lo) ? -std::numeric_limits<double>::infinity() : box.lo * l;
      else if (l < 0) support += std::isinf(box.hi) ? -std::numeric_limits<double>::infinity() : box.hi * l;
    }
    double conj = 0.0;
    for (Eigen::Index mu = 0; mu < yy.size(); ++mu) conj += abs_power_conjugate(yy[mu] / norm, r);
    return support - b * yy.sum() - norm * conj;
  };

  std::vector<double> window;
  double reference = base.best;
  int stale = 0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    SymMatrixd s_next = s;
    s_next.axpy(-ctx.tau, cs.combine(y));
    s_next = box.project(s_next);
    const Eigen::VectorXd as_next = cs.traces(s_next);
    res = as_next.array() - b;
    const double e = energy_from_residuals(res, spec, norm);
    if (!std::isfinite(e)) throw NumericError("minimize_gs: non-finite energy at iteration " + std::to_string(k));
    base.iterations = k;
    if (e < base.best) {
      base.best = e;
      base.best_s = s_next;
    }
    global_best = std::min(global_best, e);
    if (trace) trace->push_back(global_best);

    // Dual step through the Moreau identity: prox_{sigma F*}(v) = v - sigma prox_{F/sigma}(v / sigma).
    const Eigen::VectorXd v = y + ctx.sigma * (2.0 * as_next - as);
    for (Eigen::Index mu = 0; mu < v.size(); ++mu) {
      const double w = v[mu] / ctx.sigma - b;
      y[mu] = v[mu] - ctx.sigma * (b + prox_abs_power(w, norm / ctx.sigma, r));
    }
    s = std::move(s_next);
    as = as_next;

    if (base.best <= opts.tol) {
      out.gap = base.best;
      out.certified = true;
      return out;
    }
    if (k % opts.gap_every == 0) {
      dual_best = std::max(dual_best, dual_value(y));
      out.gap = base.best - dual_best;
      if (out.gap <= opts.tol + opts.gap_rtol * base.best) {
        out.certified = true;
        return out;
      }
      // An unbounded box side usually leaves the dual at -inf; fall back to a
      // stall test on the best energy over a window of checks.
      window.push_back(base.best);
      if (window.size() > 10) {
        window.erase(window.begin());
        if (window.front() - base.best <= 0.1 * opts.gap_rtol * base.best) {
          out.settled = true;
          return out;
        }
      }
    }
    if (base.best < reference * (1.0 - opts.tol)) {
      reference = base.best;
      stale = 0;
    } else if (++stale >= opts.patience) {
      return out;
    }
  }
  base.hit_cap = true;
  return out;
}

}  // namespace

bool uses_primal_dual(GsMethod method, const LossSpec& spec, const SpectralBox& box) {
  switch (method) {
    case GsMethod::Subgradient: return false;
    case GsMethod::PrimalDual: return true;
    case GsMethod::Auto: return is_plain_power(spec) && box.is_convex();
  }
  return false;
}

GSResult minimize_gs(const ConstraintSet& cs, const LossSpec& spec, const SpectralBox& box,
                     const SolverOptions& opts, const GramSystem* gram) {
  spec.validate();
  box.validate();
  opts.validate();
  const int d = cs.d();

  std::optional<GramSystem> own_gram;
  if (!gram && opts.restarts > 2) {
    own_gram = gram_system(cs);
    gram = &*own_gram;
  }

  RngStream rng(opts.seed, 0x6a5u);
  auto start_for = [&](int index) -> SymMatrixd {
    switch (index) {
      case 0: return SymMatrixd::zero(d);
      case 1: return SymMatrixd::identity(d) * box.mid();
      case 2:
        if (gram && gram->full_rank()) return min_fro_solution(cs, *gram);
        [[fallthrough]];
      default: {
        RngStream sub = rng.split(std::uint64_t(index));
        return random_box_point(box, d, sub);
      }
    }
  };

  GSResult result;
  result.heuristic = !box.is_convex();
  double global_best = std::numeric_limits<double>::infinity();
  bool any_settled = false;
  const bool primal_dual = uses_primal_dual(opts.method, spec, box);
  std::optional<PrimalDualContext> pd_ctx;
  if (primal_dual) {
    if (!is_plain_power(spec) || !box.is_convex())
      throw std::invalid_argument("minimize_gs: primal_dual needs a power loss and a convex box");
    pd_ctx = primal_dual_context(cs, box, opts, normalization(opts.mode, cs.n(), cs.d()));
    result.method = GsMethod::PrimalDual;
  }
  for (int i = 0; i < opts.restarts; ++i) {
    auto* trace = opts.record_trace ? &result.best_trace : nullptr;
    RestartOutcome outcome;
    bool certified = false;
    if (primal_dual) {
      auto pd = run_primal_dual(cs, spec, box, opts, *pd_ctx, start_for(i), trace, global_best);
      outcome = std::move(pd.base);
      certified = pd.certified || pd.settled;
      if (i == 0 || outcome.best < result.gs_value) result.duality_gap = pd.gap;
    } else {
      outcome = run_restart(cs, spec, box, opts, start_for(i), trace, global_best);
    }
    result.iterations += outcome.iterations;
    result.restart_values.push_back(outcome.best);
    any_settled = any_settled || !outcome.hit_cap;
    if (i == 0 || outcome.best < result.gs_value) {
      result.gs_value = outcome.best;
      result.minimizer = std::move(outcome.best_s);
      result.best_restart = i;
    }
    result.restarts_used = i + 1;
    // The problem is convex here: once a run has settled, further starts reach
    // the same minimum.
    if (certified) break;
  }
  result.converged = any_settled;
  result.residual_stats = residual_stats(residuals(cs, result.minimizer), opts.violation_c);
  return result;
}

// ---------------------------------------------------------------------------
// Alternating projections

FeasibilityResult solve_feasibility(const ConstraintSet& cs, const SpectralBox& box, const SolverOptions& opts) {
  box.validate();
  opts.validate();
  if (!box.is_convex()) throw std::invalid_argument("solve_feasibility: box with a Frobenius floor is not convex");
  FeasibilityResult out;
  const GramSystem gram = gram_system(cs);
  if (!gram.full_rank()) {
    out.status = FeasibilityStatus::GramDeficient;
    return out;
  }

  SymMatrixd s = min_fro_solution(cs, gram);
  if (box.is_unconstrained()) {
    out.status = FeasibilityStatus::Success;
    out.s = std::move(s);
    return out;
  }

  // Aim at a slightly shrunk box so that affine iterates land inside the
  // original one after finitely many steps.
  SpectralBox inner = box;
  const double shrink = opts.margin * std::min(box.hi - box.lo, 1.0);
  if (std::isfinite(box.lo)) inner.lo += shrink;
  if (std::isfinite(box.hi)) inner.hi -= shrink;

  const double mono_slack = 1e-12;
  auto push = [&](double dist) {
    if (!out.residual_trace.empty() && dist > out.residual_trace.back() + mono_slack * std::max(1.0, out.residual_trace.front()))
      out.monotone = false;
    out.residual_trace.push_back(dist);
  };

  for (int k = 0; k < opts.feasibility_max_iter; ++k) {
    const EigDecompd e = eig_sym(s);
    if (box.contains(e.eigenvalues, kCertifyEigTol)) {
      out.status = FeasibilityStatus::Success;
      out.iterations = k;
      out.final_distance = out.residual_trace.empty() ? 0.0 : out.residual_trace.back();
      out.s = std::move(s);
      return out;
    }
    const SymMatrixd b = inner.project(e);
    push((s - b).frobenius_norm());
    SymMatrixd next = project_affine(b, cs, gram).s;
    push((next - b).frobenius_norm());
    s = std::move(next);
    out.iterations = k + 1;
  }
  out.status = FeasibilityStatus::IterationCap;
  out.final_distance = out.residual_trace.back();
  out.s = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Exact fit certification

ExactFitResult exact_fit_attempt(const SymMatrixd& s_approx, const ConstraintSet& cs, const GramSystem& gram) {
  ExactFitResult out;
  auto proj = project_affine(s_approx, cs, gram);
  out.affine_distance = proj.distance;
  out.s_exact = std::move(proj.s);
  out.lambda_min = lambda_min(out.s_exact);
  out.max_residual = residuals(cs, out.s_exact).cwiseAbs().maxCoeff();
  out.certified = out.lambda_min >= -kCertifyEigTol && out.max_residual <= kCertifyResidualTol;
  return out;
}

ExactFitResult exact_fit_attempt(const SymMatrixd& s_approx, const ConstraintSet& cs) {
  return exact_fit_attempt(s_approx, cs, gram_system(cs));
}

// ---------------------------------------------------------------------------
// Minimal nuclear norm

NuclearResult min_nuclear_solution(const ConstraintSet& cs, const SolverOptions& opts) {
  opts.validate();
  const GramSystem gram = gram_system(cs);
  const SymMatrixd s_fro = min_fro_solution(cs, gram);

  NuclearResult out;
  const double theta = 0.1 * operator_norm(s_fro);
  if (theta == 0.0) {
    out.s = s_fro;
    out.converged = true;
    return out;
  }

  auto soft_threshold = [theta](const SymMatrixd& m) {
    return spectral_map(eig_sym(m), [theta](double x) {
      return x > theta ? x - theta : (x < -theta ? x + theta : 0.0);
    });
  };

  SymMatrixd z = s_fro;
  SymMatrixd y = s_fro;
  for (int k = 1; k <= opts.nuclear_max_iter; ++k) {
    const SymMatrixd x = soft_threshold(z);
    y = project_affine(2.0 * x - z, cs, gram).s;
    const SymMatrixd gap = y - x;
    z += gap;
    out.iterations = k;
    if (gap.frobenius_norm() <= opts.tol * std::max(1.0, y.frobenius_norm())) {
      out.converged = true;
      break;
    }
  }
  const EigDecompd e = eig_sym(y);
  out.nuclear_norm = e.eigenvalues.cwiseAbs().sum();
  out.lambda_min = e.eigenvalues.minCoeff();
  out.s = std::move(y);
  return out;
}

}  // namespace elfit
