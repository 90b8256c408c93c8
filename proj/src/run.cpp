#include "elfit/run.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elfit/errors.hpp"
#include "elfit/experiments.hpp"
#include "elfit/geometry.hpp"
#include "elfit/parallel.hpp"
#include "elfit/stats.hpp"

namespace elfit {

namespace {

using I = std::int64_t;
const Cell kEmpty{};

std::string method_name(GsMethod m) { return m == GsMethod::PrimalDual ? "primal_dual" : "subgradient"; }

ConstraintSet problem_for(const RunConfig& cfg, int n, RngStream& rng) {
  if (cfg.coords == Coordinates::Original)
    return to_original_coordinates(sample_constraint_set(cfg.d, n, cfg.ensemble, 1.0, rng));
  return sample_constraint_set(cfg.d, n, cfg.ensemble, cfg.target, rng);
}

RecordTable run_fit(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"seed", "d", "n", "method", "gs_value", "iterations", "restarts_used", "converged",
                 "max_abs_residual", "mean_abs_residual", "violation_count", "certified", "lambda_min",
                 "affine_distance"});
  const int n = cfg.resolved_n();
  std::vector<std::vector<Cell>> rows(std::size_t(cfg.seeds));
  std::vector<double> values(std::size_t(cfg.seeds));
  std::vector<int> certified(std::size_t(cfg.seeds), 0);
  parallel_for(cfg.seeds, cfg.threads, [&](int s) {
    RngStream rng(cfg.master_seed, std::uint64_t(s));
    const ConstraintSet cs = problem_for(cfg, n, rng);
    const GramSystem gram = gram_system(cs);
    const GSResult gs = minimize_gs(cs, cfg.loss, cfg.box, cfg.solver, &gram);
    Cell cert = kEmpty, lmin = kEmpty, dist = kEmpty;
    if (gram.full_rank()) {
      const ExactFitResult ex = exact_fit_attempt(gs.minimizer, cs, gram);
      cert = I(ex.certified);
      lmin = ex.lambda_min;
      dist = ex.affine_distance;
      certified[std::size_t(s)] = ex.certified;
    } else {
      cert = I(0);
    }
    values[std::size_t(s)] = gs.gs_value;
    rows[std::size_t(s)] = {I(s), I(cfg.d), I(n), method_name(gs.method), gs.gs_value, I(gs.iterations),
                            I(gs.restarts_used), I(gs.converged), gs.residual_stats.max_abs,
                            gs.residual_stats.mean_abs, I(gs.residual_stats.violation_count), cert, lmin, dist};
  });
  for (auto& r : rows) t.add_row("trial", std::move(r));
  int cert_count = 0;
  for (int c : certified) cert_count += c;
  t.add_row("summary", {kEmpty, I(cfg.d), I(n), kEmpty, median(values), kEmpty, kEmpty, kEmpty, kEmpty, kEmpty,
                        kEmpty, double(cert_count) / double(cfg.seeds), kEmpty, kEmpty});
  return t;
}

RecordTable run_scan(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"alpha", "d", "n", "seeds", "failures", "q10", "q50", "q90", "exact_fit_rate",
                 "violation_fraction_median", "runtime_ms", "crossing"});
  PhaseScanConfig pc;
  pc.alpha_grid = cfg.alpha_grid();
  pc.d = cfg.d;
  pc.seeds = cfg.seeds;
  pc.spec = cfg.loss;
  pc.box = cfg.box;
  pc.c_violation = cfg.violation_c;
  pc.error_level = cfg.level;
  pc.threads = cfg.threads;
  const PhaseScanResult res = phase_scan(pc, RngStream(cfg.master_seed, 0), cfg.solver);
  for (const auto& p : res.points)
    t.add_row("trial", {p.alpha, I(p.d), I(p.n), I(p.seeds), I(p.failures), p.q10, p.q50, p.q90, p.exact_fit_rate,
                        p.violation_fraction_median, cfg.record_timing ? Cell(I(p.runtime_ms)) : kEmpty, kEmpty});
  t.add_row("summary", {kEmpty, I(cfg.d), kEmpty, I(cfg.seeds), kEmpty, kEmpty, kEmpty, kEmpty, kEmpty, kEmpty, kEmpty,
                        res.crossing ? Cell(*res.crossing) : kEmpty});
  return t;
}

RecordTable run_widths(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"quantity", "d", "kappa", "lo", "hi", "mc", "stderr", "trials"});
  const WidthBounds b = width_psd_bounds(cfg.d);
  const WidthEstimate mc = width_psd_mc(cfg.d, cfg.trials, RngStream(cfg.master_seed, 0), cfg.threads);
  t.add_row("trial", {std::string("psd_cone"), I(cfg.d), kEmpty, b.lo, b.hi, mc.value, mc.std_err, I(mc.trials)});
  const double a = alpha_statistical_dimension(cfg.d);
  t.add_row("trial", {std::string("alpha_statistical_dimension"), I(cfg.d), kEmpty, a, a, kEmpty, kEmpty, kEmpty});
  for (std::size_t k = 0; k < cfg.kappas.size(); ++k) {
    const double kappa = cfg.kappas[k];
    const WidthEstimate w =
        width_cone_kappa_mc(kappa, cfg.d, cfg.trials, RngStream(cfg.master_seed, 1 + k), cfg.threads);
    t.add_row("trial", {std::string("cone_kappa"), I(cfg.d), kappa, f_lower_bound(kappa, cfg.eps), kEmpty, w.value,
                        w.std_err, I(w.trials)});
  }
  return t;
}

RecordTable run_universality_cmd(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"index", "arm_a", "arm_b", "gs_a", "gs_b", "mean_diff", "pooled_stderr", "ks_stat", "failures_a",
                 "failures_b", "bounded_loss"});
  UniversalityOptions u;
  u.arm_a = cfg.ensemble;
  u.arm_b = Ensemble::Goe;
  u.b = cfg.target;
  u.threads = cfg.threads;
  const auto rep = run_universality(cfg.d, cfg.resolved_n(), cfg.loss, cfg.box, cfg.seeds,
                                    RngStream(cfg.master_seed, 0), cfg.solver, u);
  const std::string a(to_string(rep.arm_a)), b(to_string(rep.arm_b));
  const std::size_t rows = std::max(rep.gs_a.size(), rep.gs_b.size());
  for (std::size_t i = 0; i < rows; ++i)
    t.add_row("trial", {I(i), a, b, i < rep.gs_a.size() ? Cell(rep.gs_a[i]) : kEmpty,
                        i < rep.gs_b.size() ? Cell(rep.gs_b[i]) : kEmpty, kEmpty, kEmpty, kEmpty, kEmpty, kEmpty,
                        kEmpty});
  t.add_row("summary", {kEmpty, a, b, mean(rep.gs_a), mean(rep.gs_b), rep.mean_diff, rep.pooled_stderr, rep.ks_stat,
                        I(rep.failures_a), I(rep.failures_b), I(rep.bounded_loss)});
  return t;
}

RecordTable run_interpolate(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(), {"seed", "t", "gs_value", "spread"});
  std::vector<double> grid;
  for (int k = 0; k < cfg.t_steps; ++k)
    grid.push_back(k + 1 == cfg.t_steps ? std::numbers::pi / 2.0
                                        : std::numbers::pi / 2.0 * double(k) / double(cfg.t_steps - 1));
  std::vector<std::vector<InterpolationPoint>> paths(std::size_t(cfg.seeds));
  parallel_for(cfg.seeds, cfg.threads, [&](int s) {
    paths[std::size_t(s)] = run_interpolation(cfg.d, cfg.resolved_n(), cfg.loss, cfg.box, grid,
                                              RngStream(cfg.master_seed, std::uint64_t(s)), cfg.solver, cfg.target);
  });
  std::vector<double> spreads;
  for (int s = 0; s < cfg.seeds; ++s) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : paths[std::size_t(s)]) {
      t.add_row("trial", {I(s), p.t, p.gs_value, kEmpty});
      lo = std::min(lo, p.gs_value);
      hi = std::max(hi, p.gs_value);
    }
    spreads.push_back(hi - lo);
    t.add_row("summary", {I(s), kEmpty, kEmpty, hi - lo});
  }
  t.add_row("summary", {kEmpty, kEmpty, kEmpty, mean(spreads)});
  return t;
}

SymMatrixd clt_matrix(const RunConfig& cfg, RngStream& rng) {
  if (cfg.matrix == "identity") return SymMatrixd::identity(cfg.d);
  if (cfg.matrix == "goe") return sample_goe(cfg.d, rng);
  Eigen::MatrixXd x(cfg.d, cfg.d);
  for (int j = 0; j < cfg.d; ++j)
    for (int i = 0; i < cfg.d; ++i) x(i, j) = rng.normal();
  return SymMatrixd::symmetrized(x * x.transpose() / double(cfg.d));
}

RecordTable run_clt(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"seed", "ensemble", "d", "samples", "ks_to_normal", "ks_critical_1pct", "be_budget", "in_Ad",
                 "degenerate"});
  std::vector<CltReport> reps(std::size_t(cfg.seeds));
  parallel_for(cfg.seeds, cfg.threads, [&](int s) {
    RngStream rng(cfg.master_seed, std::uint64_t(s));
    RngStream mat_rng = rng.split(1);
    reps[std::size_t(s)] = clt_diagnostic(clt_matrix(cfg, mat_rng), cfg.ensemble, cfg.samples, cfg.eta, rng.split(2));
  });
  const double crit = ks_critical_one_sample(cfg.samples, 0.01);
  for (int s = 0; s < cfg.seeds; ++s) {
    const auto& r = reps[std::size_t(s)];
    t.add_row("trial", {I(s), std::string(to_string(r.ensemble)), I(cfg.d), I(r.samples), r.ks_to_normal, crit,
                        r.be_budget, I(r.in_Ad), I(r.degenerate)});
  }
  return t;
}

RecordTable run_processes(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"quantity", "ensemble", "d", "n", "r", "beta", "q", "value", "normalized"});
  const int n = cfg.resolved_n();
  const double r = cfg.loss.r;
  const double op = process_max_op_sphere(cfg.ensemble, r, cfg.d, n, cfg.solver, RngStream(cfg.master_seed, 0));
  t.add_row("trial", {std::string("op_sphere"), std::string(to_string(cfg.ensemble)), I(cfg.d), I(n), r, kEmpty,
                      kEmpty, op, op});
  const double fro = process_max_fro_sphere_goe(r, cfg.d, n, cfg.solver, RngStream(cfg.master_seed, 1));
  t.add_row("trial", {std::string("fro_sphere_goe"), std::string("goe"), I(cfg.d), I(n), r, kEmpty, kEmpty, fro,
                      fro});
  for (std::size_t k = 0; k < cfg.betas.size(); ++k) {
    const double beta = cfg.betas[k];
    const double v = dual_lower_bound_construction(beta, cfg.q, cfg.d, n, RngStream(cfg.master_seed, 2 + k));
    t.add_row("trial", {std::string("dual_construction"), std::string("ell"), I(cfg.d), I(n), kEmpty, beta, cfg.q, v,
                        v * std::pow(beta, 1.0 / cfg.q - 0.5)});
  }
  return t;
}

RecordTable run_baseline(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"r", "d", "n", "trials", "analytic", "mc_mean", "mc_stderr"});
  const int n = cfg.resolved_n();
  const SphereBaseline b = sphere_baseline(cfg.loss.r, cfg.d, n, cfg.trials, RngStream(cfg.master_seed, 0),
                                           cfg.threads);
  t.add_row("trial", {cfg.loss.r, I(cfg.d), I(n), I(cfg.trials), b.analytic, b.mc_mean, b.mc_stderr});
  return t;
}

RecordTable run_nuclear(const RunConfig& cfg) {
  RecordTable t(std::string(to_string(cfg.command)), cfg.echo(),
                {"seed", "d", "n", "nuclear_norm", "min_fro_nuclear_norm", "lambda_min", "converged", "iterations"});
  const int n = cfg.resolved_n();
  std::vector<std::vector<Cell>> rows(std::size_t(cfg.seeds));
  parallel_for(cfg.seeds, cfg.threads, [&](int s) {
    RngStream rng(cfg.master_seed, std::uint64_t(s));
    const ConstraintSet cs = problem_for(cfg, n, rng);
    const NuclearResult nr = min_nuclear_solution(cs, cfg.solver);
    rows[std::size_t(s)] = {I(s), I(cfg.d), I(n), nr.nuclear_norm, nuclear_norm(min_fro_solution(cs)), nr.lambda_min,
                            I(nr.converged), I(nr.iterations)};
  });
  for (auto& r : rows) t.add_row("trial", std::move(r));
  return t;
}

}  // namespace

RecordTable execute(const RunConfig& cfg) {
  switch (cfg.command) {
    case Command::Fit: return run_fit(cfg);
    case Command::Scan: return run_scan(cfg);
    case Command::Widths: return run_widths(cfg);
    case Command::Universality: return run_universality_cmd(cfg);
    case Command::Interpolate: return run_interpolate(cfg);
    case Command::Clt: return run_clt(cfg);
    case Command::Processes: return run_processes(cfg);
    case Command::Baseline: return run_baseline(cfg);
    case Command::Nuclear: return run_nuclear(cfg);
  }
  throw std::logic_error("execute: unknown command");
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string text;
  try {
    RecordTable table = execute(cfg);
    if (cfg.record_timing)
      table.set_wall_time_ms(
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count());
    text = cfg.format == OutputFormat::Csv ? table.to_csv() : table.to_json();
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::runtime_error& e) {
    // Eigensolver non-convergence and similar breakdowns.
    err << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  if (cfg.out_path.empty()) {
    out << text;
    return 0;
  }
  try {
    write_atomic(cfg.out_path, text);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ParseOutcome parsed = parse_config(args);
  if (!parsed.config) {
    (parsed.exit_code == 0 ? out : err) << parsed.message << (parsed.message.ends_with('\n') ? "" : "\n");
    return parsed.exit_code;
  }
  return run(*parsed.config, out, err);
}

}  // namespace elfit
