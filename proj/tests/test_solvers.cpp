#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "elfit/solvers.hpp"
#include "elfit/stats.hpp"
#include "test_util.hpp"

using namespace elfit;
using elfit::testing::random_sym;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Flattened design: row mu is flatten(X_mu), so Tr[X_mu S] = (A flatten(S))_mu.
Eigen::MatrixXd flat_design(const ConstraintSet& cs) {
  Eigen::MatrixXd a(cs.n(), flat_length(cs.d()));
  for (int mu = 0; mu < cs.n(); ++mu) a.row(mu) = flatten(cs.matrix(mu)).coords.transpose();
  return a;
}

SymMatrixd mat2(double a, double b, double c) {
  SymMatrixd s(2);
  s.set(0, 0, a);
  s.set(0, 1, b);
  s.set(1, 1, c);
  return s;
}

}  // namespace

TEST_CASE("spectral box basics") {
  CHECK_THROWS_AS(SpectralBox::interval(2.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS((SpectralBox{0.0, 1.0, -1.0}).validate(), std::invalid_argument);
  CHECK(SpectralBox::psd().is_convex());
  CHECK_FALSE((SpectralBox{0.0, kInf, 2.0}).is_convex());
  CHECK(SpectralBox::unconstrained().is_unconstrained());
  RngStream rng(1, 0);
  for (auto box : {SpectralBox::interval(0.2, 3.0), SpectralBox::psd(), SpectralBox::interval(-kInf, 1.0)}) {
    for (int k = 0; k < 20; ++k) {
      auto p = random_box_point(box, 6, rng);
      CHECK(box.contains(eig_sym(p).eigenvalues, 1e-12));
      CHECK(box.contains(eig_sym(box.project(random_sym(6, rng))).eigenvalues, 1e-9));
    }
  }
  // the Frobenius floor is enforced by radial rescaling
  SpectralBox shell{0.0, kInf, 3.0};
  auto p = shell.project(SymMatrixd::identity(4) * 0.1);
  CHECK(p.frobenius_norm() == doctest::Approx(3.0));
}

TEST_CASE("solver options key-value round trip") {
  SolverOptions o;
  o.method = GsMethod::Subgradient;
  o.max_iter = 123;
  o.tol = 2.5e-7;
  o.seed = 99;
  o.mode = EnergyMode::PerD2;
  std::map<std::string, std::string> kv;
  for (auto& [k, v] : o.to_kv()) kv[k] = v;
  auto back = SolverOptions::from_kv(kv);
  CHECK(back.to_kv() == o.to_kv());
  CHECK(back.method == GsMethod::Subgradient);
  CHECK(back.tol == 2.5e-7);
  CHECK_THROWS_AS(SolverOptions::from_kv({{"bogus", "1"}}), std::invalid_argument);
  CHECK_THROWS_AS(SolverOptions::from_kv({{"max_iter", "abc"}}), std::invalid_argument);
  CHECK_THROWS_AS(SolverOptions::from_kv({{"restarts", "0"}}), std::invalid_argument);
  CHECK_THROWS_AS(SolverOptions::from_kv({{"method", "newton"}}), std::invalid_argument);
}

TEST_CASE("engine selection") {
  auto box = SpectralBox::interval(0.0, 3.0);
  CHECK(uses_primal_dual(GsMethod::Auto, LossSpec::power(1.0), box));
  CHECK(uses_primal_dual(GsMethod::Auto, LossSpec::power(2.0), SpectralBox::psd()));
  CHECK_FALSE(uses_primal_dual(GsMethod::Auto, LossSpec::truncated(1.0, 10.0), box));
  CHECK_FALSE(uses_primal_dual(GsMethod::Auto, LossSpec::power(1.0), SpectralBox{0.0, kInf, 1.0}));
  CHECK_FALSE(uses_primal_dual(GsMethod::Subgradient, LossSpec::power(1.0), box));
  RngStream rng(2, 0);
  auto cs = sample_constraint_set(4, 5, Ensemble::Goe, 1.0, rng);
  SolverOptions o;
  o.method = GsMethod::PrimalDual;
  CHECK_THROWS_AS(minimize_gs(cs, LossSpec::truncated(1.0, 3.0), box, o), std::invalid_argument);
}

TEST_CASE("gram system examples") {
  // orthonormal family: unit matrices E_aa and (E_ab + E_ba)/sqrt(2)
  std::vector<SymMatrixd> basis;
  for (int k = 0; k < 6; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
    e[k] = 1.0;
    basis.push_back(unflatten(e));
  }
  auto ortho = ConstraintSet::from_matrices(Ensemble::Custom, basis, 1.0);
  auto g = gram_system(ortho);
  CHECK(g.full_rank());
  CHECK((g.h - Eigen::MatrixXd::Identity(6, 6)).norm() <= 1e-15);

  RngStream rng(3, 0);
  auto x = random_sym(4, rng);
  auto one = gram_system(ConstraintSet::from_matrices(Ensemble::Custom, {x}, 1.0));
  CHECK(one.h.rows() == 1);
  CHECK(one.h(0, 0) == doctest::Approx(x.dot(x)).epsilon(1e-14));

  auto cs = sample_constraint_set(6, 10, Ensemble::Ell, 1.0, rng);
  auto gs = gram_system(cs);
  for (int mu = 0; mu < 10; ++mu)
    for (int nu = 0; nu < 10; ++nu) {
      double brute = 0.0;
      auto a = cs.matrix(mu), b = cs.matrix(nu);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) brute += a(i, j) * b(j, i);
      CHECK(std::abs(gs.h(mu, nu) - brute) <= 1e-12 * std::max(1.0, std::abs(brute)));
    }
  Eigen::MatrixXd llt = gs.l * gs.l.transpose();
  llt.diagonal().array() -= gs.jitter;
  CHECK((llt - gs.h).norm() <= 1e-8 * gs.h.norm());
}

TEST_CASE("gram system declares deficiency") {
  RngStream rng(4, 0);
  auto too_many = sample_constraint_set(4, 11, Ensemble::Ell, 1.0, rng);
  auto g = gram_system(too_many);
  CHECK_FALSE(g.full_rank());
  CHECK_THROWS_AS(project_affine(SymMatrixd::zero(4), too_many, g), GramDeficientError);
  CHECK_THROWS_AS(min_fro_solution(too_many), GramDeficientError);

  auto x = random_sym(3, rng);
  // An exactly repeated constraint is singular; the jitter policy rescues it
  // and records the jitter, and the consistent system is still solved.
  auto dup = ConstraintSet::from_matrices(Ensemble::Custom, {x, x, random_sym(3, rng)}, 1.0);
  auto gd = gram_system(dup);
  CHECK(gd.full_rank());
  CHECK(gd.jitter > 0.0);
  CHECK(residuals(dup, min_fro_solution(dup, gd)).cwiseAbs().maxCoeff() <= 1e-6);

  // The zero matrix cannot be rescued.
  auto zero = ConstraintSet::from_matrices(Ensemble::Custom, {SymMatrixd::zero(3)}, 1.0);
  CHECK_FALSE(gram_system(zero).full_rank());
  CHECK_THROWS_AS(exact_fit_attempt(SymMatrixd::zero(3), zero), GramDeficientError);
}

TEST_CASE("project_affine examples") {
  RngStream rng(5, 0);
  auto cs = sample_constraint_set(5, 8, Ensemble::Goe, 1.0, rng);
  auto g = gram_system(cs);
  auto in_v = project_affine(random_sym(5, rng), cs, g).s;
  auto again = project_affine(in_v, cs, g);
  CHECK(again.distance <= 1e-12);
  CHECK((again.s.dense() - in_v.dense()).norm() <= 1e-12);

  // single hyperplane <a, flatten S> = 1
  auto x = random_sym(4, rng);
  auto hyper = ConstraintSet::from_matrices(Ensemble::Custom, {x}, 1.0);
  auto s = random_sym(4, rng);
  auto p = project_affine(s, hyper, gram_system(hyper));
  const Eigen::VectorXd a = flatten(x).coords;
  CHECK(p.distance == doctest::Approx(std::abs(a.dot(flatten(s).coords) - 1.0) / a.norm()).epsilon(1e-12));

  // least-squares oracle: minimum-norm correction from the normal equations
  // solved by dense elimination
  const Eigen::MatrixXd af = flat_design(cs);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = random_sym(5, rng);
    const Eigen::VectorXd v = af * flatten(t).coords - Eigen::VectorXd::Ones(8);
    const Eigen::VectorXd y = (af * af.transpose()).fullPivLu().solve(v);
    const Eigen::VectorXd corrected = flatten(t).coords - af.transpose() * y;
    auto proj = project_affine(t, cs, g);
    CHECK(proj.distance == doctest::Approx((af.transpose() * y).norm()).epsilon(1e-8));
    CHECK((flatten(proj.s).coords - corrected).norm() <= 1e-8 * std::max(1.0, corrected.norm()));
  }
}

TEST_CASE("project_affine: distance identity, feasibility, idempotence, joint linearity") {
  RngStream rng(6, 0);
  for (int trial = 0; trial < 30; ++trial) {
    auto cs = sample_constraint_set(6, 10, trial % 2 ? Ensemble::Ell : Ensemble::Goe, rng.normal(), rng);
    auto g = gram_system(cs);
    auto s = random_sym(6, rng);
    auto p = project_affine(s, cs, g);
    const Eigen::VectorXd v = residuals(cs, s);
    const double quad = v.dot(g.h.fullPivLu().solve(v));
    const double dist2 = (p.s.dense() - s.dense()).squaredNorm();
    CHECK(std::abs(dist2 - quad) <= 1e-8 * std::max(quad, 1e-300));
    CHECK(residuals(cs, p.s).cwiseAbs().maxCoeff() <= 1e-8);
    auto pp = project_affine(p.s, cs, g);
    CHECK((pp.s.dense() - p.s.dense()).norm() <= 1e-10 * std::max(1.0, p.s.frobenius_norm()));

    // P(a S1 + c S2; a b1 + c b2) = a P(S1; b1) + c P(S2; b2)
    const double b1 = rng.normal(), b2 = rng.normal(), ca = rng.normal(), cc = rng.normal();
    auto s1 = random_sym(6, rng), s2 = random_sym(6, rng);
    auto lhs = project_affine(s1 * ca + s2 * cc, cs.with_target(ca * b1 + cc * b2), g).s;
    auto rhs = project_affine(s1, cs.with_target(b1), g).s * ca + project_affine(s2, cs.with_target(b2), g).s * cc;
    CHECK((lhs.dense() - rhs.dense()).norm() <= 1e-10 * std::max(1.0, rhs.frobenius_norm()));
  }
}

TEST_CASE("min_fro_solution examples") {
  const int d = 5;
  auto x = SymMatrixd::identity(d) / std::sqrt(double(d));
  auto cs = ConstraintSet::from_matrices(Ensemble::Custom, {x}, 2.0);
  auto s = min_fro_solution(cs);
  CHECK((s.dense() - (x * 2.0).dense()).norm() <= 1e-12);

  RngStream rng(7, 0);
  auto r = sample_constraint_set(4, 6, Ensemble::Ell, 1.0, rng);
  auto s1 = min_fro_solution(r), s2 = min_fro_solution(r.with_target(2.0));
  CHECK((s2.dense() - 2.0 * s1.dense()).norm() <= 1e-12 * s2.frobenius_norm());
  CHECK((min_fro_solution(r).dense() - project_affine(SymMatrixd::zero(4), r, gram_system(r)).s.dense()).norm() == 0.0);

  // perturbations inside V never have a smaller norm
  auto homogeneous = r.with_target(0.0);
  auto g = gram_system(r);
  for (int k = 0; k < 100; ++k) {
    auto null_dir = project_affine(random_sym(4, rng), homogeneous, g).s;
    auto other = s1 + null_dir;
    CHECK(residuals(r, other).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(other.frobenius_norm() >= s1.frobenius_norm() - 1e-12);
  }
}

TEST_CASE("solve_feasibility examples") {
  SolverOptions o;
  int success = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(8, seed);
    auto cs = sample_constraint_set(10, 5, Ensemble::Goe, 1.0, rng);
    auto res = solve_feasibility(cs, SpectralBox::psd(), o);
    CHECK(res.monotone);
    if (res.success()) {
      ++success;
      CHECK(residuals(cs, *res.s).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(lambda_min(*res.s) >= -1e-9);
    }
  }
  MESSAGE("feasibility successes at d=10, n=5, PSD: " << success << "/10");
  CHECK(success >= 9);

  RngStream rng(9, 0);
  auto big = sample_constraint_set(4, 11, Ensemble::Goe, 1.0, rng);
  auto bad = solve_feasibility(big, SpectralBox::psd(), o);
  CHECK(bad.status == FeasibilityStatus::GramDeficient);
  CHECK(bad.iterations == 0);

  auto cs = sample_constraint_set(6, 9, Ensemble::Ell, 1.0, rng);
  auto free = solve_feasibility(cs, SpectralBox::unconstrained(), o);
  CHECK(free.success());
  CHECK(free.iterations == 0);
  CHECK(residuals(cs, *free.s).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("alternating projections are monotone on every run") {
  SolverOptions o;
  o.feasibility_max_iter = 300;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(10, seed);
    auto cs = to_original_coordinates(sample_constraint_set(8, 20, Ensemble::Ell, 1.0, rng));
    auto res = solve_feasibility(cs, SpectralBox::interval(0.2, 3.0), o);
    CHECK(res.monotone);
    for (std::size_t k = 1; k < res.residual_trace.size(); ++k)
      CHECK(res.residual_trace[k] <= res.residual_trace[k - 1] + 1e-12 * std::max(1.0, res.residual_trace[0]));
  }
}

TEST_CASE("minimize_gs: single satisfiable constraint") {
  RngStream rng(11, 0);
  auto cs = ConstraintSet::from_matrices(Ensemble::Custom, {sample_goe(5, rng)}, 1.0);
  for (auto method : {GsMethod::Subgradient, GsMethod::PrimalDual}) {
    SolverOptions o;
    o.method = method;
    auto r = minimize_gs(cs, LossSpec::power(1.0), SpectralBox::interval(-2.0, 2.0), o);
    CHECK(r.gs_value <= 1e-6);
  }
}

TEST_CASE("minimize_gs matches a grid over 2x2 matrices") {
  // phi = |.|^2, box [0, 10], two constraints. Coarse grid, then step 0.01
  // around the coarse optimum; PSD and operator-norm constraints checked
  // from the closed-form 2x2 eigenvalues.
  RngStream rng(12, 0);
  auto cs = sample_constraint_set(2, 2, Ensemble::Goe, 1.0, rng);
  auto e = [&](double a, double b, double c) {
    const double m = 0.5 * (a + c), r = std::hypot(0.5 * (a - c), b);
    if (m - r < 0.0 || m + r > 10.0) return kInf;
    return energy(cs, mat2(a, b, c), LossSpec::power(2.0), EnergyMode::PerConstraint);
  };
  double best = kInf, ba = 0, bb = 0, bc = 0;
  for (double a = 0; a <= 10; a += 0.1)
    for (double c = 0; c <= 10; c += 0.1)
      for (double b = -5; b <= 5; b += 0.1)
        if (double v = e(a, b, c); v < best) best = v, ba = a, bb = b, bc = c;
  double fine = best;
  for (int i = -50; i <= 50; ++i)
    for (int j = -50; j <= 50; ++j)
      for (int k = -50; k <= 50; ++k) fine = std::min(fine, e(ba + 0.01 * i, bb + 0.01 * j, bc + 0.01 * k));

  for (auto method : {GsMethod::Subgradient, GsMethod::PrimalDual}) {
    SolverOptions o;
    o.method = method;
    o.max_iter = 20000;
    auto r = minimize_gs(cs, LossSpec::power(2.0), SpectralBox::interval(0.0, 10.0), o);
    CHECK(r.gs_value <= fine + 1e-3);
    CHECK(r.gs_value >= fine - 1e-3);
    CHECK(SpectralBox::interval(0.0, 10.0).contains(eig_sym(r.minimizer).eigenvalues, 1e-9));
  }
}

TEST_CASE("minimize_gs: best-so-far trace, probes and box membership") {
  RngStream rng(13, 0);
  auto cs = sample_constraint_set(8, 20, Ensemble::Ell, 1.0, rng);
  auto box = SpectralBox::interval(0.0, 3.0);
  for (auto spec : {LossSpec::power(1.0), LossSpec::truncated(1.0, 2.0), LossSpec::smoothed(1.0, 0.2)}) {
    SolverOptions o;
    o.record_trace = true;
    o.max_iter = 1000;
    auto r = minimize_gs(cs, spec, box, o);
    REQUIRE(!r.best_trace.empty());
    for (std::size_t k = 1; k < r.best_trace.size(); ++k) CHECK(r.best_trace[k] <= r.best_trace[k - 1]);
    CHECK(box.contains(eig_sym(r.minimizer).eigenvalues, 1e-9));
    CHECK(energy(cs, r.minimizer, spec, o.mode) == doctest::Approx(r.gs_value).epsilon(1e-12));
    CHECK(r.gs_value <= energy(cs, SymMatrixd::zero(8), spec, o.mode) + 1e-12);
    CHECK(r.gs_value <= energy(cs, SymMatrixd::identity(8) * box.mid(), spec, o.mode) + 1e-12);
  }
}

TEST_CASE("minimize_gs is insensitive to restart seeds on convex instances") {
  RngStream rng(14, 0);
  auto cs = to_original_coordinates(sample_constraint_set(10, 40, Ensemble::Ell, 1.0, rng));
  auto box = SpectralBox::interval(0.2, 3.0);
  std::vector<double> values;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SolverOptions o;
    o.seed = seed;
    values.push_back(minimize_gs(cs, LossSpec::power(1.0), box, o).gs_value);
  }
  const double lo = *std::min_element(values.begin(), values.end());
  const double hi = *std::max_element(values.begin(), values.end());
  CHECK(hi - lo <= 1e-3 * (1.0 + lo));

  // and the two engines agree on a long subgradient run
  SolverOptions sg;
  sg.method = GsMethod::Subgradient;
  sg.max_iter = 20000;
  sg.patience = 20000;
  const double slow = minimize_gs(cs, LossSpec::power(1.0), box, sg).gs_value;
  MESSAGE("primal-dual " << lo << ", subgradient " << slow);
  CHECK(slow >= lo - 1e-3 * (1.0 + lo));
}

TEST_CASE("minimize_gs: small-alpha ellipse fits have tiny energy") {
  // d = 40, n = 0.15 d^2 in original coordinates, phi = |.|, box [0.2, 3]
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(15, seed);
    auto cs = to_original_coordinates(sample_constraint_set(40, 240, Ensemble::Ell, 1.0, rng));
    SolverOptions o;
    auto r = minimize_gs(cs, LossSpec::power(1.0), SpectralBox::interval(0.2, 3.0), o);
    good += r.gs_value < 0.05;
  }
  MESSAGE("seeds with gs < 0.05: " << good << "/20");
  CHECK(good >= 18);
}

TEST_CASE("exact_fit_attempt examples") {
  // already an exact PSD fit
  RngStream rng(16, 0);
  auto cs = to_original_coordinates(sample_constraint_set(6, 8, Ensemble::Ell, 1.0, rng));
  auto g = gram_system(cs);
  auto feas = solve_feasibility(cs, SpectralBox::interval(0.05, 10.0), SolverOptions{});
  REQUIRE(feas.success());
  auto fit = exact_fit_attempt(*feas.s, cs, g);
  CHECK(fit.certified);
  CHECK(fit.affine_distance <= 1e-8);
  CHECK(fit.lambda_min >= 0.05 - 1e-9);

  // far from V with lambda_min at the box floor: may fail, never throws
  auto s = SymMatrixd::identity(6) * 0.01;
  s.set(0, 0, 0.0);
  ExactFitResult res;
  CHECK_NOTHROW(res = exact_fit_attempt(s, cs, g));
  CHECK(res.affine_distance > 0.0);
  if (!res.certified) CHECK((res.lambda_min < -kCertifyEigTol || res.max_residual > kCertifyResidualTol));
}

TEST_CASE("certified fits pass an independent recheck") {
  int certified = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(17, seed);
    auto ell = sample_constraint_set(12, 14, Ensemble::Ell, 1.0, rng);
    auto cs = to_original_coordinates(ell);
    auto g = gram_system(cs);
    auto gs = minimize_gs(cs, LossSpec::power(1.0), SpectralBox::interval(0.2, 3.0), SolverOptions{}, &g);
    auto fit = exact_fit_attempt(gs.minimizer, cs, g);
    if (!fit.certified) continue;
    ++certified;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.s_exact.dense());
    CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    for (int mu = 0; mu < 14; ++mu) {
      Eigen::VectorXd x = ell.points()->col(mu);
      CHECK(std::abs(x.dot(fit.s_exact.dense() * x) - 12.0) <= 1e-8 * std::sqrt(12.0));
    }
  }
  CHECK(certified >= 8);
}

TEST_CASE("min_nuclear_solution: trace hyperplane") {
  const int d = 6;
  SolverOptions o;
  o.tol = 1e-10;
  auto cs = ConstraintSet::from_matrices(Ensemble::Custom, {SymMatrixd::identity(d) / std::sqrt(double(d))},
                                         std::sqrt(double(d)));
  auto r = min_nuclear_solution(cs, o);
  CHECK(r.s.trace() == doctest::Approx(double(d)).epsilon(1e-8));
  CHECK(r.nuclear_norm == doctest::Approx(double(d)).epsilon(1e-4));
}

TEST_CASE("min_nuclear_solution matches a line search at d = 2, n = 2") {
  // V is a line S0 + t N in S_2.
  SolverOptions o;
  o.tol = 1e-11;
  o.nuclear_max_iter = 20000;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream rng(18, seed);
    auto cs = sample_constraint_set(2, 2, Ensemble::Goe, 1.0, rng);
    auto g = gram_system(cs);
    auto s0 = min_fro_solution(cs, g);
    auto n = project_affine(random_sym(2, rng), cs.with_target(0.0), g).s;
    n /= n.frobenius_norm();
    double best = kInf;
    for (int k = -400000; k <= 400000; ++k) best = std::min(best, nuclear_norm(s0 + n * (k * 5e-5)));
    auto r = min_nuclear_solution(cs, o);
    CHECK(residuals(cs, r.s).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.nuclear_norm == doctest::Approx(best).epsilon(1e-4));
  }
}

TEST_CASE("min_nuclear_solution: PSD probe at alpha = 0.15 (reported)") {
  SolverOptions o;
  int psd = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream rng(19, seed);
    auto cs = to_original_coordinates(sample_constraint_set(30, 135, Ensemble::Ell, 1.0, rng));
    auto r = min_nuclear_solution(cs, o);
    CHECK(residuals(cs, r.s).cwiseAbs().maxCoeff() <= 1e-6);
    psd += r.lambda_min >= -1e-6;
  }
  MESSAGE("nuclear-norm solutions with lambda_min >= -1e-6: " << psd << "/5");
}
