#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "elfit/fitting.hpp"
#include "test_util.hpp"

using namespace elfit;
using elfit::testing::random_sym;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::vector<LossSpec> all_losses() {
  return {LossSpec::power(1.0),         LossSpec::power(1.5),         LossSpec::power(2.0),
          LossSpec::smoothed(1.0, 0.1), LossSpec::smoothed(1.3, 0.5), LossSpec::truncated(1.0, 5.0),
          LossSpec::truncated(2.0, 1.5)};
}

// Points with |z| where phi may be non-differentiable.
bool near_kink(const LossSpec& spec, double z) {
  const double a = std::abs(z);
  if (a < 1e-3) return true;
  if (spec.kind == LossKind::SmoothedPower)
    return std::abs(a - spec.smooth_delta / 2) < 1e-3 || std::abs(a - spec.smooth_delta) < 1e-3;
  if (spec.kind == LossKind::TruncatedPower)
    return std::abs(a - spec.trunc_A) < 1e-3 || std::abs(a - spec.trunc_A - 1) < 1e-3;
  return false;
}

}  // namespace

TEST_CASE("loss examples") {
  CHECK(loss_eval(LossSpec::power(2.0), 3.0) == 9.0);
  CHECK(loss_eval(LossSpec::power(2.0), -3.0) == 9.0);
  auto tr = LossSpec::truncated(1.0, 5.0);
  CHECK(loss_eval(tr, 3.0) == 3.0);
  CHECK(loss_eval(tr, 7.0) == 0.0);
  CHECK(loss_eval(tr, 6.0) == 0.0);
  CHECK(loss_eval(tr, 5.0) == 5.0);
  // continuity on [5, 6]
  double prev = loss_eval(tr, 5.0);
  for (int k = 1; k <= 1000; ++k) {
    const double cur = loss_eval(tr, 5.0 + k * 1e-3);
    CHECK(std::abs(cur - prev) < 0.02);
    prev = cur;
  }
}

TEST_CASE("smoothed loss sandwich |x| <= phi(x) + eta") {
  auto sm = LossSpec::smoothed(1.0, 0.1);
  for (int k = -3000; k <= 3000; ++k) {
    const double x = k * 1e-4;
    const double gap = std::abs(x) - loss_eval(sm, x);
    CHECK(gap >= 0.0);
    CHECK(gap <= 0.1);
  }
  CHECK(loss_eval(sm, 0.04) == 0.0);
  CHECK(loss_eval(sm, 0.1) == doctest::Approx(0.1));
}

TEST_CASE("loss invariants: phi(0) = 0, phi >= 0, even") {
  RngStream rng(1, 0);
  for (const auto& spec : all_losses()) {
    CHECK(loss_eval(spec, 0.0) == 0.0);
    CHECK(loss_deriv(spec, 0.0) == 0.0);
    for (int k = 0; k < 500; ++k) {
      const double z = 8 * rng.normal();
      CHECK(loss_eval(spec, z) >= 0.0);
      CHECK(loss_eval(spec, z) == loss_eval(spec, -z));
      CHECK(loss_deriv(spec, z) == -loss_deriv(spec, -z));
    }
  }
}

TEST_CASE("loss is non-decreasing in |z|") {
  // Truncated losses drop to 0 past A + 1, so they are checked on [0, A] only.
  for (const auto& spec : all_losses()) {
    const double top = spec.kind == LossKind::TruncatedPower ? spec.trunc_A : 20.0;
    double prev = 0.0;
    for (int k = 1; k <= 4000; ++k) {
      const double cur = loss_eval(spec, top * k / 4000.0);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("loss derivative matches central differences away from kinks") {
  RngStream rng(2, 0);
  for (const auto& spec : all_losses()) {
    int checked = 0;
    while (checked < 200) {
      const double z = 4 * rng.normal();
      if (near_kink(spec, z)) continue;
      const double h = 1e-6;
      const double fd = (loss_eval(spec, z + h) - loss_eval(spec, z - h)) / (2 * h);
      CHECK(std::abs(fd - loss_deriv(spec, z)) <= 1e-6 * std::max(1.0, std::abs(fd)));
      ++checked;
    }
  }
  CHECK(loss_deriv(LossSpec::power(1.0), 2.0) == 1.0);
  CHECK(loss_deriv(LossSpec::power(1.0), -2.0) == -1.0);
}

TEST_CASE("loss spec validation") {
  CHECK_THROWS_AS(LossSpec::power(0.5).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec::power(2.5).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec::truncated(1.0, 0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(LossSpec::smoothed(1.0, -1.0).validate(), std::invalid_argument);
  CHECK_NOTHROW(LossSpec::truncated(1.0, kInf).validate());
  CHECK(LossSpec::truncated(2.0, 3.0).has_bounded_derivative());
  CHECK(LossSpec::power(1.0).has_bounded_derivative());
  CHECK_FALSE(LossSpec::power(2.0).has_bounded_derivative());
}

TEST_CASE("residual examples") {
  RngStream rng(3, 0);
  auto cs = sample_constraint_set(4, 6, Ensemble::Goe, 1.5, rng);
  auto r0 = residuals(cs, SymMatrixd::zero(4));
  for (int mu = 0; mu < 6; ++mu) CHECK(r0[mu] == -1.5);

  ConstraintSet zeros(Ensemble::Custom, Eigen::MatrixXd::Zero(9, 4), 0.0);
  CHECK(residuals(zeros, random_sym(3, rng)).isZero(0.0));

  auto ell = sample_constraint_set(7, 20, Ensemble::Ell, 0.7, rng);
  auto s = random_sym(7, rng);
  auto res = residuals(ell, s);
  for (int mu = 0; mu < 20; ++mu) {
    Eigen::VectorXd x = ell.points()->col(mu);
    const double q = (x.dot(s.dense() * x) - s.trace()) / std::sqrt(7.0) - 0.7;
    CHECK(std::abs(res[mu] - q) <= 1e-10);
  }
  CHECK_THROWS_AS(residuals(ell, SymMatrixd::zero(3)), std::invalid_argument);
}

TEST_CASE("energy examples") {
  RngStream rng(4, 0);
  auto cs = sample_constraint_set(5, 8, Ensemble::Ell, 1.0, rng);
  CHECK(energy(cs, SymMatrixd::zero(5), LossSpec::power(1.0), EnergyMode::PerConstraint) == doctest::Approx(1.0));

  // A set whose constraints S solves exactly: X_mu random, b_mu built from S.
  auto s = random_sym(3, rng);
  std::vector<SymMatrixd> mats;
  for (int mu = 0; mu < 4; ++mu) {
    auto x = random_sym(3, rng);
    x.axpy((1.0 - x.dot(s)) / s.dot(s), s);  // now Tr[X S] = 1
    mats.push_back(x);
  }
  auto exact = ConstraintSet::from_matrices(Ensemble::Custom, mats, 1.0);
  CHECK(energy(exact, s, LossSpec::power(2.0), EnergyMode::PerConstraint) <= 1e-24);

  auto small = sample_constraint_set(3, 5, Ensemble::Goe, 1.0, rng);
  auto t = random_sym(3, rng);
  for (const auto& spec : all_losses()) {
    const double per_n = energy(small, t, spec, EnergyMode::PerConstraint);
    const double per_d2 = energy(small, t, spec, EnergyMode::PerD2);
    CHECK(per_d2 == doctest::Approx(per_n * 5.0 / 9.0).epsilon(1e-15));
    CHECK(per_n >= 0.0);
  }
}

TEST_CASE("subgradient examples") {
  RngStream rng(5, 0);
  auto x = random_sym(4, rng);
  auto one = ConstraintSet::from_matrices(Ensemble::Custom, {x}, 0.0);
  auto s = random_sym(4, rng);
  auto g = energy_subgradient(one, s, LossSpec::power(2.0), EnergyMode::PerConstraint);
  auto expect = x * (2.0 * x.dot(s));
  CHECK((g.dense() - expect.dense()).norm() <= 1e-12 * expect.frobenius_norm());

  // Residual beyond A + 1 contributes nothing.
  auto shifted = ConstraintSet::from_matrices(Ensemble::Custom, {x}, x.dot(s) - 10.0);
  CHECK(energy_subgradient(shifted, s, LossSpec::truncated(1.0, 5.0), EnergyMode::PerConstraint).dense().isZero(0.0));
  CHECK(energy(shifted, s, LossSpec::truncated(1.0, 5.0), EnergyMode::PerConstraint) == 0.0);
}

TEST_CASE("subgradient matches finite differences of the energy") {
  RngStream rng(6, 0);
  const int d = 6;
  auto cs = sample_constraint_set(d, 15, Ensemble::Ell, 1.0, rng);
  for (const auto& spec : all_losses()) {
    if (spec.kind == LossKind::Power && spec.r == 1.0) continue;  // not differentiable
    int done = 0;
    while (done < 20) {
      auto s = random_sym(d, rng, 0.5);
      auto dir = random_sym(d, rng);
      dir /= dir.frobenius_norm();
      auto res = residuals(cs, s);
      bool kink = false;
      for (int mu = 0; mu < res.size(); ++mu) kink = kink || near_kink(spec, res[mu]);
      if (kink) continue;
      const double h = 1e-6;
      const double fd = (energy(cs, s + dir * h, spec, EnergyMode::PerD2) -
                         energy(cs, s - dir * h, spec, EnergyMode::PerD2)) / (2 * h);
      const double an = energy_subgradient(cs, s, spec, EnergyMode::PerD2).dot(dir);
      CHECK(std::abs(fd - an) <= 1e-5 * std::max(std::abs(an), 1e-3));
      ++done;
    }
  }
}

TEST_CASE("energy is symmetric under negation when b = 0") {
  RngStream rng(7, 0);
  auto cs = sample_constraint_set(5, 10, Ensemble::Goe, 0.0, rng);
  auto s = random_sym(5, rng);
  for (const auto& spec : all_losses())
    CHECK(energy(cs, s, spec, EnergyMode::PerConstraint) ==
          doctest::Approx(energy(cs.negated(), s, spec, EnergyMode::PerConstraint)).epsilon(1e-15));
}

TEST_CASE("energy is midpoint convex for power losses") {
  RngStream rng(8, 0);
  auto cs = sample_constraint_set(4, 10, Ensemble::Ell, 1.0, rng);
  for (double r : {1.0, 1.5, 2.0}) {
    auto spec = LossSpec::power(r);
    for (int k = 0; k < 1000; ++k) {
      auto a = random_sym(4, rng), b = random_sym(4, rng);
      const double mid = energy(cs, (a + b) * 0.5, spec, EnergyMode::PerConstraint);
      const double avg = 0.5 * (energy(cs, a, spec, EnergyMode::PerConstraint) + energy(cs, b, spec, EnergyMode::PerConstraint));
      CHECK(mid <= avg + 1e-12);
    }
  }
}

TEST_CASE("operator-norm Lipschitz ratio stays bounded across d") {
  // |E(S1) - E(S2)| / ||S1 - S2||_op with 1/d^2 normalization, n = 0.2 d^2.
  // Random pairs only see fluctuations, so each base point is also paired
  // with a small step along the sign of the subgradient spectrum, the
  // direction that attains the dual (nuclear) norm.
  auto max_ratio = [](int d) {
    RngStream rng(9, std::uint64_t(d));
    const int n = int(std::lround(0.2 * d * d));
    auto cs = sample_constraint_set(d, n, Ensemble::Ell, 1.0, rng);
    auto spec = LossSpec::power(1.0);
    auto e = [&](const SymMatrixd& s) { return energy(cs, s, spec, EnergyMode::PerD2); };
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      auto a = random_sym(d, rng, 1 / std::sqrt(double(d)));
      auto b = random_sym(d, rng, 1 / std::sqrt(double(d)));
      worst = std::max(worst, std::abs(e(a) - e(b)) / operator_norm(a - b));
      auto g = energy_subgradient(cs, a, spec, EnergyMode::PerD2);
      auto dir = spectral_map(eig_sym(g), [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
      const double t = 1e-4;
      worst = std::max(worst, std::abs(e(a + dir * t) - e(a)) / (t * operator_norm(dir)));
    }
    return worst;
  };
  const double r20 = max_ratio(20), r30 = max_ratio(30), r40 = max_ratio(40);
  MESSAGE("max ratios d=20,30,40: " << r20 << " " << r30 << " " << r40);
  CHECK(r30 / r20 < 1.25);
  CHECK(r40 / r20 < 1.25);
  CHECK(r40 / r30 < 1.25);
}

TEST_CASE("fit_error_original examples") {
  RngStream rng(10, 0);
  // points on the ellipsoid x^T S x = d
  const int d = 5;
  auto a = random_sym(d, rng);
  Eigen::MatrixXd sd = a.dense() * a.dense() + Eigen::MatrixXd::Identity(d, d);
  auto s = SymMatrixd::symmetrized(sd);
  Eigen::MatrixXd pts(d, 12);
  for (int mu = 0; mu < 12; ++mu) {
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(d, [&] { return rng.normal(); });
    pts.col(mu) = x * std::sqrt(d / x.dot(s.dense() * x));
  }
  CHECK(fit_error_original(pts, s, 1.0) <= 1e-13);
  CHECK_THROWS_AS(fit_error_original(Eigen::MatrixXd(d, 0), s, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_error_original(pts, SymMatrixd::identity(3), 1.0), std::invalid_argument);

  // identity, r = 2, Gaussian points: close to E|Z|^2 = 2 for Z ~ N(0, 2)
  RngStream big(11, 0);
  auto cs = sample_constraint_set(200, 2000, Ensemble::Ell, 1.0, big);
  const double v = fit_error_original(*cs.points(), SymMatrixd::identity(200), 2.0);
  CHECK(std::abs(v - 2.0) < 0.2);

  // equals (1/n) sum |Tr[W S] - (d - Tr S)/sqrt(d)|^r
  auto ell = sample_constraint_set(6, 25, Ensemble::Ell, 1.0, rng);
  auto t = random_sym(6, rng);
  for (double r : {1.0, 1.7}) {
    auto shifted = ell.with_target((6.0 - t.trace()) / std::sqrt(6.0));
    const double via_w = energy(shifted, t, LossSpec::power(r), EnergyMode::PerConstraint);
    CHECK(std::abs(fit_error_original(*ell.points(), t, r) - via_w) <= 1e-10 * std::max(1.0, via_w));
  }
}

TEST_CASE("count_violations examples") {
  RngStream rng(12, 0);
  auto cs = sample_constraint_set(5, 14, Ensemble::Goe, 1.0, rng);
  auto s = random_sym(5, rng);
  CHECK(count_violations(cs, s, kInf) == 0);
  CHECK(count_violations(cs, s, 0.0) == 14);
  CHECK_THROWS_AS(count_violations(cs, s, -1.0), std::invalid_argument);
  // dyadic entries keep Tr[X_mu S] = 1 exact in floating point
  auto sol = SymMatrixd::diagonal(Eigen::Vector3d(2.0, 4.0, 0.5));
  std::vector<SymMatrixd> mats;
  for (int mu = 0; mu < 3; ++mu) {
    auto x = SymMatrixd::zero(3);
    x.set(mu, mu, 1.0 / sol(mu, mu));
    mats.push_back(x);
  }
  auto exact = ConstraintSet::from_matrices(Ensemble::Custom, mats, 1.0);
  CHECK(count_violations(exact, sol, 0.0) == 0);
}

TEST_CASE("rescale_to_unit_target examples") {
  const int d = 9;
  auto r = rescale_to_unit_target(SymMatrixd::identity(d), 0.5, 2.0, 0.1, 1.0);
  CHECK(r.s_hat(0, 0) == doctest::Approx(9.0 / (3.0 + 9.0)));
  auto r2 = rescale_to_unit_target(SymMatrixd::identity(d) * 2.0, 0.5, 2.0, 0.1, 1.0);
  CHECK(r2.s_hat(4, 4) == doctest::Approx(6.0 / 7.0));
  CHECK(r.lo == doctest::Approx(0.5 / (2.0 + 1.0 / 3.0)));
  CHECK(r.hi == doctest::Approx(2.0 / (0.5 + 1.0 / 3.0)));
  CHECK(r.eps == doctest::Approx(0.1 / (0.5 + 1.0 / 3.0)));
  CHECK_THROWS_AS(rescale_to_unit_target(SymMatrixd::identity(4) * -2.0, 0.0, 1.0, 0.1, 1.0), std::domain_error);
}

TEST_CASE("rescaled spectrum lies in the mapped box") {
  RngStream rng(13, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 20;
    const double lo = rng.uniform(0.0, 1.0), hi = lo + rng.uniform(0.0, 3.0);
    Eigen::VectorXd w = Eigen::VectorXd::NullaryExpr(d, [&] { return rng.uniform(lo, hi); });
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::NullaryExpr(d, d, [&] { return rng.normal(); })).householderQ();
    auto s = SymMatrixd::from_spectrum(q, w);
    auto r = rescale_to_unit_target(s, lo, hi, 0.1, 1.5);
    auto ev = eig_sym(r.s_hat).eigenvalues;
    CHECK(ev.minCoeff() >= r.lo - 1e-12);
    CHECK(ev.maxCoeff() <= r.hi + 1e-12);
  }
}
