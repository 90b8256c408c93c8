#include "elfit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "elfit/ensembles.hpp"
#include "elfit/parallel.hpp"
#include "elfit/stats.hpp"
#include "elfit/symmat.hpp"

namespace elfit {

WidthBounds width_psd_bounds(int d) {
  const double q = double(d) * double(d + 1) / 4.0;
  if (d < 2 || q < 1.0) throw std::invalid_argument("width_psd_bounds: need d >= 2");
  return {std::sqrt(q - 1.0), std::sqrt(q)};
}

double alpha_statistical_dimension(int d) {
  if (d < 2) throw std::invalid_argument("alpha_statistical_dimension: need d >= 2");
  return double(d + 1) / (4.0 * double(d));
}

namespace {

WidthEstimate summarize(const std::vector<double>& values, WidthKind kind) {
  return {mean(values), std_error(values), kind, int(values.size())};
}

}  // namespace

WidthEstimate width_psd_mc(int d, int trials, const RngStream& rng, int threads) {
  if (d < 1) throw std::invalid_argument("width_psd_mc: need d >= 1");
  if (trials < 2) throw std::invalid_argument("width_psd_mc: need trials >= 2");
  std::vector<double> values(std::size_t(trials), 0.0);
  parallel_for(trials, threads, [&](int t) {
    RngStream sub = rng.split(std::uint64_t(t));
    Eigen::VectorXd g(flat_length(d));
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = sub.normal();
    const Eigen::VectorXd lam = eigenvalues(unflatten<double>(g));
    values[std::size_t(t)] = lam.cwiseMax(0.0).norm();
  });
  return summarize(values, WidthKind::McExactInner);
}

// ---------------------------------------------------------------------------
// Semicircle quadrature

namespace {

double simpson(double a, double fa, double fm, double b, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double fa, double b, double fb, double m, double fm, double whole,
                        double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(a, fa, flm, m, fm);
  const double right = simpson(m, fm, frm, b, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || b - a <= 1e-12 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, fa, b, fb, m, fm, simpson(a, fa, fm, b, fb), tol, 50);
}

}  // namespace

double semicircle_integral(SemicircleMoment kind, double a, double b) {
  if (std::isnan(a) || std::isnan(b)) throw std::invalid_argument("semicircle_integral: NaN endpoint");
  a = std::clamp(a, -2.0, 2.0);
  b = std::clamp(b, -2.0, 2.0);
  if (a > b) throw std::invalid_argument("semicircle_integral: need a <= b");
  const int k = int(kind);
  // x = 2 sin(theta): sigma_sc(dx) = (2 / pi) cos^2(theta) d theta, smooth at the edges.
  auto f = [k](double theta) {
    const double c = std::cos(theta);
    return (2.0 / std::numbers::pi) * std::pow(2.0 * std::sin(theta), k) * c * c;
  };
  return integrate(f, std::asin(a / 2.0), std::asin(b / 2.0), 1e-13);
}

// ---------------------------------------------------------------------------
// Condition-number cone

namespace {

void check_kappa(double kappa) {
  if (!(kappa >= 1.0) || std::isinf(kappa)) throw std::invalid_argument("kappa must be finite and >= 1");
}

}  // namespace

double gamma_kappa(double kappa) {
  check_kappa(kappa);
  const double t = 2.0 / kappa;
  const double denom = semicircle_integral(SemicircleMoment::SecondMoment, t, 2.0) +
                       t * t * semicircle_integral(SemicircleMoment::Mass, -2.0, t);
  return std::sqrt(2.0 / denom);
}

Eigen::VectorXd lambda_star(const Eigen::VectorXd& z, double kappa) {
  const double g = gamma_kappa(kappa);
  const double t = 2.0 / kappa;
  return z.unaryExpr([g, t](double zi) { return g * (zi >= t ? zi : t); });
}

double f_lower_bound(double kappa, double eps) {
  check_kappa(kappa);
  if (!(eps > 0.0) || std::isinf(eps)) throw std::invalid_argument("f_lower_bound: eps must be finite and > 0");
  const double t = 2.0 / kappa;
  const double second = semicircle_integral(SemicircleMoment::SecondMoment, t, 2.0);
  const double num = second + t * semicircle_integral(SemicircleMoment::Mean, -2.0, t);
  const double den = second + t * t * semicircle_integral(SemicircleMoment::Mass, -2.0, t);
  return std::sqrt(2.0 * num * num / den) / std::sqrt(1.0 + eps);
}

ConeKappaInner cone_kappa_inner_max(const Eigen::VectorXd& z, double kappa) {
  check_kappa(kappa);
  const Eigen::Index d = z.size();
  if (d < 1) throw std::invalid_argument("cone_kappa_inner_max: empty spectrum");
  for (Eigen::Index i = 1; i < d; ++i)
    if (z[i] > z[i - 1]) throw std::invalid_argument("cone_kappa_inner_max: z must be sorted descending");
  const double budget = 2.0 * double(d);

  // With the floor m = lambda_d fixed, the feasible set is the box [m, kappa m]^d
  // cut by the ball; the linear maximizer is clamp(t z, m, kappa m) with t >= 0
  // chosen so the ball constraint binds (or t = inf). Sorted z keeps the order.
  auto best_for_floor = [&](double m) {
    auto at = [&](double t) { return z.unaryExpr([&](double zi) { return std::clamp(t * zi, m, kappa * m); }).eval(); };
    Eigen::VectorXd top = z.unaryExpr([&](double zi) { return zi > 0 ? kappa * m : m; });
    if (top.squaredNorm() <= budget) return top;
    double lo = 0.0, hi = 1.0;
    while (at(hi).squaredNorm() < budget) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (at(mid).squaredNorm() <= budget ? lo : hi) = mid;
    }
    return at(lo);
  };
  auto value = [&](double m) { return 0.5 * z.dot(best_for_floor(m)); };

  // The optimal value is concave in m on [0, sqrt(2)]; golden-section search.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = 0.0, b = std::sqrt(2.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = value(x1), f2 = value(x2);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (f1 < f2) {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a); f2 = value(x2);
    } else {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a); f1 = value(x1);
    }
  }
  double m = 0.5 * (a + b);
  // Endpoints can win when the optimum sits on the boundary.
  for (double cand : {0.0, std::sqrt(2.0)})
    if (value(cand) > value(m)) m = cand;
  Eigen::VectorXd lam = best_for_floor(m);
  return {0.5 * z.dot(lam), std::move(lam)};
}

WidthEstimate width_cone_kappa_mc(double kappa, int d, int trials, const RngStream& rng, int threads) {
  check_kappa(kappa);
  if (d < 1) throw std::invalid_argument("width_cone_kappa_mc: need d >= 1");
  if (trials < 2) throw std::invalid_argument("width_cone_kappa_mc: need trials >= 2");
  std::vector<double> values(std::size_t(trials), 0.0);
  parallel_for(trials, threads, [&](int t) {
    RngStream sub = rng.split(std::uint64_t(t));
    const Eigen::VectorXd z = eigenvalues(sample_goe(d, sub));
    values[std::size_t(t)] = 2.0 * cone_kappa_inner_max(z, kappa).value / double(d);
  });
  return summarize(values, WidthKind::McLowerBound);
}

// ---------------------------------------------------------------------------
// Scalars of the Gordon arguments

double truncated_second_moment(double a) {
  if (std::isinf(a)) return a > 0 ? 1.0 : 0.0;
  return normal_cdf(a) - a * normal_pdf(a);
}

GordonScalars gordon_scalars(double eps, double sigma, double u) {
  auto in_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_unit(eps)) throw std::invalid_argument("gordon_scalars: eps must lie in (0, 1)");
  if (!in_unit(sigma)) throw std::invalid_argument("gordon_scalars: sigma must lie in (0, 1); no root otherwise");
  if (!in_unit(u)) throw std::invalid_argument("gordon_scalars: u must lie in (0, 1)");
  GordonScalars g;
  g.eps = eps;
  g.sigma = sigma;
  g.v_star = std::sqrt((4.0 - eps) / eps);
  g.D = std::sqrt(2.0 / std::numbers::pi);

  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (truncated_second_moment(mid) < sigma ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  g.A_eps = 0.5 * (lo + hi);

  const double D = g.D;
  g.margin_b_nonzero = (sigma * sigma / D - u) / std::sqrt(sigma * sigma / (D * D) + u) * std::sqrt(1.0 + eps / 2.0);
  g.c1_b0 = 0.5 * (1.0 / D - u - std::sqrt((u + 1.0 / (D * D)) / (1.0 + eps / 2.0)));
  return g;
}

}  // namespace elfit
