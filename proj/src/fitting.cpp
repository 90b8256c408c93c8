#include "elfit/fitting.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace elfit {

namespace {

// 3t^2 - 2t^3 on [0, 1], clamped outside.
double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}

double smoothstep_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 6.0 * t * (1.0 - t);
}

struct Envelope {
  double value;
  double deriv;
};

// Multiplicative envelope w(|z|) and its derivative in |z|.
Envelope envelope(const LossSpec& spec, double a) {
  switch (spec.kind) {
    case LossKind::Power:
      return {1.0, 0.0};
    case LossKind::SmoothedPower: {
      if (spec.smooth_delta == 0.0) return {1.0, 0.0};
      const double half = 0.5 * spec.smooth_delta;
      const double t = (a - half) / half;
      return {smoothstep(t), smoothstep_deriv(t) / half};
    }
    case LossKind::TruncatedPower: {
      if (std::isinf(spec.trunc_A)) return {1.0, 0.0};
      const double t = a - spec.trunc_A;
      return {1.0 - smoothstep(t), -smoothstep_deriv(t)};
    }
  }
  return {1.0, 0.0};
}

double abs_pow(double a, double r) {
  if (r == 1.0) return a;
  if (r == 2.0) return a * a;
  return std::pow(a, r);
}

}  // namespace

void LossSpec::validate() const {
  if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("LossSpec: r must lie in [1, 2]");
  if (kind == LossKind::SmoothedPower && !(smooth_delta >= 0.0 && std::isfinite(smooth_delta)))
    throw std::invalid_argument("LossSpec: smoothing width must be finite and >= 0");
  if (kind == LossKind::TruncatedPower && !(trunc_A > 0.0))
    throw std::invalid_argument("LossSpec: truncation level must be > 0");
}

bool LossSpec::has_bounded_derivative() const {
  return (kind == LossKind::TruncatedPower && std::isfinite(trunc_A)) || r == 1.0;
}

double loss_eval(const LossSpec& spec, double z) {
  const double a = std::abs(z);
  const auto env = envelope(spec, a);
  if (env.value == 0.0) return 0.0;
  return abs_pow(a, spec.r) * env.value;
}

double loss_deriv(const LossSpec& spec, double z) {
  if (z == 0.0) return 0.0;
  const double a = std::abs(z);
  const auto env = envelope(spec, a);
  const double base_deriv = spec.r == 1.0 ? 1.0 : spec.r * abs_pow(a, spec.r - 1.0);
  const double d_abs = base_deriv * env.value + abs_pow(a, spec.r) * env.deriv;
  return z > 0 ? d_abs : -d_abs;
}

double normalization(EnergyMode mode, int n, int d) {
  return mode == EnergyMode::PerConstraint ? 1.0 / double(n) : 1.0 / (double(d) * double(d));
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 16;
  if (values.size() <= kLeaf) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Eigen::VectorXd residuals(const ConstraintSet& cs, const SymMatrixd& s) {
  Eigen::VectorXd res = cs.traces(s);
  res.array() -= cs.b();
  return res;
}

double energy_from_residuals(const Eigen::VectorXd& res, const LossSpec& spec, double norm) {
  std::vector<double> terms(static_cast<std::size_t>(res.size()));
  for (Eigen::Index mu = 0; mu < res.size(); ++mu) terms[std::size_t(mu)] = loss_eval(spec, res[mu]);
  return norm * pairwise_sum(terms);
}

double energy(const ConstraintSet& cs, const SymMatrixd& s, const LossSpec& spec, EnergyMode mode) {
  return energy_from_residuals(residuals(cs, s), spec, normalization(mode, cs.n(), cs.d()));
}

SymMatrixd subgradient_from_residuals(const ConstraintSet& cs, const Eigen::VectorXd& res, const LossSpec& spec,
                                      double norm) {
  Eigen::VectorXd weights = res.unaryExpr([&](double z) { return norm * loss_deriv(spec, z); });
  return cs.combine(weights);
}

SymMatrixd energy_subgradient(const ConstraintSet& cs, const SymMatrixd& s, const LossSpec& spec, EnergyMode mode) {
  return subgradient_from_residuals(cs, residuals(cs, s), spec, normalization(mode, cs.n(), cs.d()));
}

double fit_error_original(const Eigen::MatrixXd& points, const SymMatrixd& s, double r) {
  if (points.cols() == 0) throw std::invalid_argument("fit_error_original: empty point list");
  if (points.rows() != s.dim()) throw std::invalid_argument("fit_error_original: dimension mismatch");
  if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("fit_error_original: r must lie in [1, 2]");
  const double d = double(s.dim());
  const Eigen::RowVectorXd quad = points.cwiseProduct(s.dense() * points).colwise().sum();
  std::vector<double> terms(static_cast<std::size_t>(quad.size()));
  for (Eigen::Index mu = 0; mu < quad.size(); ++mu)
    terms[std::size_t(mu)] = abs_pow(std::abs(std::sqrt(d) * (quad[mu] / d - 1.0)), r);
  return pairwise_sum(terms) / double(points.cols());
}

int count_violations(const ConstraintSet& cs, const SymMatrixd& s, double c) {
  if (!(c >= 0.0)) throw std::invalid_argument("count_violations: threshold must be >= 0");
  return int((residuals(cs, s).array().abs() > c).count());
}

UnitTargetRescaling rescale_to_unit_target(const SymMatrixd& s, double lo, double hi, double eps, double r) {
  const double d = double(s.dim());
  const double root_d = std::sqrt(d);
  const double denom = root_d + s.trace();
  if (!(denom > 0.0)) throw std::domain_error("rescale_to_unit_target: sqrt(d) + Tr[S] must be positive");
  const double inv_root_d = 1.0 / root_d;
  return {s * (d / denom), lo / (hi + inv_root_d), hi / (lo + inv_root_d),
          eps / std::pow(lo + inv_root_d, r)};
}

}  // namespace elfit
