#pragma once

#include <limits>
#include <span>

#include <Eigen/Dense>

#include "elfit/ensembles.hpp"
#include "elfit/symmat.hpp"

namespace elfit {

enum class LossKind { Power, SmoothedPower, TruncatedPower };

/// Even loss phi with phi(0) = 0.
///
///   Power:          |z|^r
///   SmoothedPower:  |z|^r v(|z|), v = 0 on [0, delta/2], 1 on [delta, inf)
///   TruncatedPower: |z|^r u(|z|), u = 1 on [0, A], 0 on [A + 1, inf)
///
/// The transition factors u and v are cubic smoothsteps (C^1).
struct LossSpec {
  LossKind kind = LossKind::Power;
  double r = 1.0;
  double smooth_delta = 0.0;
  double trunc_A = std::numeric_limits<double>::infinity();

  static LossSpec power(double r) { return {LossKind::Power, r, 0.0, std::numeric_limits<double>::infinity()}; }
  static LossSpec smoothed(double r, double delta) { return {LossKind::SmoothedPower, r, delta, std::numeric_limits<double>::infinity()}; }
  static LossSpec truncated(double r, double A) { return {LossKind::TruncatedPower, r, 0.0, A}; }

  /// Throws std::invalid_argument when r is outside [1, 2] or a level is invalid.
  void validate() const;
  /// phi is bounded (truncated) or has bounded derivative (r == 1).
  bool has_bounded_derivative() const;
};

double loss_eval(const LossSpec& spec, double z);
/// phi'(z); for r = 1 the subgradient at 0 is taken to be 0.
double loss_deriv(const LossSpec& spec, double z);

enum class EnergyMode { PerConstraint, PerD2 };

double normalization(EnergyMode mode, int n, int d);

/// Deterministic pairwise (tree) summation.
double pairwise_sum(std::span<const double> values);

/// (Tr[X_mu S] - b)_mu
Eigen::VectorXd residuals(const ConstraintSet& cs, const SymMatrixd& s);
/// normalization * sum_mu phi(residual_mu)
double energy(const ConstraintSet& cs, const SymMatrixd& s, const LossSpec& spec, EnergyMode mode);
double energy_from_residuals(const Eigen::VectorXd& res, const LossSpec& spec, double norm);
/// normalization * sum_mu phi'(residual_mu) X_mu
SymMatrixd energy_subgradient(const ConstraintSet& cs, const SymMatrixd& s, const LossSpec& spec, EnergyMode mode);
SymMatrixd subgradient_from_residuals(const ConstraintSet& cs, const Eigen::VectorXd& res, const LossSpec& spec,
                                      double norm);

/// (1/n) sum_mu | sqrt(d) (x_mu^T S x_mu / d - 1) |^r over the columns of `points` (d x n).
double fit_error_original(const Eigen::MatrixXd& points, const SymMatrixd& s, double r);

/// #{mu : |residual_mu| > c}
int count_violations(const ConstraintSet& cs, const SymMatrixd& s, double c);

struct UnitTargetRescaling {
  SymMatrixd s_hat;  // d S / (sqrt(d) + Tr S)
  double lo;
  double hi;
  double eps;
};

/// Maps a solution of the b = 1 problem with spectrum in [lo, hi] and error
/// eps (loss |.|^r) to a solution of the original ellipsoid problem.
/// Throws std::domain_error when sqrt(d) + Tr S <= 0.
UnitTargetRescaling rescale_to_unit_target(const SymMatrixd& s, double lo, double hi, double eps, double r);

}  // namespace elfit
