#pragma once

#include <Eigen/Dense>

#include "elfit/rng.hpp"

namespace elfit {

enum class WidthKind { AnalyticLo, AnalyticHi, McExactInner, McLowerBound };

struct WidthEstimate {
  double value = 0.0;
  double std_err = 0.0;  // Monte Carlo standard error, 0 for analytic values
  WidthKind kind = WidthKind::AnalyticLo;
  int trials = 0;
};

struct WidthBounds {
  double lo;
  double hi;
};

/// sqrt(d(d+1)/4 - 1) <= w(S_d^+) <= sqrt(d(d+1)/4).
WidthBounds width_psd_bounds(int d);

/// Mean of ||Z_+||_F over Z = unflatten(g), g standard normal in R^{d(d+1)/2}:
/// the exact inner maximum of Tr[ZS] over unit-Frobenius PSD matrices.
/// Trial i draws from rng.split(i).
WidthEstimate width_psd_mc(int d, int trials, const RngStream& rng, int threads = 1);

/// (d+1)/(4d) = w_hi(d)^2 / d^2.
double alpha_statistical_dimension(int d);

enum class SemicircleMoment { Mass = 0, Mean = 1, SecondMoment = 2 };

/// int_a^b x^k sigma_sc(dx), sigma_sc(dx) = sqrt(4 - x^2) / (2 pi) dx on [-2, 2].
/// Endpoints are clamped to [-2, 2]; throws when a > b after clamping.
double semicircle_integral(SemicircleMoment kind, double a, double b);

double gamma_kappa(double kappa);
/// gamma(kappa) [z_i 1{z_i >= 2/kappa} + (2/kappa) 1{z_i < 2/kappa}]
Eigen::VectorXd lambda_star(const Eigen::VectorXd& z, double kappa);
/// Closed-form lower bound on the normalized width 2 w(K_kappa) / d.
double f_lower_bound(double kappa, double eps);

/// max (1/2) sum lambda_i z_i over lambda_1 >= ... >= lambda_d >= 0,
/// sum lambda_i^2 <= 2d, lambda_1 <= kappa lambda_d, for z sorted descending.
struct ConeKappaInner {
  double value;
  Eigen::VectorXd lambda;
};
ConeKappaInner cone_kappa_inner_max(const Eigen::VectorXd& z_desc, double kappa);

/// 2 E[inner max] / d over GOE(d) spectra; a lower bound on 2 w(K_kappa) / d.
WidthEstimate width_cone_kappa_mc(double kappa, int d, int trials, const RngStream& rng, int threads = 1);

struct GordonScalars {
  double eps;
  double v_star;            // sqrt((4 - eps) / eps)
  double D;                 // E|X| = sqrt(2 / pi)
  double sigma;
  double A_eps;             // E[X^2 1{X <= A}] = sigma
  double margin_b_nonzero;  // (sigma^2/D - u) / sqrt(sigma^2/D^2 + u) * sqrt(1 + eps/2)
  double c1_b0;             // (1/D - u - sqrt((u + D^-2) / (1 + eps/2))) / 2
};

/// Throws std::invalid_argument unless eps, sigma, u all lie in (0, 1).
GordonScalars gordon_scalars(double eps, double sigma, double u);

/// Phi(A) - A phi(A) = E[X^2 1{X <= A}] for X standard normal.
double truncated_second_moment(double a);

}  // namespace elfit
