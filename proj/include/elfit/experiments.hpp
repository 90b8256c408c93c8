#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elfit/ensembles.hpp"
#include "elfit/fitting.hpp"
#include "elfit/rng.hpp"
#include "elfit/solvers.hpp"
#include "elfit/symmat.hpp"

namespace elfit {

// ---------------------------------------------------------------------------
// Ground-state universality

/// GS_d = min over the box of (1/d^2) sum_mu phi(Tr[X_mu S] - b).
struct UniversalityReport {
  int d = 0;
  int n = 0;
  double b = 1.0;
  LossSpec spec;
  SpectralBox box;
  Ensemble arm_a = Ensemble::Ell;
  Ensemble arm_b = Ensemble::Goe;
  std::vector<double> gs_a;  // per successful seed
  std::vector<double> gs_b;
  int failures_a = 0;        // seeds whose solve threw NumericError
  int failures_b = 0;
  double mean_diff = 0.0;    // mean(gs_a) - mean(gs_b)
  double pooled_stderr = 0.0;
  double ks_stat = 0.0;
  /// True when phi is bounded (truncated), the setting the universality
  /// statement covers; unbounded losses are exploratory.
  bool bounded_loss = false;
};

struct UniversalityOptions {
  Ensemble arm_a = Ensemble::Ell;
  Ensemble arm_b = Ensemble::Goe;
  double b = 1.0;
  int threads = 1;
};

/// Seed s draws arm A from rng.split(2s) and arm B from rng.split(2s + 1);
/// both arms share `opts` (energy mode forced to 1/d^2). Needs seeds >= 10.
UniversalityReport run_universality(int d, int n, const LossSpec& spec, const SpectralBox& box, int seeds,
                                    const RngStream& rng, const SolverOptions& opts,
                                    const UniversalityOptions& uopts = {});

struct InterpolationPoint {
  double t;
  double gs_value;
};

/// U_mu(t) = cos(t) W_mu + sin(t) G_mu on a single coupled (W, G) draw.
/// t = 0 and t = pi/2 reproduce the pure W and G sets exactly.
ConstraintSet interpolated_set(const ConstraintSet& w, const ConstraintSet& g, double t);

/// GS (1/d^2 normalization, target b) along the path for t_grid in [0, pi/2].
std::vector<InterpolationPoint> run_interpolation(int d, int n, const LossSpec& spec, const SpectralBox& box,
                                                  const std::vector<double>& t_grid, const RngStream& rng,
                                                  const SolverOptions& opts, double b = 1.0, int threads = 1);

// ---------------------------------------------------------------------------
// Free entropy over finite nets

struct FreeEntropy {
  double F;       // (1/(d^2 beta)) log (1/|net|) sum_S exp(-beta sum_mu phi(Tr[X_mu S] - b))
  double gs_net;  // min over the net of (1/d^2) sum_mu phi(...)
};

/// Throws NumericError if the sandwich gs_net <= -F <= gs_net + log|net| / (beta d^2)
/// fails beyond 1e-12.
FreeEntropy net_free_entropy(const std::vector<SymMatrixd>& net, const ConstraintSet& cs, const LossSpec& spec,
                             double beta);

/// `size` uniform random points of the box (random orthonormal basis, uniform eigenvalues).
std::vector<SymMatrixd> random_net(const SpectralBox& box, int d, int size, const RngStream& rng);

// ---------------------------------------------------------------------------
// One-dimensional CLT

struct CltReport {
  SymMatrixd s;
  Ensemble ensemble = Ensemble::Goe;
  int samples = 0;
  double ks_to_normal = 0.0;  // KS distance of Tr[XS] / sqrt(2 Tr[S^2] / d) to N(0, 1)
  double be_budget = 0.0;     // (Tr|S|^3 / d^{3/2})^{1/3}
  double eta = 0.0;
  bool in_Ad = false;         // Tr|S|^3 <= d^{3/2 - eta}
  bool degenerate = false;    // all samples equal; ks_to_normal is then 1
};

CltReport clt_diagnostic(const SymMatrixd& s, Ensemble ensemble, int samples, double eta, const RngStream& rng);

// ---------------------------------------------------------------------------
// Empirical process maxima

/// (1/n) max over ||S||_op = 1 of sum_mu |Tr[X_mu S]|^r, a lower estimate by
/// projected gradient ascent (eigenvalue clamp to [-1, 1], then rescale so the
/// largest |eigenvalue| is 1), best over opts.restarts random sign starts.
double process_max_op_sphere(Ensemble ensemble, double r, int d, int n, const SolverOptions& opts,
                             const RngStream& rng);
double process_max_op_sphere(const ConstraintSet& cs, double r, const SolverOptions& opts, const RngStream& rng);

/// max over ||S||_F^2 = d of (sum_mu |Tr[G_mu S]|^r)^{1/r} for GOE matrices,
/// divided by n^{1/r}.
double process_max_fro_sphere_goe(double r, int d, int n, const SolverOptions& opts, const RngStream& rng);

/// p^{1 - 1/q} d^{-1/2} || (1/p) sum_{mu <= p} x_mu x_mu^T - Id ||_{S1}, p = round(beta_frac n).
double dual_lower_bound_construction(double beta_frac, double q, int d, int n, const RngStream& rng);

struct SphereBaseline {
  double analytic;  // E|Z|^r for Z ~ N(0, 2): 2^r Gamma((r+1)/2) / sqrt(pi)
  double mc_mean;   // fit error of S = Id averaged over trials
  double mc_stderr;
};

SphereBaseline sphere_baseline(double r, int d, int n, int trials, const RngStream& rng, int threads = 1);
double sphere_baseline_analytic(double r);

// ---------------------------------------------------------------------------
// Phase scan

struct PhasePoint {
  double alpha = 0.0;
  int d = 0;
  int n = 0;
  int seeds = 0;
  int failures = 0;
  double q10 = 0.0, q50 = 0.0, q90 = 0.0;  // min-error quantiles
  double exact_fit_rate = 0.0;
  double violation_fraction_median = 0.0;
  long long runtime_ms = 0;
};

struct PhaseScanConfig {
  std::vector<double> alpha_grid;
  int d = 40;
  int seeds = 20;
  LossSpec spec = LossSpec::power(1.0);
  SpectralBox box = SpectralBox::interval(0.2, 3.0);
  double c_violation = 0.1;
  double error_level = 0.05;  // crossing level for the median min-error
  int threads = 1;
};

struct PhaseScanResult {
  std::vector<PhasePoint> points;
  std::optional<double> crossing;  // interpolated alpha where the median first exceeds error_level
};

/// Ellipse-fitting problems in original coordinates (X = x x^T / sqrt(d),
/// b = sqrt(d)). Seed s draws one point cloud from rng.split(s) and every
/// alpha uses its first round(alpha d^2) points.
PhaseScanResult phase_scan(const PhaseScanConfig& cfg, const RngStream& rng, const SolverOptions& opts);

/// First grid crossing of `level` by `medians`, linearly interpolated.
std::optional<double> crossing_estimate(const std::vector<double>& alphas, const std::vector<double>& medians,
                                        double level);

}  // namespace elfit
