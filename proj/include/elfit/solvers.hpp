#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elfit/ensembles.hpp"
#include "elfit/errors.hpp"
#include "elfit/fitting.hpp"
#include "elfit/rng.hpp"
#include "elfit/symmat.hpp"

namespace elfit {

/// {S : lo <= Sp(S) <= hi}, optionally intersected with the shell ||S||_F >= fro_floor.
/// The shell makes the set nonconvex; solvers treat it heuristically.
struct SpectralBox {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  std::optional<double> fro_floor;

  static SpectralBox interval(double lo, double hi) { return {lo, hi, std::nullopt}; }
  static SpectralBox psd() { return interval(0.0, std::numeric_limits<double>::infinity()); }
  static SpectralBox unconstrained() {
    return interval(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  }

  void validate() const;
  bool is_convex() const { return !fro_floor.has_value(); }
  bool is_unconstrained() const { return std::isinf(lo) && std::isinf(hi) && lo < 0 && hi > 0; }
  /// A finite representative level inside [lo, hi].
  double mid() const;
  bool contains(const Eigen::VectorXd& eigenvalues, double tol) const;
  /// Eigenvalue clamp, followed by radial rescaling when the Frobenius floor is violated.
  SymMatrixd project(const SymMatrixd& s) const;
  SymMatrixd project(const EigDecompd& e) const;
};

/// Uniform eigenvalues in the box (a finite window when a side is unbounded)
/// in a Haar-random orthonormal basis.
SymMatrixd random_box_point(const SpectralBox& box, int d, RngStream& rng);

/// Ground-state engine. Auto picks PrimalDual for convex power losses over a
/// convex box and Subgradient otherwise.
enum class GsMethod { Auto, Subgradient, PrimalDual };

/// Flat key-value solver configuration. See README for the defaults table.
struct SolverOptions {
  GsMethod method = GsMethod::Auto;
  int max_iter = 5000;              // projected subgradient, per restart
  int feasibility_max_iter = 10000; // alternating projections
  int nuclear_max_iter = 2000;      // Douglas-Rachford
  int restarts = 5;
  double tol = 1e-6;
  double step_c0 = 1.0;             // subgradient: first step length in Frobenius norm
  double pd_balance = 1.0;          // primal-dual: multiplier on the primal/dual step ratio
  int gap_every = 25;               // primal-dual: iterations between duality-gap checks
  double gap_rtol = 1e-3;           // primal-dual: stop when gap <= tol + gap_rtol * energy
  int patience = 1000;              // restart stops after this many iterations without relative gain > tol
  double violation_c = 0.1;
  double margin = 1e-6;             // feasibility: inward shrink of the box, relative to its width
  std::uint64_t seed = 0;
  EnergyMode mode = EnergyMode::PerConstraint;
  bool record_trace = false;

  /// Unknown keys and malformed values throw std::invalid_argument.
  static SolverOptions from_kv(const std::map<std::string, std::string>& kv);
  std::vector<std::pair<std::string, std::string>> to_kv() const;
  void validate() const;
};

struct ResidualStats {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  int violation_count = 0;
};

ResidualStats residual_stats(const Eigen::VectorXd& res, double c);

struct GSResult {
  double gs_value = 0.0;
  SymMatrixd minimizer;
  int iterations = 0;     // total over restarts
  int restarts_used = 0;
  int best_restart = 0;
  GsMethod method = GsMethod::Subgradient; // engine actually used
  double duality_gap = std::numeric_limits<double>::infinity(); // primal-dual only
  ResidualStats residual_stats;
  bool converged = false;
  bool heuristic = false; // nonconvex box (Frobenius floor)
  std::vector<double> restart_values;
  std::vector<double> best_trace; // best-so-far energy per iteration, when recorded
};

enum class GramRank { Full, Deficient };

/// H_{mu nu} = Tr[X_mu X_nu] with its Cholesky factor.
struct GramSystem {
  Eigen::MatrixXd h;
  Eigen::MatrixXd l;  // lower-triangular, L L^T = H + jitter Id
  double jitter = 0.0;
  GramRank rank = GramRank::Full;
  std::string reason;

  bool full_rank() const { return rank == GramRank::Full; }
  /// H^{-1} v; throws GramDeficientError when deficient.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
};

GramSystem gram_system(const ConstraintSet& cs);

struct AffineProjection {
  SymMatrixd s;
  double distance = 0.0;      // sqrt(v^T H^{-1} v)
  Eigen::VectorXd violation;  // v_mu = Tr[X_mu S] - b
};

/// Frobenius-nearest point of V = {S : Tr[X_mu S] = b for all mu}.
AffineProjection project_affine(const SymMatrixd& s, const ConstraintSet& cs, const GramSystem& gram);

/// True when `method` resolves to the primal-dual engine for this loss and box.
bool uses_primal_dual(GsMethod method, const LossSpec& spec, const SpectralBox& box);

GSResult minimize_gs(const ConstraintSet& cs, const LossSpec& spec, const SpectralBox& box,
                     const SolverOptions& opts, const GramSystem* gram = nullptr);

enum class FeasibilityStatus { Success, IterationCap, GramDeficient };

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::IterationCap;
  std::optional<SymMatrixd> s;      // last affine iterate; set on success and at the cap
  std::vector<double> residual_trace; // ||S_k - B_k||, ||B_k - S_{k+1}||, ...
  bool monotone = true;
  int iterations = 0;
  double final_distance = 0.0;

  bool success() const { return status == FeasibilityStatus::Success; }
};

/// Alternating projections between V and the spectral box.
FeasibilityResult solve_feasibility(const ConstraintSet& cs, const SpectralBox& box, const SolverOptions& opts);

struct ExactFitResult {
  SymMatrixd s_exact;
  double lambda_min = 0.0;
  bool certified = false;
  double affine_distance = 0.0;
  double max_residual = 0.0;
};

inline constexpr double kCertifyEigTol = 1e-9;
inline constexpr double kCertifyResidualTol = 1e-8;

/// Projects an approximate solution onto V and certifies positive semidefiniteness.
ExactFitResult exact_fit_attempt(const SymMatrixd& s_approx, const ConstraintSet& cs, const GramSystem& gram);
ExactFitResult exact_fit_attempt(const SymMatrixd& s_approx, const ConstraintSet& cs);

SymMatrixd min_fro_solution(const ConstraintSet& cs, const GramSystem& gram);
SymMatrixd min_fro_solution(const ConstraintSet& cs);

struct NuclearResult {
  SymMatrixd s;
  double nuclear_norm = 0.0;
  double lambda_min = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// argmin ||S||_{S1} over V, Douglas-Rachford splitting between eigenvalue
/// soft-thresholding and the affine projection.
NuclearResult min_nuclear_solution(const ConstraintSet& cs, const SolverOptions& opts);

}  // namespace elfit
