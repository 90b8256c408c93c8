#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "elfit/rng.hpp"
#include "elfit/symmat.hpp"

namespace elfit {

/// Custom tags sets built from caller-supplied matrices (interpolated,
/// transformed or hand-made constraint families).
enum class Ensemble : std::uint32_t { Goe = 0, Ell = 1, RademacherEll = 2, Custom = 3 };

std::string_view to_string(Ensemble e);
/// Accepts "goe", "ell", "rademacher_ell" (case-insensitive).
Ensemble parse_ensemble(std::string_view name);

struct EllDraw {
  SymMatrixd w;
  Eigen::VectorXd x;
};

/// Off-diagonal entries N(0, 1/d), diagonal N(0, 2/d).
SymMatrixd sample_goe(int d, RngStream& rng);
/// W = (x x^T - Id) / sqrt(d), x ~ N(0, Id).
EllDraw sample_ell(int d, RngStream& rng);
/// W = (x x^T - Id) / sqrt(d), x uniform on {-1, +1}^d.
EllDraw sample_rademacher_ell(int d, RngStream& rng);

/// A batch of n constraint matrices X_mu in S_d with a common target b.
///
/// Matrices are stored column-wise in a d^2 x n design matrix, column mu
/// holding vec(X_mu), so Tr[X_mu S] for all mu is a single GEMV.
class ConstraintSet {
 public:
  ConstraintSet(Ensemble ensemble, Eigen::MatrixXd design, double b,
                std::optional<Eigen::MatrixXd> points = std::nullopt);

  static ConstraintSet from_matrices(Ensemble ensemble, const std::vector<SymMatrixd>& matrices, double b,
                                     std::optional<Eigen::MatrixXd> points = std::nullopt);

  int d() const { return d_; }
  int n() const { return n_; }
  Ensemble ensemble() const { return ensemble_; }
  double b() const { return b_; }
  const Eigen::MatrixXd& design() const { return design_; }
  /// d x n, column mu is x_mu; always present for point ensembles, optional for Custom.
  const std::optional<Eigen::MatrixXd>& points() const { return points_; }

  SymMatrixd matrix(int mu) const;
  /// (Tr[X_mu S])_mu
  Eigen::VectorXd traces(const SymMatrixd& s) const;
  /// sum_mu w_mu X_mu
  SymMatrixd combine(const Eigen::VectorXd& weights) const;

  ConstraintSet with_target(double b) const;
  ConstraintSet negated() const;

  friend bool operator==(const ConstraintSet& a, const ConstraintSet& b);

 private:
  Ensemble ensemble_;
  int d_;
  int n_;
  double b_;
  Eigen::MatrixXd design_;
  std::optional<Eigen::MatrixXd> points_;
};

/// n independent draws from `ensemble`, consumed sequentially from `rng`.
ConstraintSet sample_constraint_set(int d, int n, Ensemble ensemble, double b, RngStream& rng);

/// The same points in uncentered form: X_mu = x_mu x_mu^T / sqrt(d), b = sqrt(d),
/// so that Tr[X_mu S] - b = sqrt(d) (x_mu^T S x_mu / d - 1). Requires points;
/// the result is tagged Custom and keeps them.
ConstraintSet to_original_coordinates(const ConstraintSet& cs);

/// Binary replay format, little-endian:
///   "ELFITCS\0" | u32 version | u32 d | u32 n | u32 ensemble | u32 has_points | f64 b
///   | n*d*d f64 (each X_mu row-major) | [n*d f64 points, point-major]
inline constexpr std::uint32_t kConstraintSetFormatVersion = 1;
void save_constraint_set(const ConstraintSet& cs, const std::filesystem::path& path);
ConstraintSet load_constraint_set(const std::filesystem::path& path);

}  // namespace elfit
