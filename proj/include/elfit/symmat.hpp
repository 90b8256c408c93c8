#pragma once

// Dense real symmetric matrices: storage, Jacobi eigendecomposition,
// spectral projections, Schatten norms and the isometric flattening
// S_d -> R^{d(d+1)/2}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace elfit {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Symmetric d x d matrix with full dense storage. Every mutating path
/// writes both (i, j) and (j, i), so entries are exactly symmetric.
template <typename Scalar>
class SymMatrix {
 public:
  using Dense = DenseMatrix<Scalar>;

  SymMatrix() = default;
  explicit SymMatrix(Eigen::Index d) : m_(Dense::Zero(d, d)) {
    if (d < 1) throw std::invalid_argument("SymMatrix: dimension must be >= 1");
  }

  static SymMatrix zero(Eigen::Index d) { return SymMatrix(d); }
  static SymMatrix identity(Eigen::Index d) {
    SymMatrix s(d);
    s.m_.diagonal().setOnes();
    return s;
  }
  static SymMatrix diagonal(const DenseVector<Scalar>& diag) {
    SymMatrix s(diag.size());
    s.m_.diagonal() = diag;
    return s;
  }
  /// Mirrors the upper triangle of `a`; the lower triangle is ignored.
  template <typename Derived>
  static SymMatrix from_upper(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("SymMatrix: input must be square");
    SymMatrix s(a.rows());
    s.m_ = a.template triangularView<Eigen::Upper>();
    s.m_.template triangularView<Eigen::StrictlyLower>() = s.m_.transpose();
    return s;
  }
  /// (a + a^T) / 2, which is exactly symmetric in floating point.
  template <typename Derived>
  static SymMatrix symmetrized(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("SymMatrix: input must be square");
    SymMatrix s(a.rows());
    s.m_ = (a + a.transpose()) * Scalar(0.5);
    return s;
  }
  /// Wraps a matrix that must already be exactly symmetric.
  template <typename Derived>
  static SymMatrix from_dense(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("SymMatrix: input must be square");
    if (!(a.derived() == a.transpose())) throw std::invalid_argument("SymMatrix: input is not symmetric");
    SymMatrix s(a.rows());
    s.m_ = a;
    return s;
  }
  /// V diag(w) V^T, symmetrized.
  static SymMatrix from_spectrum(const Dense& v, const DenseVector<Scalar>& w) {
    return symmetrized(v * w.asDiagonal() * v.transpose());
  }

  Eigen::Index dim() const { return m_.rows(); }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  void set(Eigen::Index i, Eigen::Index j, Scalar v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Dense& dense() const { return m_; }
  const Scalar* data() const { return m_.data(); }

  Scalar trace() const { return m_.trace(); }
  /// Tr[A B] for symmetric A, B.
  Scalar dot(const SymMatrix& other) const {
    check_same(other);
    return m_.cwiseProduct(other.m_).sum();
  }
  Scalar frobenius_norm() const { return m_.norm(); }
  bool all_finite() const { return m_.allFinite(); }

  SymMatrix& operator+=(const SymMatrix& o) {
    check_same(o);
    m_ += o.m_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    check_same(o);
    m_ -= o.m_;
    return *this;
  }
  SymMatrix& operator*=(Scalar c) {
    m_ *= c;
    return *this;
  }
  SymMatrix& operator/=(Scalar c) {
    m_ /= c;
    return *this;
  }
  /// this += c * o
  SymMatrix& axpy(Scalar c, const SymMatrix& o) {
    check_same(o);
    m_ += c * o.m_;
    return *this;
  }

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator-(SymMatrix a) { return a *= Scalar(-1); }
  friend SymMatrix operator*(SymMatrix a, Scalar c) { return a *= c; }
  friend SymMatrix operator*(Scalar c, SymMatrix a) { return a *= c; }
  friend SymMatrix operator/(SymMatrix a, Scalar c) { return a /= c; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.dim() == b.dim() && a.m_ == b.m_;
  }

 private:
  void check_same(const SymMatrix& o) const {
    if (o.dim() != dim()) throw std::invalid_argument("SymMatrix: dimension mismatch");
  }

  Dense m_;
};

using SymMatrixd = SymMatrix<double>;

template <typename Scalar>
struct EigDecomp {
  DenseVector<Scalar> eigenvalues;  // non-increasing
  DenseMatrix<Scalar> eigenvectors; // column k pairs with eigenvalues[k]
};

using EigDecompd = EigDecomp<double>;

template <typename Scalar>
struct FlatVector {
  Eigen::Index dim_d = 0;
  DenseVector<Scalar> coords;
};

inline constexpr Eigen::Index flat_length(Eigen::Index d) { return d * (d + 1) / 2; }

/// Inverse of flat_length; throws when `len` is not triangular.
inline Eigen::Index dim_from_flat_length(Eigen::Index len) {
  if (len < 1) throw std::invalid_argument("unflatten: empty vector");
  auto d = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * double(len) + 1.0) - 1.0) / 2.0));
  if (flat_length(d) != len)
    throw std::invalid_argument("unflatten: length " + std::to_string(len) + " is not of the form d(d+1)/2");
  return d;
}

/// Off-diagonals (a < b, lexicographic) scaled by sqrt(2), then the diagonal.
/// <flatten(M), flatten(N)> = Tr[MN].
template <typename Scalar>
FlatVector<Scalar> flatten(const SymMatrix<Scalar>& s) {
  const Eigen::Index d = s.dim();
  FlatVector<Scalar> out{d, DenseVector<Scalar>(flat_length(d))};
  const Scalar r2 = std::sqrt(Scalar(2));
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) out.coords[k++] = r2 * s(a, b);
  for (Eigen::Index a = 0; a < d; ++a) out.coords[k++] = s(a, a);
  return out;
}

template <typename Scalar>
SymMatrix<Scalar> unflatten(const DenseVector<Scalar>& coords) {
  const Eigen::Index d = dim_from_flat_length(coords.size());
  SymMatrix<Scalar> s(d);
  const Scalar r2 = std::sqrt(Scalar(2));
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = a + 1; b < d; ++b) s.set(a, b, coords[k++] / r2);
  for (Eigen::Index a = 0; a < d; ++a) s.set(a, a, coords[k++]);
  return s;
}

template <typename Scalar>
SymMatrix<Scalar> unflatten(const FlatVector<Scalar>& v) {
  auto s = unflatten(v.coords);
  if (s.dim() != v.dim_d) throw std::invalid_argument("unflatten: dim_d disagrees with coordinate length");
  return s;
}

struct JacobiOptions {
  double rel_tol = 1e-13;  // stop when off-diagonal Frobenius mass <= rel_tol * ||S||_F
  int max_sweeps = 100;
};

/// Cyclic Jacobi eigendecomposition. Eigenvalues are returned in
/// non-increasing order, ties kept in original diagonal order.
template <typename Scalar>
EigDecomp<Scalar> eig_sym(const SymMatrix<Scalar>& s, const JacobiOptions& opts = {}) {
  if (!s.all_finite()) throw std::domain_error("eig_sym: non-finite entries");
  const Eigen::Index d = s.dim();
  DenseMatrix<Scalar> a = s.dense();
  DenseMatrix<Scalar> v = DenseMatrix<Scalar>::Identity(d, d);
  const Scalar target = Scalar(opts.rel_tol) * a.norm();

  auto off_mass = [&] {
    Scalar acc = 0;
    for (Eigen::Index j = 1; j < d; ++j) acc += a.col(j).head(j).squaredNorm();
    return std::sqrt(Scalar(2) * acc);
  };

  int sweep = 0;
  for (; off_mass() > target; ++sweep) {
    if (sweep == opts.max_sweeps) throw std::runtime_error("eig_sym: Jacobi did not converge");
    for (Eigen::Index p = 0; p + 1 < d; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  EigDecomp<Scalar> out{DenseVector<Scalar>(d), DenseMatrix<Scalar>(d, d)};
  for (Eigen::Index k = 0; k < d; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  return out;
}

template <typename Scalar>
DenseVector<Scalar> eigenvalues(const SymMatrix<Scalar>& s) {
  return eig_sym(s).eigenvalues;
}

template <typename Scalar>
Scalar lambda_min(const SymMatrix<Scalar>& s) {
  return eig_sym(s).eigenvalues.minCoeff();
}

/// V diag(f(lambda)) V^T.
template <typename Scalar, typename F>
SymMatrix<Scalar> spectral_map(const EigDecomp<Scalar>& e, F&& f) {
  DenseVector<Scalar> w = e.eigenvalues.unaryExpr(std::forward<F>(f));
  return SymMatrix<Scalar>::from_spectrum(e.eigenvectors, w);
}

/// Frobenius-nearest matrix with spectrum in [lo, hi]. Either bound may be infinite.
template <typename Scalar>
SymMatrix<Scalar> project_spectral_box(const SymMatrix<Scalar>& s, Scalar lo, Scalar hi) {
  if (!(lo <= hi)) throw std::invalid_argument("project_spectral_box: lo > hi");
  if (lo == -std::numeric_limits<Scalar>::infinity() && hi == std::numeric_limits<Scalar>::infinity()) return s;
  return spectral_map(eig_sym(s), [lo, hi](Scalar x) { return std::clamp(x, lo, hi); });
}

template <typename Scalar>
SymMatrix<Scalar> project_psd(const SymMatrix<Scalar>& s) {
  return project_spectral_box(s, Scalar(0), std::numeric_limits<Scalar>::infinity());
}

/// (sum_i |lambda_i|^gamma)^(1/gamma); gamma = +inf gives the operator norm.
template <typename Scalar>
Scalar schatten_norm(const SymMatrix<Scalar>& s, Scalar gamma) {
  if (!(gamma >= Scalar(1))) throw std::invalid_argument("schatten_norm: gamma must be >= 1");
  const DenseVector<Scalar> mags = eig_sym(s).eigenvalues.cwiseAbs();
  if (std::isinf(gamma)) return mags.maxCoeff();
  if (gamma == Scalar(1)) return mags.sum();
  if (gamma == Scalar(2)) return mags.norm();
  const Scalar top = mags.maxCoeff();
  if (top == Scalar(0)) return Scalar(0);
  return top * std::pow((mags / top).array().pow(gamma).sum(), Scalar(1) / gamma);
}

template <typename Scalar>
Scalar nuclear_norm(const SymMatrix<Scalar>& s) {
  return schatten_norm(s, Scalar(1));
}

template <typename Scalar>
Scalar operator_norm(const SymMatrix<Scalar>& s) {
  return schatten_norm(s, std::numeric_limits<Scalar>::infinity());
}

}  // namespace elfit
