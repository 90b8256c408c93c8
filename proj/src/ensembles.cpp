#include "elfit/ensembles.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace elfit {

static_assert(std::endian::native == std::endian::little, "binary constraint-set format assumes little-endian");

std::string_view to_string(Ensemble e) {
  switch (e) {
    case Ensemble::Goe: return "goe";
    case Ensemble::Ell: return "ell";
    case Ensemble::RademacherEll: return "rademacher_ell";
    case Ensemble::Custom: return "custom";
  }
  throw std::invalid_argument("unknown ensemble tag");
}

Ensemble parse_ensemble(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "goe") return Ensemble::Goe;
  if (lower == "ell") return Ensemble::Ell;
  if (lower == "rademacher_ell" || lower == "rademacher-ell") return Ensemble::RademacherEll;
  throw std::invalid_argument("unknown ensemble '" + std::string(name) + "'");
}

SymMatrixd sample_goe(int d, RngStream& rng) {
  if (d < 1) throw std::invalid_argument("sample_goe: d must be >= 1");
  SymMatrixd g(d);
  const double off = 1.0 / std::sqrt(double(d));
  const double diag = std::sqrt(2.0 / double(d));
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) g.set(i, j, rng.normal() * (i == j ? diag : off));
  return g;
}

namespace {

SymMatrixd centered_rank_one(const Eigen::VectorXd& x) {
  const auto d = x.size();
  const double scale = 1.0 / std::sqrt(double(d));
  SymMatrixd w(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    w.set(i, i, (x[i] * x[i] - 1.0) * scale);
    for (Eigen::Index j = i + 1; j < d; ++j) w.set(i, j, x[i] * x[j] * scale);
  }
  return w;
}

}  // namespace

EllDraw sample_ell(int d, RngStream& rng) {
  if (d < 1) throw std::invalid_argument("sample_ell: d must be >= 1");
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.normal();
  return {centered_rank_one(x), std::move(x)};
}

EllDraw sample_rademacher_ell(int d, RngStream& rng) {
  if (d < 1) throw std::invalid_argument("sample_rademacher_ell: d must be >= 1");
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x[i] = rng.sign();
  return {centered_rank_one(x), std::move(x)};
}

ConstraintSet::ConstraintSet(Ensemble ensemble, Eigen::MatrixXd design, double b,
                             std::optional<Eigen::MatrixXd> points)
    : ensemble_(ensemble), b_(b), design_(std::move(design)), points_(std::move(points)) {
  n_ = static_cast<int>(design_.cols());
  if (n_ < 1) throw std::invalid_argument("ConstraintSet: n must be >= 1");
  d_ = static_cast<int>(std::llround(std::sqrt(double(design_.rows()))));
  if (d_ < 1 || Eigen::Index(d_) * d_ != design_.rows())
    throw std::invalid_argument("ConstraintSet: design rows must be d^2");
  if (!std::isfinite(b_)) throw std::invalid_argument("ConstraintSet: target b must be finite");
  if (points_ && (points_->rows() != d_ || points_->cols() != n_))
    throw std::invalid_argument("ConstraintSet: points must be d x n");
  const bool point_ensemble = ensemble_ == Ensemble::Ell || ensemble_ == Ensemble::RademacherEll;
  if (point_ensemble && !points_)
    throw std::invalid_argument("ConstraintSet: point ensembles must carry their points");
  if (points_ && (ensemble_ == Ensemble::Goe))
    throw std::invalid_argument("ConstraintSet: GOE sets carry no points");
}

ConstraintSet ConstraintSet::from_matrices(Ensemble ensemble, const std::vector<SymMatrixd>& matrices, double b,
                                           std::optional<Eigen::MatrixXd> points) {
  if (matrices.empty()) throw std::invalid_argument("ConstraintSet: n must be >= 1");
  const auto d = matrices.front().dim();
  Eigen::MatrixXd design(d * d, Eigen::Index(matrices.size()));
  for (std::size_t mu = 0; mu < matrices.size(); ++mu) {
    if (matrices[mu].dim() != d) throw std::invalid_argument("ConstraintSet: matrices differ in dimension");
    design.col(Eigen::Index(mu)) = matrices[mu].dense().reshaped();
  }
  return ConstraintSet(ensemble, std::move(design), b, std::move(points));
}

SymMatrixd ConstraintSet::matrix(int mu) const {
  if (mu < 0 || mu >= n_) throw std::out_of_range("ConstraintSet::matrix: index out of range");
  return SymMatrixd::from_dense(design_.col(mu).reshaped(d_, d_));
}

Eigen::VectorXd ConstraintSet::traces(const SymMatrixd& s) const {
  if (s.dim() != d_) throw std::invalid_argument("ConstraintSet: dimension mismatch");
  return design_.transpose() * s.dense().reshaped();
}

SymMatrixd ConstraintSet::combine(const Eigen::VectorXd& weights) const {
  if (weights.size() != n_) throw std::invalid_argument("ConstraintSet::combine: weight length must be n");
  Eigen::VectorXd flat = design_ * weights;
  return SymMatrixd::symmetrized(flat.reshaped(d_, d_));
}

ConstraintSet ConstraintSet::with_target(double b) const {
  ConstraintSet out = *this;
  if (!std::isfinite(b)) throw std::invalid_argument("ConstraintSet: target b must be finite");
  out.b_ = b;
  return out;
}

ConstraintSet ConstraintSet::negated() const {
  return ConstraintSet(Ensemble::Custom, -design_, b_);
}

ConstraintSet to_original_coordinates(const ConstraintSet& cs) {
  if (!cs.points()) throw std::invalid_argument("to_original_coordinates: set carries no points");
  const int d = cs.d();
  const auto& pts = *cs.points();
  const double scale = 1.0 / std::sqrt(double(d));
  Eigen::MatrixXd design(Eigen::Index(d) * d, cs.n());
  for (int mu = 0; mu < cs.n(); ++mu)
    design.col(mu) = (scale * pts.col(mu) * pts.col(mu).transpose()).reshaped();
  return ConstraintSet(Ensemble::Custom, std::move(design), std::sqrt(double(d)), cs.points());
}

bool operator==(const ConstraintSet& a, const ConstraintSet& b) {
  return a.ensemble_ == b.ensemble_ && a.b_ == b.b_ && a.design_.rows() == b.design_.rows() &&
         a.design_.cols() == b.design_.cols() && a.design_ == b.design_ && a.points_.has_value() == b.points_.has_value() &&
         (!a.points_ || *a.points_ == *b.points_);
}

ConstraintSet sample_constraint_set(int d, int n, Ensemble ensemble, double b, RngStream& rng) {
  if (d < 1 || n < 1) throw std::invalid_argument("sample_constraint_set: d and n must be >= 1");
  Eigen::MatrixXd design(Eigen::Index(d) * d, n);
  std::optional<Eigen::MatrixXd> points;
  switch (ensemble) {
    case Ensemble::Goe:
      for (int mu = 0; mu < n; ++mu) design.col(mu) = sample_goe(d, rng).dense().reshaped();
      break;
    case Ensemble::Ell:
    case Ensemble::RademacherEll:
      points.emplace(d, n);
      for (int mu = 0; mu < n; ++mu) {
        auto draw = ensemble == Ensemble::Ell ? sample_ell(d, rng) : sample_rademacher_ell(d, rng);
        design.col(mu) = draw.w.dense().reshaped();
        points->col(mu) = draw.x;
      }
      break;
    default:
      throw std::invalid_argument("sample_constraint_set: ensemble cannot be sampled");
  }
  return ConstraintSet(ensemble, std::move(design), b, std::move(points));
}

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'L', 'F', 'I', 'T', 'C', 'S', '\0'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("load_constraint_set: truncated file");
  return v;
}

}  // namespace

void save_constraint_set(const ConstraintSet& cs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_constraint_set: cannot open " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put(out, kConstraintSetFormatVersion);
  put(out, std::uint32_t(cs.d()));
  put(out, std::uint32_t(cs.n()));
  put(out, static_cast<std::uint32_t>(cs.ensemble()));
  put(out, std::uint32_t(cs.points() ? 1 : 0));
  put(out, cs.b());
  // X_mu is symmetric, so column-major storage is also its row-major layout.
  const auto& design = cs.design();
  out.write(reinterpret_cast<const char*>(design.data()), std::streamsize(design.size() * sizeof(double)));
  if (cs.points()) {
    const auto& pts = *cs.points();
    out.write(reinterpret_cast<const char*>(pts.data()), std::streamsize(pts.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_constraint_set: write failed for " + path.string());
}

ConstraintSet load_constraint_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_constraint_set: cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("load_constraint_set: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kConstraintSetFormatVersion)
    throw std::runtime_error("load_constraint_set: unsupported version " + std::to_string(version));
  const auto d = get<std::uint32_t>(in);
  const auto n = get<std::uint32_t>(in);
  const auto tag = get<std::uint32_t>(in);
  const auto has_points = get<std::uint32_t>(in);
  const auto b = get<double>(in);
  if (d < 1 || n < 1 || tag > static_cast<std::uint32_t>(Ensemble::Custom) || has_points > 1)
    throw std::runtime_error("load_constraint_set: corrupt header");
  Eigen::MatrixXd design(Eigen::Index(d) * d, n);
  in.read(reinterpret_cast<char*>(design.data()), std::streamsize(design.size() * sizeof(double)));
  std::optional<Eigen::MatrixXd> points;
  if (has_points) {
    points.emplace(d, n);
    in.read(reinterpret_cast<char*>(points->data()), std::streamsize(points->size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("load_constraint_set: truncated payload");
  return ConstraintSet(static_cast<Ensemble>(tag), std::move(design), b, std::move(points));
}

}  // namespace elfit
