// Geometry of the unit sphere S^{D-1} embedded in R^D, and moving frames
// obtained by parallel transport from a distinguished point.
//
// Everything is dimension-generic: the same code serves S^2 (triangle shapes,
// simulated mixtures) and S^{2T-1} (discretized SRVF preshapes).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/random.hpp"

namespace bundlemw {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// ⟨p, q⟩ at or below -1 + kAntipodeTol is treated as the puncture.
inline constexpr double kAntipodeTol = 1e-10;
inline constexpr double kTangentTol = 1e-10;
inline constexpr double kOrthonormalTol = 1e-10;

/// A point on the unit sphere, stored by its extrinsic coordinates.
class Point {
 public:
  /// Normalizes `coords`; rejects zero, non-finite and sub-2-dimensional input.
  explicit Point(Vector coords) : coords_(std::move(coords)) {
    detail::require(coords_.size() >= 2, ErrorKind::InvalidArgument,
                    "a sphere point needs ambient dimension >= 2");
    detail::require(coords_.allFinite(), ErrorKind::InvalidArgument,
                    "point coordinates must be finite");
    const double n = coords_.norm();
    detail::require(n > 0.0, ErrorKind::InvalidArgument, "cannot normalize the zero vector");
    // Unit input is kept bit for bit so that stored points round-trip exactly.
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) coords_ /= n;
  }

  Point(std::initializer_list<double> coords)
      : Point(Eigen::Map<const Vector>(coords.begin(), static_cast<Index>(coords.size()))) {}

  const Vector& coords() const noexcept { return coords_; }
  Index ambient_dim() const noexcept { return coords_.size(); }
  /// Intrinsic dimension D - 1.
  Index dim() const noexcept { return coords_.size() - 1; }

  double operator[](Index i) const { return coords_[i]; }

 private:
  Vector coords_;
};

/// A vector in the tangent space of the sphere at `base`.
class TangentVector {
 public:
  TangentVector(Point base, Vector vec) : base_(std::move(base)), vec_(std::move(vec)) {
    detail::require(vec_.size() == base_.ambient_dim(), ErrorKind::DimensionMismatch,
                    "tangent vector and base point dimensions differ");
    const double normal = vec_.dot(base_.coords());
    detail::require(std::abs(normal) <= kTangentTol * std::max(1.0, vec_.norm()),
                    ErrorKind::InvalidArgument, "vector is not tangent at its base point");
    vec_ -= normal * base_.coords();
  }

  /// Orthogonal projection of an ambient vector onto the tangent space at `base`.
  static TangentVector project(Point base, const Vector& ambient) {
    Vector v = ambient - ambient.dot(base.coords()) * base.coords();
    return TangentVector(std::move(base), std::move(v));
  }

  static TangentVector zero(Point base) {
    Vector v = Vector::Zero(base.ambient_dim());
    return TangentVector(std::move(base), std::move(v));
  }

  const Point& base() const noexcept { return base_; }
  const Vector& vec() const noexcept { return vec_; }
  double norm() const { return vec_.norm(); }

 private:
  Point base_;
  Vector vec_;
};

/// Orthonormal basis of the tangent space at `origin`, held as the D×(D-1)
/// matrix whose columns are the basis vectors. The distinguished frame (p, F)
/// and its transported copies F(m) share this type.
class MovingFrame {
 public:
  MovingFrame(Point origin, Matrix basis) : origin_(std::move(origin)), basis_(std::move(basis)) {
    const Index D = origin_.ambient_dim();
    detail::require(basis_.rows() == D && basis_.cols() == D - 1, ErrorKind::DimensionMismatch,
                    "frame basis must be D x (D-1)");
    detail::require(basis_.allFinite(), ErrorKind::DegenerateFrame, "frame basis must be finite");
    const double tangency = (basis_.transpose() * origin_.coords()).cwiseAbs().maxCoeff();
    detail::require(tangency <= kOrthonormalTol, ErrorKind::DegenerateFrame,
                    "frame basis vectors are not tangent at the origin");
    const Matrix gram = basis_.transpose() * basis_;
    const double dev = (gram - Matrix::Identity(D - 1, D - 1)).cwiseAbs().maxCoeff();
    detail::require(dev <= kOrthonormalTol, ErrorKind::DegenerateFrame,
                    "frame basis is not orthonormal");
  }

  /// Frame at e_1 with basis e_2, ..., e_D.
  static MovingFrame standard(Index ambient_dim) {
    detail::require(ambient_dim >= 2, ErrorKind::InvalidArgument, "ambient dimension must be >= 2");
    Vector p = Vector::Zero(ambient_dim);
    p[0] = 1.0;
    Matrix basis = Matrix::Zero(ambient_dim, ambient_dim - 1);
    basis.bottomRows(ambient_dim - 1).setIdentity();
    return MovingFrame(Point(std::move(p)), std::move(basis));
  }

  const Point& origin() const noexcept { return origin_; }
  const Matrix& basis() const noexcept { return basis_; }
  Index ambient_dim() const noexcept { return origin_.ambient_dim(); }
  /// Fiber dimension d = D - 1.
  Index dim() const noexcept { return basis_.cols(); }

  TangentVector basis_vector(Index j) const { return TangentVector(origin_, basis_.col(j)); }

  std::vector<TangentVector> basis_vectors() const {
    std::vector<TangentVector> out;
    out.reserve(static_cast<std::size_t>(dim()));
    for (Index j = 0; j < dim(); ++j) out.push_back(basis_vector(j));
    return out;
  }

 private:
  struct Unchecked {};
  MovingFrame(Point origin, Matrix basis, Unchecked)
      : origin_(std::move(origin)), basis_(std::move(basis)) {}

  friend MovingFrame transport_frame(const MovingFrame& frame, const Point& m);

  Point origin_;
  Matrix basis_;
};

/// True when both frames have the same origin and basis within `tol`.
inline bool same_frame(const MovingFrame& a, const MovingFrame& b, double tol = 1e-12) {
  if (&a == &b) return true;
  if (a.ambient_dim() != b.ambient_dim()) return false;
  return (a.origin().coords() - b.origin().coords()).cwiseAbs().maxCoeff() <= tol &&
         (a.basis() - b.basis()).cwiseAbs().maxCoeff() <= tol;
}

namespace detail {

inline void require_same_dim(const Point& p, const Point& q) {
  require(p.ambient_dim() == q.ambient_dim(), ErrorKind::DimensionMismatch,
          "points live on spheres of different dimension");
}

inline void require_not_antipodal(double cos_angle) {
  if (cos_angle <= -1.0 + kAntipodeTol) {
    fail(ErrorKind::AntipodalPoint, "points are antipodal; the minimal geodesic is not unique");
  }
}

// exp_p(v) on raw coordinates.
inline Vector exp_raw(const Vector& p, const Vector& v) {
  const double theta = v.norm();
  if (theta < 1e-14) return p;
  Vector out = std::cos(theta) * p + (std::sin(theta) / theta) * v;
  return out / out.norm();
}

// log_p(q) on raw coordinates, assuming the antipode check already passed.
inline Vector log_raw(const Vector& p, const Vector& q) {
  const double c = p.dot(q);
  Vector u = q - c * p;
  const double s = u.norm();
  if (s < 1e-300) return Vector::Zero(p.size());
  const double theta = std::atan2(s, c);
  return (theta / s) * u;
}

// Parallel transport of v ∈ T_p along the minimal geodesic to q.
inline Vector transport_raw(const Vector& p, const Vector& q, const Vector& v) {
  const double c = p.dot(q);
  return v - (v.dot(q) / (1.0 + c)) * (p + q);
}

}  // namespace detail

/// Exponential map: follows the great circle from v's base point with
/// initial velocity v for unit time.
inline Point sphere_exp(const TangentVector& v) {
  return Point(detail::exp_raw(v.base().coords(), v.vec()));
}

/// Inverse of sphere_exp away from the antipode of p.
inline TangentVector sphere_log(const Point& p, const Point& q) {
  detail::require_same_dim(p, q);
  detail::require_not_antipodal(p.coords().dot(q.coords()));
  return TangentVector(p, detail::log_raw(p.coords(), q.coords()));
}

inline double geodesic_distance(const Point& p, const Point& q) {
  detail::require_same_dim(p, q);
  // Half-angle form: exactly symmetric, and unlike acos it keeps full
  // precision near 0 and pi.
  return 2.0 * std::atan2((p.coords() - q.coords()).norm(), (p.coords() + q.coords()).norm());
}

/// Parallel transport of v along the unique minimal geodesic from its base
/// point to q. The component along the geodesic rotates within the geodesic
/// plane; the orthogonal component is unchanged.
inline TangentVector parallel_transport(const TangentVector& v, const Point& q) {
  detail::require_same_dim(v.base(), q);
  const Vector& p = v.base().coords();
  detail::require_not_antipodal(p.dot(q.coords()));
  return TangentVector::project(q, detail::transport_raw(p, q.coords(), v.vec()));
}

struct FrechetOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

/// Weighted Fréchet (Karcher) mean by fixed-point iteration
/// m <- exp_m(Σ w_i log_m(x_i)), started at the normalized extrinsic mean.
/// The returned point satisfies ‖Σ w_i log_m(x_i)‖ < tol.
inline Point frechet_mean(std::span<const Point> points,
                          std::optional<std::span<const double>> weights = std::nullopt,
                          FrechetOptions opts = {}) {
  detail::require(!points.empty(), ErrorKind::InvalidArgument, "frechet_mean of an empty set");
  const std::size_t n = points.size();
  const Index D = points.front().ambient_dim();
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (weights) {
    detail::require(weights->size() == n, ErrorKind::DimensionMismatch,
                    "weights and points differ in length");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      detail::require((*weights)[i] >= 0.0, ErrorKind::InfeasibleWeights, "negative weight");
      w[i] = (*weights)[i];
      total += w[i];
    }
    detail::require(std::abs(total - 1.0) <= 1e-10, ErrorKind::InfeasibleWeights,
                    "weights must sum to 1");
  }

  Vector extrinsic = Vector::Zero(D);
  for (std::size_t i = 0; i < n; ++i) {
    detail::require(points[i].ambient_dim() == D, ErrorKind::DimensionMismatch,
                    "points live on spheres of different dimension");
    extrinsic += w[i] * points[i].coords();
  }
  Vector m = extrinsic.norm() > 1e-12 ? Vector(extrinsic / extrinsic.norm()) : points.front().coords();

  Vector step(D);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    step.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      if (w[i] == 0.0) continue;
      detail::require_not_antipodal(m.dot(points[i].coords()));
      step += w[i] * detail::log_raw(m, points[i].coords());
    }
    if (step.norm() < opts.tol) return Point(m);
    m = detail::exp_raw(m, step);
  }
  detail::fail(ErrorKind::NoConvergence,
               "frechet_mean did not converge in " + std::to_string(opts.max_iter) + " iterations");
}

/// Random orthonormal tangent basis at p: draws d = D-1 Gaussian ambient
/// vectors, projects them onto T_p, and keeps the principal directions of the
/// projected set. Eigenvector signs are fixed so the first entry with
/// magnitude above 1e-12 is positive.
inline MovingFrame build_reference_frame(const Point& p, std::uint64_t seed) {
  const Index D = p.ambient_dim();
  const Index d = D - 1;
  Rng rng(seed);
  for (int attempt = 0; attempt < 10; ++attempt) {
    Matrix draws(D, d);
    for (Index j = 0; j < d; ++j) {
      for (Index i = 0; i < D; ++i) draws(i, j) = rng.normal();
    }
    draws -= p.coords() * (p.coords().transpose() * draws);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(draws * draws.transpose());
    // Eigenvalues ascend; the top d span the tangent space when draws have full rank.
    const Vector& evals = eig.eigenvalues();
    if (evals[1] <= 1e-10 * evals[D - 1]) continue;

    Matrix basis(D, d);
    for (Index j = 0; j < d; ++j) {
      Vector col = eig.eigenvectors().col(D - 1 - j);
      col -= col.dot(p.coords()) * p.coords();
      col.normalize();
      for (Index i = 0; i < D; ++i) {
        if (std::abs(col[i]) > 1e-12) {
          if (col[i] < 0) col = -col;
          break;
        }
      }
      basis.col(j) = col;
    }
    return MovingFrame(p, std::move(basis));
  }
  detail::fail(ErrorKind::DegenerateFrame, "random tangent draws were rank deficient 10 times");
}

/// Parallel-transports every basis vector of `frame` to m, giving F(m).
inline MovingFrame transport_frame(const MovingFrame& frame, const Point& m) {
  detail::require_same_dim(frame.origin(), m);
  const Vector& p = frame.origin().coords();
  const double c = p.dot(m.coords());
  detail::require_not_antipodal(c);
  Matrix moved = frame.basis() - (p + m.coords()) * ((m.coords().transpose() * frame.basis()) / (1.0 + c));
  return MovingFrame(m, std::move(moved), MovingFrame::Unchecked{});
}

/// Coordinates (⟨v, f_j⟩)_j of v in a frame based at v's base point.
inline Vector tangent_coordinates(const MovingFrame& frame_at_m, const TangentVector& v) {
  detail::require(v.vec().size() == frame_at_m.ambient_dim(), ErrorKind::DimensionMismatch,
                  "vector and frame dimensions differ");
  return frame_at_m.basis().transpose() * v.vec();
}

inline TangentVector tangent_from_coordinates(const MovingFrame& frame_at_m, const Vector& c) {
  detail::require(c.size() == frame_at_m.dim(), ErrorKind::DimensionMismatch,
                  "coordinate vector has wrong length");
  return TangentVector::project(frame_at_m.origin(), frame_at_m.basis() * c);
}

/// Coordinates of v ∈ T_m in the transported frame F(m), computed by moving v
/// back to the frame origin instead of materializing F(m). O(D·d).
inline Vector frame_coordinates(const MovingFrame& frame, const TangentVector& v) {
  const Vector& p = frame.origin().coords();
  const Vector& m = v.base().coords();
  detail::require(m.size() == p.size(), ErrorKind::DimensionMismatch,
                  "vector and frame dimensions differ");
  detail::require_not_antipodal(p.dot(m));
  return frame.basis().transpose() * detail::transport_raw(m, p, v.vec());
}

/// Inverse of frame_coordinates: the tangent vector at m with coordinates c in F(m).
inline TangentVector frame_vector(const MovingFrame& frame, const Point& m, const Vector& c) {
  detail::require(c.size() == frame.dim(), ErrorKind::DimensionMismatch,
                  "coordinate vector has wrong length");
  detail::require_same_dim(frame.origin(), m);
  const Vector& p = frame.origin().coords();
  detail::require_not_antipodal(p.dot(m.coords()));
  return TangentVector::project(m, detail::transport_raw(p, m.coords(), frame.basis() * c));
}

}  // namespace bundlemw
