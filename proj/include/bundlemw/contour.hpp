// Planar closed contours as discrete square-root velocity functions on the
// preshape sphere S^{2T-1}, with rotation (and optional start-point)
// alignment, the induced shape metric, shape means and tangent statistics.
//
// A 2×T SRVF is flattened column by column: (x_0, y_0, x_1, y_1, ...).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/estimation.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

using Rotation2 = Eigen::Matrix2d;

inline Rotation2 rotation2(double angle) {
  Rotation2 r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

/// Ordered samples of a closed planar curve, one point per column. The
/// closing point is implicit; a trailing copy of the first point is dropped.
class Contour {
 public:
  explicit Contour(Matrix points) : points_(std::move(points)) {
    detail::require(points_.rows() == 2, ErrorKind::DimensionMismatch, "contour points must be 2 x T'");
    detail::require(points_.allFinite(), ErrorKind::InvalidArgument, "contour points must be finite");
    if (points_.cols() >= 2 && points_.col(0) == points_.col(points_.cols() - 1)) {
      points_.conservativeResize(2, points_.cols() - 1);
    }
    detail::require(points_.cols() >= 4, ErrorKind::DegenerateContour, "contour needs at least 4 points");
  }

  const Matrix& points() const noexcept { return points_; }
  Index size() const noexcept { return points_.cols(); }

 private:
  Matrix points_;
};

/// Discrete SRVF with unit Frobenius norm, i.e. a point of S^{2T-1}.
class SrvfShape {
 public:
  explicit SrvfShape(Vector flat) : flat_(std::move(flat)) {
    detail::require(flat_.size() >= 4 && flat_.size() % 2 == 0, ErrorKind::DimensionMismatch,
                    "SRVF must have 2T entries");
    const double n = flat_.norm();
    detail::require(n > 0.0, ErrorKind::DegenerateContour, "SRVF is identically zero");
    flat_ /= n;
  }

  explicit SrvfShape(const Point& p) : SrvfShape(p.coords()) {}

  Index samples() const noexcept { return flat_.size() / 2; }
  const Vector& flat() const noexcept { return flat_; }
  Eigen::Map<const Matrix> q() const { return {flat_.data(), 2, samples()}; }
  Point as_point() const { return Point(flat_); }

 private:
  Vector flat_;
};

/// Uniform arc-length resampling to T points starting at the first vertex,
/// central cyclic differences for the velocity, q = β'/sqrt|β'|, unit norm.
inline SrvfShape contour_to_srvf(const Contour& c, Index T = 100) {
  detail::require(T >= 4, ErrorKind::InvalidArgument, "T must be >= 4");
  const Matrix& pts = c.points();
  const Index n = pts.cols();
  std::vector<double> cum(static_cast<std::size_t>(n + 1), 0.0);
  for (Index i = 0; i < n; ++i) {
    cum[static_cast<std::size_t>(i + 1)] =
        cum[static_cast<std::size_t>(i)] + (pts.col((i + 1) % n) - pts.col(i)).norm();
  }
  const double length = cum.back();
  const double scale = pts.cwiseAbs().maxCoeff();
  detail::require(length > 1e-12 * std::max(scale, 1e-300), ErrorKind::DegenerateContour,
                  "contour has zero length");

  Matrix beta(2, T);
  Index seg = 0;
  for (Index k = 0; k < T; ++k) {
    const double s = length * static_cast<double>(k) / static_cast<double>(T);
    while (seg + 1 < n && cum[static_cast<std::size_t>(seg + 1)] <= s) ++seg;
    const double a = cum[static_cast<std::size_t>(seg)];
    const double b = cum[static_cast<std::size_t>(seg + 1)];
    const double t = b > a ? (s - a) / (b - a) : 0.0;
    beta.col(k) = (1.0 - t) * pts.col(seg) + t * pts.col((seg + 1) % n);
  }

  Vector flat(2 * T);
  const double half_inv_h = 0.5 * static_cast<double>(T);
  for (Index k = 0; k < T; ++k) {
    const Eigen::Vector2d vel = (beta.col((k + 1) % T) - beta.col((k + T - 1) % T)) * half_inv_h;
    const double speed = vel.norm();
    const Eigen::Vector2d qk = speed < 1e-12 ? Eigen::Vector2d::Zero() : Eigen::Vector2d(vel / std::sqrt(speed));
    flat[2 * k] = qk[0];
    flat[2 * k + 1] = qk[1];
  }
  return SrvfShape(std::move(flat));
}

inline SrvfShape rotate(const SrvfShape& q, const Rotation2& o) {
  Vector flat(q.flat().size());
  Eigen::Map<Matrix>(flat.data(), 2, q.samples()) = o * q.q();
  return SrvfShape(std::move(flat));
}

/// Moves the start point forward by `shift` samples.
inline SrvfShape cyclic_shift(const SrvfShape& q, Index shift) {
  const Index T = q.samples();
  shift = ((shift % T) + T) % T;
  Vector flat(q.flat().size());
  for (Index k = 0; k < T; ++k) flat.segment(2 * k, 2) = q.flat().segment(2 * ((k + shift) % T), 2);
  return SrvfShape(std::move(flat));
}

/// The rotation O in SO(2) minimizing ‖q0 - O q1‖².
inline Rotation2 procrustes_rotation(const SrvfShape& q0, const SrvfShape& q1) {
  detail::require(q0.samples() == q1.samples(), ErrorKind::DimensionMismatch,
                  "SRVFs have different sample counts");
  const auto a = q0.q();
  const auto b = q1.q();
  double dot = 0.0, cross = 0.0;
  for (Index k = 0; k < a.cols(); ++k) {
    dot += a(0, k) * b(0, k) + a(1, k) * b(1, k);
    cross += b(0, k) * a(1, k) - b(1, k) * a(0, k);  // q1_k × q0_k
  }
  return rotation2(std::atan2(cross, dot));
}

struct AlignOptions {
  bool seam_search = true;  // also search over the T cyclic start points
};

struct Alignment {
  SrvfShape aligned;
  double angle = 0.0;
  Index shift = 0;
};

/// Best rotation (and start point) of q toward `reference`.
inline Alignment align_to(const SrvfShape& reference, const SrvfShape& q, AlignOptions opts = {}) {
  detail::require(reference.samples() == q.samples(), ErrorKind::DimensionMismatch,
                  "SRVFs have different sample counts");
  const Index T = q.samples();
  const auto r = reference.q();
  const auto b = q.q();
  Index best_shift = 0;
  double best_val = -1.0, best_dot = 0.0, best_cross = 0.0;
  const Index shifts = opts.seam_search ? T : 1;
  for (Index s = 0; s < shifts; ++s) {
    double dot = 0.0, cross = 0.0;
    for (Index k = 0; k < T; ++k) {
      const Index j = (k + s) % T;
      dot += r(0, k) * b(0, j) + r(1, k) * b(1, j);
      cross += b(0, j) * r(1, k) - b(1, j) * r(0, k);
    }
    const double val = std::hypot(dot, cross);
    if (val > best_val) {
      best_val = val;
      best_shift = s;
      best_dot = dot;
      best_cross = cross;
    }
  }
  const double angle = std::atan2(best_cross, best_dot);
  SrvfShape shifted = best_shift == 0 ? q : cyclic_shift(q, best_shift);
  return Alignment{rotate(shifted, rotation2(angle)), angle, best_shift};
}

/// d_s([q0], [q1]) = arccos⟨q0, O* q1⟩ after optimal alignment of q1 to q0.
inline double shape_distance(const SrvfShape& q0, const SrvfShape& q1, AlignOptions opts = {}) {
  const Alignment a = align_to(q0, q1, opts);
  // geodesic_distance uses atan2, which stays accurate for nearly equal shapes
  return geodesic_distance(q0.as_point(), a.aligned.as_point());
}

inline Matrix shape_distance_matrix(std::span<const SrvfShape> shapes, AlignOptions opts = {}) {
  const Index n = static_cast<Index>(shapes.size());
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = shape_distance(shapes[i], shapes[j], opts);
  }
  return d;
}

struct ShapeMeanOptions {
  double tol = 1e-9;
  int max_iter = 100;
  AlignOptions align;
};

struct ShapeMean {
  SrvfShape mean;
  std::vector<SrvfShape> aligned;  // inputs aligned to `mean`
  int iterations = 0;
};

/// Alternates alignment of every shape to the current mean with a Fréchet
/// mean update on S^{2T-1}, starting from `init` (default: the first shape).
inline ShapeMean shape_frechet_mean(std::span<const SrvfShape> shapes, ShapeMeanOptions opts = {},
                                    std::optional<SrvfShape> init = std::nullopt) {
  detail::require(!shapes.empty(), ErrorKind::InvalidArgument, "shape mean of an empty set");
  SrvfShape mean = init ? *init : shapes.front();
  std::vector<Point> pts;
  pts.reserve(shapes.size());
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    pts.clear();
    for (const auto& q : shapes) pts.push_back(align_to(mean, q, opts.align).aligned.as_point());
    const Point next = frechet_mean(pts, std::nullopt, FrechetOptions{std::min(opts.tol, 1e-10), 500});
    const double change = geodesic_distance(mean.as_point(), next);
    mean = SrvfShape(next);
    if (change < opts.tol) {
      ShapeMean out{mean, {}, iter + 1};
      out.aligned.reserve(shapes.size());
      for (const auto& q : shapes) out.aligned.push_back(align_to(mean, q, opts.align).aligned);
      return out;
    }
  }
  detail::fail(ErrorKind::NoConvergence, "shape mean did not converge");
}

struct ShapeStatistics {
  Matrix shooting;  // n × (2T-1) frame coordinates of log_mean(q_i*)
  CovarianceMatrix cov;
};

/// Shooting vectors of aligned shapes at `mean`, in coordinates of F(mean),
/// and their covariance Vᵀ V / (n - 1).
inline ShapeStatistics shape_statistics(std::span<const SrvfShape> aligned, const SrvfShape& mean,
                                        const MovingFrame& frame) {
  detail::require(aligned.size() >= 2, ErrorKind::ClusterTooSmall, "shape statistics need n >= 2");
  detail::require(frame.ambient_dim() == mean.flat().size(), ErrorKind::DimensionMismatch,
                  "frame dimension differs from the SRVF dimension");
  std::vector<Point> pts;
  pts.reserve(aligned.size());
  for (const auto& q : aligned) pts.push_back(q.as_point());
  Matrix v = shooting_coordinates(frame, mean.as_point(), pts);
  CovarianceMatrix cov = covariance_from_shooting(v);
  return ShapeStatistics{std::move(v), std::move(cov)};
}

}  // namespace bundlemw
