// Kendall shape space of planar triangles, identified with S^2 through the
// Hopf fibration.
//
// With complex vertices z_i = x_{i,1} + j x_{i,2} of a centered triangle, the
// shape is carried by (z_1, z_2) (z_3 = -(z_1 + z_2)). The Hopf map
//   y = (2 Re(z_1 conj z_2), 2 Im(z_1 conj z_2), |z_2|^2 - |z_1|^2) / r
// is invariant under z -> e^{ja} z, and inverts
//   z_1 = sin(θ/2) e^{j(ψ+φ)/2},  z_2 = cos(θ/2) e^{j(ψ-φ)/2},
// which gives y = (sinθ cosφ, sinθ sinφ, cosθ).

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>

#include "bundlemw/errors.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

using Complex = std::complex<double>;

/// Three planar vertices, one per row.
struct Triangle {
  Eigen::Matrix<double, 3, 2> vertices;

  static Triangle from_row(std::span<const double> xs) {
    detail::require(xs.size() == 6, ErrorKind::DimensionMismatch, "a triangle row has 6 values");
    Triangle t;
    for (int i = 0; i < 3; ++i) {
      t.vertices(i, 0) = xs[static_cast<std::size_t>(2 * i)];
      t.vertices(i, 1) = xs[static_cast<std::size_t>(2 * i + 1)];
    }
    return t;
  }
};

/// Centered, unit-norm complex configuration (rotation not yet removed).
class TrianglePreshape {
 public:
  const std::array<Complex, 3>& z() const noexcept { return z_; }

  Triangle to_triangle() const {
    Triangle t;
    for (int i = 0; i < 3; ++i) {
      t.vertices(i, 0) = z_[static_cast<std::size_t>(i)].real();
      t.vertices(i, 1) = z_[static_cast<std::size_t>(i)].imag();
    }
    return t;
  }

 private:
  explicit TrianglePreshape(std::array<Complex, 3> z) : z_(z) {}
  friend TrianglePreshape triangle_preshape(const Triangle& t);

  std::array<Complex, 3> z_;
};

/// Removes translation (subtract the complex mean) and scale (unit norm).
inline TrianglePreshape triangle_preshape(const Triangle& t) {
  detail::require(t.vertices.allFinite(), ErrorKind::InvalidArgument, "triangle vertices must be finite");
  std::array<Complex, 3> z;
  Complex mean{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    z[static_cast<std::size_t>(i)] = Complex(t.vertices(i, 0), t.vertices(i, 1));
    mean += z[static_cast<std::size_t>(i)];
  }
  mean /= 3.0;
  double norm2 = 0.0;
  for (auto& zi : z) {
    zi -= mean;
    norm2 += std::norm(zi);
  }
  detail::require(norm2 > 1e-300, ErrorKind::DegenerateTriangle, "all vertices coincide");
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& zi : z) zi *= inv;
  return TrianglePreshape(z);
}

/// Hopf image of a preshape on S^2; invariant under planar rotation.
inline Point hopf_forward(const TrianglePreshape& pre) {
  const Complex z1 = pre.z()[0];
  const Complex z2 = pre.z()[1];
  const Complex c = z1 * std::conj(z2);
  const double y1 = 2.0 * c.real();
  const double y2 = 2.0 * c.imag();
  const double y3 = std::norm(z2) - std::norm(z1);
  const double r = std::sqrt(y1 * y1 + y2 * y2 + y3 * y3);
  detail::require(r > 1e-300, ErrorKind::DegenerateTriangle, "Hopf image is undefined");
  Vector y(3);
  y << y1 / r, y2 / r, y3 / r;
  return Point(std::move(y));
}

/// Colatitude θ ∈ [0, π] and longitude φ ∈ (-π, π] of a point on S^2.
struct SphericalAngles {
  double theta;
  double phi;
};

inline SphericalAngles to_angles(const Point& y) {
  detail::require(y.ambient_dim() == 3, ErrorKind::DimensionMismatch, "angles need a point on S^2");
  return {std::acos(std::clamp(y[2], -1.0, 1.0)), std::atan2(y[1], y[0])};
}

inline Point from_angles(double theta, double phi) {
  Vector y(3);
  y << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
  return Point(std::move(y));
}

/// Triangle with shape (θ, φ); ψ only rotates it in the plane. The output is
/// already a preshape: centered with unit Frobenius norm.
inline Triangle hopf_backward(double theta, double phi, double psi) {
  detail::require(theta >= 0.0 && theta <= std::numbers::pi, ErrorKind::InvalidArgument,
                  "theta must lie in [0, pi]");
  const double s = std::sin(theta / 2.0);
  const double c = std::cos(theta / 2.0);
  Triangle t;
  t.vertices(0, 0) = std::cos((psi + phi) / 2.0) * s;
  t.vertices(0, 1) = std::sin((psi + phi) / 2.0) * s;
  t.vertices(1, 0) = std::cos((psi - phi) / 2.0) * c;
  t.vertices(1, 1) = std::sin((psi - phi) / 2.0) * c;
  t.vertices.row(2) = -(t.vertices.row(0) + t.vertices.row(1));
  t.vertices /= t.vertices.norm();
  return t;
}

inline Point triangle_to_sphere(const Triangle& t) { return hopf_forward(triangle_preshape(t)); }

inline Triangle sphere_to_triangle(const Point& y, double psi = 0.0) {
  const auto a = to_angles(y);
  return hopf_backward(a.theta, a.phi, psi);
}

/// Geodesic distance between the Hopf images of two triangles.
inline double triangle_shape_distance(const Triangle& t0, const Triangle& t1) {
  return geodesic_distance(triangle_to_sphere(t0), triangle_to_sphere(t1));
}

}  // namespace bundlemw
