// Test-side helpers: random inputs drawn with the standard library generators
// (independent of the library's own Rng) and brute-force reference answers.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "bundlemw/bundlemw.hpp"

namespace testing_support {

using bundlemw::BundleGaussian;
using bundlemw::CovarianceMatrix;
using bundlemw::GaussianMixture;
using bundlemw::Index;
using bundlemw::Matrix;
using bundlemw::MovingFrame;
using bundlemw::Point;
using bundlemw::Vector;

using Engine = std::mt19937_64;

inline double uniform(Engine& g, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline double gauss(Engine& g) { return std::normal_distribution<double>(0.0, 1.0)(g); }

inline Vector gauss_vector(Engine& g, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = gauss(g);
  return v;
}

inline Point random_point(Engine& g, Index D) { return Point(gauss_vector(g, D)); }

/// Uniform on the cap of geodesic radius < max_angle around `center`.
inline Point random_point_near(Engine& g, const Point& center, double max_angle) {
  Vector v = gauss_vector(g, center.ambient_dim());
  v -= v.dot(center.coords()) * center.coords();
  v.normalize();
  const double t = uniform(g, 0.0, max_angle);
  return Point(Vector(std::cos(t) * center.coords() + std::sin(t) * v));
}

inline Vector random_tangent(Engine& g, const Point& p) {
  Vector v = gauss_vector(g, p.ambient_dim());
  return v - v.dot(p.coords()) * p.coords();
}

/// Random orthonormal basis of the tangent space at p (Gram-Schmidt via QR).
inline Matrix random_tangent_basis(Engine& g, const Point& p) {
  const Index D = p.ambient_dim();
  Matrix a(D, D);
  a.col(0) = p.coords();
  for (Index j = 1; j < D; ++j) a.col(j) = gauss_vector(g, D);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(D, D);
  return q.rightCols(D - 1);
}

inline Matrix random_spd(Engine& g, Index d, double scale) {
  Matrix a(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) a(i, j) = gauss(g);
  }
  return scale * (a * a.transpose() / static_cast<double>(d) + 0.05 * Matrix::Identity(d, d));
}

inline std::vector<double> random_simplex(Engine& g, std::size_t k) {
  std::vector<double> w(k);
  double s = 0.0;
  for (auto& x : w) s += (x = uniform(g, 0.05, 1.0));
  for (auto& x : w) x /= s;
  return w;
}

/// Mixture on S^2 with basepoints within `spread` of the frame origin.
inline GaussianMixture random_mixture(Engine& g, std::shared_ptr<const MovingFrame> frame, std::size_t k,
                                      double spread = 1.5, double cov_scale = 0.05) {
  std::vector<BundleGaussian> comps;
  for (std::size_t i = 0; i < k; ++i) {
    comps.push_back(BundleGaussian{random_point_near(g, frame->origin(), spread),
                                   CovarianceMatrix(random_spd(g, frame->dim(), cov_scale))});
  }
  return GaussianMixture(std::move(frame), random_simplex(g, k), std::move(comps));
}

/// Minimum over permutation assignments of the mean cost (uniform weights).
inline double brute_force_assignment(const Matrix& cost) {
  const Index k = cost.rows();
  std::vector<Index> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (Index i = 0; i < k; ++i) s += cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, s / static_cast<double>(k));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// tr S0 + tr S1 - 2 Σ sqrt(λ_i(S0 S1)): the eigenvalues of S0 S1 are those of
/// S0^{1/2} S1 S0^{1/2}, real and nonnegative.
inline double bures_by_eigenvalues(const Matrix& s0, const Matrix& s1) {
  Eigen::EigenSolver<Matrix> es(s0 * s1, false);
  double root_sum = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) root_sum += std::sqrt(std::max(0.0, es.eigenvalues()[i].real()));
  return s0.trace() + s1.trace() - 2.0 * root_sum;
}

/// Re-expresses a covariance given in frame F's coordinates at m in frame
/// G's coordinates, through the ambient tangent operator at m.
inline Matrix recoordinate(const Matrix& cov_f, const MovingFrame& f, const MovingFrame& g, const Point& m) {
  const Matrix fm = bundlemw::transport_frame(f, m).basis();
  const Matrix gm = bundlemw::transport_frame(g, m).basis();
  const Matrix ambient = fm * cov_f * fm.transpose();
  return gm.transpose() * ambient * gm;
}

inline GaussianMixture recoordinate(const GaussianMixture& mix, std::shared_ptr<const MovingFrame> g) {
  std::vector<BundleGaussian> comps;
  for (const auto& c : mix.components()) {
    comps.push_back(BundleGaussian{c.basepoint,
                                   CovarianceMatrix(recoordinate(c.cov.matrix(), mix.frame(), *g, c.basepoint))});
  }
  return GaussianMixture(std::move(g), mix.weights(), std::move(comps));
}

/// Polygon approximations used by the contour tests.
inline Matrix circle_points(Index n, double radius = 1.0, double phase = 0.0) {
  Matrix pts(2, n);
  for (Index i = 0; i < n; ++i) {
    const double t = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts(0, i) = radius * std::cos(t);
    pts(1, i) = radius * std::sin(t);
  }
  return pts;
}

inline Matrix square_points(Index per_side) {
  Matrix pts(2, 4 * per_side);
  const double corners[5][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {-1, -1}};
  for (Index s = 0; s < 4; ++s) {
    for (Index i = 0; i < per_side; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(per_side);
      pts(0, s * per_side + i) = (1 - t) * corners[s][0] + t * corners[s + 1][0];
      pts(1, s * per_side + i) = (1 - t) * corners[s][1] + t * corners[s + 1][1];
    }
  }
  return pts;
}

/// Star-shaped random blob: radius 1 + Σ small Fourier terms.
inline Matrix random_blob(Engine& g, Index n, double wobble = 0.25) {
  const double a1 = uniform(g, -wobble, wobble), b1 = uniform(g, -wobble, wobble);
  const double a2 = uniform(g, -wobble, wobble), b2 = uniform(g, -wobble, wobble);
  const double a3 = uniform(g, -wobble / 2, wobble / 2);
  Matrix pts(2, n);
  for (Index i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    const double r = 1.0 + a1 * std::cos(2 * t) + b1 * std::sin(2 * t) + a2 * std::cos(3 * t) + b2 * std::sin(3 * t) +
                     a3 * std::cos(5 * t);
    pts(0, i) = r * std::cos(t);
    pts(1, i) = r * std::sin(t);
  }
  return pts;
}

inline Matrix similarity(const Matrix& pts, double angle, double scale, double dx, double dy) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Matrix out = scale * (r * pts);
  out.row(0).array() += dx;
  out.row(1).array() += dy;
  return out;
}

}  // namespace testing_support
