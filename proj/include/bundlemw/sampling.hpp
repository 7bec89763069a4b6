// Wrapped-Gaussian sampling: draw frame coordinates v ~ N(0, Σ), turn them
// into a tangent vector at m through the transported frame F(m), and push
// the vector through exp_m.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/random.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

struct SampleSet {
  std::vector<Point> points;
  std::vector<int> labels;     // generating component per point
  std::size_t truncated = 0;   // draws rejected for tangent norm >= pi

  double truncation_rate() const {
    const double attempts = static_cast<double>(points.size() + truncated);
    return attempts > 0 ? static_cast<double>(truncated) / attempts : 0.0;
  }
};

namespace detail {

// Draws per-component samples from a dedicated stream so the i-th draw of a
// component does not depend on how the other components were interleaved.
class GaussianDrawer {
 public:
  GaussianDrawer(const BundleGaussian& g, const MovingFrame& frame, std::uint64_t seed)
      : g_(g), frame_(frame), rng_(seed), factor_(g.cov.factor()) {
    require(g.cov.dim() == frame.dim(), ErrorKind::DimensionMismatch,
            "covariance dimension differs from frame");
    require_not_antipodal(frame.origin().coords().dot(g.basepoint.coords()));
  }

  Point draw(std::size_t& truncated) {
    const Index r = factor_.cols();
    if (r == 0) return g_.basepoint;
    Vector z(r);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      for (Index i = 0; i < r; ++i) z[i] = rng_.normal();
      const Vector coords = factor_ * z;
      // frame coordinates are an isometry, so ‖coords‖ is the tangent length
      if (coords.norm() >= std::numbers::pi) {
        ++truncated;
        continue;
      }
      return sphere_exp(frame_vector(frame_, g_.basepoint, coords));
    }
    fail(ErrorKind::NoConvergence, "covariance too large: tangent draws keep exceeding pi");
  }

 private:
  const BundleGaussian& g_;
  const MovingFrame& frame_;
  Rng rng_;
  Matrix factor_;
};

}  // namespace detail

/// n draws from a bundle Gaussian. Draws whose tangent vector reaches the
/// cut locus (norm >= pi) are rejected and redrawn; the count is reported.
inline SampleSet sample_gaussian(const BundleGaussian& g, const MovingFrame& frame, std::size_t n,
                                 std::uint64_t seed) {
  detail::require(n >= 1, ErrorKind::InvalidArgument, "sample size must be >= 1");
  detail::GaussianDrawer drawer(g, frame, Rng::stream_seed(seed, 1));
  SampleSet out;
  out.points.reserve(n);
  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) out.points.push_back(drawer.draw(out.truncated));
  return out;
}

/// n draws from a mixture: component labels i.i.d. from the weights, then one
/// draw from the chosen component's own stream.
inline SampleSet sample_mixture(const GaussianMixture& mix, std::size_t n, std::uint64_t seed) {
  detail::require(n >= 1, ErrorKind::InvalidArgument, "sample size must be >= 1");
  const std::size_t K = mix.size();
  std::vector<detail::GaussianDrawer> drawers;
  drawers.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    drawers.emplace_back(mix.components()[k], mix.frame(), Rng::stream_seed(seed, k + 1));
  }
  std::vector<double> cumulative(K);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < K; ++k) {
    acc += mix.weights()[k];
    cumulative[k] = acc;
    if (mix.weights()[k] > 0.0) last_positive = k;
  }

  Rng label_rng(Rng::stream_seed(seed, 0));
  SampleSet out;
  out.points.reserve(n);
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = label_rng.uniform() * acc;
    // zero-weight components never satisfy u < cumulative[k] first
    std::size_t k = last_positive;
    for (std::size_t j = 0; j < K; ++j) {
      if (u < cumulative[j]) {
        k = j;
        break;
      }
    }
    out.labels.push_back(static_cast<int>(k));
    out.points.push_back(drawers[k].draw(out.truncated));
  }
  return out;
}

/// Convenience overload matching the single-Gaussian signature for mixtures
/// given with an explicit frame check.
inline SampleSet sample_mixture(const GaussianMixture& mix, const MovingFrame& frame, std::size_t n,
                                std::uint64_t seed) {
  detail::require(same_frame(mix.frame(), frame), ErrorKind::FrameMismatch,
                  "sampling frame differs from the mixture frame");
  return sample_mixture(mix, n, seed);
}

}  // namespace bundlemw
