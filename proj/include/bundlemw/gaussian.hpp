// Bundle Gaussians (mean-zero Gaussians on a single tangent fiber) and their
// mixtures, with the closed-form squared 2-Wasserstein distance between two
// bundle Gaussians.
//
// Covariances are stored in coordinates of the transported frame F(m). In
// those coordinates the fiber identification between two basepoints is the
// identity matrix, so the distance reduces to d_M(m0, m1)^2 plus the Bures
// term of the two coordinate covariances.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

inline constexpr double kSymmetryTol = 1e-6;
inline constexpr double kWeightTol = 1e-10;

/// Symmetric positive semidefinite d×d matrix. Construction symmetrizes
/// inputs whose asymmetry is within kSymmetryTol and rejects the rest.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Matrix mat) : mat_(std::move(mat)) {
    detail::require(mat_.rows() == mat_.cols(), ErrorKind::DimensionMismatch,
                    "covariance must be square");
    detail::require(mat_.allFinite(), ErrorKind::InvalidArgument, "covariance must be finite");
    if (mat_.size() > 0) {
      const double asym = (mat_ - mat_.transpose()).cwiseAbs().maxCoeff();
      detail::require(asym <= kSymmetryTol * std::max(1.0, mat_.cwiseAbs().maxCoeff()),
                      ErrorKind::NotSymmetric, "covariance is not symmetric");
    }
    mat_ = 0.5 * (mat_ + mat_.transpose()).eval();
  }

  static CovarianceMatrix zero(Index d) { return CovarianceMatrix(Matrix::Zero(d, d)); }
  static CovarianceMatrix identity(Index d) { return CovarianceMatrix(Matrix::Identity(d, d)); }
  static CovarianceMatrix scaled_identity(Index d, double s) {
    return CovarianceMatrix(s * Matrix::Identity(d, d));
  }

  const Matrix& matrix() const noexcept { return mat_; }
  Index dim() const noexcept { return mat_.rows(); }
  double trace() const { return mat_.trace(); }

  /// Thin factor L (d×r) with L·Lᵀ = S after clamping negative eigenvalues;
  /// r counts eigenvalues above a relative 1e-14 threshold.
  Matrix factor() const {
    const Index d = dim();
    if (d == 0 || mat_.cwiseAbs().maxCoeff() == 0.0) return Matrix(d, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(mat_);
    const Vector& ev = eig.eigenvalues();
    const double cutoff = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Index r = 0;
    for (Index i = 0; i < d; ++i) r += ev[i] > cutoff ? 1 : 0;
    Matrix out(d, r);
    for (Index i = d - r, k = 0; i < d; ++i, ++k) {
      out.col(k) = eig.eigenvectors().col(i) * std::sqrt(ev[i]);
    }
    return out;
  }

 private:
  Matrix mat_;
};

namespace detail {

// A difference of traces below this bound is cancellation noise; reporting
// it as 0 keeps sqrt(·) of identical covariances at exactly 0.
inline double clamp_roundoff(double value, double scale) {
  return value <= 64.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : value;
}

}  // namespace detail

/// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
inline CovarianceMatrix psd_sqrt(const CovarianceMatrix& s) {
  const Index d = s.dim();
  if (d == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.matrix());
  const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return CovarianceMatrix(eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose());
}

/// tr(S0 + S1 - 2 (S0^{1/2} S1 S0^{1/2})^{1/2}), clamped at 0.
inline double bures_term(const CovarianceMatrix& s0, const CovarianceMatrix& s1) {
  detail::require(s0.dim() == s1.dim(), ErrorKind::DimensionMismatch,
                  "covariances have different dimensions");
  const Matrix root0 = psd_sqrt(s0).matrix();
  const Matrix middle = root0 * s1.matrix() * root0;
  // Eigenvalues at round-off level are zeros of a rank-deficient product;
  // their square roots would add O(sqrt(eps)) noise.
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (middle + middle.transpose()), Eigen::EigenvaluesOnly)
                        .eigenvalues();
  const double cutoff = 64.0 * std::numeric_limits<double>::epsilon() * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  double cross = 0.0;
  for (Index i = 0; i < ev.size(); ++i) cross += ev[i] > cutoff ? std::sqrt(ev[i]) : 0.0;
  return detail::clamp_roundoff(s0.trace() + s1.trace() - 2.0 * cross, s0.trace() + s1.trace());
}

/// Bures term from thin factors S0 = L0 L0ᵀ, S1 = L1 L1ᵀ:
/// tr S0 + tr S1 - 2 ‖L0ᵀ L1‖_*, where ‖·‖_* is the nuclear norm. Exact for
/// rank-deficient inputs and cheap when the ranks are small.
inline double bures_term_factored(const Matrix& l0, const Matrix& l1) {
  detail::require(l0.rows() == l1.rows(), ErrorKind::DimensionMismatch,
                  "factors have different row counts");
  const double tr0 = l0.squaredNorm();
  const double tr1 = l1.squaredNorm();
  if (l0.cols() == 0 || l1.cols() == 0) return tr0 + tr1;
  const Matrix cross = l0.transpose() * l1;
  const double nuclear = Eigen::JacobiSVD<Matrix>(cross).singularValues().sum();
  return detail::clamp_roundoff(tr0 + tr1 - 2.0 * nuclear, tr0 + tr1);
}

/// Mean-zero Gaussian on the tangent fiber at `basepoint`, covariance in F(m) coordinates.
struct BundleGaussian {
  Point basepoint;
  CovarianceMatrix cov;
};

/// Squared 2-Wasserstein distance between two bundle Gaussians whose
/// covariances are expressed in the same moving-frame family:
/// d_M(m0, m1)^2 + bures_term(Σ0, Σ1).
inline double w2sq_bundle_gaussian(const BundleGaussian& g0, const BundleGaussian& g1) {
  const double base = geodesic_distance(g0.basepoint, g1.basepoint);
  return base * base + bures_term(g0.cov, g1.cov);
}

inline double w2_bundle_gaussian(const BundleGaussian& g0, const BundleGaussian& g1) {
  return std::sqrt(w2sq_bundle_gaussian(g0, g1));
}

/// Weighted sum of bundle Gaussians over one moving-frame family.
class GaussianMixture {
 public:
  GaussianMixture(std::shared_ptr<const MovingFrame> frame, std::vector<double> weights,
                  std::vector<BundleGaussian> components)
      : frame_(std::move(frame)), weights_(std::move(weights)), components_(std::move(components)) {
    detail::require(frame_ != nullptr, ErrorKind::InvalidArgument, "mixture needs a frame");
    detail::require(!components_.empty(), ErrorKind::InvalidArgument,
                    "mixture needs at least one component");
    detail::require(weights_.size() == components_.size(), ErrorKind::DimensionMismatch,
                    "weights and components differ in length");
    double total = 0.0;
    for (double w : weights_) {
      detail::require(std::isfinite(w) && w >= 0.0, ErrorKind::InfeasibleWeights,
                      "mixture weights must be nonnegative");
      total += w;
    }
    detail::require(std::abs(total - 1.0) <= kWeightTol, ErrorKind::InfeasibleWeights,
                    "mixture weights must sum to 1");
    const Vector& p = frame_->origin().coords();
    for (const auto& c : components_) {
      detail::require(c.basepoint.ambient_dim() == frame_->ambient_dim(),
                      ErrorKind::DimensionMismatch, "component basepoint dimension differs from frame");
      detail::require(c.cov.dim() == frame_->dim(), ErrorKind::DimensionMismatch,
                      "component covariance dimension differs from frame");
      detail::require_not_antipodal(p.dot(c.basepoint.coords()));
    }
  }

  const MovingFrame& frame() const noexcept { return *frame_; }
  const std::shared_ptr<const MovingFrame>& frame_ptr() const noexcept { return frame_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<BundleGaussian>& components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }
  Index dim() const noexcept { return frame_->dim(); }

 private:
  std::shared_ptr<const MovingFrame> frame_;
  std::vector<double> weights_;
  std::vector<BundleGaussian> components_;
};

/// Merges components whose basepoints lie within geodesic distance `tol` and
/// whose covariances agree within Frobenius distance `tol`, summing weights,
/// and drops zero-weight components. The first occurrence of each distinct
/// component keeps its position.
inline GaussianMixture normalize_minimal_form(const GaussianMixture& mix, double tol = 1e-9) {
  std::vector<double> weights;
  std::vector<BundleGaussian> comps;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double w = mix.weights()[k];
    if (w <= 0.0) continue;
    const auto& c = mix.components()[k];
    bool merged = false;
    for (std::size_t j = 0; j < comps.size(); ++j) {
      if (geodesic_distance(comps[j].basepoint, c.basepoint) <= tol &&
          (comps[j].cov.matrix() - c.cov.matrix()).norm() <= tol) {
        weights[j] += w;
        merged = true;
        break;
      }
    }
    if (!merged) {
      weights.push_back(w);
      comps.push_back(c);
    }
  }
  return GaussianMixture(mix.frame_ptr(), std::move(weights), std::move(comps));
}

}  // namespace bundlemw
