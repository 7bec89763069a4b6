// E-divisive change-point detection on a time-indexed distance matrix, each
// time point being one observation (here: one population).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/random.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

/// Symmetric, nonnegative, zero-diagonal matrix indexed by time.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(Matrix d) : d_(std::move(d)) {
    detail::require(d_.rows() == d_.cols(), ErrorKind::DimensionMismatch, "distance matrix must be square");
    detail::require(d_.allFinite(), ErrorKind::InvalidArgument, "distances must be finite");
    if (d_.size() == 0) return;
    detail::require(d_.minCoeff() >= 0.0, ErrorKind::InvalidArgument, "distances must be nonnegative");
    detail::require(d_.diagonal().cwiseAbs().maxCoeff() == 0.0, ErrorKind::InvalidArgument,
                    "distance matrix diagonal must be zero");
    detail::require((d_ - d_.transpose()).cwiseAbs().maxCoeff() <= 1e-8, ErrorKind::NotSymmetric,
                    "distance matrix is not symmetric");
    d_ = 0.5 * (d_ + d_.transpose()).eval();
  }

  const Matrix& matrix() const noexcept { return d_; }
  Index size() const noexcept { return d_.rows(); }
  double operator()(Index i, Index j) const { return d_(i, j); }

 private:
  Matrix d_;
};

namespace detail {

// 2-D prefix sums of an L×L block for O(1) rectangle sums.
class BlockSums {
 public:
  explicit BlockSums(const Matrix& m) : p_(Matrix::Zero(m.rows() + 1, m.cols() + 1)) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) p_(i + 1, j + 1) = m(i, j) + p_(i, j + 1) + p_(i + 1, j) - p_(i, j);
    }
  }

  double sum(Index r0, Index r1, Index c0, Index c1) const {
    return p_(r1, c1) - p_(r0, c1) - p_(r1, c0) + p_(r0, c0);
  }

 private:
  Matrix p_;
};

// Q for X = [0, s), Y = [s, L) of a powered distance block.
inline double energy_from_sums(const BlockSums& sums, Index s, Index L) {
  const double m = static_cast<double>(s);
  const double n = static_cast<double>(L - s);
  const double cross = sums.sum(0, s, s, L) / (m * n);
  const double within_x = sums.sum(0, s, 0, s) / (m * (m - 1.0));
  const double within_y = sums.sum(s, L, s, L) / (n * (n - 1.0));
  return (m * n / (m + n)) * (2.0 * cross - within_x - within_y);
}

struct SplitCandidate {
  Index split = -1;  // local offset of the first index of the second part
  double statistic = -std::numeric_limits<double>::infinity();
};

// Best split of a powered block with at least min_size on each side; ties
// keep the earliest split.
inline SplitCandidate best_split(const Matrix& powered_block, Index min_size) {
  const Index L = powered_block.rows();
  const BlockSums sums(powered_block);
  SplitCandidate best;
  for (Index s = min_size; s + min_size <= L; ++s) {
    const double q = energy_from_sums(sums, s, L);
    if (q > best.statistic) {
      best.statistic = q;
      best.split = s;
    }
  }
  return best;
}

}  // namespace detail

/// Two-sample energy statistic of X = [lo, split) against Y = [split, hi):
/// Q = mn/(m+n) · (2·mean D^α_{XY} - mean D^α_{XX'} - mean D^α_{YY'}),
/// the within-sample means running over distinct pairs.
inline double energy_statistic(const DistanceMatrix& d, Index split, Index lo, Index hi, double alpha = 1.0) {
  detail::require(0 <= lo && lo < split && split < hi && hi <= d.size(), ErrorKind::InvalidArgument,
                  "need 0 <= lo < split < hi <= n");
  detail::require(alpha > 0.0 && alpha <= 2.0, ErrorKind::InvalidArgument, "alpha must lie in (0, 2]");
  detail::require(split - lo >= 2 && hi - split >= 2, ErrorKind::SegmentTooSmall,
                  "each side of the split needs at least 2 observations");
  const Matrix block = d.matrix().block(lo, lo, hi - lo, hi - lo).array().pow(alpha).matrix();
  return detail::energy_from_sums(detail::BlockSums(block), split - lo, hi - lo);
}

struct EDivisiveOptions {
  int permutations = 499;  // R
  double p0 = 0.0125;
  Index min_size = 12;
  double alpha = 1.0;
  std::uint64_t seed = 0;
};

struct ChangePoint {
  Index index = 0;  // first time index of the new segment
  double p_value = 1.0;
  double statistic = 0.0;
  bool accepted = false;
};

struct ChangePointReport {
  std::vector<ChangePoint> candidates;  // in detection order; the last may be rejected
  EDivisiveOptions options;

  std::vector<Index> change_points() const {
    std::vector<Index> out;
    for (const auto& c : candidates) {
      if (c.accepted) out.push_back(c.index);
    }
    return out;
  }
};

/// Hierarchical E-divisive procedure. Each round picks the split with the
/// largest energy statistic over all current segments, then tests it with R
/// permutations of the time indices inside that segment, using
/// p = (1 + #{permuted max Q >= observed Q}) / (R + 1). Accepted splits
/// bisect the segment; the first rejection ends the search.
inline ChangePointReport e_divisive(const DistanceMatrix& d, EDivisiveOptions opts = {}) {
  const Index n = d.size();
  detail::require(opts.permutations >= 1, ErrorKind::InvalidArgument, "R must be >= 1");
  detail::require(opts.alpha > 0.0 && opts.alpha <= 2.0, ErrorKind::InvalidArgument, "alpha must lie in (0, 2]");
  detail::require(opts.p0 > 0.0 && opts.p0 < 1.0, ErrorKind::InvalidArgument, "p0 must lie in (0, 1)");
  detail::require(opts.min_size >= 2, ErrorKind::SegmentTooSmall, "min_size must be >= 2");
  detail::require(n >= 2 * opts.min_size, ErrorKind::SegmentTooSmall, "series shorter than 2 * min_size");

  const Matrix powered = d.matrix().array().pow(opts.alpha).matrix();
  std::vector<std::pair<Index, Index>> segments{{0, n}};
  ChangePointReport report;
  report.options = opts;

  for (std::uint64_t round = 0;; ++round) {
    std::size_t best_seg = segments.size();
    detail::SplitCandidate best;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto [lo, hi] = segments[s];
      if (hi - lo < 2 * opts.min_size) continue;
      const auto cand = detail::best_split(powered.block(lo, lo, hi - lo, hi - lo), opts.min_size);
      if (cand.statistic > best.statistic) {
        best = cand;
        best_seg = s;
      }
    }
    if (best_seg == segments.size()) break;

    const auto [lo, hi] = segments[best_seg];
    const Index L = hi - lo;
    const Matrix block = powered.block(lo, lo, L, L);
    const double tie_tol = 1e-12 * std::max(1.0, std::abs(best.statistic));
    std::vector<Index> perm(static_cast<std::size_t>(L));
    Matrix permuted(L, L);
    int exceed = 0;
    const std::uint64_t round_seed = Rng::stream_seed(opts.seed, round);
    for (int r = 0; r < opts.permutations; ++r) {
      Rng rng(Rng::stream_seed(round_seed, static_cast<std::uint64_t>(r)));
      std::iota(perm.begin(), perm.end(), Index{0});
      rng.shuffle(perm);
      for (Index i = 0; i < L; ++i) {
        for (Index j = 0; j < L; ++j) permuted(i, j) = block(perm[i], perm[j]);
      }
      if (detail::best_split(permuted, opts.min_size).statistic >= best.statistic - tie_tol) ++exceed;
    }
    ChangePoint cp;
    cp.index = lo + best.split;
    cp.statistic = best.statistic;
    cp.p_value = static_cast<double>(1 + exceed) / static_cast<double>(opts.permutations + 1);
    cp.accepted = cp.p_value <= opts.p0;
    report.candidates.push_back(cp);
    if (!cp.accepted) break;
    segments[best_seg] = {lo, cp.index};
    segments.insert(segments.begin() + static_cast<std::ptrdiff_t>(best_seg) + 1, {cp.index, hi});
  }
  return report;
}

}  // namespace bundlemw
