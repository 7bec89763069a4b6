// Mixture estimation from points on a sphere: cluster, then treat each
// cluster as one bundle Gaussian with weight n_k / n and frame-coordinate
// covariance V Vᵀ / (n_k - 1) of the shooting vectors log_{m_k}(x_i).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/random.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

inline constexpr int kOutlier = -1;

struct Clustering {
  std::vector<int> labels;         // cluster index per point, or kOutlier
  std::vector<Point> centers;      // Fréchet means (k-means); empty for k-modes
  std::vector<std::size_t> modes;  // point index of each cluster's mode (k-modes)
  std::vector<std::size_t> sizes;
  bool converged = true;
  int iterations = 0;
  double inertia = 0.0;  // k-means objective Σ d(x_i, c_{l_i})^2
  double radius = 0.0;   // k-modes neighborhood radius

  std::size_t num_clusters() const { return sizes.size(); }

  std::vector<std::size_t> outliers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == kOutlier) out.push_back(i);
    }
    return out;
  }
};

inline Matrix geodesic_distance_matrix(std::span<const Point> points) {
  const Index n = static_cast<Index>(points.size());
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = geodesic_distance(points[i], points[j]);
    }
  }
  return d;
}

struct KMeansOptions {
  std::uint64_t seed = 0;
  double tol = 1e-10;  // Fréchet mean tolerance
  int max_iter = 100;
  int restarts = 3;    // independent k-means++ seedings; lowest inertia wins
};

namespace detail {

inline std::vector<std::size_t> count_sizes(const std::vector<int>& labels, std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (int l : labels) {
    if (l != kOutlier) ++sizes[static_cast<std::size_t>(l)];
  }
  return sizes;
}

inline std::vector<Point> cluster_members(std::span<const Point> points, const std::vector<int>& labels,
                                          int k) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] == k) out.push_back(points[i]);
  }
  return out;
}

inline std::vector<Point> kmeanspp_seed(std::span<const Point> points, std::size_t K, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Point> centers;
  centers.push_back(points[rng.index(n)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = geodesic_distance(points[i], centers.back());
      d2[i] = std::min(d2[i], d * d);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.index(n);
    } else {
      double u = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

// Nearest-center assignment; ties go to the lowest center index. Returns inertia.
inline double assign(std::span<const Point> points, const std::vector<Point>& centers,
                     std::vector<int>& labels, std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = geodesic_distance(points[i], centers[k]);
      if (d < best) {
        best = d;
        best_k = static_cast<int>(k);
      }
    }
    labels[i] = best_k;
    dist[i] = best;
    inertia += best * best;
  }
  return inertia;
}

// Gives every empty cluster the point farthest from its current center,
// taken from a cluster that can spare it.
inline void fill_empty_clusters(std::span<const Point> points, std::vector<Point>& centers,
                                std::vector<int>& labels, std::vector<double>& dist) {
  const std::size_t K = centers.size();
  auto sizes = count_sizes(labels, K);
  for (std::size_t k = 0; k < K; ++k) {
    if (sizes[k] > 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (sizes[static_cast<std::size_t>(labels[i])] > 1 && dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    if (far == points.size()) continue;
    --sizes[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(k);
    ++sizes[k];
    dist[far] = 0.0;
    centers[k] = points[far];
  }
}

inline Clustering kmeans_once(std::span<const Point> points, std::size_t K, const KMeansOptions& opts,
                              Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Point> centers = kmeanspp_seed(points, K, rng);
  std::vector<int> labels(n, 0), previous;
  std::vector<double> dist(n, 0.0);
  FrechetOptions fopts{opts.tol, 200};

  Clustering out;
  out.converged = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    assign(points, centers, labels, dist);
    fill_empty_clusters(points, centers, labels, dist);
    out.iterations = iter + 1;
    if (labels == previous) {
      out.converged = true;
      break;
    }
    previous = labels;
    for (std::size_t k = 0; k < K; ++k) {
      const auto members = cluster_members(points, labels, static_cast<int>(k));
      if (!members.empty()) centers[k] = frechet_mean(members, std::nullopt, fopts);
    }
  }
  // Centers always correspond to the final labels.
  for (std::size_t k = 0; k < K; ++k) {
    const auto members = cluster_members(points, labels, static_cast<int>(k));
    if (!members.empty()) centers[k] = frechet_mean(members, std::nullopt, fopts);
  }
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = geodesic_distance(points[i], centers[static_cast<std::size_t>(labels[i])]);
    out.inertia += d * d;
  }
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  out.sizes = count_sizes(out.labels, K);
  return out;
}

}  // namespace detail

/// Lloyd iteration with geodesic assignment and Fréchet-mean updates,
/// k-means++ seeding under geodesic distance. A run that hits max_iter
/// returns its last state with converged = false.
inline Clustering riemannian_kmeans(std::span<const Point> points, std::size_t K, KMeansOptions opts = {}) {
  detail::require(K >= 1, ErrorKind::InvalidArgument, "K must be >= 1");
  detail::require(points.size() >= K, ErrorKind::InvalidArgument, "need at least K points");
  Rng rng(opts.seed);
  Clustering best;
  bool have_best = false;
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    Clustering c = detail::kmeans_once(points, K, opts, rng);
    if (!have_best || c.inertia < best.inertia - 1e-12 * std::max(1.0, best.inertia)) {
      best = std::move(c);
      have_best = true;
    }
  }
  return best;
}

struct KModesOptions {
  double quantile = 0.1;  // neighborhood radius = this quantile of off-diagonal distances
};

/// Mode-seeking clustering on a distance matrix.
///
/// Radius r is the `quantile` of the off-diagonal distances (linear
/// interpolation). Each point's density is its neighbor count within r. A
/// mode is a point whose (count, -index) is maximal over its r-ball; every
/// other point climbs to its best neighbor until it reaches a mode. Points
/// with no neighbor within r are outliers. An all-zero matrix yields a single
/// cluster.
inline Clustering kmodes_cluster(const Matrix& distmat, KModesOptions opts = {}) {
  const Index n = distmat.rows();
  detail::require(distmat.cols() == n, ErrorKind::DimensionMismatch, "distance matrix must be square");
  detail::require(n >= 1, ErrorKind::InvalidArgument, "distance matrix is empty");
  detail::require(opts.quantile > 0.0 && opts.quantile <= 1.0, ErrorKind::InvalidArgument,
                  "quantile must lie in (0, 1]");
  detail::require(distmat.allFinite() && distmat.minCoeff() >= 0.0, ErrorKind::InvalidArgument,
                  "distances must be finite and nonnegative");
  detail::require((distmat - distmat.transpose()).cwiseAbs().maxCoeff() <= 1e-8 *
                      std::max(1.0, distmat.cwiseAbs().maxCoeff()),
                  ErrorKind::NotSymmetric, "distance matrix is not symmetric");

  Clustering out;
  out.labels.assign(static_cast<std::size_t>(n), kOutlier);
  if (n == 1 || distmat.maxCoeff() == 0.0) {
    std::fill(out.labels.begin(), out.labels.end(), 0);
    out.modes = {0};
    out.sizes = {static_cast<std::size_t>(n)};
    return out;
  }

  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) off.push_back(distmat(i, j));
  }
  std::sort(off.begin(), off.end());
  const double pos = opts.quantile * static_cast<double>(off.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, off.size() - 1);
  const double r = off[lo] + (pos - static_cast<double>(lo)) * (off[hi] - off[lo]);
  out.radius = r;

  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j != i && distmat(i, j) <= r) nbrs[i].push_back(j);
    }
  }
  auto better = [&](Index a, Index b) {  // a ranks above b
    const auto ca = nbrs[a].size(), cb = nbrs[b].size();
    return ca > cb || (ca == cb && a < b);
  };
  std::vector<Index> up(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    Index best = i;
    for (Index j : nbrs[i]) {
      if (better(j, best)) best = j;
    }
    up[i] = best;
  }

  std::vector<int> mode_label(static_cast<std::size_t>(n), kOutlier);
  for (Index i = 0; i < n; ++i) {
    if (!nbrs[i].empty() && up[i] == i) {
      mode_label[i] = static_cast<int>(out.modes.size());
      out.modes.push_back(static_cast<std::size_t>(i));
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (nbrs[i].empty()) continue;
    Index cur = i;
    while (up[cur] != cur) cur = up[cur];
    out.labels[i] = mode_label[cur];
  }
  out.sizes = detail::count_sizes(out.labels, out.modes.size());
  return out;
}

/// Turns clusters with fewer than `min_size` members into outliers and
/// renumbers the remaining clusters in their original order.
inline Clustering demote_small_clusters(const Clustering& c, std::size_t min_size) {
  Clustering out = c;
  std::vector<int> remap(c.num_clusters(), kOutlier);
  out.centers.clear();
  out.modes.clear();
  int next = 0;
  for (std::size_t k = 0; k < c.num_clusters(); ++k) {
    if (c.sizes[k] < min_size) continue;
    remap[k] = next++;
    if (!c.centers.empty()) out.centers.push_back(c.centers[k]);
    if (!c.modes.empty()) out.modes.push_back(c.modes[k]);
  }
  for (int& l : out.labels) {
    if (l != kOutlier) l = remap[static_cast<std::size_t>(l)];
  }
  out.sizes = detail::count_sizes(out.labels, static_cast<std::size_t>(next));
  return out;
}

/// Rows are the frame coordinates of log_center(x_i) in F(center).
inline Matrix shooting_coordinates(const MovingFrame& frame, const Point& center,
                                   std::span<const Point> members) {
  Matrix v(static_cast<Index>(members.size()), frame.dim());
  for (std::size_t i = 0; i < members.size(); ++i) {
    v.row(static_cast<Index>(i)) = frame_coordinates(frame, sphere_log(center, members[i])).transpose();
  }
  return v;
}

/// Σ = Vᵀ V / (n - 1) for shooting-coordinate rows V.
inline CovarianceMatrix covariance_from_shooting(const Matrix& v) {
  detail::require(v.rows() >= 2, ErrorKind::ClusterTooSmall, "covariance needs at least 2 points");
  return CovarianceMatrix(v.transpose() * v / static_cast<double>(v.rows() - 1));
}

/// One bundle Gaussian per cluster. The basepoint is the cluster's Fréchet
/// mean when the clustering carries centers, otherwise its mode point.
/// Outliers count toward neither the weights nor the covariances.
inline GaussianMixture fit_mixture(std::span<const Point> points, const Clustering& clustering,
                                   std::shared_ptr<const MovingFrame> frame) {
  detail::require(frame != nullptr, ErrorKind::InvalidArgument, "fit_mixture needs a frame");
  detail::require(clustering.labels.size() == points.size(), ErrorKind::DimensionMismatch,
                  "labels and points differ in length");
  const std::size_t K = clustering.num_clusters();
  detail::require(K >= 1, ErrorKind::ClusterTooSmall, "clustering has no clusters");
  detail::require(!clustering.centers.empty() || clustering.modes.size() == K, ErrorKind::InvalidArgument,
                  "clustering has neither centers nor modes");

  std::size_t total = 0;
  for (auto s : clustering.sizes) total += s;
  std::vector<double> weights;
  std::vector<BundleGaussian> comps;
  for (std::size_t k = 0; k < K; ++k) {
    const auto members = detail::cluster_members(points, clustering.labels, static_cast<int>(k));
    detail::require(members.size() >= 2, ErrorKind::ClusterTooSmall,
                    "cluster " + std::to_string(k) + " has fewer than 2 points");
    const Point center = clustering.centers.empty() ? points[clustering.modes[k]] : clustering.centers[k];
    const Matrix v = shooting_coordinates(*frame, center, members);
    comps.push_back(BundleGaussian{center, covariance_from_shooting(v)});
    weights.push_back(static_cast<double>(members.size()) / static_cast<double>(total));
  }
  return normalize_minimal_form(GaussianMixture(std::move(frame), std::move(weights), std::move(comps)),
                                1e-12);
}

}  // namespace bundlemw
