// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "support.hpp"

using namespace bundlemw;
using namespace testing_support;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix symmetric_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Samples (one per column) transformed to have exactly zero mean and second
// moment `target`, so only the shape of the empirical law differs from N(0, target).
Matrix moment_matched(Engine& g, Index n, const Matrix& target) {
  Matrix z(target.rows(), n);
  for (Index i = 0; i < z.size(); ++i) z.data()[i] = gauss(g);
  z.colwise() -= z.rowwise().mean();
  const Matrix cov = z * z.transpose() / static_cast<double>(n);
  return symmetric_sqrt(target) * symmetric_sqrt(cov).inverse() * z;
}

// 1. Closed-form Bures term against exact discrete OT between samples.
Verdict bures_vs_empirical() {
  const Matrix s0 = Matrix::Identity(2, 2);
  Matrix s1 = Matrix::Zero(2, 2);
  s1.diagonal() << 4.0, 1.0;
  const double closed = bures_term(CovarianceMatrix(s0), CovarianceMatrix(s1));
  const Index n = 2000;
  Engine g(1);
  const Matrix x = moment_matched(g, n, s0), y = moment_matched(g, n, s1);
  Matrix cost(n, n);
  for (Index i = 0; i < n; ++i) cost.row(i) = (y.colwise() - x.col(i)).colwise().squaredNorm();
  const Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double empirical = solve_transportation(cost, w, w).cost;
  const double rel = std::abs(empirical - closed) / closed;
  return {std::abs(closed - 1.0) < 1e-12 && rel <= 0.05,
          fmt("closed form %.6f, discrete OT on %lld samples %.6f, relative gap %.4f", closed,
              static_cast<long long>(n), empirical, rel)};
}

// 2. Transportation LP against brute-force permutations.
Verdict lp_oracle() {
  Engine g(2);
  double worst = 0.0;
  for (Index k = 1; k <= 5; ++k) {
    const Vector w = Vector::Constant(k, 1.0 / static_cast<double>(k));
    for (int trial = 0; trial < 50; ++trial) {
      Matrix c(k, k);
      for (Index i = 0; i < c.size(); ++i) c.data()[i] = uniform(g, 0.0, 3.0);
      worst = std::max(worst, std::abs(solve_transportation(c, w, w).cost - brute_force_assignment(c)));
    }
  }
  return {worst <= 1e-9, fmt("250 problems, K = 1..5, worst gap %.2e", worst)};
}

// 3. Frame invariance at a fixed origin, plus stability across origins.
Verdict frame_invariance() {
  Engine g(3);
  const Point p{0.0, 0.0, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = std::make_shared<const MovingFrame>(MovingFrame(p, random_tangent_basis(g, p)));
    const auto h = std::make_shared<const MovingFrame>(MovingFrame(p, random_tangent_basis(g, p)));
    const GaussianMixture a = random_mixture(g, f, 1 + trial % 4), b = random_mixture(g, f, 1 + (trial / 4) % 4);
    worst = std::max(worst, std::abs(mw2(a, b).distance - mw2(recoordinate(a, h), recoordinate(b, h)).distance));
  }

  // Cross-origin: fit both data sets in frames anchored at the north and
  // south poles and compare the two distances.
  const auto north = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 0));
  const auto south = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, -1.0}, 0));
  double worst_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Engine e(300 + seed);
    auto equatorial = [&](std::size_t k) {
      std::vector<BundleGaussian> comps;
      for (std::size_t i = 0; i < k; ++i) {
        const double lon = uniform(e, -kPi, kPi), lat = uniform(e, -0.4, 0.4);
        comps.push_back(BundleGaussian{Point{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)},
                                       CovarianceMatrix(random_spd(e, 2, 0.02))});
      }
      return GaussianMixture(north, random_simplex(e, k), std::move(comps));
    };
    auto fit_both = [&](const GaussianMixture& truth, std::uint64_t s) {
      const SampleSet data = sample_mixture(truth, 600, s);
      KMeansOptions opts;
      opts.seed = s;
      const Clustering c = riemannian_kmeans(data.points, truth.size(), opts);
      return std::pair{fit_mixture(data.points, c, north), fit_mixture(data.points, c, south)};
    };
    const auto [an, as] = fit_both(equatorial(2), 2 * seed);
    const auto [bn, bs] = fit_both(equatorial(3), 2 * seed + 1);
    const double dn = mw2(an, bn).distance, ds = mw2(as, bs).distance;
    worst_rel = std::max(worst_rel, std::abs(dn - ds) / std::max(dn, ds));
  }
  return {worst <= 1e-8 && worst_rel < 0.05,
          fmt("same origin: worst |dMW2| %.2e over 20 pairs; north vs south origin: worst relative gap %.4f over 20 trials",
              worst, worst_rel)};
}

// 4. Metric axioms.
Verdict metric_axioms() {
  Engine g(4);
  const auto f = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 4));
  double asym = 0.0, self = 0.0, triangle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const GaussianMixture a = random_mixture(g, f, 1 + trial % 3), b = random_mixture(g, f, 1 + trial % 4),
                          c = random_mixture(g, f, 2);
    const double ab = mw2(a, b).distance, ba = mw2(b, a).distance, bc = mw2(b, c).distance, ac = mw2(a, c).distance;
    asym = std::max(asym, std::abs(ab - ba));
    self = std::max({self, mw2(a, a).distance, mw2(c, c).distance});
    triangle = std::max(triangle, ac - ab - bc);
  }
  return {asym <= 1e-10 && self == 0.0 && triangle <= 1e-8,
          fmt("100 triples: worst asymmetry %.2e, worst self-distance %.2e, worst triangle excess %.2e", asym, self,
              triangle)};
}

// 5. Zero covariances reduce MW2 to discrete W2 of the basepoints.
Verdict zero_covariance() {
  Engine g(5);
  const auto f = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 5));
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto point_mixture = [&](std::size_t k) {
      std::vector<BundleGaussian> comps;
      for (std::size_t i = 0; i < k; ++i) comps.push_back(BundleGaussian{random_point_near(g, f->origin(), 1.5), CovarianceMatrix::zero(2)});
      return GaussianMixture(f, random_simplex(g, k), std::move(comps));
    };
    const GaussianMixture a = point_mixture(1 + trial % 5), b = point_mixture(1 + (trial * 3) % 4);
    Matrix cost(static_cast<Index>(a.size()), static_cast<Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double d = geodesic_distance(a.components()[i].basepoint, b.components()[j].basepoint);
        cost(static_cast<Index>(i), static_cast<Index>(j)) = d * d;
      }
    }
    const Vector wa = Eigen::Map<const Vector>(a.weights().data(), static_cast<Index>(a.size()));
    const Vector wb = Eigen::Map<const Vector>(b.weights().data(), static_cast<Index>(b.size()));
    const double w2 = std::sqrt(solve_transportation(cost, wa, wb).cost);
    worst = std::max(worst, std::abs(mw2(a, b).distance - w2));
  }
  return {worst == 0.0, fmt("20 cases, worst |MW2 - W2| %.2e", worst)};
}

// 6. Sampling, clustering and fitting recover a known mixture.
Verdict estimation_round_trip() {
  const auto f = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 6));
  const Point m0{0.0, 0.0, 1.0};
  const Point m1 = sphere_exp(TangentVector(m0, Vector((Vector(3) << 1.1, 0.0, 0.0).finished())));
  const Point m2 = sphere_exp(TangentVector(m0, Vector((Vector(3) << 0.0, 1.2, 0.0).finished())));
  const std::vector<double> w{0.5, 0.3, 0.2};
  const std::vector<Point> means{m0, m1, m2};
  std::vector<BundleGaussian> comps;
  for (const auto& m : means) comps.push_back(BundleGaussian{m, CovarianceMatrix::scaled_identity(2, 0.01)});
  const GaussianMixture truth(f, w, comps);
  double min_sep = kPi;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) min_sep = std::min(min_sep, geodesic_distance(means[i], means[j]));
  }

  auto evaluate = [&](const std::vector<Point>& pts, double& dw, double& dm) {
    const Clustering c = riemannian_kmeans(pts, 3);
    const GaussianMixture fit = fit_mixture(pts, c, f);
    dw = dm = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      std::size_t j = 0;
      for (std::size_t i = 1; i < 3; ++i) {
        if (geodesic_distance(fit.components()[k].basepoint, means[i]) <
            geodesic_distance(fit.components()[k].basepoint, means[j]))
          j = i;
      }
      dw = std::max(dw, std::abs(fit.weights()[k] - w[j]));
      dm = std::max(dm, geodesic_distance(fit.components()[k].basepoint, means[j]));
    }
    return mw2(truth, fit).distance;
  };

  // n = 1500 drawn with component counts n * w_k
  std::vector<Point> pts;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto s = sample_gaussian(comps[k], *f, static_cast<std::size_t>(std::lround(1500 * w[k])), 60 + k).points;
    pts.insert(pts.end(), s.begin(), s.end());
  }
  double dw = 0.0, dm = 0.0;
  const double d = evaluate(pts, dw, dm);

  // For reference: i.i.d. labels add multinomial weight noise, whose transport
  // cost alone is of order 0.1 at this n and separation.
  double iid_dw = 0.0, iid_dm = 0.0;
  const double iid = evaluate(sample_mixture(truth, 1500, 61).points, iid_dw, iid_dm);

  return {min_sep >= 1.0 && dw <= 0.03 && dm <= 0.05 && d <= 0.1,
          fmt("min separation %.2f rad; weights off by %.4f, means off by %.4f rad, MW2 %.4f "
              "(i.i.d.-label draw, informational: MW2 %.4f, weights off by %.4f)",
              min_sep, dw, dm, d, iid, iid_dw)};
}

// 7. Hopf maps.
Verdict hopf_round_trip() {
  Engine g(7);
  double angle_err = 0.0, psi_err = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double theta = uniform(g, 0.0, kPi), phi = uniform(g, -kPi, kPi);
    const double psi0 = uniform(g, -kPi, kPi), psi1 = uniform(g, -kPi, kPi);
    const Triangle t = hopf_backward(theta, phi, psi0);
    const SphericalAngles a = to_angles(triangle_to_sphere(t));
    // longitude is undefined at the poles; compare points there
    const double err = std::sin(theta) < 1e-6
                           ? geodesic_distance(from_angles(a.theta, a.phi), from_angles(theta, phi))
                           : std::max(std::abs(a.theta - theta), std::abs(std::remainder(a.phi - phi, 2 * kPi)));
    angle_err = std::max(angle_err, err);
    psi_err = std::max(psi_err, triangle_shape_distance(t, hopf_backward(theta, phi, psi1)));
  }
  return {angle_err <= 1e-9 && psi_err <= 1e-9,
          fmt("1000 triples: worst angle error %.2e, worst shape distance across psi %.2e", angle_err, psi_err)};
}

// 8. SRVF shape distance invariances.
Verdict srvf_invariance() {
  Engine g(8);
  double change = 0.0, asym = 0.0, self = 0.0;
  std::vector<Matrix> contours;
  for (int i = 0; i < 50; ++i) contours.push_back(random_blob(g, 80 + 2 * i, 0.3));
  auto q = [](const Matrix& pts) { return contour_to_srvf(Contour(pts), 100); };
  for (int i = 0; i < 50; ++i) {
    const Matrix& a = contours[static_cast<std::size_t>(i)];
    const Matrix& b = contours[static_cast<std::size_t>((i + 1) % 50)];
    const SrvfShape qa = q(a), qb = q(b);
    const double d = shape_distance(qa, qb);
    const Matrix moved = similarity(a, uniform(g, -kPi, kPi), uniform(g, 0.1, 10.0), uniform(g, -10, 10),
                                    uniform(g, -10, 10));
    change = std::max(change, std::abs(shape_distance(q(moved), qb) - d));
    asym = std::max(asym, std::abs(shape_distance(qb, qa) - d));
    self = std::max(self, shape_distance(qa, qa));
  }
  return {change < 1e-8 && asym <= 1e-10 && self <= 1e-12,
          fmt("50 contours: worst change under similarity %.2e, worst asymmetry %.2e, worst self-distance %.2e", change,
              asym, self)};
}

// 9. E-divisive on MW2 distance matrices of fitted mixture sequences.
Verdict changepoint_synthetic() {
  const auto f = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 9));
  Matrix anis(2, 2);
  anis << 0.02, 0.005, 0.005, 0.01;
  const Point a0{0.3, 0.0, 1.0}, a1{-0.3, 0.4, 1.0};
  const GaussianMixture before(f, {0.6, 0.4},
                               {BundleGaussian{a0, CovarianceMatrix(anis)}, BundleGaussian{a1, CovarianceMatrix::scaled_identity(2, 0.01)}});
  const Point b0 = sphere_exp(TangentVector::project(a0, Vector((Vector(3) << 0.0, -0.3, 0.0).finished())));
  const GaussianMixture after(f, {0.4, 0.6},
                              {BundleGaussian{b0, CovarianceMatrix(anis)}, BundleGaussian{a1, CovarianceMatrix::scaled_identity(2, 0.01)}});

  auto sequence = [&](std::uint64_t run, Index jump) {
    std::vector<PreparedMixture> fitted;
    for (Index t = 0; t < 60; ++t) {
      const std::uint64_t s = run * 1000 + static_cast<std::uint64_t>(t);
      const SampleSet data = sample_mixture(t < jump ? before : after, 300, s);
      KMeansOptions opts;
      opts.seed = s;
      fitted.push_back(prepare(fit_mixture(data.points, riemannian_kmeans(data.points, 2, opts), f)));
    }
    Matrix d = Matrix::Zero(60, 60);
    for (Index i = 0; i < 60; ++i) {
      for (Index j = i + 1; j < 60; ++j) d(i, j) = d(j, i) = mw2(fitted[i], fitted[j]).distance;
    }
    return DistanceMatrix(d);
  };

  int hits = 0, clean = 0;
  std::string firsts;
  for (std::uint64_t run = 0; run < 20; ++run) {
    EDivisiveOptions opts;  // p0 = 0.0125, R = 499, min_size = 12, alpha = 1
    opts.seed = run;
    const ChangePointReport r = e_divisive(sequence(run, 20), opts);
    const bool hit = !r.candidates.empty() && r.candidates.front().accepted && r.candidates.front().index >= 18 &&
                     r.candidates.front().index <= 22 && r.candidates.front().p_value <= 0.0125;
    hits += hit;
    if (!r.candidates.empty()) firsts += (firsts.empty() ? "" : ",") + std::to_string(r.candidates.front().index);
    const ChangePointReport null = e_divisive(sequence(100 + run, 60), opts);
    clean += null.change_points().empty();
  }
  return {hits >= 19 && clean >= 19,
          fmt("jump at t = 20: %d/20 runs detect it in [18, 22] (first candidates %s); null: %d/20 runs clean", hits,
              firsts.c_str(), clean)};
}

// 10. Sampler moments.
Verdict sampler_statistics() {
  const auto f = std::make_shared<const MovingFrame>(build_reference_frame(Point{0.0, 0.0, 1.0}, 10));
  const Point m{0.4, -0.3, 0.8};
  const Matrix sigma = 0.01 * Matrix::Identity(2, 2);
  const SampleSet s = sample_gaussian(BundleGaussian{m, CovarianceMatrix(sigma)}, *f, 5000, 10);
  const double mean_err = geodesic_distance(frechet_mean(s.points), m);
  const Matrix v = shooting_coordinates(*f, m, s.points);
  const Matrix cov = v.transpose() * v / static_cast<double>(v.rows() - 1);
  const double rel = (cov - sigma).norm() / sigma.norm();
  return {mean_err <= 0.05 && rel <= 0.10,
          fmt("n = 5000: Frechet mean off by %.4f rad, covariance relative Frobenius error %.4f", mean_err, rel)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Verdict()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Bures term vs empirical OT", 60, bures_vs_empirical},
      {2, "transportation LP vs brute force", 5, lp_oracle},
      {3, "frame invariance and cross-origin stability", 0, frame_invariance},
      {4, "MW2 metric axioms", 0, metric_axioms},
      {5, "zero-covariance reduction", 0, zero_covariance},
      {6, "estimation round trip", 30, estimation_round_trip},
      {7, "Hopf round trip", 0, hopf_round_trip},
      {8, "SRVF invariance", 0, srvf_invariance},
      {9, "E-divisive synthetic jump and null", 300, changepoint_synthetic},
      {10, "sampler statistics", 0, sampler_statistics},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("[%s] %2d %s: %s; %.2f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), secs,
                in_time ? "" : fmt(" (budget %.0f s exceeded)", c.budget_s).c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
