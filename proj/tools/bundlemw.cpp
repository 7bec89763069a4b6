// bundlemw command-line front end.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure. On failure a
// single JSON object {"error": <kind>, "message": <text>} goes to stderr.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bundlemw/bundlemw.hpp"

namespace fs = std::filesystem;
using namespace bundlemw;
using io::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  detail::require(!ec, ErrorKind::Io, "cannot create directory " + dir);
  return fs::path(dir);
}

std::vector<fs::path> json_files(const std::string& dir) {
  detail::require(fs::is_directory(dir), ErrorKind::Io, dir + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::shared_ptr<const MovingFrame> load_frame(const std::string& path) {
  detail::require(fs::exists(path), ErrorKind::Io, "frame file not found: " + path);
  return std::make_shared<const MovingFrame>(io::frame_from_json(io::read_json(path), path));
}

// Symmetric matrix of f(i, j) over i < j, computed by a pool of workers
// pulling pair indices from a shared counter.
template <typename F>
Matrix parallel_pairs(Index n, unsigned threads, F f) {
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  Matrix d = Matrix::Zero(n, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < pairs.size();) {
      try {
        const auto [i, j] = pairs[k];
        d(i, j) = d(j, i) = f(i, j);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = pairs.size();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, pairs.size()))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return d;
}

// ---- simulate ----

struct SimulateArgs {
  std::string config;
  std::string out = "samples.csv";
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  json cfg = io::read_json(a.config);
  detail::require(cfg.is_object(), ErrorKind::InvalidArgument, a.config + ": config must be an object");
  const json& mix_j = io::detail::field(cfg, "mixture", "config");
  json mixture = mix_j;
  if (!mixture.contains("frame")) mixture["frame"] = io::detail::field(cfg, "frame", "config");
  const json& s = io::detail::field(cfg, "sampling", "config");
  const json& n_j = io::detail::field(s, "n", "config.sampling");
  detail::require(n_j.is_number_integer() && n_j.get<long long>() >= 1, ErrorKind::InvalidArgument,
                  "config.sampling.n must be a positive integer");
  std::uint64_t seed = 0;
  if (s.contains("seed")) {
    detail::require(s["seed"].is_number_unsigned(), ErrorKind::InvalidArgument,
                    "config.sampling.seed must be a nonnegative integer");
    seed = s["seed"].get<std::uint64_t>();
  }
  if (a.seed) seed = *a.seed;
  cfg["sampling"]["seed"] = seed;

  const GaussianMixture mix = io::mixture_from_json(mixture, nullptr, "config.mixture");
  const SampleSet set = sample_mixture(mix, static_cast<std::size_t>(n_j.get<long long>()), seed);
  io::write_text(a.out, io::format_samples(set.points, set.labels));
  print_json({{"config_hash", hex64(fnv1a(cfg.dump()))},
              {"seed", seed},
              {"n", set.points.size()},
              {"truncated", set.truncated},
              {"out", a.out}});
  return 0;
}

// ---- fit ----

struct FitArgs {
  std::string samples;
  std::string frame;
  std::string method = "kmeans";
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double quantile = 0.1;
  std::size_t min_cluster = 2;
  std::string out = ".";
};

int cmd_fit(const FitArgs& a) {
  const auto frame = load_frame(a.frame);
  const io::Samples s = io::read_samples(a.samples);
  detail::require(s.points.front().ambient_dim() == frame->ambient_dim(), ErrorKind::DimensionMismatch,
                  "samples and frame have different ambient dimensions");
  Clustering c;
  if (a.method == "kmeans") {
    detail::require(a.k >= 1, ErrorKind::InvalidArgument, "--K is required for kmeans");
    KMeansOptions opts;
    opts.seed = a.seed;
    c = riemannian_kmeans(s.points, a.k, opts);
  } else if (a.method == "kmodes") {
    c = demote_small_clusters(kmodes_cluster(geodesic_distance_matrix(s.points), KModesOptions{a.quantile}),
                              a.min_cluster);
  } else {
    detail::fail(ErrorKind::InvalidArgument, "unknown --method '" + a.method + "' (kmeans|kmodes)");
  }
  const GaussianMixture mix = fit_mixture(s.points, c, frame);
  const fs::path dir = ensure_dir(a.out);
  json cj = io::clustering_to_json(c);
  cj["method"] = a.method;
  cj["seed"] = a.seed;
  io::write_json((dir / "mixture.json").string(), io::mixture_to_json(mix));
  io::write_json((dir / "clustering.json").string(), cj);
  print_json({{"clusters", c.num_clusters()}, {"outliers", c.outliers().size()}, {"converged", c.converged}});
  return 0;
}

// ---- mw2 / distmat / transport ----

int cmd_mw2(const std::string& a_path, const std::string& b_path, const std::string& out) {
  const GaussianMixture a = io::mixture_from_json(io::read_json(a_path), nullptr, a_path);
  const GaussianMixture b = io::mixture_from_json(io::read_json(b_path), a.frame_ptr(), b_path);
  const MixtureDistance d = mw2(a, b);
  const json j = io::plan_to_json(d);
  if (out.empty()) {
    print_json(j);
  } else {
    io::write_json(out, j);
    print_json({{"distance", d.distance}});
  }
  return 0;
}

int cmd_distmat(const std::string& dir, const std::string& out, unsigned threads) {
  const auto files = json_files(dir);
  detail::require(!files.empty(), ErrorKind::InvalidArgument, dir + " contains no mixture files");
  std::vector<PreparedMixture> prepared;
  std::shared_ptr<const MovingFrame> frame;
  json names = json::array();
  for (const auto& f : files) {
    const GaussianMixture m = io::mixture_from_json(io::read_json(f.string()), frame, f.string());
    frame = m.frame_ptr();
    prepared.push_back(prepare(m));
    names.push_back(f.filename().string());
  }
  const Matrix d = parallel_pairs(static_cast<Index>(prepared.size()), threads,
                                  [&](Index i, Index j) { return mw2(prepared[i], prepared[j]).distance; });
  io::write_csv_matrix(out, d);
  print_json({{"order", names}, {"out", out}});
  return 0;
}

Vector read_weights(const std::string& path) {
  const Matrix m = io::read_csv_matrix(path);
  detail::require(m.rows() == 1 || m.cols() == 1, ErrorKind::InvalidArgument, path + ": weights must be one row or column");
  return Eigen::Map<const Vector>(m.data(), m.size());
}

int cmd_transport(const std::string& cost, const std::string& w0, const std::string& w1, const std::string& out) {
  const Matrix c = io::read_csv_matrix(cost);
  const TransportPlan plan = solve_transportation(c, read_weights(w0), read_weights(w1));
  json j = io::plan_to_json(plan, c);
  j["row_potential"] = io::detail::from_vector(plan.row_potential);
  j["col_potential"] = io::detail::from_vector(plan.col_potential);
  if (out.empty()) {
    print_json(j);
  } else {
    io::write_json(out, j);
    print_json({{"cost", plan.cost}});
  }
  return 0;
}

// ---- changepoint ----

int cmd_changepoint(const std::string& path, const EDivisiveOptions& opts, const std::string& out) {
  const DistanceMatrix d(io::read_csv_matrix(path));
  const ChangePointReport r = e_divisive(d, opts);
  const json j = io::report_to_json(r);
  if (out.empty()) {
    print_json(j);
  } else {
    io::write_json(out, j);
    print_json({{"change_points", r.change_points()}});
  }
  return 0;
}

// ---- triangles ----

int cmd_triangles(const std::string& in, const std::string& to, double psi, const std::string& out) {
  const Matrix m = io::read_csv_matrix(in);
  Matrix result;
  if (to == "sphere") {
    detail::require(m.cols() == 6, ErrorKind::DimensionMismatch, in + ": triangles need 6 columns");
    result.resize(m.rows(), 3);
    for (Index r = 0; r < m.rows(); ++r) {
      const Vector row = m.row(r).transpose();
      result.row(r) = triangle_to_sphere(Triangle::from_row(std::span<const double>(row.data(), 6))).coords().transpose();
    }
  } else if (to == "triangle") {
    detail::require(m.cols() == 3, ErrorKind::DimensionMismatch, in + ": sphere points need 3 columns");
    result.resize(m.rows(), 6);
    for (Index r = 0; r < m.rows(); ++r) {
      const Triangle t = sphere_to_triangle(Point(Vector(m.row(r).transpose())), psi);
      for (int i = 0; i < 3; ++i) {
        result(r, 2 * i) = t.vertices(i, 0);
        result(r, 2 * i + 1) = t.vertices(i, 1);
      }
    }
  } else {
    detail::fail(ErrorKind::InvalidArgument, "unknown --to '" + to + "' (sphere|triangle)");
  }
  io::write_csv_matrix(out, result);
  print_json({{"rows", result.rows()}, {"out", out}});
  return 0;
}

// ---- contours ----

struct ContoursArgs {
  std::string dir;
  Index T = 100;
  double quantile = 0.1;
  std::size_t min_cluster = 2;
  bool seam_search = true;
  unsigned threads = 1;
  std::string out = "contours_out";
};

std::vector<SrvfShape> load_contour_frame(const fs::path& file, Index T) {
  const json j = io::read_json(file.string());
  const std::string where = file.string();
  const json& list = io::detail::field(j, "contours", where);
  detail::require(list.is_array() && !list.empty(), ErrorKind::InvalidArgument, where + ".contours must be a nonempty array");
  std::vector<SrvfShape> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string w = where + ".contours[" + std::to_string(i) + "]";
    const Matrix pts = io::detail::to_matrix(list[i], w);
    detail::require(pts.cols() == 2, ErrorKind::DimensionMismatch, w + " must be a list of [x, y] pairs");
    out.push_back(contour_to_srvf(Contour(pts.transpose()), T));
  }
  return out;
}

// Shape mixture of one frame. Clusters come from k-modes on the aligned
// shape distances; each cluster is aligned to its mode, which serves as the
// basepoint.
GaussianMixture contour_mixture(const std::vector<SrvfShape>& shapes, std::shared_ptr<const MovingFrame> frame,
                                const ContoursArgs& a, Clustering& clustering) {
  const AlignOptions align{a.seam_search};
  clustering = demote_small_clusters(kmodes_cluster(shape_distance_matrix(shapes, align), KModesOptions{a.quantile}),
                                     a.min_cluster);
  detail::require(clustering.num_clusters() >= 1, ErrorKind::ClusterTooSmall,
                  "no cluster with at least " + std::to_string(a.min_cluster) + " contours");
  std::size_t total = 0;
  for (auto s : clustering.sizes) total += s;
  std::vector<double> weights;
  std::vector<BundleGaussian> comps;
  for (std::size_t k = 0; k < clustering.num_clusters(); ++k) {
    const SrvfShape& mode = shapes[clustering.modes[k]];
    std::vector<SrvfShape> members;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (clustering.labels[i] == static_cast<int>(k)) members.push_back(align_to(mode, shapes[i], align).aligned);
    }
    const ShapeStatistics st = shape_statistics(members, mode, *frame);
    comps.push_back(BundleGaussian{mode.as_point(), st.cov});
    weights.push_back(static_cast<double>(members.size()) / static_cast<double>(total));
  }
  return normalize_minimal_form(GaussianMixture(std::move(frame), std::move(weights), std::move(comps)), 1e-12);
}

int cmd_contours(const ContoursArgs& a) {
  const auto files = json_files(a.dir);
  detail::require(!files.empty(), ErrorKind::InvalidArgument, a.dir + " contains no contour files");
  std::vector<std::vector<SrvfShape>> frames;
  for (const auto& f : files) frames.push_back(load_contour_frame(f, a.T));

  // Global template: medoid of the first frame. Every shape is aligned to it
  // so all frames live in one chart of S^{2T-1}.
  const AlignOptions align{a.seam_search};
  const Matrix d0 = shape_distance_matrix(frames.front(), align);
  Index medoid = 0;
  d0.rowwise().sum().minCoeff(&medoid);
  const SrvfShape templ = frames.front()[static_cast<std::size_t>(medoid)];
  for (auto& shapes : frames) {
    for (auto& q : shapes) q = align_to(templ, q, align).aligned;
  }
  // Standard frame of S^{2T-1}: p = e_1, basis e_2 ... e_{2T}.
  const auto frame = std::make_shared<const MovingFrame>(MovingFrame::standard(2 * a.T));

  const fs::path out = ensure_dir(a.out);
  std::vector<PreparedMixture> prepared;
  json summary = json::array();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    Clustering c;
    const GaussianMixture mix = contour_mixture(frames[t], frame, a, c);
    const std::string stem = files[t].stem().string();
    io::write_json((out / (stem + ".mixture.json")).string(), io::mixture_to_json(mix));
    io::write_json((out / (stem + ".clustering.json")).string(), io::clustering_to_json(c));
    prepared.push_back(prepare(mix));
    summary.push_back({{"file", files[t].filename().string()},
                       {"components", mix.size()},
                       {"outliers", c.outliers().size()}});
  }
  const Matrix d = parallel_pairs(static_cast<Index>(prepared.size()), a.threads,
                                  [&](Index i, Index j) { return mw2(prepared[i], prepared[j]).distance; });
  io::write_csv_matrix((out / "distmat.csv").string(), d);
  print_json({{"frames", summary}, {"T", a.T}, {"out", out.string()}});
  return 0;
}

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian mixtures on trivial vector bundles over spheres: sampling, fitting, "
               "mixture Wasserstein distances, shape pipelines and change points"};
  app.require_subcommand(1);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Sample a mixture described by a JSON config");
  simulate->add_option("config", sim.config, "Config with sections frame, mixture, sampling{n, seed}")
      ->required();
  simulate->add_option("--seed", sim.seed, "Override sampling.seed");
  simulate->add_option("--out", sim.out, "Output samples CSV")->capture_default_str();

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "Cluster samples and fit a bundle Gaussian mixture");
  fitc->add_option("samples", fit.samples, "samples.csv (coordinates, label)")->required();
  fitc->add_option("--frame", fit.frame, "frame.json")->required();
  fitc->add_option("--method", fit.method, "kmeans | kmodes")->capture_default_str();
  fitc->add_option("--K", fit.k, "Number of clusters (kmeans)");
  fitc->add_option("--seed", fit.seed, "k-means seed")->capture_default_str();
  fitc->add_option("--quantile", fit.quantile, "k-modes radius quantile")->capture_default_str();
  fitc->add_option("--min-cluster", fit.min_cluster, "k-modes clusters below this size become outliers")
      ->capture_default_str();
  fitc->add_option("--out", fit.out, "Output directory")->capture_default_str();

  std::string mw_a, mw_b, mw_out;
  auto* mw = app.add_subcommand("mw2", "Mixture Wasserstein distance between two mixtures");
  mw->add_option("a", mw_a, "mixture.json")->required();
  mw->add_option("b", mw_b, "mixture.json")->required();
  mw->add_option("--out", mw_out, "plan.json (default: stdout)");

  std::string dm_dir, dm_out = "distmat.csv";
  unsigned dm_threads = hw;
  auto* dm = app.add_subcommand("distmat", "Pairwise distances between the mixtures of a directory");
  dm->add_option("dir", dm_dir, "Directory of mixture JSON files (sorted by name)")->required();
  dm->add_option("--threads", dm_threads, "Worker threads")->capture_default_str();
  dm->add_option("--out", dm_out, "Output CSV")->capture_default_str();

  std::string tr_cost, tr_w0, tr_w1, tr_out;
  auto* tr = app.add_subcommand("transport", "Solve a transportation problem");
  tr->add_option("cost", tr_cost, "Cost matrix CSV")->required();
  tr->add_option("w0", tr_w0, "Source weights CSV")->required();
  tr->add_option("w1", tr_w1, "Target weights CSV")->required();
  tr->add_option("--out", tr_out, "plan.json (default: stdout)");

  std::string cp_in, cp_out;
  EDivisiveOptions cp_opts;
  auto* cp = app.add_subcommand("changepoint", "E-divisive change points of a distance matrix");
  cp->add_option("distmat", cp_in, "distmat.csv")->required();
  cp->add_option("--p0", cp_opts.p0, "Significance level")->capture_default_str();
  cp->add_option("--R", cp_opts.permutations, "Permutations per test")->capture_default_str();
  cp->add_option("--min-size", cp_opts.min_size, "Minimum segment length")->capture_default_str();
  cp->add_option("--alpha", cp_opts.alpha, "Distance exponent in (0, 2]")->capture_default_str();
  cp->add_option("--seed", cp_opts.seed, "Permutation seed")->capture_default_str();
  cp->add_option("--out", cp_out, "changepoints.json (default: stdout)");

  std::string tri_in, tri_to = "sphere", tri_out = "out.csv";
  double tri_psi = 0.0;
  auto* tri = app.add_subcommand("triangles", "Map triangles to S^2 shape points and back");
  tri->add_option("in", tri_in, "triangles.csv (6 columns) or sphere points (3 columns)")->required();
  tri->add_option("--to", tri_to, "sphere | triangle")->capture_default_str();
  tri->add_option("--psi", tri_psi, "Planar rotation of reconstructed triangles")->capture_default_str();
  tri->add_option("--out", tri_out, "Output CSV")->capture_default_str();

  ContoursArgs ct;
  ct.threads = hw;
  auto* con = app.add_subcommand("contours", "Per-frame shape mixtures of closed contours");
  con->add_option("dir", ct.dir, "Directory of frame files {\"contours\": [[[x, y], ...], ...]}")->required();
  con->add_option("--T", ct.T, "SRVF samples per contour")->capture_default_str();
  con->add_option("--quantile", ct.quantile, "k-modes radius quantile")->capture_default_str();
  con->add_option("--min-cluster", ct.min_cluster, "Smaller clusters become outliers")->capture_default_str();
  con->add_flag("!--no-seam-search", ct.seam_search, "Align rotation only, keep start points");
  con->add_option("--threads", ct.threads, "Worker threads for the distance matrix")->capture_default_str();
  con->add_option("--out", ct.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("InvalidArgument", e.what(), 2);
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*fitc) return cmd_fit(fit);
    if (*mw) return cmd_mw2(mw_a, mw_b, mw_out);
    if (*dm) return cmd_distmat(dm_dir, dm_out, dm_threads);
    if (*tr) return cmd_transport(tr_cost, tr_w0, tr_w1, tr_out);
    if (*cp) return cmd_changepoint(cp_in, cp_opts, cp_out);
    if (*tri) return cmd_triangles(tri_in, tri_to, tri_psi, tri_out);
    if (*con) return cmd_contours(ct);
  } catch (const Error& e) {
    return report(to_string(e.kind()), e.what(), is_numerical(e.kind()) ? 3 : 2);
  } catch (const json::exception& e) {
    return report("InvalidArgument", e.what(), 2);
  } catch (const std::exception& e) {
    return report("Internal", e.what(), 3);
  }
  return 0;
}
