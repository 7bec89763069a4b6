// File formats: frame.json, mixture.json, plan.json, clustering.json,
// changepoints.json, and plain numeric CSV (samples.csv, distmat.csv,
// triangles.csv).
//
// CSV numbers are written with 17 significant digits so write -> read ->
// write reproduces the file byte for byte.

#pragma once

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bundlemw/changepoint.hpp"
#include "bundlemw/errors.hpp"
#include "bundlemw/estimation.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/sphere.hpp"
#include "bundlemw/transport.hpp"

namespace bundlemw::io {

using json = nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  detail::require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
  out << text;
  detail::require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path);
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    detail::fail(ErrorKind::InvalidArgument, origin + ": " + e.what());
  }
}

inline json read_json(const std::string& path) { return parse_json(read_text(path), path); }

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  bundlemw::detail::require(j.is_object(), ErrorKind::InvalidArgument, where + " must be an object");
  auto it = j.find(key);
  bundlemw::detail::require(it != j.end(), ErrorKind::InvalidArgument,
                            "missing field '" + std::string(key) + "' in " + where);
  return *it;
}

inline Vector to_vector(const json& j, const std::string& where) {
  bundlemw::detail::require(j.is_array(), ErrorKind::InvalidArgument, where + " must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    bundlemw::detail::require(j[i].is_number(), ErrorKind::InvalidArgument,
                              where + "[" + std::to_string(i) + "] is not a number");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Row-major: each inner array is one row.
inline Matrix to_matrix(const json& j, const std::string& where) {
  bundlemw::detail::require(j.is_array(), ErrorKind::InvalidArgument, where + " must be an array of rows");
  if (j.empty()) return Matrix(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_where = where + "[" + std::to_string(r) + "]";
    const Vector row = to_vector(j[r], row_where);
    bundlemw::detail::require(static_cast<std::size_t>(row.size()) == cols, ErrorKind::InvalidArgument,
                              row_where + " has the wrong length");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

inline json from_vector(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json from_matrix(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(from_vector(m.row(r).transpose()));
  return rows;
}

}  // namespace detail

/// {"p": [...], "basis": [[...], ...]}, one basis vector per inner array.
inline json frame_to_json(const MovingFrame& f) {
  return json{{"p", detail::from_vector(f.origin().coords())},
              {"basis", detail::from_matrix(f.basis().transpose())}};
}

inline MovingFrame frame_from_json(const json& j, const std::string& where = "frame") {
  Vector p = detail::to_vector(detail::field(j, "p", where), where + ".p");
  Matrix basis = detail::to_matrix(detail::field(j, "basis", where), where + ".basis").transpose();
  return MovingFrame(Point(std::move(p)), std::move(basis));
}

/// {"frame": <frame>, "weights": [...], "components": [{"basepoint": [...], "cov": [[...]]}]}
inline json mixture_to_json(const GaussianMixture& mix) {
  json comps = json::array();
  for (const auto& c : mix.components()) {
    comps.push_back(json{{"basepoint", detail::from_vector(c.basepoint.coords())},
                         {"cov", detail::from_matrix(c.cov.matrix())}});
  }
  return json{{"frame", frame_to_json(mix.frame())}, {"weights", mix.weights()}, {"components", comps}};
}

/// Reads a mixture. When `shared_frame` equals the file's frame it is reused,
/// so mixtures loaded together share one frame object.
inline GaussianMixture mixture_from_json(const json& j, std::shared_ptr<const MovingFrame> shared_frame = nullptr,
                                         const std::string& where = "mixture") {
  auto frame = std::make_shared<const MovingFrame>(frame_from_json(detail::field(j, "frame", where), where + ".frame"));
  if (shared_frame && same_frame(*shared_frame, *frame)) frame = shared_frame;
  const Vector w = detail::to_vector(detail::field(j, "weights", where), where + ".weights");
  const json& comps = detail::field(j, "components", where);
  bundlemw::detail::require(comps.is_array(), ErrorKind::InvalidArgument, where + ".components must be an array");
  std::vector<BundleGaussian> out;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string cw = where + ".components[" + std::to_string(k) + "]";
    Point m(detail::to_vector(detail::field(comps[k], "basepoint", cw), cw + ".basepoint"));
    Matrix cov;
    if (comps[k].contains("cov")) {
      cov = detail::to_matrix(comps[k]["cov"], cw + ".cov");
    } else {
      // Reduced-rank form: cov = L Lᵀ with L given row by row (d × r).
      const Matrix l = detail::to_matrix(detail::field(comps[k], "cov_factor", cw), cw + ".cov_factor");
      cov = l * l.transpose();
    }
    if (cov.size() == 0) cov = Matrix::Zero(frame->dim(), frame->dim());
    out.push_back(BundleGaussian{std::move(m), CovarianceMatrix(std::move(cov))});
  }
  return GaussianMixture(std::move(frame), std::vector<double>(w.data(), w.data() + w.size()), std::move(out));
}

/// {"cost", "distance", "plan", "pairwise"}
inline json plan_to_json(const TransportPlan& plan, const Matrix& pairwise) {
  return json{{"cost", plan.cost},
              {"distance", std::sqrt(std::max(0.0, plan.cost))},
              {"plan", detail::from_matrix(plan.plan)},
              {"pairwise", detail::from_matrix(pairwise)}};
}

inline json plan_to_json(const MixtureDistance& d) { return plan_to_json(d.plan, d.pairwise); }

inline json clustering_to_json(const Clustering& c) {
  json centers = json::array();
  for (const auto& p : c.centers) centers.push_back(detail::from_vector(p.coords()));
  return json{{"labels", c.labels},     {"sizes", c.sizes},          {"modes", c.modes},
              {"outliers", c.outliers()}, {"centers", centers},        {"converged", c.converged},
              {"iterations", c.iterations}, {"inertia", c.inertia}, {"radius", c.radius}};
}

inline json report_to_json(const ChangePointReport& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) {
    cands.push_back(json{{"index", c.index}, {"p_value", c.p_value}, {"statistic", c.statistic},
                         {"accepted", c.accepted}});
  }
  return json{{"change_points", r.change_points()},
              {"candidates", cands},
              {"hyperparameters",
               {{"R", r.options.permutations},
                {"p0", r.options.p0},
                {"min_size", r.options.min_size},
                {"alpha", r.options.alpha},
                {"seed", r.options.seed}}}};
}

// ---- CSV ----

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Numeric rows; blank lines and lines starting with '#' are skipped.
inline std::vector<std::vector<double>> parse_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      const std::string cell = line.substr(start, end - start);
      char* stop = nullptr;
      const double v = std::strtod(cell.c_str(), &stop);
      bundlemw::detail::require(!cell.empty() && stop != cell.c_str() && *stop == '\0', ErrorKind::InvalidArgument,
                                origin + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      row.push_back(v);
      start = end + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::vector<double>> read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

inline Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, const std::string& origin) {
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t cols = rows[0].size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    bundlemw::detail::require(rows[r].size() == cols, ErrorKind::InvalidArgument,
                              origin + ": row " + std::to_string(r + 1) + " has a different column count");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

inline std::string format_csv(const Matrix& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_number(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Matrix read_csv_matrix(const std::string& path) { return rows_to_matrix(read_csv(path), path); }

inline void write_csv_matrix(const std::string& path, const Matrix& m) { write_text(path, format_csv(m)); }

/// samples.csv: ambient coordinates followed by the component label.
struct Samples {
  std::vector<Point> points;
  std::vector<int> labels;
};

inline std::string format_samples(const std::vector<Point>& points, const std::vector<int>& labels) {
  bundlemw::detail::require(points.size() == labels.size(), ErrorKind::DimensionMismatch,
                            "points and labels differ in length");
  std::string out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (Index c = 0; c < points[i].ambient_dim(); ++c) {
      out += format_number(points[i][c]);
      out += ',';
    }
    out += std::to_string(labels[i]);
    out += '\n';
  }
  return out;
}

inline Samples parse_samples(const std::string& text, const std::string& origin) {
  const Matrix m = rows_to_matrix(parse_csv(text, origin), origin);
  bundlemw::detail::require(m.rows() >= 1 && m.cols() >= 3, ErrorKind::InvalidArgument,
                            origin + ": samples need at least 2 coordinates plus a label column");
  Samples s;
  for (Index r = 0; r < m.rows(); ++r) {
    // Point keeps coordinates that are already unit to rounding, so values
    // written by format_samples come back bit for bit.
    s.points.emplace_back(Vector(m.row(r).head(m.cols() - 1).transpose()));
    s.labels.push_back(static_cast<int>(m(r, m.cols() - 1)));
  }
  return s;
}

inline Samples read_samples(const std::string& path) { return parse_samples(read_text(path), path); }

}  // namespace bundlemw::io
