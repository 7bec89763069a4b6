// Exact discrete optimal transport and the mixture-Wasserstein distance MW2.
//
// solve_transportation runs a primal network simplex on the complete
// bipartite graph (sources = rows, sinks = columns) with an artificial root
// node. The spanning-tree bookkeeping (parent / thread / successor counts)
// and the strongly feasible leaving-arc rule follow the classic LEMON-style
// implementation; entering arcs are chosen by block search, which makes the
// pivot order, and hence the returned basic plan, deterministic.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "bundlemw/errors.hpp"
#include "bundlemw/gaussian.hpp"
#include "bundlemw/sphere.hpp"

namespace bundlemw {

/// Optimal coupling of two discrete weight vectors.
struct TransportPlan {
  Matrix plan;           // K0×K1, nonnegative, marginals w0 and w1
  double cost = 0.0;     // ⟨cost, plan⟩
  Vector row_potential;  // dual u with cost(i,j) - u_i - v_j >= 0
  Vector col_potential;  // dual v
  std::size_t pivots = 0;
};

namespace detail {

inline void validate_simplex(const Vector& w, const char* name) {
  require(w.size() >= 1, ErrorKind::InfeasibleWeights, std::string(name) + " is empty");
  require(w.allFinite(), ErrorKind::InfeasibleWeights, std::string(name) + " is not finite");
  require(w.minCoeff() >= 0.0, ErrorKind::InfeasibleWeights, std::string(name) + " has a negative entry");
  require(std::abs(w.sum() - 1.0) <= kWeightTol, ErrorKind::InfeasibleWeights,
          std::string(name) + " does not sum to 1");
}

class BipartiteNetworkSimplex {
 public:
  BipartiteNetworkSimplex(const Matrix& cost, const Vector& supply, const Vector& demand)
      : n0_(cost.rows()),
        n1_(cost.cols()),
        node_num_(n0_ + n1_),
        root_(node_num_),
        arc_num_(n0_ * n1_),
        all_arc_num_(arc_num_ + node_num_) {
    source_.resize(static_cast<std::size_t>(all_arc_num_));
    target_.resize(static_cast<std::size_t>(all_arc_num_));
    cost_.resize(static_cast<std::size_t>(all_arc_num_));
    flow_.assign(static_cast<std::size_t>(all_arc_num_), 0.0);
    state_.assign(static_cast<std::size_t>(all_arc_num_), kStateLower);

    double max_cost = 0.0;
    for (Index i = 0; i < n0_; ++i) {
      for (Index j = 0; j < n1_; ++j) {
        const Index e = i * n1_ + j;
        source_[e] = i;
        target_[e] = n0_ + j;
        cost_[e] = cost(i, j);
        max_cost = std::max(max_cost, cost(i, j));
      }
    }
    art_cost_ = (max_cost + 1.0) * static_cast<double>(node_num_);
    // Reduced costs above -eps count as nonnegative; potentials can carry
    // offsets of order art_cost_, so the threshold scales with it.
    eps_ = 64.0 * std::numeric_limits<double>::epsilon() * art_cost_;

    const std::size_t nodes = static_cast<std::size_t>(node_num_ + 1);
    supply_.assign(nodes, 0.0);
    pi_.assign(nodes, 0.0);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    thread_.assign(nodes, 0);
    rev_thread_.assign(nodes, 0);
    succ_num_.assign(nodes, 0);
    last_succ_.assign(nodes, 0);
    pred_dir_.assign(nodes, kDirUp);
    for (Index i = 0; i < n0_; ++i) supply_[i] = supply[i];
    for (Index j = 0; j < n1_; ++j) supply_[n0_ + j] = -demand[j];

    parent_[root_] = -1;
    pred_[root_] = -1;
    thread_[root_] = 0;
    rev_thread_[0] = root_;
    succ_num_[root_] = node_num_ + 1;
    last_succ_[root_] = root_ - 1;

    for (Index u = 0, e = arc_num_; u != node_num_; ++u, ++e) {
      parent_[u] = root_;
      pred_[u] = e;
      thread_[u] = u + 1;
      rev_thread_[u + 1] = u;
      succ_num_[u] = 1;
      last_succ_[u] = u;
      state_[e] = kStateTree;
      if (supply_[u] >= 0.0) {
        pred_dir_[u] = kDirUp;
        pi_[u] = 0.0;
        source_[e] = u;
        target_[e] = root_;
        flow_[e] = supply_[u];
        cost_[e] = 0.0;
      } else {
        pred_dir_[u] = kDirDown;
        pi_[u] = art_cost_;
        source_[e] = root_;
        target_[e] = u;
        flow_[e] = -supply_[u];
        cost_[e] = art_cost_;
      }
    }
    block_size_ = std::max<Index>(10, static_cast<Index>(std::sqrt(static_cast<double>(arc_num_))));
  }

  std::size_t run(std::size_t max_pivots) {
    std::size_t pivots = 0;
    while (find_entering_arc()) {
      find_join_node();
      require(find_leaving_arc(), ErrorKind::NoConvergence, "transportation problem is unbounded");
      change_flow();
      update_tree_structure();
      update_potential();
      if (++pivots > max_pivots) {
        fail(ErrorKind::NoConvergence, "network simplex exceeded its pivot limit");
      }
    }
    return pivots;
  }

  double flow(Index i, Index j) const { return std::max(0.0, flow_[i * n1_ + j]); }
  double potential(Index node) const { return pi_[node]; }

  double residual_artificial_flow() const {
    double total = 0.0;
    for (Index e = arc_num_; e < all_arc_num_; ++e) total += std::abs(flow_[e]);
    return total;
  }

 private:
  static constexpr std::int8_t kStateTree = 0;
  static constexpr std::int8_t kStateLower = 1;
  static constexpr int kDirUp = 1;
  static constexpr int kDirDown = -1;

  double reduced_cost(Index e) const { return cost_[e] + pi_[source_[e]] - pi_[target_[e]]; }

  bool find_entering_arc() {
    double min = -eps_;
    Index cnt = block_size_;
    Index e = next_arc_;
    bool found = false;
    for (Index scanned = 0; scanned < arc_num_; ++scanned) {
      if (state_[e] == kStateLower) {
        const double c = reduced_cost(e);
        if (c < min) {
          min = c;
          in_arc_ = e;
          found = true;
        }
      }
      if (++e == arc_num_) e = 0;
      if (--cnt == 0) {
        if (found) break;
        cnt = block_size_;
      }
    }
    next_arc_ = e;
    return found;
  }

  void find_join_node() {
    Index u = source_[in_arc_];
    Index v = target_[in_arc_];
    while (u != v) {
      if (succ_num_[u] < succ_num_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    join_ = u;
  }

  bool find_leaving_arc() {
    const Index first = source_[in_arc_];
    const Index second = target_[in_arc_];
    const double inf = std::numeric_limits<double>::infinity();
    delta_ = inf;
    int result = 0;
    for (Index u = first; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDirUp ? flow_[pred_[u]] : inf;
      if (d < delta_) {
        delta_ = d;
        u_out_ = u;
        result = 1;
      }
    }
    for (Index u = second; u != join_; u = parent_[u]) {
      const double d = pred_dir_[u] == kDirDown ? flow_[pred_[u]] : inf;
      if (d <= delta_) {
        delta_ = d;
        u_out_ = u;
        result = 2;
      }
    }
    if (result == 1) {
      u_in_ = first;
      v_in_ = second;
    } else {
      u_in_ = second;
      v_in_ = first;
    }
    return result != 0;
  }

  void change_flow() {
    if (delta_ > 0.0) {
      const double val = delta_;
      flow_[in_arc_] += val;
      for (Index u = source_[in_arc_]; u != join_; u = parent_[u]) {
        flow_[pred_[u]] -= pred_dir_[u] * val;
      }
      for (Index u = target_[in_arc_]; u != join_; u = parent_[u]) {
        flow_[pred_[u]] += pred_dir_[u] * val;
      }
    }
    state_[in_arc_] = kStateTree;
    state_[pred_[u_out_]] = kStateLower;
    flow_[pred_[u_out_]] = 0.0;
  }

  void update_tree_structure() {
    const Index old_rev_thread = rev_thread_[u_out_];
    const Index old_succ_num = succ_num_[u_out_];
    const Index old_last_succ = last_succ_[u_out_];
    v_out_ = parent_[u_out_];

    if (u_in_ == u_out_) {
      parent_[u_in_] = v_in_;
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;

      if (thread_[v_in_] != u_out_) {
        Index after = thread_[old_last_succ];
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
        after = thread_[v_in_];
        thread_[v_in_] = u_out_;
        rev_thread_[u_out_] = v_in_;
        thread_[old_last_succ] = after;
        rev_thread_[after] = old_last_succ;
      }
    } else {
      // When old_rev_thread == v_in, join and v_out coincide.
      const Index thread_continue = old_rev_thread == v_in_ ? thread_[old_last_succ] : thread_[v_in_];

      // Re-hang the stem nodes between u_in and u_out.
      Index stem = u_in_;
      Index par_stem = v_in_;
      Index next_stem;
      Index last = last_succ_[u_in_];
      Index before;
      Index after = thread_[last];
      thread_[v_in_] = u_in_;
      dirty_revs_.clear();
      dirty_revs_.push_back(v_in_);
      while (stem != u_out_) {
        next_stem = parent_[stem];
        thread_[last] = next_stem;
        dirty_revs_.push_back(last);

        before = rev_thread_[stem];
        thread_[before] = after;
        rev_thread_[after] = before;

        parent_[stem] = par_stem;
        par_stem = stem;
        stem = next_stem;

        last = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
        after = thread_[last];
      }
      parent_[u_out_] = par_stem;
      thread_[last] = thread_continue;
      rev_thread_[thread_continue] = last;
      last_succ_[u_out_] = last;

      if (old_rev_thread != v_in_) {
        thread_[old_rev_thread] = after;
        rev_thread_[after] = old_rev_thread;
      }

      for (Index u : dirty_revs_) rev_thread_[thread_[u]] = u;

      Index tmp_sc = 0;
      const Index tmp_ls = last_succ_[u_out_];
      for (Index u = u_out_, p = parent_[u]; u != u_in_; u = p, p = parent_[u]) {
        pred_[u] = pred_[p];
        pred_dir_[u] = -pred_dir_[p];
        tmp_sc += succ_num_[u] - succ_num_[p];
        succ_num_[u] = tmp_sc;
        last_succ_[p] = tmp_ls;
      }
      pred_[u_in_] = in_arc_;
      pred_dir_[u_in_] = u_in_ == source_[in_arc_] ? kDirUp : kDirDown;
      succ_num_[u_in_] = old_succ_num;
    }

    const Index up_limit_out = last_succ_[join_] == v_in_ ? join_ : -1;
    const Index last_succ_out = last_succ_[u_out_];
    for (Index u = v_in_; u != -1 && last_succ_[u] == v_in_; u = parent_[u]) {
      last_succ_[u] = last_succ_out;
    }

    if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
      for (Index u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = old_rev_thread;
      }
    } else if (last_succ_out != old_last_succ) {
      for (Index u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u]) {
        last_succ_[u] = last_succ_out;
      }
    }

    for (Index u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
    for (Index u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
  }

  void update_potential() {
    const double sigma = pi_[v_in_] - pi_[u_in_] - pred_dir_[u_in_] * cost_[in_arc_];
    const Index end = thread_[last_succ_[u_in_]];
    for (Index u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
  }

  Index n0_, n1_, node_num_, root_, arc_num_, all_arc_num_;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  Index block_size_ = 10;
  Index next_arc_ = 0;

  std::vector<Index> source_, target_;
  std::vector<double> cost_, flow_;
  std::vector<std::int8_t> state_;

  std::vector<double> supply_, pi_;
  std::vector<Index> parent_, pred_, thread_, rev_thread_, succ_num_, last_succ_;
  std::vector<int> pred_dir_;
  std::vector<Index> dirty_revs_;

  Index in_arc_ = 0, join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0;
  double delta_ = 0.0;
};

}  // namespace detail

/// Exact solution of min ⟨cost, π⟩ over couplings π of w0 and w1.
///
/// The plan is a basic optimal solution with at most K0 + K1 - 1 nonzero
/// entries. When several plans are optimal the one returned is fixed by the
/// pivot order; the cost is unique.
inline TransportPlan solve_transportation(const Matrix& cost, const Vector& w0, const Vector& w1) {
  detail::validate_simplex(w0, "w0");
  detail::validate_simplex(w1, "w1");
  detail::require(cost.rows() == w0.size() && cost.cols() == w1.size(), ErrorKind::DimensionMismatch,
                  "cost matrix shape does not match the weight vectors");
  detail::require(cost.allFinite() && cost.minCoeff() >= 0.0, ErrorKind::InvalidArgument,
                  "cost entries must be finite and nonnegative");

  // Balance total masses exactly up to rounding; both already sum to 1 within 1e-10.
  const Vector demand = w1 * (w0.sum() / w1.sum());
  detail::BipartiteNetworkSimplex solver(cost, w0, demand);
  const std::size_t max_pivots = 1000 + 50 * static_cast<std::size_t>(cost.size());
  TransportPlan out;
  out.pivots = solver.run(max_pivots);

  const Index n0 = cost.rows();
  const Index n1 = cost.cols();
  out.plan.resize(n0, n1);
  out.cost = 0.0;
  for (Index i = 0; i < n0; ++i) {
    for (Index j = 0; j < n1; ++j) {
      const double f = solver.flow(i, j);
      out.plan(i, j) = f;
      if (f > 0.0) out.cost += f * cost(i, j);
    }
  }
  out.row_potential.resize(n0);
  out.col_potential.resize(n1);
  for (Index i = 0; i < n0; ++i) out.row_potential[i] = -solver.potential(i);
  for (Index j = 0; j < n1; ++j) out.col_potential[j] = solver.potential(n0 + j);
  return out;
}

/// Per-component data reused across many distance evaluations.
struct PreparedMixture {
  std::shared_ptr<const MovingFrame> frame;
  Vector weights;
  std::vector<Point> basepoints;
  std::vector<Matrix> factors;  // L_k with L_k L_kᵀ = Σ_k
};

inline PreparedMixture prepare(const GaussianMixture& mix) {
  PreparedMixture out;
  out.frame = mix.frame_ptr();
  out.weights = Eigen::Map<const Vector>(mix.weights().data(), static_cast<Index>(mix.size()));
  out.basepoints.reserve(mix.size());
  out.factors.reserve(mix.size());
  for (const auto& c : mix.components()) {
    out.basepoints.push_back(c.basepoint);
    out.factors.push_back(c.cov.factor());
  }
  return out;
}

struct MixtureDistance {
  double distance = 0.0;  // MW2
  double squared = 0.0;   // MW2^2, the LP optimum
  TransportPlan plan;
  Matrix pairwise;        // squared bundle-Gaussian distances
};

/// K0×K1 matrix of squared 2-Wasserstein distances between components.
inline Matrix pairwise_costs(const PreparedMixture& a, const PreparedMixture& b) {
  detail::require(a.frame && b.frame && same_frame(*a.frame, *b.frame), ErrorKind::FrameMismatch,
                  "mixtures are expressed in different moving frames");
  const Index k0 = a.weights.size();
  const Index k1 = b.weights.size();
  Matrix out(k0, k1);
  for (Index k = 0; k < k0; ++k) {
    for (Index l = 0; l < k1; ++l) {
      const double base = geodesic_distance(a.basepoints[k], b.basepoints[l]);
      out(k, l) = base * base + bures_term_factored(a.factors[k], b.factors[l]);
    }
  }
  return out;
}

inline MixtureDistance mw2(const PreparedMixture& a, const PreparedMixture& b) {
  MixtureDistance out;
  out.pairwise = pairwise_costs(a, b);
  out.plan = solve_transportation(out.pairwise, a.weights, b.weights);
  out.squared = std::max(0.0, out.plan.cost);
  out.distance = std::sqrt(out.squared);
  return out;
}

/// Mixture-Wasserstein distance: the discrete W2 between the mixtures viewed
/// as weighted point sets in the space of bundle Gaussians.
inline MixtureDistance mw2(const GaussianMixture& a, const GaussianMixture& b) {
  detail::require(same_frame(a.frame(), b.frame()), ErrorKind::FrameMismatch,
                  "mixtures are expressed in different moving frames");
  return mw2(prepare(a), prepare(b));
}

}  // namespace bundlemw
