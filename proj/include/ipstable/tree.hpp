#pragma once

// Weighted tree metrics and the IP-stable 2-clustering of a tree by boundary
// edge rotation.
//
// A contiguous 2-clustering of a tree is given by one boundary edge. rotate(u)
// moves the boundary to (u, u^f), where u^f is the neighbour whose detached
// component is furthest from u on average; afterwards u is stable. Starting at
// the root and rotating at the far endpoint while it is unstable moves the
// boundary away from the root until both endpoints, and hence every node, are
// stable.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "ipstable/core.hpp"

namespace ipstable {

struct TreeEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
};

/// Connected acyclic graph with positive edge weights, rooted at `root`.
class WeightedTree {
 public:
  struct Neighbor {
    std::size_t node;
    double weight;
  };

  WeightedTree() = default;

  WeightedTree(std::size_t num_nodes, std::vector<TreeEdge> edges, std::size_t root = 0)
      : n_(num_nodes), root_(root), edges_(std::move(edges)), adj_(num_nodes) {
    if (n_ == 0) throw std::domain_error("tree needs at least one node");
    if (root_ >= n_) throw std::domain_error("root out of range");
    if (edges_.size() != n_ - 1) throw std::domain_error("tree must have exactly n-1 edges");
    for (const auto& e : edges_) {
      if (e.u >= n_ || e.v >= n_ || e.u == e.v) throw std::domain_error("invalid tree edge");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw std::domain_error("tree edge weights must be positive");
      adj_[e.u].push_back({e.v, e.weight});
      adj_[e.v].push_back({e.u, e.weight});
    }
    for (auto& nb : adj_)
      std::sort(nb.begin(), nb.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    root_at(root_);
    for (std::size_t v = 0; v < n_; ++v)
      if (!reached_[v]) throw std::domain_error("tree must be connected");
  }

  std::size_t size() const { return n_; }
  std::size_t root() const { return root_; }
  const std::vector<TreeEdge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(std::size_t u) const { return adj_.at(u); }
  std::size_t parent(std::size_t u) const { return parent_[u]; }
  std::size_t depth(std::size_t u) const { return depth_[u]; }
  double root_distance(std::size_t u) const { return root_dist_[u]; }

  double edge_weight(std::size_t u, std::size_t v) const {
    for (const auto& nb : adj_.at(u))
      if (nb.node == v) return nb.weight;
    throw std::domain_error("nodes are not adjacent");
  }

  /// Sum of weights on the unique u-v path.
  double distance(std::size_t u, std::size_t v) const {
    if (u >= n_ || v >= n_) throw std::out_of_range("tree node out of range");
    std::size_t a = u, b = v;
    while (depth_[a] > depth_[b]) a = parent_[a];
    while (depth_[b] > depth_[a]) b = parent_[b];
    while (a != b) {
      a = parent_[a];
      b = parent_[b];
    }
    return root_dist_[u] + root_dist_[v] - 2.0 * root_dist_[a];
  }

  /// Distances from `source` to every node, one traversal.
  std::vector<double> distances_from(std::size_t source) const {
    std::vector<double> dist(n_, -1.0);
    std::vector<std::size_t> stack{source};
    dist[source] = 0.0;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (const auto& nb : adj_[x]) {
        if (dist[nb.node] >= 0.0) continue;
        dist[nb.node] = dist[x] + nb.weight;
        stack.push_back(nb.node);
      }
    }
    return dist;
  }

  /// Nodes reachable from `start` once edge (start, blocked) is removed.
  std::vector<std::size_t> component_without_edge(std::size_t start, std::size_t blocked) const {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{start};
    std::vector<bool> seen(n_, false);
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      out.push_back(x);
      for (const auto& nb : adj_[x]) {
        if (seen[nb.node] || (x == start && nb.node == blocked)) continue;
        seen[nb.node] = true;
        stack.push_back(nb.node);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Explicit distance oracle over all nodes (kind = tree).
  DistanceOracle oracle() const {
    std::vector<double> flat(n_ * n_, 0.0);
    for (std::size_t u = 0; u < n_; ++u) {
      const auto d = distances_from(u);
      std::copy(d.begin(), d.end(), flat.begin() + static_cast<std::ptrdiff_t>(u * n_));
    }
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = u + 1; v < n_; ++v) flat[v * n_ + u] = flat[u * n_ + v];
    return DistanceOracle::from_matrix(std::move(flat), n_, MetricKind::tree, 1e-9);
  }

 private:
  void root_at(std::size_t r) {
    parent_.assign(n_, r);
    depth_.assign(n_, 0);
    root_dist_.assign(n_, 0.0);
    reached_.assign(n_, false);
    std::vector<std::size_t> stack{r};
    reached_[r] = true;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (const auto& nb : adj_[x]) {
        if (reached_[nb.node]) continue;
        reached_[nb.node] = true;
        parent_[nb.node] = x;
        depth_[nb.node] = depth_[x] + 1;
        root_dist_[nb.node] = root_dist_[x] + nb.weight;
        stack.push_back(nb.node);
      }
    }
  }

  std::size_t n_ = 0;
  std::size_t root_ = 0;
  std::vector<TreeEdge> edges_;
  std::vector<std::vector<Neighbor>> adj_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> depth_;
  std::vector<double> root_dist_;
  std::vector<bool> reached_;
};

inline double tree_dist(const WeightedTree& tree, std::size_t u, std::size_t v) {
  return tree.distance(u, v);
}

/// The edge (u, v) defining a contiguous 2-clustering; side[x] is 0 for the
/// component containing u and 1 for the component containing v.
struct BoundaryEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  std::vector<std::size_t> side;

  static BoundaryEdge make(const WeightedTree& tree, std::size_t u, std::size_t v) {
    tree.edge_weight(u, v);  // throws unless adjacent
    BoundaryEdge b;
    b.u = u;
    b.v = v;
    b.side.assign(tree.size(), 1);
    for (std::size_t x : tree.component_without_edge(u, v)) b.side[x] = 0;
    return b;
  }

  Clustering clustering() const { return Clustering(side, 2); }

  bool same_edge(std::size_t a, std::size_t b) const {
    return (a == u && b == v) || (a == v && b == u);
  }
};

/// Average distance from u to the component of w in T \ (u, w).
inline double detached_average(const WeightedTree& tree, std::size_t u, std::size_t w) {
  const auto comp = tree.component_without_edge(w, u);
  const auto dist = tree.distances_from(u);
  double sum = 0.0;
  for (std::size_t x : comp) sum += dist[x];
  return sum / static_cast<double>(comp.size());
}

/// The neighbour of u whose detached component has the largest average
/// distance from u; ties go to the smallest node id. One traversal from u.
inline std::size_t furthest_neighbor(const WeightedTree& tree, std::size_t u) {
  const auto& nbs = tree.neighbors(u);
  if (nbs.empty()) throw std::domain_error("node has no neighbours");
  // Aggregate (count, distance sum) per branch leaving u.
  const std::size_t n = tree.size();
  std::vector<double> dist(n, -1.0);
  std::vector<std::size_t> branch(n, n);
  std::vector<std::size_t> stack;
  dist[u] = 0.0;
  for (std::size_t b = 0; b < nbs.size(); ++b) {
    dist[nbs[b].node] = nbs[b].weight;
    branch[nbs[b].node] = b;
    stack.push_back(nbs[b].node);
  }
  std::vector<double> sum(nbs.size(), 0.0);
  std::vector<std::size_t> count(nbs.size(), 0);
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    sum[branch[x]] += dist[x];
    ++count[branch[x]];
    for (const auto& nb : tree.neighbors(x)) {
      if (dist[nb.node] >= 0.0) continue;
      dist[nb.node] = dist[x] + nb.weight;
      branch[nb.node] = branch[x];
      stack.push_back(nb.node);
    }
  }
  std::size_t best = 0;
  double best_avg = -1.0;
  for (std::size_t b = 0; b < nbs.size(); ++b) {
    const double avg = sum[b] / static_cast<double>(count[b]);
    // Neighbours are sorted by id, so a strict improvement keeps the smallest id on ties.
    if (avg > best_avg * (1.0 + 1e-12)) {
      best_avg = avg;
      best = b;
    }
  }
  return nbs[best].node;
}

/// Own-cluster and other-cluster averages of node x under a boundary edge.
inline std::pair<double, double> boundary_averages(const WeightedTree& tree, const BoundaryEdge& b,
                                                   std::size_t x) {
  const auto dist = tree.distances_from(x);
  double own = 0.0, other = 0.0;
  std::size_t own_n = 0, other_n = 0;
  for (std::size_t y = 0; y < tree.size(); ++y) {
    if (b.side[y] == b.side[x]) {
      if (y == x) continue;
      own += dist[y];
      ++own_n;
    } else {
      other += dist[y];
      ++other_n;
    }
  }
  return {own_n ? own / static_cast<double>(own_n) : 0.0,
          other_n ? other / static_cast<double>(other_n) : 0.0};
}

inline bool stable_under(const WeightedTree& tree, const BoundaryEdge& b, std::size_t x,
                         double tol = kStabilityTol) {
  const auto [own, other] = boundary_averages(tree, b, x);
  return own <= other * (1.0 + tol);
}

struct RotateResult {
  BoundaryEdge boundary;
  bool moved = false;  ///< false when u^f is already the other endpoint
};

/// Moves the boundary from (u, v) to (u, u^f). The pivot stays at index u of
/// the returned edge.
inline RotateResult rotate(const WeightedTree& tree, const BoundaryEdge& boundary, std::size_t pivot) {
  if (pivot != boundary.u && pivot != boundary.v)
    throw std::domain_error("pivot must be an endpoint of the boundary edge");
  const std::size_t other = pivot == boundary.u ? boundary.v : boundary.u;
  const std::size_t far = furthest_neighbor(tree, pivot);
  RotateResult r;
  r.moved = far != other;
  r.boundary = BoundaryEdge::make(tree, pivot, far);
  return r;
}

struct Tree2Solution {
  Clustering clustering;
  BoundaryEdge boundary;
  std::vector<std::pair<std::size_t, std::size_t>> trace;  ///< boundary edge after each rotate
  std::size_t rotations = 0;
};

/// Contiguous IP-stable 2-clustering of the tree's nodes under d_T.
inline Tree2Solution solve_tree2(const WeightedTree& tree, double tol = kStabilityTol) {
  const std::size_t n = tree.size();
  if (n < 2) throw std::domain_error("need at least two nodes for a 2-clustering");
  const std::size_t r = tree.root();
  const std::size_t first = tree.neighbors(r).front().node;

  Tree2Solution sol;
  BoundaryEdge b = BoundaryEdge::make(tree, r, first);
  RotateResult step = rotate(tree, b, r);
  b = step.boundary;
  ++sol.rotations;
  sol.trace.emplace_back(b.u, b.v);
  // b.u is stable; rotate at the far endpoint until it is stable too.
  while (!stable_under(tree, b, b.v, tol)) {
    if (sol.rotations > n) throw std::logic_error("tree rotation did not terminate within n steps");
    step = rotate(tree, b, b.v);
    if (!step.moved) throw std::logic_error("rotate returned to the previous boundary");
    b = step.boundary;
    ++sol.rotations;
    sol.trace.emplace_back(b.u, b.v);
  }
  if (!stable_under(tree, b, b.u, tol)) throw std::logic_error("boundary endpoint left unstable");
  sol.clustering = b.clustering();
  sol.boundary = std::move(b);
  return sol;
}

}  // namespace ipstable
