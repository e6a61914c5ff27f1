#pragma once

// 2-hierarchically well-separated trees (2-HSTs) and IP-stable clustering
// through them.
//
// In a 2-HST every node reaches all of its children over edges of one common
// weight, and that weight at least halves from one level to the next. When
// the data points are exactly the leaves and share one depth, choosing k
// disjoint subtrees with the level procedure of hst_k_clustering gives a
// clustering in which every within-cluster distance is at most every
// cross-cluster distance from the same point, so it is IP-stable under d_T.
// embed_hst builds such a tree from a metric with a random permutation and
// random radius scale, dominating the input distances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipstable/core.hpp"

namespace ipstable {

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

struct HstNode {
  std::size_t parent = kNoNode;
  std::vector<std::size_t> children;
  double child_weight = 0.0;  ///< weight of the edge to each child
  std::size_t depth = 0;
};

/// Rooted tree (root = node 0) plus a map from data points to nodes.
struct Hst {
  std::vector<HstNode> nodes;
  std::vector<std::size_t> point_node;  ///< point id -> node id

  std::size_t num_points() const { return point_node.size(); }

  std::size_t add_root(double child_weight) {
    if (!nodes.empty()) throw std::logic_error("root already exists");
    nodes.push_back(HstNode{kNoNode, {}, child_weight, 0});
    return 0;
  }

  std::size_t add_child(std::size_t parent, double child_weight = 0.0) {
    const std::size_t id = nodes.size();
    nodes.push_back(HstNode{parent, {}, child_weight, nodes.at(parent).depth + 1});
    nodes[parent].children.push_back(id);
    return id;
  }

  bool is_leaf(std::size_t v) const { return nodes[v].children.empty(); }

  /// Weight of the edge from v to its parent.
  double parent_edge(std::size_t v) const {
    return nodes[v].parent == kNoNode ? 0.0 : nodes[nodes[v].parent].child_weight;
  }

  double node_distance(std::size_t a, std::size_t b) const {
    double d = 0.0;
    while (nodes[a].depth > nodes[b].depth) {
      d += parent_edge(a);
      a = nodes[a].parent;
    }
    while (nodes[b].depth > nodes[a].depth) {
      d += parent_edge(b);
      b = nodes[b].parent;
    }
    while (a != b) {
      d += parent_edge(a) + parent_edge(b);
      a = nodes[a].parent;
      b = nodes[b].parent;
    }
    return d;
  }

  double point_distance(std::size_t p, std::size_t q) const {
    return node_distance(point_node.at(p), point_node.at(q));
  }

  /// d_T over the data points as an explicit tree-kind oracle.
  DistanceOracle oracle() const {
    const std::size_t n = num_points();
    std::vector<double> flat(n * n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) flat[p * n + q] = flat[q * n + p] = point_distance(p, q);
    return DistanceOracle::from_matrix(std::move(flat), n, MetricKind::tree);
  }

  /// Points mapped to each node.
  std::vector<std::vector<std::size_t>> node_points() const {
    std::vector<std::vector<std::size_t>> out(nodes.size());
    for (std::size_t p = 0; p < point_node.size(); ++p) out[point_node[p]].push_back(p);
    return out;
  }
};

/// Empty string when the weight laws hold (and, with `require_normalized`,
/// points are exactly the leaves, one each, at a common depth); otherwise a
/// description of the first violation found.
inline std::string hst_violation(const Hst& t, bool require_normalized = true) {
  if (t.nodes.empty()) return "tree has no nodes";
  if (t.nodes[0].parent != kNoNode) return "node 0 must be the root";
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const auto& node = t.nodes[v];
    if (v != 0 && (node.parent == kNoNode || t.nodes[node.parent].depth + 1 != node.depth))
      return "inconsistent parent/depth at node " + std::to_string(v);
    if (node.children.empty()) continue;
    if (!(node.child_weight > 0.0) || !std::isfinite(node.child_weight))
      return "non-positive child weight at node " + std::to_string(v);
    for (std::size_t c : node.children) {
      if (t.nodes.at(c).parent != v) return "child does not point back to parent at node " + std::to_string(v);
      if (!t.nodes[c].children.empty() &&
          t.nodes[c].child_weight > node.child_weight / 2.0 * (1.0 + 1e-12))
        return "weights do not halve below node " + std::to_string(v);
    }
  }
  for (std::size_t node : t.point_node)
    if (node >= t.nodes.size()) return "point mapped to a missing node";
  if (!require_normalized) return {};

  const auto pts = t.node_points();
  std::size_t leaf_depth = kNoNode;
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    if (!t.is_leaf(v)) {
      if (!pts[v].empty()) return "point mapped to internal node " + std::to_string(v);
      continue;
    }
    if (pts[v].size() != 1) return "leaf " + std::to_string(v) + " must hold exactly one point";
    if (leaf_depth == kNoNode) leaf_depth = t.nodes[v].depth;
    if (t.nodes[v].depth != leaf_depth) return "leaves at unequal depths";
  }
  return {};
}

inline bool is_valid_hst(const Hst& t, bool require_normalized = true) {
  return hst_violation(t, require_normalized).empty();
}

/// True when all nodes at one depth share their child weight, so that d_T
/// between leaves depends only on the depth of their lowest common ancestor.
inline bool has_level_uniform_weights(const Hst& t) {
  std::vector<double> level;
  for (const auto& node : t.nodes) {
    if (node.children.empty()) continue;
    if (level.size() <= node.depth) level.resize(node.depth + 1, -1.0);
    if (level[node.depth] < 0.0)
      level[node.depth] = node.child_weight;
    else if (level[node.depth] != node.child_weight)
      return false;
  }
  return true;
}

/// Makes every point its own leaf at one common depth. Subtrees without
/// points are pruned. A point sitting on an internal node (or sharing a node)
/// moves to a fresh child; shallow leaves are extended by a path whose
/// weights shrink by a factor 8 per level, so each point's path grows by at
/// most a constant fraction of an edge it already had.
inline Hst normalize_leaves(const Hst& in) {
  const std::string problem = hst_violation(in, false);
  if (!problem.empty()) throw std::domain_error("invalid HST: " + problem);
  constexpr double kShrink = 8.0;

  // Which nodes have points in their subtree.
  const auto pts = in.node_points();
  std::vector<bool> useful(in.nodes.size(), false);
  std::vector<std::size_t> order;  // preorder
  {
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      order.push_back(v);
      for (auto it = in.nodes[v].children.rbegin(); it != in.nodes[v].children.rend(); ++it)
        stack.push_back(*it);
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    useful[v] = !pts[v].empty();
    for (std::size_t c : in.nodes[v].children) useful[v] = useful[v] || useful[c];
  }

  Hst out;
  out.point_node.assign(in.num_points(), kNoNode);
  if (in.num_points() == 0) {
    out.add_root(in.nodes[0].child_weight);
    return out;
  }
  std::vector<std::size_t> remap(in.nodes.size(), kNoNode);
  std::vector<double> incoming(in.nodes.size(), 0.0);
  for (std::size_t v : order) {
    if (!useful[v]) continue;
    if (v == 0) {
      remap[v] = out.add_root(in.nodes[v].child_weight);
    } else {
      remap[v] = out.add_child(remap[in.nodes[v].parent], in.nodes[v].child_weight);
      incoming[v] = in.parent_edge(v);
    }
  }
  for (std::size_t v : order) {
    if (!useful[v]) continue;
    const std::size_t nv = remap[v];
    bool has_kept_child = false;
    for (std::size_t c : in.nodes[v].children) has_kept_child = has_kept_child || useful[c];
    if (pts[v].empty()) continue;
    if (!has_kept_child && pts[v].size() == 1) {
      out.point_node[pts[v][0]] = nv;
      continue;
    }
    // Child weight for the new leaves: the node's own if it had children,
    // otherwise a fraction of the edge above it.
    double w = in.nodes[v].children.empty() ? 0.0 : in.nodes[v].child_weight;
    if (!(w > 0.0)) w = v == 0 ? 1.0 : incoming[v] / kShrink;
    out.nodes[nv].child_weight = w;
    for (std::size_t p : pts[v]) out.point_node[p] = out.add_child(nv, 0.0);
  }

  std::size_t depth = 0;
  for (std::size_t p = 0; p < out.num_points(); ++p) depth = std::max(depth, out.nodes[out.point_node[p]].depth);
  for (std::size_t p = 0; p < out.num_points(); ++p) {
    std::size_t leaf = out.point_node[p];
    if (out.nodes[leaf].depth == depth) continue;
    const double into = out.parent_edge(leaf);
    double w = into > 0.0 ? into / kShrink : 1.0;
    while (out.nodes[leaf].depth < depth) {
      out.nodes[leaf].child_weight = w;
      leaf = out.add_child(leaf, 0.0);
      w /= kShrink;
    }
    out.point_node[p] = leaf;
  }
  return out;
}

/// The k subtree roots chosen by the level procedure, and the point clustering
/// they induce (each leaf joins its deepest chosen ancestor).
struct HstClusteringResult {
  Clustering clustering;
  std::vector<std::size_t> roots;  ///< cluster c is the subtree of roots[c] minus deeper roots
  std::size_t level = 0;           ///< the depth l used for the selection
};

inline HstClusteringResult hst_k_clustering_detailed(const Hst& t, std::size_t k) {
  const std::string problem = hst_violation(t, true);
  if (!problem.empty()) throw std::domain_error("hst_k_clustering needs a normalized HST: " + problem);
  const std::size_t n = t.num_points();
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= number of leaves");

  std::vector<std::vector<std::size_t>> by_depth;
  for (std::size_t v = 0; v < t.nodes.size(); ++v) {
    const std::size_t d = t.nodes[v].depth;
    if (by_depth.size() <= d) by_depth.resize(d + 1);
    by_depth[d].push_back(v);
  }
  // Level sizes are nondecreasing with depth, so take the deepest one that fits.
  std::size_t level = 0;
  for (std::size_t d = 0; d < by_depth.size(); ++d)
    if (by_depth[d].size() <= k) level = d;

  std::vector<std::size_t> pending = by_depth[level];  // ascending id
  std::sort(pending.begin(), pending.end());
  std::vector<std::size_t> chosen;
  if (pending.size() == k) {
    chosen = pending;
  } else {
    while (!pending.empty()) {
      const std::size_t v = pending.front();
      std::vector<std::size_t> kids = t.nodes[v].children;
      std::sort(kids.begin(), kids.end());
      const std::size_t total = chosen.size() + kids.size() + pending.size() - 1;
      if (total < k) {
        chosen.insert(chosen.end(), kids.begin(), kids.end());
        pending.erase(pending.begin());
        continue;
      }
      if (total == k) {
        chosen.insert(chosen.end(), kids.begin(), kids.end());
        chosen.insert(chosen.end(), pending.begin() + 1, pending.end());
      } else {
        // v stays in as a root of its leftover children.
        const std::size_t take = k - chosen.size() - pending.size();
        chosen.insert(chosen.end(), pending.begin(), pending.end());
        chosen.insert(chosen.end(), kids.begin(), kids.begin() + static_cast<std::ptrdiff_t>(take));
      }
      pending.clear();
    }
  }
  if (chosen.size() != k) throw std::logic_error("subtree selection did not reach k roots");
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::size_t> label_of(t.nodes.size(), kNoNode);
  for (std::size_t c = 0; c < chosen.size(); ++c) label_of[chosen[c]] = c;
  std::vector<std::size_t> labels(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t v = t.point_node[p];
    while (label_of[v] == kNoNode) {
      if (t.nodes[v].parent == kNoNode) throw std::logic_error("leaf without a chosen ancestor");
      v = t.nodes[v].parent;
    }
    labels[p] = label_of[v];
  }
  return {Clustering(std::move(labels), k), std::move(chosen), level};
}

/// k-clustering of the points of a normalized 2-HST. It is IP-stable under
/// d_T whenever the tree has level-uniform weights (see
/// has_level_uniform_weights), which embed_hst always produces. With weights
/// that vary between nodes of one depth, a node split into some of its
/// children can leave a point slightly closer to a foreign child than to its
/// own remainder.
inline Clustering hst_k_clustering(const Hst& t, std::size_t k) {
  return hst_k_clustering_detailed(t, k).clustering;
}

/// Random 2-HST over the points of `oracle` with d(u, v) <= d_T(u, v).
///
/// Distances are scaled so the smallest positive one is 1. With a random
/// permutation of the points and beta drawn from [1, 2), the node of a
/// cluster at level i is split into balls of radius beta * 2^(i-1) around the
/// points in permutation order; a level-i node reaches its children over
/// edges of weight 2^(i+1). The last split level separates every pair at
/// positive distance, and one final level gives each point its own leaf.
inline Hst embed_hst(const DistanceOracle& oracle, std::uint64_t seed) {
  const std::size_t n = oracle.size();
  if (n == 0) throw std::domain_error("cannot embed an empty point set");
  const DistanceOracle d = oracle.materialized();

  double dmin = kInfNorm, dmax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = d(i, j);
      if (v > 0.0) dmin = std::min(dmin, v);
      dmax = std::max(dmax, v);
    }
  if (!std::isfinite(dmin)) dmin = 1.0;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const double beta = std::uniform_real_distribution<double>(1.0, 2.0)(rng);

  // Top split level: the first ball already swallows the whole set.
  int top = -1;
  while (beta * std::ldexp(1.0, top) < dmax / dmin) ++top;
  const int root_level = top + 1;

  Hst t;
  t.add_root(std::ldexp(1.0, root_level + 1) * dmin);
  std::vector<std::vector<std::size_t>> members{std::vector<std::size_t>(n)};
  std::iota(members[0].begin(), members[0].end(), std::size_t{0});
  std::vector<std::size_t> frontier{0};

  std::vector<std::size_t> owner(n, kNoNode);
  for (int level = root_level - 1; level >= -1; --level) {
    const double radius = beta * std::ldexp(1.0, level);
    std::vector<std::size_t> next_frontier;
    std::vector<std::vector<std::size_t>> next_members;
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const auto& set = members[f];
      std::vector<std::vector<std::size_t>> parts;
      std::size_t remaining = set.size();
      for (std::size_t x : set) owner[x] = kNoNode;
      for (std::size_t ci = 0; ci < n && remaining > 0; ++ci) {
        const std::size_t center = perm[ci];
        std::vector<std::size_t> part;
        for (std::size_t x : set) {
          if (owner[x] != kNoNode) continue;
          if (d(center, x) / dmin <= radius) {
            owner[x] = center;
            part.push_back(x);
          }
        }
        if (part.empty()) continue;
        remaining -= part.size();
        parts.push_back(std::move(part));
      }
      for (auto& part : parts) {
        next_frontier.push_back(t.add_child(frontier[f], std::ldexp(1.0, level + 1) * dmin));
        next_members.push_back(std::move(part));
      }
    }
    frontier = std::move(next_frontier);
    members = std::move(next_members);
  }

  t.point_node.assign(n, kNoNode);
  for (std::size_t f = 0; f < frontier.size(); ++f)
    for (std::size_t x : members[f]) t.point_node[x] = t.add_child(frontier[f], 0.0);
  return t;
}

/// Max over pairs of d_T / d; +inf when some pair has d = 0 < d_T.
inline double max_stretch(const DistanceOracle& oracle, const Hst& t) {
  double worst = 1.0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    for (std::size_t j = i + 1; j < oracle.size(); ++j) {
      const double dt = t.point_distance(i, j);
      const double dd = oracle(i, j);
      if (dd <= 0.0) {
        if (dt > 0.0) return kInfNorm;
        continue;
      }
      worst = std::max(worst, dt / dd);
    }
  return worst;
}

/// Hst over the listed points only (re-indexed in list order), normalized.
inline Hst restrict_points(const Hst& t, std::span<const std::size_t> keep) {
  Hst r;
  r.nodes = t.nodes;
  r.point_node.reserve(keep.size());
  for (std::size_t p : keep) r.point_node.push_back(t.point_node.at(p));
  return normalize_leaves(r);
}

struct EmbeddingClustering {
  Clustering clustering;              ///< over retained points, in retained order
  std::vector<std::size_t> retained;  ///< original ids, ascending
  std::vector<std::size_t> excluded;  ///< original ids, ascending
  double stretch = 1.0;               ///< max d_T / d over retained pairs
  Hst tree;                           ///< normalized tree over retained points
};

/// Embeds, drops up to ceil(epsilon * n) points with the worst stretch, and
/// clusters the retained leaves. Under dominance, the output is
/// stretch-approximately IP-stable on the retained points.
inline EmbeddingClustering cluster_via_embedding(const DistanceOracle& oracle, std::size_t k,
                                                 double epsilon, std::uint64_t seed) {
  const std::size_t n = oracle.size();
  if (!(epsilon >= 0.0 && epsilon < 1.0 / 3.0)) throw std::domain_error("epsilon must lie in [0, 1/3)");
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  const std::size_t budget = static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(n)));
  if (n < k + budget) throw std::domain_error("exclusion budget would leave fewer than k points");

  const DistanceOracle d = oracle.materialized();
  const Hst full = embed_hst(d, seed);

  // ratio[i][j] = d_T / d, with d = 0 < d_T mapped to infinity.
  std::vector<double> ratio(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dt = full.point_distance(i, j);
      const double dd = d(i, j);
      const double r = dd > 0.0 ? dt / dd : (dt > 0.0 ? kInfNorm : 1.0);
      ratio[i * n + j] = ratio[j * n + i] = r;
    }
  std::vector<bool> alive(n, true);
  auto point_stretch = [&](std::size_t i) {
    double s = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && alive[j]) s = std::max(s, ratio[i * n + j]);
    return s;
  };
  std::vector<double> stretch(n);
  for (std::size_t i = 0; i < n; ++i) stretch[i] = point_stretch(i);

  for (std::size_t removed = 0; removed < budget; ++removed) {
    std::size_t worst = kNoNode;
    for (std::size_t i = 0; i < n; ++i)
      if (alive[i] && (worst == kNoNode || stretch[i] > stretch[worst])) worst = i;
    if (worst == kNoNode || stretch[worst] <= 1.0) break;
    alive[worst] = false;
    for (std::size_t i = 0; i < n; ++i)
      if (alive[i] && ratio[i * n + worst] >= stretch[i]) stretch[i] = point_stretch(i);
  }

  EmbeddingClustering out;
  for (std::size_t i = 0; i < n; ++i) (alive[i] ? out.retained : out.excluded).push_back(i);
  out.tree = restrict_points(full, out.retained);
  out.clustering = hst_k_clustering(out.tree, k);
  out.stretch = max_stretch(d.subset(out.retained), out.tree);
  return out;
}

}  // namespace ipstable
