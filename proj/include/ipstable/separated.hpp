#pragma once

// Clustering instances that admit an (alpha, gamma)-clustering: every cluster
// holds at least alpha*n points and every point is gamma times closer on
// average to its own cluster than to any other.
//
// For gamma >= 2 + sqrt(3) within-cluster edges are never longer than
// incident cross edges, so a single-linkage pass that only merges while one
// side is still smaller than alpha*n never mixes true clusters. The
// resulting superclusters are then either grouped exhaustively
// (exact_enumerate) or through an HST embedding of one representative each
// (pipeline).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ipstable/core.hpp"
#include "ipstable/hst.hpp"

namespace ipstable {

inline const double kMinGamma = 2.0 + std::sqrt(3.0);

struct AlphaGammaParams {
  double alpha = 0.0;
  double gamma = kMinGamma;

  void validate(std::size_t n) const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in (0, 1]");
    if (alpha * static_cast<double>(n) < 1.0 - 1e-12) throw std::domain_error("alpha * n must be at least 1");
    if (!(gamma >= kMinGamma - 1e-12)) throw std::domain_error("gamma must be at least 2 + sqrt(3)");
  }
};

/// True iff every cluster has at least alpha*n points and for every point x
/// and foreign cluster C_j, avg(x, C_j) >= gamma * avg(x, own cluster).
inline bool check_alpha_gamma(const DistanceOracle& oracle, const Clustering& clustering, double alpha,
                              double gamma) {
  const std::size_t n = clustering.size();
  const std::size_t k = clustering.k();
  if (n != oracle.size()) throw std::domain_error("clustering size mismatch");
  const auto sizes = clustering.sizes();
  for (std::size_t s : sizes)
    if (static_cast<double>(s) < alpha * static_cast<double>(n) * (1.0 - 1e-12)) return false;
  std::vector<double> sums(k);
  for (std::size_t x = 0; x < n; ++x) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) sums[clustering[y]] += oracle(x, y);
    const std::size_t own = clustering[x];
    const double own_avg = sizes[own] > 1 ? sums[own] / static_cast<double>(sizes[own] - 1) : 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (c == own) continue;
      const double foreign = sums[c] / static_cast<double>(sizes[c]);
      if (foreign < gamma * own_avg * (1.0 - kStabilityTol)) return false;
    }
  }
  return true;
}

/// Which merge rule justified a merge in the conditioned linkage.
enum class MergeCriterion { small_cluster = 1, nonuniform_cross = 2, far_own_point = 3 };

struct MergeRecord {
  std::size_t x = 0;  ///< edge endpoint in the first cluster
  std::size_t y = 0;  ///< edge endpoint in the second cluster
  double length = 0.0;
  std::size_t size_x = 0;  ///< cluster sizes before the merge
  std::size_t size_y = 0;
  MergeCriterion criterion = MergeCriterion::small_cluster;
};

struct SuperclusterPartition {
  std::vector<std::vector<std::size_t>> clusters;  ///< each ascending, ordered by smallest member
  std::vector<std::size_t> label;                  ///< point -> supercluster
  std::vector<std::size_t> representatives;        ///< smallest member of each supercluster
  std::vector<MergeRecord> merges;

  std::size_t size() const { return clusters.size(); }
};

namespace detail {

struct Edge {
  double d;
  std::size_t i;
  std::size_t j;
};

/// All pairs sorted by (length, smaller endpoint, larger endpoint).
inline std::vector<Edge> sorted_edges(const DistanceOracle& oracle) {
  const std::size_t n = oracle.size();
  std::vector<Edge> edges;
  edges.reserve(n * (n - (n > 0)) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.push_back({oracle(i, j), i, j});
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.d, a.i, a.j) < std::tie(b.d, b.i, b.j);
  });
  return edges;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  std::size_t size(std::size_t x) { return size_[find(x)]; }
  /// Returns the surviving root.
  std::size_t unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

inline SuperclusterPartition partition_from(UnionFind& uf, std::size_t n, std::vector<MergeRecord> merges) {
  SuperclusterPartition p;
  std::vector<std::size_t> root_label(n, kNoNode);
  p.label.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t r = uf.find(x);
    if (root_label[r] == kNoNode) {
      root_label[r] = p.clusters.size();
      p.clusters.emplace_back();
      p.representatives.push_back(x);
    }
    p.label[x] = root_label[r];
    p.clusters[root_label[r]].push_back(x);
  }
  p.merges = std::move(merges);
  return p;
}

inline bool is_small(std::size_t size, double alpha, std::size_t n) {
  return static_cast<double>(size) < alpha * static_cast<double>(n) * (1.0 - 1e-12);
}

}  // namespace detail

/// Single linkage over edges in nondecreasing length that merges two
/// clusters only while at least one of them has fewer than alpha*n points.
inline SuperclusterPartition linkage_size_guard(const DistanceOracle& oracle, double alpha) {
  const std::size_t n = oracle.size();
  if (n == 0) throw std::domain_error("empty instance");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in (0, 1]");
  detail::UnionFind uf(n);
  std::vector<MergeRecord> merges;
  for (const auto& e : detail::sorted_edges(oracle)) {
    const std::size_t a = uf.find(e.i), b = uf.find(e.j);
    if (a == b) continue;
    const std::size_t sa = uf.size(a), sb = uf.size(b);
    if (!detail::is_small(sa, alpha, n) && !detail::is_small(sb, alpha, n)) continue;
    merges.push_back({e.i, e.j, e.d, sa, sb, MergeCriterion::small_cluster});
    uf.unite(a, b);
  }
  return detail::partition_from(uf, n, std::move(merges));
}

/// Guard on the number of supercluster groupings exact_enumerate may visit.
inline constexpr double kEnumerationLimit = 1e7;

/// Linkage with the size guard, then every grouping of the superclusters
/// into k nonempty groups in restricted-growth order; returns the first
/// IP-stable one.
inline Clustering exact_enumerate(const DistanceOracle& oracle, std::size_t k, double alpha,
                                  double tol = kStabilityTol) {
  const std::size_t n = oracle.size();
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::domain_error("alpha must lie in (0, 1]");
  if (std::pow(1.0 / alpha, static_cast<double>(k)) > kEnumerationLimit)
    throw Refused("(1/alpha)^k exceeds the enumeration limit");
  if (k == 1) return Clustering(std::vector<std::size_t>(n, 0), 1);

  const SuperclusterPartition parts = linkage_size_guard(oracle, alpha);
  const std::size_t l = parts.size();
  if (l < k) throw Infeasible("fewer superclusters than k: the (alpha, gamma) promise does not hold");

  // sums[x * l + j] = total distance from x to supercluster j
  std::vector<double> sums(n * l, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = x + 1; y < n; ++y) {
      const double d = oracle(x, y);
      sums[x * l + parts.label[y]] += d;
      sums[y * l + parts.label[x]] += d;
    }

  std::optional<Clustering> found;
  std::vector<double> group_sums(k);
  std::vector<std::size_t> group_sizes(k);
  for_each_partition(l, k, [&](const std::vector<std::size_t>& groups) {
    std::fill(group_sizes.begin(), group_sizes.end(), 0);
    for (std::size_t j = 0; j < l; ++j) group_sizes[groups[j]] += parts.clusters[j].size();
    for (std::size_t x = 0; x < n; ++x) {
      std::fill(group_sums.begin(), group_sums.end(), 0.0);
      for (std::size_t j = 0; j < l; ++j) group_sums[groups[j]] += sums[x * l + j];
      const double vi = detail::violation_from_sums(group_sums, group_sizes, groups[parts.label[x]]);
      if (detail::is_unstable_ratio(vi, tol)) return true;
    }
    std::vector<std::size_t> labels(n);
    for (std::size_t x = 0; x < n; ++x) labels[x] = groups[parts.label[x]];
    found = Clustering(std::move(labels), k);
    return false;
  });
  if (!found) throw Infeasible("no stable grouping of superclusters: the (alpha, gamma) promise does not hold");
  return *found;
}

/// Thresholds of the three merge rules for a given gamma.
struct MergeThresholds {
  double cross_ratio;  ///< ((g^2+1)/(g-1)^2)^2
  double own_factor;   ///< 2g/(g-1)^2

  explicit MergeThresholds(double gamma)
      : cross_ratio(std::pow((gamma * gamma + 1.0) / ((gamma - 1.0) * (gamma - 1.0)), 2.0)),
        own_factor(2.0 * gamma / ((gamma - 1.0) * (gamma - 1.0))) {}
};

/// Single linkage that merges the clusters of an edge (x, y) when either is
/// smaller than alpha*n, when their cross distances vary by more than the
/// uniformity threshold, or when some point of either cluster lies further
/// from its endpoint than own_factor * d(x, y).
inline SuperclusterPartition linkage_conditioned(const DistanceOracle& oracle, double alpha, double gamma) {
  const std::size_t n = oracle.size();
  if (n == 0) throw std::domain_error("empty instance");
  AlphaGammaParams{alpha, gamma}.validate(n);
  const MergeThresholds th(gamma);

  // Slots start as singletons; a merge keeps the smaller slot id.
  std::vector<std::size_t> slot(n);
  std::iota(slot.begin(), slot.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t x = 0; x < n; ++x) members[x] = {x};
  std::vector<double> cross_min(n * n), cross_max(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) cross_min[a * n + b] = cross_max[a * n + b] = oracle(a, b);
  std::vector<double> ecc(n, 0.0);  // max distance to a point of its own cluster
  std::vector<bool> alive(n, true);

  std::vector<MergeRecord> merges;
  for (const auto& e : detail::sorted_edges(oracle)) {
    const std::size_t a = slot[e.i], b = slot[e.j];
    if (a == b) continue;
    const std::size_t sa = members[a].size(), sb = members[b].size();
    MergeCriterion why;
    if (detail::is_small(sa, alpha, n) || detail::is_small(sb, alpha, n)) {
      why = MergeCriterion::small_cluster;
    } else if (cross_max[a * n + b] > th.cross_ratio * cross_min[a * n + b]) {
      why = MergeCriterion::nonuniform_cross;
    } else if (std::max(ecc[e.i], ecc[e.j]) > th.own_factor * e.d) {
      why = MergeCriterion::far_own_point;
    } else {
      continue;
    }
    merges.push_back({e.i, e.j, e.d, sa, sb, why});

    const std::size_t keep = std::min(a, b), gone = std::max(a, b);
    for (std::size_t x : members[keep])
      for (std::size_t y : members[gone]) {
        const double d = oracle(x, y);
        ecc[x] = std::max(ecc[x], d);
        ecc[y] = std::max(ecc[y], d);
      }
    for (std::size_t c = 0; c < n; ++c) {
      if (!alive[c] || c == keep || c == gone) continue;
      const double mn = std::min(cross_min[keep * n + c], cross_min[gone * n + c]);
      const double mx = std::max(cross_max[keep * n + c], cross_max[gone * n + c]);
      cross_min[keep * n + c] = cross_min[c * n + keep] = mn;
      cross_max[keep * n + c] = cross_max[c * n + keep] = mx;
    }
    alive[gone] = false;
    for (std::size_t y : members[gone]) slot[y] = keep;
    members[keep].insert(members[keep].end(), members[gone].begin(), members[gone].end());
    members[gone].clear();
  }

  detail::UnionFind uf(n);
  for (std::size_t x = 0; x < n; ++x) uf.unite(x, slot[x]);
  return detail::partition_from(uf, n, std::move(merges));
}

/// Recomputes from scratch whether a logged merge was justified, given the
/// partition that existed just before it.
inline bool merge_justified(const DistanceOracle& oracle, const MergeRecord& m,
                            const std::vector<std::size_t>& cluster_x, const std::vector<std::size_t>& cluster_y,
                            double alpha, double gamma) {
  const std::size_t n = oracle.size();
  const MergeThresholds th(gamma);
  switch (m.criterion) {
    case MergeCriterion::small_cluster:
      return detail::is_small(cluster_x.size(), alpha, n) || detail::is_small(cluster_y.size(), alpha, n);
    case MergeCriterion::nonuniform_cross: {
      double mn = kInfNorm, mx = 0.0;
      for (std::size_t x : cluster_x)
        for (std::size_t y : cluster_y) {
          mn = std::min(mn, oracle(x, y));
          mx = std::max(mx, oracle(x, y));
        }
      return mx > th.cross_ratio * mn;
    }
    case MergeCriterion::far_own_point: {
      double far = 0.0;
      for (std::size_t x : cluster_x) far = std::max(far, oracle(m.x, x));
      for (std::size_t y : cluster_y) far = std::max(far, oracle(m.y, y));
      return far > th.own_factor * m.length;
    }
  }
  return false;
}

struct PipelineResult {
  Clustering clustering;
  SuperclusterPartition superclusters;
  std::vector<std::size_t> rep_groups;  ///< group of each supercluster
  double max_violation = 0.0;           ///< audited MaxVi of the output
  /// max over points x of (max distance to its own group) / (min distance to
  /// a point outside it); always an upper bound on MaxVi.
  double certificate = 0.0;
  double rep_stretch = 1.0;  ///< max d_T / d over representative pairs
  /// max over supercluster pairs of (max cross distance) / (min cross distance)
  double uniformity = 1.0;
};

/// Conditioned linkage, then an HST clustering of one representative per
/// supercluster; each output cluster is the union of the superclusters whose
/// representatives share a group.
inline PipelineResult pipeline(const DistanceOracle& oracle, std::size_t k, double alpha, double gamma,
                               std::uint64_t seed) {
  const std::size_t n = oracle.size();
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  PipelineResult out;
  out.superclusters = linkage_conditioned(oracle, alpha, gamma);
  const auto& sc = out.superclusters;
  const std::size_t l = sc.size();
  if (l < k) throw std::domain_error("fewer superclusters (" + std::to_string(l) + ") than k");

  const DistanceOracle reps = oracle.subset(sc.representatives);
  const Hst tree = embed_hst(reps, seed);
  out.rep_groups = hst_k_clustering(tree, k).assignment();
  out.rep_stretch = max_stretch(reps, tree);

  std::vector<std::size_t> labels(n);
  for (std::size_t x = 0; x < n; ++x) labels[x] = out.rep_groups[sc.label[x]];
  out.clustering = Clustering(std::move(labels), k);
  out.max_violation = audit(oracle, out.clustering).max_violation;

  for (std::size_t x = 0; x < n; ++x) {
    double own_far = 0.0, other_near = kInfNorm;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      if (out.clustering[y] == out.clustering[x])
        own_far = std::max(own_far, oracle(x, y));
      else
        other_near = std::min(other_near, oracle(x, y));
    }
    if (k > 1) out.certificate = std::max(out.certificate, detail::ratio(own_far, other_near));
  }
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = i + 1; j < l; ++j) {
      double mn = kInfNorm, mx = 0.0;
      for (std::size_t x : sc.clusters[i])
        for (std::size_t y : sc.clusters[j]) {
          mn = std::min(mn, oracle(x, y));
          mx = std::max(mx, oracle(x, y));
        }
      out.uniformity = std::max(out.uniformity, detail::ratio(mx, mn));
    }
  return out;
}

}  // namespace ipstable
