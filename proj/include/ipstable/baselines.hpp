#pragma once

// Standard clustering baselines audited for IP-stability: k-means++ with
// Lloyd iterations, greedy k-center, agglomerative linkage with dendrogram
// cuts, greedy dendrogram pruning, and uniformly random assignment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ipstable/core.hpp"

namespace ipstable {

// ---------------------------------------------------------------------------
// k-means++

struct KMeansResult {
  Clustering clustering;
  FeatureMatrix centers;  ///< k x dim
  std::size_t iterations = 0;
  std::vector<double> objective;  ///< sum of squared distances after each step
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) acc += (a[c] - b[c]) * (a[c] - b[c]);
  return acc;
}

inline double kmeans_objective(const FeatureMatrix& f, const FeatureMatrix& centers,
                               const std::vector<std::size_t>& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) total += sq_dist(f.row(i), centers.row(a[i]));
  return total;
}

/// Nearest center by squared distance; ties go to the smaller index.
inline std::size_t nearest_center(const FeatureMatrix& centers, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = kInfNorm;
  for (std::size_t c = 0; c < centers.n; ++c) {
    const double d = sq_dist(x, centers.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd iterations from the given centers until the assignment stops
/// changing or max_iters updates have run. An emptied cluster is reseeded
/// with the point farthest from its current center.
inline KMeansResult lloyd(const FeatureMatrix& features, FeatureMatrix centers, std::size_t max_iters = 300) {
  const std::size_t n = features.n, k = centers.n, dim = features.dim;
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  if (centers.dim != dim) throw std::domain_error("center dimension mismatch");

  KMeansResult r;
  std::vector<std::size_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = detail::nearest_center(centers, features.row(i));

  auto repair = [&]() {
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t c : a) ++sizes[c];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[a[i]] < 2) continue;
        const double d = detail::sq_dist(features.row(i), centers.row(a[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[a[far]];
      a[far] = c;
      sizes[c] = 1;
      std::copy(features.row(far).begin(), features.row(far).end(), centers.row(c).begin());
    }
  };
  repair();
  r.objective.push_back(detail::kmeans_objective(features, centers, a));

  for (std::size_t it = 0; it < max_iters; ++it) {
    // Update step.
    FeatureMatrix next(k, dim);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[a[i]];
      auto row = next.row(a[i]);
      const auto x = features.row(i);
      for (std::size_t c = 0; c < dim; ++c) row[c] += x[c];
    }
    for (std::size_t c = 0; c < k; ++c)
      for (double& v : next.row(c)) v /= static_cast<double>(sizes[c]);
    centers = std::move(next);
    r.objective.push_back(detail::kmeans_objective(features, centers, a));

    // Assignment step; keep the current center on ties so the objective cannot rise.
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = detail::nearest_center(centers, features.row(i));
      if (c != a[i] && detail::sq_dist(features.row(i), centers.row(c)) <
                           detail::sq_dist(features.row(i), centers.row(a[i]))) {
        a[i] = c;
        changed = true;
      }
    }
    repair();
    r.objective.push_back(detail::kmeans_objective(features, centers, a));
    r.iterations = it + 1;
    if (!changed) break;
  }
  r.clustering = Clustering(std::move(a), k);
  r.centers = std::move(centers);
  return r;
}

/// D^2 seeding: the first center uniformly, each next one with probability
/// proportional to the squared distance to the nearest chosen center.
inline std::vector<std::size_t> kmeanspp_seeds(const FeatureMatrix& features, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = features.n;
  std::vector<std::size_t> seeds;
  std::vector<double> d2(n, kInfNorm);
  std::vector<bool> is_seed(n, false);
  seeds.push_back(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  is_seed[seeds.back()] = true;
  while (seeds.size() < k) {
    const auto last = features.row(seeds.back());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sq_dist(features.row(i), last));
      total += d2[i];
    }
    std::size_t pick;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      // Every point coincides with a center: take a uniformly random unused point.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!is_seed[i]) rest.push_back(i);
      pick = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
    }
    is_seed[pick] = true;
    seeds.push_back(pick);
  }
  return seeds;
}

inline KMeansResult kmeans_pp(const FeatureMatrix& features, std::size_t k, std::uint64_t seed,
                              std::size_t max_iters = 300) {
  if (k == 0 || k > features.n) throw std::domain_error("k must satisfy 1 <= k <= n");
  std::mt19937_64 rng(seed);
  const auto seeds = kmeanspp_seeds(features, k, rng);
  FeatureMatrix centers(k, features.dim);
  for (std::size_t c = 0; c < k; ++c)
    std::copy(features.row(seeds[c]).begin(), features.row(seeds[c]).end(), centers.row(c).begin());
  return lloyd(features, std::move(centers), max_iters);
}

// ---------------------------------------------------------------------------
// Greedy k-center

struct KCenterResult {
  Clustering clustering;
  std::vector<std::size_t> centers;  ///< in selection order; cluster c belongs to centers[c]
};

/// Farthest-first traversal from `first`; every point joins its nearest
/// center, ties to the earlier center, and each center keeps itself.
inline KCenterResult kcenter_greedy(const DistanceOracle& oracle, std::size_t k, std::size_t first) {
  const std::size_t n = oracle.size();
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  if (first >= n) throw std::domain_error("first center out of range");
  KCenterResult r;
  r.centers.push_back(first);
  std::vector<double> near(n);
  std::vector<std::size_t> label(n, 0);
  for (std::size_t i = 0; i < n; ++i) near[i] = oracle(i, first);
  std::vector<bool> is_center(n, false);
  is_center[first] = true;
  while (r.centers.size() < k) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_center[i]) continue;
      if (pick == n || near[i] > near[pick]) pick = i;
    }
    const std::size_t c = r.centers.size();
    r.centers.push_back(pick);
    is_center[pick] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = oracle(i, pick);
      if (d < near[i]) {
        near[i] = d;
        label[i] = c;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) label[r.centers[c]] = c;
  r.clustering = Clustering(std::move(label), k);
  return r;
}

// ---------------------------------------------------------------------------
// Agglomerative linkage

enum class LinkageKind { single, average, complete };

inline LinkageKind parse_linkage(const std::string& name) {
  if (name == "single") return LinkageKind::single;
  if (name == "average") return LinkageKind::average;
  if (name == "complete") return LinkageKind::complete;
  throw std::invalid_argument("unknown linkage '" + name + "'");
}

struct DendrogramNode {
  std::size_t id = 0;
  std::size_t leaf = kNoPoint;   ///< point index for leaves
  std::size_t left = kNoPoint;   ///< child node ids for internal nodes
  std::size_t right = kNoPoint;
  double height = 0.0;
  std::size_t size = 1;

  static constexpr std::size_t kNoPoint = std::numeric_limits<std::size_t>::max();
  bool is_leaf() const { return left == kNoPoint; }
};

/// Leaves are nodes 0..n-1 (node i holds point i); merge m creates node n+m.
struct Dendrogram {
  std::vector<DendrogramNode> nodes;
  std::size_t num_points = 0;

  std::size_t root() const { return nodes.size() - 1; }
  const DendrogramNode& operator[](std::size_t id) const { return nodes.at(id); }

  std::vector<std::size_t> leaves(std::size_t id) const {
    std::vector<std::size_t> out, stack{id};
    while (!stack.empty()) {
      const auto& v = nodes[stack.back()];
      stack.pop_back();
      if (v.is_leaf()) {
        out.push_back(v.leaf);
      } else {
        stack.push_back(v.right);
        stack.push_back(v.left);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Agglomerative clustering with Lance-Williams updates. At each step the
/// pair of active clusters with the smallest (distance, slot, slot) is merged;
/// the merged cluster keeps the smaller slot and becomes the left child.
inline Dendrogram linkage(const DistanceOracle& oracle, LinkageKind kind) {
  const std::size_t n = oracle.size();
  if (n == 0) throw std::domain_error("empty instance");
  Dendrogram dg;
  dg.num_points = n;
  for (std::size_t i = 0; i < n; ++i) dg.nodes.push_back(DendrogramNode{i, i});

  std::vector<double> D(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) D[i * n + j] = oracle(i, j);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> node_of(n), size(n, 1);
  std::iota(node_of.begin(), node_of.end(), std::size_t{0});

  // nn[a] = closest active b > a (ties smallest b).
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> nn(n, none);
  std::vector<double> nnd(n, kInfNorm);
  auto refresh = [&](std::size_t a) {
    nn[a] = none;
    nnd[a] = kInfNorm;
    for (std::size_t b = a + 1; b < n; ++b)
      if (active[b] && D[a * n + b] < nnd[a]) {
        nnd[a] = D[a * n + b];
        nn[a] = b;
      }
  };
  for (std::size_t a = 0; a < n; ++a) refresh(a);

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t a = none;
    for (std::size_t s = 0; s < n; ++s) {
      if (!active[s] || nn[s] == none) continue;
      if (a == none || nnd[s] < nnd[a]) a = s;  // scanning s upward keeps the smallest slot on ties
    }
    const std::size_t b = nn[a];
    const double h = nnd[a];
    const std::size_t sa = size[a], sb = size[b];
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double da = D[a * n + c], db = D[b * n + c];
      double v = 0.0;
      switch (kind) {
        case LinkageKind::single: v = std::min(da, db); break;
        case LinkageKind::complete: v = std::max(da, db); break;
        case LinkageKind::average:
          v = (static_cast<double>(sa) * da + static_cast<double>(sb) * db) / static_cast<double>(sa + sb);
          break;
      }
      D[a * n + c] = D[c * n + a] = v;
    }
    active[b] = false;
    size[a] = sa + sb;

    DendrogramNode node;
    node.id = dg.nodes.size();
    node.left = node_of[a];
    node.right = node_of[b];
    node.height = h;
    node.size = sa + sb;
    dg.nodes.push_back(node);
    node_of[a] = node.id;

    refresh(a);
    for (std::size_t c = 0; c < b; ++c) {
      if (!active[c] || c == a) continue;
      if (nn[c] == a || nn[c] == b) {
        refresh(c);
      } else if (c < a && (D[c * n + a] < nnd[c] || (D[c * n + a] == nnd[c] && a < nn[c]))) {
        nnd[c] = D[c * n + a];
        nn[c] = a;
      }
    }
  }
  return dg;
}

namespace detail {

inline Clustering clustering_from_frontier(const Dendrogram& dg, const std::vector<std::size_t>& frontier) {
  std::vector<std::size_t> labels(dg.num_points);
  for (std::size_t c = 0; c < frontier.size(); ++c)
    for (std::size_t x : dg.leaves(frontier[c])) labels[x] = c;
  return Clustering(std::move(labels), frontier.size()).canonical();
}

}  // namespace detail

/// The k clusters left after undoing the k-1 highest merges (by height,
/// then node id).
inline Clustering cut_dendrogram(const Dendrogram& dg, std::size_t k) {
  if (k == 0 || k > dg.num_points) throw std::domain_error("k must satisfy 1 <= k <= n");
  std::vector<std::size_t> frontier{dg.root()};
  while (frontier.size() < k) {
    std::size_t best = frontier.size();
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const auto& v = dg[frontier[f]];
      if (v.is_leaf()) continue;
      if (best == frontier.size() ||
          std::tie(v.height, v.id) > std::tie(dg[frontier[best]].height, dg[frontier[best]].id))
        best = f;
    }
    const auto& v = dg[frontier[best]];
    frontier[best] = v.left;
    frontier.push_back(v.right);
  }
  return detail::clustering_from_frontier(dg, frontier);
}

enum class PruneMeasure { num_unstable, max_violation };

inline PruneMeasure parse_measure(const std::string& name) {
  if (name == "num-unstable" || name == "num_unstable" || name == "uns") return PruneMeasure::num_unstable;
  if (name == "max-violation" || name == "max_violation" || name == "maxvi") return PruneMeasure::max_violation;
  throw std::invalid_argument("unknown measure '" + name + "'");
}

struct PruneResult {
  Clustering clustering;
  std::vector<std::size_t> frontier;  ///< dendrogram node per cluster before relabelling
  std::vector<double> round_scores;   ///< measure value chosen at each round
};

/// Greedy pruning: start from the root's two children and, k-2 times, split
/// the frontier node whose split gives the smallest measure (ties: smallest
/// node id).
inline PruneResult greedy_prune(const Dendrogram& dg, const DistanceOracle& oracle, std::size_t k,
                                PruneMeasure measure, double tol = kStabilityTol) {
  const std::size_t n = dg.num_points;
  if (oracle.size() != n) throw std::domain_error("oracle size mismatch");
  if (k < 2 || k > n) throw std::domain_error("greedy pruning needs 2 <= k <= n");

  const auto& root = dg[dg.root()];
  std::vector<std::size_t> frontier{root.left, root.right};
  std::vector<std::vector<std::size_t>> members{dg.leaves(root.left), dg.leaves(root.right)};
  std::vector<std::size_t> label(n);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t x : members[c]) label[x] = c;

  // sums[x][c] = total distance from x to frontier cluster c
  std::vector<std::vector<double>> sums(n, std::vector<double>(2, 0.0));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) sums[x][label[y]] += oracle(x, y);

  PruneResult out;
  for (std::size_t round = 2; round < k; ++round) {
    const std::size_t m = frontier.size();
    // Own average and the two smallest foreign averages per point.
    std::vector<double> own(n), best1(n, kInfNorm), best2(n, kInfNorm);
    std::vector<std::size_t> arg1(n, m);
    for (std::size_t x = 0; x < n; ++x) {
      const std::size_t c = label[x];
      const std::size_t sz = members[c].size();
      own[x] = sz > 1 ? sums[x][c] / static_cast<double>(sz - 1) : 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == c) continue;
        const double avg = sums[x][j] / static_cast<double>(members[j].size());
        if (avg < best1[x]) {
          best2[x] = best1[x];
          best1[x] = avg;
          arg1[x] = j;
        } else if (avg < best2[x]) {
          best2[x] = avg;
        }
      }
    }

    std::size_t chosen = m;
    double chosen_score = kInfNorm;
    std::vector<double> to_left(n), to_right(n);
    for (std::size_t f = 0; f < m; ++f) {
      const auto& v = dg[frontier[f]];
      if (v.is_leaf()) continue;
      const auto left = dg.leaves(v.left);
      const auto right = dg.leaves(v.right);
      const double nl = static_cast<double>(left.size()), nr = static_cast<double>(right.size());
      std::vector<bool> in_left(n, false);
      for (std::size_t x : left) in_left[x] = true;
      for (std::size_t x = 0; x < n; ++x) {
        double sl = 0.0, sr = 0.0;
        for (std::size_t y : left)
          if (y != x) sl += oracle(x, y);
        for (std::size_t y : right)
          if (y != x) sr += oracle(x, y);
        to_left[x] = sl;
        to_right[x] = sr;
      }
      double score = 0.0;
      for (std::size_t x = 0; x < n; ++x) {
        double vi;
        if (label[x] == f) {
          const bool l = in_left[x];
          const double own_n = (l ? nl : nr) - 1.0;
          const double own_avg = own_n > 0.0 ? (l ? to_left[x] : to_right[x]) / own_n : 0.0;
          const double sibling = l ? to_right[x] / nr : to_left[x] / nl;
          vi = detail::ratio(own_avg, std::min(best1[x], sibling));
        } else {
          const double other = arg1[x] == f ? best2[x] : best1[x];
          vi = detail::ratio(own[x], std::min({other, to_left[x] / nl, to_right[x] / nr}));
        }
        if (measure == PruneMeasure::num_unstable)
          score += detail::is_unstable_ratio(vi, tol) ? 1.0 : 0.0;
        else
          score = std::max(score, vi);
      }
      if (chosen == m || score < chosen_score ||
          (score == chosen_score && frontier[f] < frontier[chosen])) {
        chosen = f;
        chosen_score = score;
      }
    }
    if (chosen == m) throw std::logic_error("no splittable frontier node left");
    out.round_scores.push_back(chosen_score);

    const auto& v = dg[frontier[chosen]];
    const auto right = dg.leaves(v.right);
    const std::size_t fresh = m;
    frontier[chosen] = v.left;
    frontier.push_back(v.right);
    members[chosen] = dg.leaves(v.left);
    members.push_back(right);
    for (std::size_t x : right) label[x] = fresh;
    for (std::size_t x = 0; x < n; ++x) {
      double moved = 0.0;
      for (std::size_t y : right)
        if (y != x) moved += oracle(x, y);
      sums[x][chosen] -= moved;
      sums[x].push_back(moved);
    }
  }
  out.frontier = frontier;
  std::vector<std::size_t> labels(n);
  for (std::size_t c = 0; c < frontier.size(); ++c)
    for (std::size_t x : members[c]) labels[x] = c;
  out.clustering = Clustering(std::move(labels), frontier.size());
  return out;
}

// ---------------------------------------------------------------------------
// Random assignment

/// Independent uniform labels, redrawn until every cluster is nonempty. After
/// 1000 failed draws the first k points of a random permutation receive
/// distinct labels instead.
inline Clustering random_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> a(n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<bool> seen(k, false);
    std::size_t distinct = 0;
    for (auto& v : a) {
      v = pick(rng);
      if (!seen[v]) {
        seen[v] = true;
        ++distinct;
      }
    }
    if (distinct == k) return Clustering(std::move(a), k);
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < n; ++i) a[perm[i]] = i < k ? i : pick(rng);
  return Clustering(std::move(a), k);
}

}  // namespace ipstable
