#pragma once

// Distance access, clustering representation and IP-stability auditing.
//
// A point x is IP-stable in a clustering when its average distance to its own
// cluster (itself excluded) is at most its average distance to every other
// cluster. The audit reports the per-point violation ratio Vi(x) together with
// the aggregate metrics #Uns, MaxVi, MeanVi, Co and (optionally) Obj.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ipstable {

/// Relative slack used by every stability comparison: own <= other * (1 + tol).
inline constexpr double kStabilityTol = 1e-9;

/// Vi value for a point whose own average is positive while some foreign
/// average is zero. No finite t makes such a point t-stable.
inline constexpr double kInfiniteViolation = std::numeric_limits<double>::infinity();

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Raised when an exhaustive routine refuses an instance that is too large.
class Refused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a solver's promise or feasibility assumption does not hold.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MetricKind { euclidean, manhattan, chebyshev, matrix, tree };

inline const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::manhattan: return "manhattan";
    case MetricKind::chebyshev: return "chebyshev";
    case MetricKind::matrix: return "matrix";
    case MetricKind::tree: return "tree";
  }
  return "unknown";
}

inline MetricKind parse_metric(const std::string& name) {
  if (name == "euclidean" || name == "l2") return MetricKind::euclidean;
  if (name == "manhattan" || name == "l1") return MetricKind::manhattan;
  if (name == "chebyshev" || name == "linf") return MetricKind::chebyshev;
  if (name == "matrix") return MetricKind::matrix;
  if (name == "tree") return MetricKind::tree;
  throw std::invalid_argument("unknown metric '" + name + "'");
}

/// Dense row-major feature matrix (n points x dim coordinates).
struct FeatureMatrix {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols)
      : n(rows), dim(cols), data(rows * cols, 0.0) {}

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix m;
    m.n = rows.size();
    m.dim = rows.empty() ? 0 : rows.front().size();
    m.data.reserve(m.n * m.dim);
    for (const auto& r : rows) {
      if (r.size() != m.dim) throw std::invalid_argument("ragged feature rows");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }

  static FeatureMatrix from_column(std::span<const double> values) {
    FeatureMatrix m(values.size(), 1);
    std::copy(values.begin(), values.end(), m.data.begin());
    return m;
  }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  double& at(std::size_t i, std::size_t j) { return data[i * dim + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
};

/// Uniform access to pairwise dissimilarities d(i, j).
///
/// Feature-backed oracles compute distances on demand; matrix-backed ones
/// (explicit matrices and tree metrics) look them up. Explicit matrices are
/// validated for symmetry, nonnegativity and a zero diagonal.
class DistanceOracle {
 public:
  DistanceOracle() = default;

  static DistanceOracle from_features(FeatureMatrix features, MetricKind kind) {
    if (kind == MetricKind::matrix || kind == MetricKind::tree)
      throw std::invalid_argument("feature oracle needs a vector metric");
    for (double v : features.data)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    DistanceOracle o;
    o.kind_ = kind;
    o.n_ = features.n;
    o.features_ = std::move(features);
    return o;
  }

  static DistanceOracle from_matrix(std::vector<double> flat, std::size_t n,
                                    MetricKind kind = MetricKind::matrix,
                                    double tol = 1e-12) {
    if (flat.size() != n * n) throw std::invalid_argument("matrix must be n x n");
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(flat[i * n + i]) > tol)
        throw std::domain_error("distance matrix diagonal must be zero");
      flat[i * n + i] = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = flat[i * n + j];
        if (!std::isfinite(v) || v < -tol)
          throw std::domain_error("distance matrix entries must be finite and nonnegative");
        if (std::abs(v - flat[j * n + i]) > tol)
          throw std::domain_error("distance matrix must be symmetric");
      }
    }
    for (double& v : flat) v = std::max(v, 0.0);
    DistanceOracle o;
    o.kind_ = kind;
    o.n_ = n;
    o.matrix_ = std::move(flat);
    return o;
  }

  static DistanceOracle from_matrix(const std::vector<std::vector<double>>& rows,
                                    MetricKind kind = MetricKind::matrix) {
    std::vector<double> flat;
    flat.reserve(rows.size() * rows.size());
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw std::invalid_argument("matrix must be square");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return from_matrix(std::move(flat), rows.size(), kind);
  }

  std::size_t size() const { return n_; }
  MetricKind kind() const { return kind_; }
  bool has_features() const { return matrix_.empty() && n_ > 0; }
  const FeatureMatrix& features() const { return features_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (!matrix_.empty()) return matrix_[i * n_ + j];
    if (n_ == 0) return 0.0;
    const auto a = features_.row(i);
    const auto b = features_.row(j);
    double acc = 0.0;
    switch (kind_) {
      case MetricKind::euclidean:
        for (std::size_t c = 0; c < a.size(); ++c) acc += (a[c] - b[c]) * (a[c] - b[c]);
        return std::sqrt(acc);
      case MetricKind::manhattan:
        for (std::size_t c = 0; c < a.size(); ++c) acc += std::abs(a[c] - b[c]);
        return acc;
      case MetricKind::chebyshev:
        for (std::size_t c = 0; c < a.size(); ++c) acc = std::max(acc, std::abs(a[c] - b[c]));
        return acc;
      default:
        return 0.0;
    }
  }

  /// Explicit n x n copy of this oracle (same kind label).
  DistanceOracle materialized() const {
    if (!matrix_.empty()) return *this;
    std::vector<double> flat(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j) flat[i * n_ + j] = flat[j * n_ + i] = (*this)(i, j);
    DistanceOracle o;
    o.kind_ = kind_;
    o.n_ = n_;
    o.matrix_ = std::move(flat);
    return o;
  }

  /// Oracle over the listed points, re-indexed 0..m-1 in list order.
  DistanceOracle subset(std::span<const std::size_t> points) const {
    const std::size_t m = points.size();
    std::vector<double> flat(m * m, 0.0);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        flat[a * m + b] = flat[b * m + a] = (*this)(points[a], points[b]);
    DistanceOracle o;
    o.kind_ = kind_ == MetricKind::tree ? MetricKind::tree : MetricKind::matrix;
    o.n_ = m;
    o.matrix_ = std::move(flat);
    return o;
  }

  /// Every distance multiplied by c > 0.
  DistanceOracle scaled(double c) const {
    if (!(c > 0.0)) throw std::domain_error("scale must be positive");
    DistanceOracle o = materialized();
    for (double& v : o.matrix_) v *= c;
    return o;
  }

 private:
  MetricKind kind_ = MetricKind::matrix;
  std::size_t n_ = 0;
  FeatureMatrix features_;
  std::vector<double> matrix_;
};

/// Total assignment of n points to k nonempty clusters labelled 0..k-1.
class Clustering {
 public:
  Clustering() = default;

  Clustering(std::vector<std::size_t> assignment, std::size_t k)
      : assignment_(std::move(assignment)), k_(k) {
    if (k_ == 0 && !assignment_.empty()) throw std::domain_error("k must be positive");
    std::vector<bool> seen(k_, false);
    for (std::size_t c : assignment_) {
      if (c >= k_) throw std::domain_error("cluster index out of range");
      seen[c] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw std::domain_error("every cluster must be nonempty");
  }

  /// Infers k as max label + 1.
  explicit Clustering(std::vector<std::size_t> assignment)
      : Clustering(assignment, assignment.empty()
                                   ? 0
                                   : *std::max_element(assignment.begin(), assignment.end()) + 1) {}

  static Clustering from_clusters(const std::vector<std::vector<std::size_t>>& clusters,
                                  std::size_t n) {
    std::vector<std::size_t> a(n, std::numeric_limits<std::size_t>::max());
    for (std::size_t c = 0; c < clusters.size(); ++c)
      for (std::size_t x : clusters[c]) {
        if (x >= n || a[x] != std::numeric_limits<std::size_t>::max())
          throw std::domain_error("clusters must partition 0..n-1");
        a[x] = c;
      }
    for (std::size_t v : a)
      if (v == std::numeric_limits<std::size_t>::max())
        throw std::domain_error("clusters must cover every point");
    return Clustering(std::move(a), clusters.size());
  }

  std::size_t k() const { return k_; }
  std::size_t size() const { return assignment_.size(); }
  std::size_t operator[](std::size_t i) const { return assignment_[i]; }
  const std::vector<std::size_t>& assignment() const { return assignment_; }

  std::vector<std::vector<std::size_t>> clusters() const {
    std::vector<std::vector<std::size_t>> out(k_);
    for (std::size_t i = 0; i < assignment_.size(); ++i) out[assignment_[i]].push_back(i);
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k_, 0);
    for (std::size_t c : assignment_) ++s[c];
    return s;
  }

  /// Relabelled so clusters are numbered by first appearance.
  Clustering canonical() const {
    std::vector<std::size_t> relabel(k_, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> a(assignment_.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto& r = relabel[assignment_[i]];
      if (r == std::numeric_limits<std::size_t>::max()) r = next++;
      a[i] = r;
    }
    return Clustering(std::move(a), k_);
  }

  friend bool operator==(const Clustering& a, const Clustering& b) {
    return a.k_ == b.k_ && a.assignment_ == b.assignment_;
  }

 private:
  std::vector<std::size_t> assignment_;
  std::size_t k_ = 0;
};

/// Same partition up to relabelling.
inline bool same_partition(const Clustering& a, const Clustering& b) {
  return a.canonical() == b.canonical();
}

struct StabilityReport {
  std::vector<double> vi;
  std::size_t num_unstable = 0;
  double max_violation = 0.0;
  double mean_violation = 0.0;
  double cost = 0.0;
  std::optional<double> obj;
};

namespace detail {

/// own / foreign with 0/0 = 0 and positive/0 = +inf.
inline double ratio(double own_avg, double foreign_avg) {
  if (own_avg <= 0.0) return 0.0;
  if (foreign_avg <= 0.0) return kInfiniteViolation;
  return own_avg / foreign_avg;
}

inline bool is_unstable_ratio(double vi, double tol = kStabilityTol) { return vi > 1.0 + tol; }

/// Vi(x) from x's summed distance to every cluster.
inline double violation_from_sums(std::span<const double> sums, std::span<const std::size_t> sizes,
                                  std::size_t own) {
  const double own_avg = sizes[own] > 1 ? sums[own] / static_cast<double>(sizes[own] - 1) : 0.0;
  double worst = 0.0;
  for (std::size_t c = 0; c < sums.size(); ++c) {
    if (c == own) continue;
    worst = std::max(worst, ratio(own_avg, sums[c] / static_cast<double>(sizes[c])));
  }
  return worst;
}

}  // namespace detail

/// Average distance from x to the points of `cluster`. When `exclude_self`
/// is set, x must belong to the cluster and the divisor is |cluster|-1
/// (0 for a singleton).
inline double avg_dist(const DistanceOracle& oracle, std::size_t x,
                       std::span<const std::size_t> cluster, bool exclude_self) {
  if (cluster.empty()) throw std::domain_error("average over an empty cluster");
  double sum = 0.0;
  bool found = false;
  for (std::size_t y : cluster) {
    if (y == x) {
      found = true;
      continue;
    }
    sum += oracle(x, y);
  }
  if (exclude_self) {
    if (!found) throw std::domain_error("point is not a member of its own cluster");
    const std::size_t m = cluster.size() - 1;
    return m == 0 ? 0.0 : sum / static_cast<double>(m);
  }
  return sum / static_cast<double>(cluster.size());
}

/// Vi(x): the worst own/foreign average ratio over every other cluster.
inline double violation(const DistanceOracle& oracle, const Clustering& clustering, std::size_t x) {
  if (clustering.size() != oracle.size()) throw std::domain_error("clustering size mismatch");
  std::vector<double> sums(clustering.k(), 0.0);
  for (std::size_t y = 0; y < clustering.size(); ++y)
    if (y != x) sums[clustering[y]] += oracle(x, y);
  const auto sizes = clustering.sizes();
  return detail::violation_from_sums(sums, sizes, clustering[x]);
}

/// ||(|C_i| - t_i)_i||_p, with p = infinity giving the max deviation.
inline double size_deviation(std::span<const std::size_t> sizes, std::span<const double> targets,
                             double p) {
  if (sizes.size() != targets.size()) throw std::domain_error("targets length must equal k");
  if (!(p >= 1.0)) throw std::domain_error("norm order must be >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double dev = std::abs(static_cast<double>(sizes[i]) - targets[i]);
    if (std::isinf(p))
      acc = std::max(acc, dev);
    else
      acc += std::pow(dev, p);
  }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

/// Full stability report. O(n^2) distance evaluations.
inline StabilityReport audit(const DistanceOracle& oracle, const Clustering& clustering,
                             std::optional<std::span<const double>> targets = std::nullopt,
                             double p = kInfNorm, double tol = kStabilityTol) {
  const std::size_t n = clustering.size();
  const std::size_t k = clustering.k();
  if (n != oracle.size()) throw std::domain_error("clustering size mismatch");
  if (targets && targets->size() != k) throw std::domain_error("targets length must equal k");

  const auto sizes = clustering.sizes();
  std::vector<double> sums(n * k, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) {
      const double d = oracle(x, y);
      sums[x * k + clustering[y]] += d;
      sums[y * k + clustering[x]] += d;
    }
  }

  StabilityReport r;
  r.vi.resize(n, 0.0);
  std::vector<double> within(k, 0.0);
  double unstable_sum = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const std::span<const double> row(sums.data() + x * k, k);
    r.vi[x] = detail::violation_from_sums(row, sizes, clustering[x]);
    within[clustering[x]] += row[clustering[x]];
    r.max_violation = std::max(r.max_violation, r.vi[x]);
    if (detail::is_unstable_ratio(r.vi[x], tol)) {
      ++r.num_unstable;
      unstable_sum += r.vi[x];
    }
  }
  r.mean_violation = r.num_unstable == 0 ? 0.0 : unstable_sum / static_cast<double>(r.num_unstable);
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] < 2) continue;
    const double m = static_cast<double>(sizes[c]);
    const double pairs = m * (m - 1.0) / 2.0;
    r.cost += (within[c] / 2.0) / pairs;
  }
  if (targets) r.obj = size_deviation(sizes, *targets, p);
  return r;
}

inline bool is_ip_stable(const DistanceOracle& oracle, const Clustering& clustering,
                         double tol = kStabilityTol) {
  return audit(oracle, clustering, std::nullopt, kInfNorm, tol).num_unstable == 0;
}

/// True iff every point's own average is at most t times every foreign average.
inline bool is_t_stable(const DistanceOracle& oracle, const Clustering& clustering, double t,
                        double tol = kStabilityTol) {
  if (!(t >= 1.0)) throw std::domain_error("approximation factor t must be >= 1");
  const auto r = audit(oracle, clustering, std::nullopt, kInfNorm, tol);
  return r.max_violation <= t * (1.0 + tol);
}

// ---------------------------------------------------------------------------
// Exhaustive search over set partitions (small n only).

inline constexpr std::size_t kBruteForceMaxPoints = 14;

/// Calls fn(labels) for every partition of 0..n-1 into exactly k nonempty
/// blocks, as restricted growth strings. fn returns false to stop early.
inline void for_each_partition(std::size_t n, std::size_t k,
                               const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (k == 0 || k > n) return;
  std::vector<std::size_t> a(n, 0);
  // prefix_max[i] = max label among a[0..i]
  std::vector<std::size_t> prefix_max(n, 0);

  std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
    if (i == n) return prefix_max[n - 1] + 1 == k ? fn(a) : true;
    const std::size_t used = prefix_max[i - 1] + 1;
    // Remaining positions must still be able to open the missing blocks.
    const std::size_t remaining = n - i;
    if (used + remaining < k) return true;
    const std::size_t hi = std::min(used, k - 1);
    for (std::size_t c = 0; c <= hi; ++c) {
      a[i] = c;
      prefix_max[i] = std::max(prefix_max[i - 1], c);
      if (!rec(i + 1)) return false;
    }
    return true;
  };
  a[0] = 0;
  prefix_max[0] = 0;
  if (n == 1) {
    if (k == 1) fn(a);
    return;
  }
  rec(1);
}

enum class BruteForceMode { find_stable, min_max_violation };

struct BruteForceResult {
  std::optional<Clustering> clustering;
  double max_violation = kInfiniteViolation;
};

namespace detail {

inline double max_violation_dense(std::span<const double> dist, std::size_t n,
                                  const std::vector<std::size_t>& labels, std::size_t k,
                                  std::vector<double>& sums, std::vector<std::size_t>& sizes) {
  sums.assign(n * k, 0.0);
  sizes.assign(k, 0);
  for (std::size_t x = 0; x < n; ++x) {
    ++sizes[labels[x]];
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) sums[x * k + labels[y]] += dist[x * n + y];
  }
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x)
    worst = std::max(worst, violation_from_sums({sums.data() + x * k, k}, sizes, labels[x]));
  return worst;
}

inline std::vector<double> dense_distances(const DistanceOracle& oracle) {
  const std::size_t n = oracle.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = oracle(i, j);
  return d;
}

}  // namespace detail

/// Enumerates every k-clustering (n <= 14). find_stable returns the first
/// IP-stable one in enumeration order, or none; min_max_violation returns a
/// clustering with the smallest MaxVi and that value.
inline BruteForceResult brute_force(const DistanceOracle& oracle, std::size_t k,
                                    BruteForceMode mode, double tol = kStabilityTol) {
  const std::size_t n = oracle.size();
  if (n > kBruteForceMaxPoints)
    throw Refused("brute force refuses n = " + std::to_string(n) + " (limit " +
                  std::to_string(kBruteForceMaxPoints) + ")");
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  const auto dist = detail::dense_distances(oracle);
  std::vector<double> sums;
  std::vector<std::size_t> sizes;
  BruteForceResult best;
  for_each_partition(n, k, [&](const std::vector<std::size_t>& labels) {
    const double mv = detail::max_violation_dense(dist, n, labels, k, sums, sizes);
    if (mode == BruteForceMode::find_stable) {
      if (mv <= 1.0 + tol) {
        best.clustering = Clustering(labels, k);
        best.max_violation = mv;
        return false;
      }
      return true;
    }
    if (!best.clustering || mv < best.max_violation) {
      best.clustering = Clustering(labels, k);
      best.max_violation = mv;
    }
    return true;
  });
  return best;
}

/// Every IP-stable k-clustering (n <= 14), canonical labels.
inline std::vector<Clustering> all_stable_clusterings(const DistanceOracle& oracle, std::size_t k,
                                                      double tol = kStabilityTol) {
  const std::size_t n = oracle.size();
  if (n > kBruteForceMaxPoints) throw Refused("enumeration refuses n = " + std::to_string(n));
  const auto dist = detail::dense_distances(oracle);
  std::vector<double> sums;
  std::vector<std::size_t> sizes;
  std::vector<Clustering> out;
  for_each_partition(n, k, [&](const std::vector<std::size_t>& labels) {
    if (detail::max_violation_dense(dist, n, labels, k, sums, sizes) <= 1.0 + tol)
      out.emplace_back(labels, k);
    return true;
  });
  return out;
}

}  // namespace ipstable
