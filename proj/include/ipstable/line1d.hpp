#pragma once

// Exact IP-stable k-clustering of points on the real line in O(kn).
//
// Start with the leftmost cluster holding n-k+1 points and k-1 singletons on
// the right, then only ever move separators to the left: whenever the
// rightmost point of a cluster prefers the neighbouring cluster on its right,
// it joins that cluster. Each cluster keeps its size and the summed distances
// from its leftmost and rightmost points, so a boundary check and a move are
// both O(1).

#include <algorithm>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "ipstable/core.hpp"

namespace ipstable {

/// Points sorted ascending together with the map back to input order.
struct LineInstance {
  std::vector<double> values;
  std::vector<std::size_t> original_index;

  static LineInstance from_unsorted(std::span<const double> raw) {
    LineInstance inst;
    inst.original_index.resize(raw.size());
    std::iota(inst.original_index.begin(), inst.original_index.end(), std::size_t{0});
    for (double v : raw)
      if (!std::isfinite(v)) throw std::invalid_argument("line values must be finite");
    // Stable sort keeps ties in input order.
    std::stable_sort(inst.original_index.begin(), inst.original_index.end(),
                     [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
    inst.values.reserve(raw.size());
    for (std::size_t i : inst.original_index) inst.values.push_back(raw[i]);
    return inst;
  }

  std::size_t size() const { return values.size(); }

  /// Distance oracle over the sorted positions.
  DistanceOracle sorted_oracle() const {
    return DistanceOracle::from_features(FeatureMatrix::from_column(values), MetricKind::euclidean);
  }

  /// Maps a labelling of sorted positions back to input order.
  Clustering to_original(const Clustering& sorted) const {
    std::vector<std::size_t> a(size());
    for (std::size_t i = 0; i < size(); ++i) a[original_index[i]] = sorted[i];
    return Clustering(std::move(a), sorted.k());
  }

  /// Contiguous clustering of sorted positions from cluster start indices
  /// (starts[0] == 0, strictly increasing).
  Clustering contiguous(std::span<const std::size_t> starts) const {
    std::vector<std::size_t> a(size());
    for (std::size_t c = 0; c < starts.size(); ++c) {
      const std::size_t end = c + 1 < starts.size() ? starts[c + 1] : size();
      for (std::size_t i = starts[c]; i < end; ++i) a[i] = c;
    }
    return Clustering(std::move(a), starts.size());
  }
};

enum class BoundarySide {
  left_of_separator,   ///< rightmost point of the cluster left of the separator
  right_of_separator,  ///< leftmost point of the cluster right of the separator
};

/// One contiguous cluster [begin, end) of the sorted sequence.
struct IntervalBook {
  std::size_t begin = 0;
  std::size_t end = 0;
  double left_sum = 0.0;   ///< sum over members of (x - x_begin)
  double right_sum = 0.0;  ///< sum over members of (x_{end-1} - x)

  std::size_t size() const { return end - begin; }
};

/// Separator positions plus the O(1) bookkeeping for each cluster.
/// Separator s sits between cluster s and cluster s+1.
class SeparatorState {
 public:
  SeparatorState(const LineInstance& instance, std::span<const std::size_t> starts)
      : values_(&instance.values) {
    if (starts.empty() || starts.front() != 0) throw std::domain_error("first cluster must start at 0");
    for (std::size_t c = 0; c < starts.size(); ++c) {
      IntervalBook b;
      b.begin = starts[c];
      b.end = c + 1 < starts.size() ? starts[c + 1] : instance.size();
      if (b.end <= b.begin) throw std::domain_error("clusters must be nonempty");
      books_.push_back(b);
      recompute(books_.back());
    }
  }

  /// Leftmost cluster of n-k+1 points followed by k-1 singletons.
  static SeparatorState initial(const LineInstance& instance, std::size_t k) {
    const std::size_t n = instance.size();
    if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
    std::vector<std::size_t> starts{0};
    for (std::size_t c = 1; c < k; ++c) starts.push_back(n - k + c);
    return SeparatorState(instance, starts);
  }

  std::size_t num_clusters() const { return books_.size(); }
  const IntervalBook& cluster(std::size_t c) const { return books_[c]; }

  std::vector<std::size_t> separators() const {
    std::vector<std::size_t> s;
    for (std::size_t c = 1; c < books_.size(); ++c) s.push_back(books_[c].begin);
    return s;
  }

  std::vector<std::size_t> starts() const {
    std::vector<std::size_t> s;
    for (const auto& b : books_) s.push_back(b.begin);
    return s;
  }

  double x(std::size_t i) const { return (*values_)[i]; }

  /// Average distance of the boundary point on `side` of separator `sep` to
  /// its own cluster (self excluded) and to the adjacent cluster.
  std::pair<double, double> boundary_averages(BoundarySide side, std::size_t sep) const {
    const IntervalBook& l = books_.at(sep);
    const IntervalBook& r = books_.at(sep + 1);
    const double gap = x(r.begin) - x(l.end - 1);
    if (side == BoundarySide::left_of_separator) {
      const double own = l.size() > 1 ? l.right_sum / static_cast<double>(l.size() - 1) : 0.0;
      const double other = gap + r.left_sum / static_cast<double>(r.size());
      return {own, other};
    }
    const double own = r.size() > 1 ? r.left_sum / static_cast<double>(r.size() - 1) : 0.0;
    const double other = gap + l.right_sum / static_cast<double>(l.size());
    return {own, other};
  }

  bool boundary_stable(BoundarySide side, std::size_t sep, double tol = kStabilityTol) const {
    const auto [own, other] = boundary_averages(side, sep);
    return own <= other * (1.0 + tol);
  }

  /// Moves separator `sep` one position left: the rightmost point of
  /// cluster sep joins cluster sep+1.
  void move_left(std::size_t sep) {
    IntervalBook& ci = books_.at(sep);
    IntervalBook& cj = books_.at(sep + 1);
    if (ci.size() < 2) throw std::domain_error("separator move would empty a cluster");
    const double s = x(ci.begin);
    const double u = x(ci.end - 1);
    const double t = x(ci.end - 2);
    const double v = x(cj.begin);
    const double w = x(cj.end - 1);
    const double old_right_size = static_cast<double>(cj.size());
    // d(s, C~i) = d(s, Ci) - d(s, u)
    ci.left_sum -= u - s;
    // d(t, C~i) = d(u, Ci) - |C~i| d(t, u)
    ci.right_sum = ci.right_sum - static_cast<double>(ci.size() - 1) * (u - t);
    // d(u, C~j) = d(v, Cj) + |Cj| d(u, v)
    cj.left_sum = cj.left_sum + old_right_size * (v - u);
    // d(w, C~j) = d(w, Cj) + d(u, w)
    cj.right_sum += w - u;
    --ci.end;
    --cj.begin;
  }

  /// Largest absolute gap between maintained and recomputed sums.
  double bookkeeping_error() const {
    double worst = 0.0;
    for (const auto& b : books_) {
      IntervalBook fresh = b;
      recompute(fresh);
      worst = std::max({worst, std::abs(fresh.left_sum - b.left_sum),
                        std::abs(fresh.right_sum - b.right_sum)});
    }
    return worst;
  }

 private:
  void recompute(IntervalBook& b) const {
    b.left_sum = 0.0;
    b.right_sum = 0.0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      b.left_sum += x(i) - x(b.begin);
      b.right_sum += x(b.end - 1) - x(i);
    }
  }

  const std::vector<double>* values_;
  std::vector<IntervalBook> books_;
};

inline bool boundary_stable(const SeparatorState& state, BoundarySide side, std::size_t sep,
                            double tol = kStabilityTol) {
  return state.boundary_stable(side, sep, tol);
}

inline SeparatorState update_bookkeeping(SeparatorState state, std::size_t sep) {
  state.move_left(sep);
  return state;
}

struct SeparatorMove {
  std::size_t separator;
  std::size_t new_position;
};

struct Line1dSolution {
  Clustering clustering;         ///< labels in input order
  Clustering sorted_clustering;  ///< labels over sorted positions
  std::vector<std::size_t> starts;
  std::size_t moves = 0;
  std::vector<SeparatorMove> trace;
};

/// Contiguous IP-stable k-clustering of the instance.
inline Line1dSolution solve_1d(const LineInstance& instance, std::size_t k,
                               double tol = kStabilityTol) {
  const std::size_t n = instance.size();
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  SeparatorState state = SeparatorState::initial(instance, k);
  Line1dSolution sol;

  const std::size_t seps = k - 1;
  std::deque<std::size_t> work;
  std::vector<bool> queued(seps, true);
  for (std::size_t s = 0; s < seps; ++s) work.push_back(s);

  while (!work.empty()) {
    const std::size_t s = work.front();
    work.pop_front();
    queued[s] = false;
    bool moved = false;
    while (state.cluster(s).size() > 1 &&
           !state.boundary_stable(BoundarySide::left_of_separator, s, tol)) {
      state.move_left(s);
      ++sol.moves;
      sol.trace.push_back({s, state.cluster(s + 1).begin});
      moved = true;
    }
    if (!moved) continue;
    for (std::size_t nb : {s - 1, s + 1}) {
      if (nb < seps && !queued[nb]) {
        queued[nb] = true;
        work.push_back(nb);
      }
    }
  }

  for (std::size_t s = 0; s < seps; ++s) {
    if (!state.boundary_stable(BoundarySide::left_of_separator, s, tol) ||
        !state.boundary_stable(BoundarySide::right_of_separator, s, tol))
      throw std::logic_error("1-d sweep ended with an unstable boundary point");
  }

  sol.starts = state.starts();
  sol.sorted_clustering = instance.contiguous(sol.starts);
  sol.clustering = instance.to_original(sol.sorted_clustering);
  return sol;
}

inline Line1dSolution solve_1d(std::span<const double> values, std::size_t k) {
  return solve_1d(LineInstance::from_unsorted(values), k);
}

}  // namespace ipstable
