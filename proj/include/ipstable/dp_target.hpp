#pragma once

// Target-size dynamic program on the line: among contiguous IP-stable
// k-clusterings, minimise || (|C_1|-t_1, ..., |C_k|-t_k) ||_p.
//
// T(i, j, l) is the best p-th power deviation (max deviation for p = inf)
// over stable contiguous l-clusterings of the i smallest points whose last
// cluster holds exactly j points; infinity when no such clustering exists.
// By the boundary lemma, extending a stable clustering of x_1..x_{i-j} by the
// block x_{i-j+1}..x_i stays stable iff the two points adjacent to the new
// cut are stable, so each transition checks two O(1) inequalities.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "ipstable/core.hpp"
#include "ipstable/line1d.hpp"

namespace ipstable {

inline constexpr double kDpInfinity = std::numeric_limits<double>::infinity();

/// Above this many table cells the CLI warns about memory.
inline constexpr double kDpCellWarnThreshold = 2e8;

/// Finite p at or above this value risks overflow of |j - t|^p.
inline constexpr double kDpLargePWarn = 30.0;

inline double dp_table_cells(std::size_t n, std::size_t k) {
  return static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(k);
}

namespace detail {

/// Prefix sums of the sorted values (shifted by x_1) with 1-indexed helpers
/// for the one-sided distance sums used by the recurrence.
class LineSums {
 public:
  explicit LineSums(const std::vector<double>& sorted) : x_(sorted.size() + 1, 0.0), p_(sorted.size() + 1, 0.0) {
    const double base = sorted.empty() ? 0.0 : sorted.front();
    for (std::size_t q = 1; q <= sorted.size(); ++q) {
      x_[q] = sorted[q - 1] - base;
      p_[q] = p_[q - 1] + x_[q];
    }
    scale_ = sorted.empty() ? 1.0 : 1.0 + std::abs(sorted.back() - base);
  }

  /// sum_{f=1}^{cnt} |x_a - x_{a-f}|
  double left_of(std::size_t a, std::size_t cnt) const {
    return static_cast<double>(cnt) * x_[a] - (p_[a - 1] - p_[a - 1 - cnt]);
  }
  /// sum_{f=1}^{cnt} |x_a - x_{a+f}|
  double right_of(std::size_t a, std::size_t cnt) const {
    return (p_[a + cnt] - p_[a]) - static_cast<double>(cnt) * x_[a];
  }
  /// sum over the cnt points ending at position `last` of |x_b - x_q|, all q < b.
  double block_left_of(std::size_t b, std::size_t last, std::size_t cnt) const {
    return static_cast<double>(cnt) * x_[b] - (p_[last] - p_[last - cnt]);
  }

  /// Absolute slack absorbing prefix-sum cancellation.
  double slack() const {
    return 4.0 * std::numeric_limits<double>::epsilon() * scale_ * static_cast<double>(x_.size());
  }

 private:
  std::vector<double> x_;
  std::vector<double> p_;
  double scale_ = 1.0;
};

/// The two boundary inequalities for the cut after position a = i - j, with
/// left cluster of s points ending at a and right cluster of j points.
inline bool cut_left_stable(const LineSums& sums, std::size_t a, std::size_t s, std::size_t j,
                            double tol) {
  const double own = s > 1 ? sums.left_of(a, s - 1) / static_cast<double>(s - 1) : 0.0;
  const double other = sums.right_of(a, j) / static_cast<double>(j);
  return own <= other * (1.0 + tol) + sums.slack();
}

inline bool cut_right_stable(const LineSums& sums, std::size_t a, std::size_t s, std::size_t j,
                             double tol) {
  const std::size_t b = a + 1;
  const double own = j > 1 ? sums.right_of(b, j - 1) / static_cast<double>(j - 1) : 0.0;
  const double other = sums.block_left_of(b, a, s) / static_cast<double>(s);
  return own <= other * (1.0 + tol) + sums.slack();
}

}  // namespace detail

struct DpTable {
  std::size_t n = 0;
  std::size_t k = 0;
  double p = kInfNorm;
  std::vector<double> targets;
  std::vector<double> cells;
  bool overflow_risk = false;

  bool p_infinite() const { return std::isinf(p); }

  /// T(i, j, l), all indices 1-based.
  double at(std::size_t i, std::size_t j, std::size_t l) const {
    return cells[((l - 1) * n + (i - 1)) * n + (j - 1)];
  }
  double& at(std::size_t i, std::size_t j, std::size_t l) {
    return cells[((l - 1) * n + (i - 1)) * n + (j - 1)];
  }

  /// |j - t_l|^p, or |j - t_l| for p = inf.
  double term(std::size_t j, std::size_t l) const {
    const double dev = std::abs(static_cast<double>(j) - targets[l - 1]);
    return p_infinite() ? dev : std::pow(dev, p);
  }

  double combine(double a, double b) const { return p_infinite() ? std::max(a, b) : a + b; }

  /// min_j T(n, j, k)
  double optimum() const {
    double best = kDpInfinity;
    for (std::size_t j = 1; j <= n; ++j) best = std::min(best, at(n, j, k));
    return best;
  }
};

inline void validate_targets(std::span<const double> targets, std::size_t n, std::size_t k) {
  if (targets.size() != k) throw std::domain_error("need exactly k targets");
  double total = 0.0;
  for (double t : targets) {
    if (!std::isfinite(t) || t < 1.0 || std::abs(t - std::round(t)) > 1e-9)
      throw std::domain_error("targets must be positive integers");
    total += t;
  }
  if (std::abs(total - static_cast<double>(n)) > 1e-9)
    throw std::domain_error("targets must sum to n");
}

/// Fills the table in O(n^3 k).
inline DpTable build_table(const LineInstance& instance, std::span<const double> targets, double p,
                           double tol = kStabilityTol) {
  const std::size_t n = instance.size();
  const std::size_t k = targets.size();
  if (n == 0) throw std::domain_error("empty instance");
  if (k == 0 || k > n) throw std::domain_error("k must satisfy 1 <= k <= n");
  if (!(p >= 1.0)) throw std::domain_error("norm order must be >= 1");
  validate_targets(targets, n, k);

  DpTable t;
  t.n = n;
  t.k = k;
  t.p = p;
  t.targets.assign(targets.begin(), targets.end());
  t.overflow_risk = !std::isinf(p) && p >= kDpLargePWarn;
  t.cells.assign(n * n * k, kDpInfinity);

  for (std::size_t i = 1; i <= n; ++i) t.at(i, i, 1) = t.term(i, 1);

  const detail::LineSums sums(instance.values);
  for (std::size_t l = 2; l <= k; ++l) {
    // All-singleton base case.
    double singletons = 0.0;
    for (std::size_t s = 1; s <= l; ++s) singletons = t.combine(singletons, t.term(1, s));
    t.at(l, 1, l) = singletons;

    for (std::size_t i = l + 1; i <= n; ++i) {
      for (std::size_t j = 1; j + l - 1 <= i; ++j) {
        const std::size_t a = i - j;
        const std::size_t s_max = a - (l - 2);
        double best = kDpInfinity;
        for (std::size_t s = 1; s <= s_max; ++s) {
          // The left average of x_a grows with s, so once it fails it fails for good.
          if (!detail::cut_left_stable(sums, a, s, j, tol)) break;
          const double prev = t.at(a, s, l - 1);
          if (prev >= best) continue;
          if (!detail::cut_right_stable(sums, a, s, j, tol)) continue;
          best = prev;
        }
        if (best < kDpInfinity) t.at(i, j, l) = t.combine(t.term(j, l), best);
      }
    }
  }
  return t;
}

struct DpSolution {
  Clustering clustering;         ///< input order
  Clustering sorted_clustering;  ///< sorted positions
  std::vector<std::size_t> sizes;
  double table_optimum = kDpInfinity;  ///< min_j T(n, j, k)
  double obj = kDpInfinity;            ///< the l_p norm itself
};

/// Walks back from the optimum choosing, for l = k-1..2, the smallest block
/// size consistent with the optimal value and both boundary inequalities.
inline DpSolution reconstruct(const DpTable& table, const LineInstance& instance,
                              double tol = kStabilityTol) {
  const std::size_t n = table.n;
  const std::size_t k = table.k;
  if (instance.size() != n) throw std::domain_error("instance does not match table");
  const double v_star = table.optimum();
  if (!(v_star < kDpInfinity)) throw Infeasible("no stable contiguous clustering found");

  std::vector<std::size_t> sizes(k + 1, 0);  // 1-based
  std::size_t j0 = 1;
  while (table.at(n, j0, k) != v_star) ++j0;
  sizes[k] = j0;
  double acc = table.term(j0, k);
  std::size_t used = j0;

  const detail::LineSums sums(instance.values);
  const double value_tol = 1e-9 * std::max(1.0, std::abs(v_star));
  for (std::size_t l = k - 1; l >= 2; --l) {
    const std::size_t m = n - used;
    const std::size_t right = sizes[l + 1];
    std::size_t chosen = 0;
    for (std::size_t h = 1; h + (l - 1) <= m; ++h) {
      const double cell = table.at(m, h, l);
      if (!(cell < kDpInfinity)) continue;
      const bool value_ok = table.p_infinite() ? cell <= v_star
                                               : std::abs(cell + acc - v_star) <= value_tol;
      if (!value_ok) continue;
      if (!detail::cut_left_stable(sums, m, h, right, tol)) continue;
      if (!detail::cut_right_stable(sums, m, h, right, tol)) continue;
      chosen = h;
      break;
    }
    if (chosen == 0) throw std::logic_error("dp reconstruction found no consistent block size");
    sizes[l] = chosen;
    acc = table.combine(acc, table.term(chosen, l));
    used += chosen;
  }
  if (k >= 2) sizes[1] = n - used;
  else sizes[1] = n;

  DpSolution sol;
  sol.sizes.assign(sizes.begin() + 1, sizes.end());
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    starts.push_back(pos);
    pos += sol.sizes[c];
  }
  sol.sorted_clustering = instance.contiguous(starts);
  sol.clustering = instance.to_original(sol.sorted_clustering);
  sol.table_optimum = v_star;
  sol.obj = table.p_infinite() ? v_star : std::pow(v_star, 1.0 / table.p);
  return sol;
}

inline DpSolution solve_dp(const LineInstance& instance, std::span<const double> targets, double p) {
  return reconstruct(build_table(instance, targets, p), instance);
}

/// t_i = n/k for every cluster (n must be divisible by k).
inline std::vector<double> uniform_targets(std::size_t n, std::size_t k) {
  if (k == 0 || n % k != 0) throw std::domain_error("uniform targets need k | n");
  return std::vector<double>(k, static_cast<double>(n / k));
}

}  // namespace ipstable
