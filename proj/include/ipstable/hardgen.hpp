#pragma once

// Instances on which common clustering heuristics produce unstable output,
// plus the small hand-made fixtures. Each generator audits the clustering it
// claims to be unstable before returning.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ipstable/core.hpp"

namespace ipstable {

struct HardInstance {
  std::string family;
  /// Coordinates (one row per point); empty when the instance is a matrix.
  FeatureMatrix features;
  /// Row-major n x n distances for matrix instances.
  std::vector<double> matrix;
  std::size_t matrix_n = 0;
  /// The clustering the construction targets, if any.
  std::optional<Clustering> clustering;
  /// Point whose violation the construction is about, and that violation.
  std::size_t witness = std::numeric_limits<std::size_t>::max();
  double witness_violation = 0.0;
  std::vector<std::pair<std::string, std::size_t>> named_points;
  std::vector<std::pair<std::string, double>> params;

  bool is_matrix() const { return matrix_n > 0; }
  std::size_t size() const { return is_matrix() ? matrix_n : features.n; }

  DistanceOracle oracle(MetricKind kind = MetricKind::euclidean) const {
    if (is_matrix()) return DistanceOracle::from_matrix(matrix, matrix_n);
    return DistanceOracle::from_features(features, kind);
  }

  std::size_t point(const std::string& name) const {
    for (const auto& [key, idx] : named_points)
      if (key == name) return idx;
    throw std::out_of_range("no point named '" + name + "'");
  }
};

namespace detail {

inline void self_check(const HardInstance& inst, double expected, double abs_tol, const char* what) {
  const double vi = violation(inst.oracle(), *inst.clustering, inst.witness);
  if (!(std::abs(vi - expected) <= abs_tol))
    throw std::logic_error(std::string(what) + ": generated instance has Vi " + std::to_string(vi) +
                           ", expected " + std::to_string(expected));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// k-means++ blocks

/// Failure probability budget used for the spacing bound: 1 / (200 * n_blocks).
inline double kmeanspp_failure_budget(std::size_t n_blocks) {
  return 1.0 / (200.0 * static_cast<double>(n_blocks));
}

/// Smallest admissible spacing between blocks: alpha * r * sqrt(3 n_blocks / eps).
inline double kmeanspp_min_spacing(double alpha, std::size_t n_blocks, double r) {
  return alpha * r * std::sqrt(3.0 * static_cast<double>(n_blocks) / kmeanspp_failure_budget(n_blocks));
}

/// Blocks {z, z', v, u} placed `spacing` apart along the x axis, with
/// v = (j * spacing, 0), z = v + (0, alpha r), z' = v - (0, alpha r) and
/// u = v + (r, 0). Rows are z, z', v, u per block. With centers v and u,
/// Lloyd keeps {z, z', v} and {u}, and v is unstable by exactly alpha.
/// Pass spacing <= 0 to use the minimum admissible spacing.
inline HardInstance gen_kmeanspp_hard(double alpha, std::size_t n_blocks, double r = 1.0,
                                      double spacing = 0.0) {
  if (!(alpha > 1.0)) throw std::domain_error("alpha must exceed 1");
  if (n_blocks == 0) throw std::domain_error("need at least one block");
  if (!(r > 0.0)) throw std::domain_error("r must be positive");
  const double min_spacing = kmeanspp_min_spacing(alpha, n_blocks, r);
  if (spacing <= 0.0) spacing = min_spacing * (1.0 + 1e-6);
  if (!(spacing > min_spacing))
    throw std::domain_error("spacing must exceed " + std::to_string(min_spacing));

  HardInstance inst;
  inst.family = "kmeanspp";
  inst.features = FeatureMatrix(4 * n_blocks, 2);
  std::vector<std::size_t> labels(4 * n_blocks);
  for (std::size_t j = 0; j < n_blocks; ++j) {
    const double vx = static_cast<double>(j) * spacing;
    const std::size_t base = 4 * j;
    const double rows[4][2] = {{vx, alpha * r}, {vx, -alpha * r}, {vx, 0.0}, {vx + r, 0.0}};
    for (std::size_t q = 0; q < 4; ++q) {
      inst.features.at(base + q, 0) = rows[q][0];
      inst.features.at(base + q, 1) = rows[q][1];
      labels[base + q] = 2 * j + (q == 3 ? 1 : 0);
    }
  }
  inst.clustering = Clustering(std::move(labels), 2 * n_blocks);
  inst.witness = 2;
  inst.witness_violation = alpha;
  inst.named_points = {{"z", 0}, {"z_prime", 1}, {"v", 2}, {"u", 3}};
  inst.params = {{"alpha", alpha}, {"n_blocks", static_cast<double>(n_blocks)}, {"r", r},
                 {"spacing", spacing}, {"failure_budget", kmeanspp_failure_budget(n_blocks)},
                 {"k", std::ceil(13.0 * static_cast<double>(n_blocks) / 12.0)}};
  detail::self_check(inst, alpha, 1e-9 * alpha, "kmeans++ blocks");
  return inst;
}

// ---------------------------------------------------------------------------
// Greedy k-center

/// c1 = (0,0), c2 = (2,0); n points on the circle of radius eps around
/// (1+eps, 0) starting with p = (1, 0), which is equidistant from c1 and c2;
/// n points on the circle of radius eps around (0, 1-eps). Rows: c1, c2, the
/// first circle (p first), the second circle. With k = 2 and c1 first, the
/// greedy pass picks c2, sends p and the second circle to c1 and the rest of
/// the first circle to c2, leaving p unstable by at least n/8.
inline HardInstance gen_kcenter_hard(std::size_t n, double epsilon) {
  if (n < 2) throw std::domain_error("need n >= 2 points per circle");
  if (!(epsilon > 0.0 && epsilon <= 1.0 / (2.0 * static_cast<double>(n))))
    throw std::domain_error("epsilon must lie in (0, 1/(2n)]");
  HardInstance inst;
  inst.family = "kcenter";
  inst.features = FeatureMatrix(2 * n + 2, 2);
  inst.features.at(0, 0) = 0.0;
  inst.features.at(1, 0) = 2.0;
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = pi + 2.0 * pi * static_cast<double>(i) / static_cast<double>(n);
    inst.features.at(2 + i, 0) = i == 0 ? 1.0 : 1.0 + epsilon + epsilon * std::cos(theta);
    inst.features.at(2 + i, 1) = i == 0 ? 0.0 : epsilon * std::sin(theta);
    inst.features.at(2 + n + i, 0) = epsilon * std::cos(theta);
    inst.features.at(2 + n + i, 1) = 1.0 - epsilon + epsilon * std::sin(theta);
  }
  std::vector<std::size_t> labels(2 * n + 2, 0);
  labels[1] = 1;
  for (std::size_t i = 1; i < n; ++i) labels[2 + i] = 1;
  inst.clustering = Clustering(std::move(labels), 2);
  inst.witness = 2;
  inst.witness_violation = violation(inst.oracle(), *inst.clustering, inst.witness);
  inst.named_points = {{"c1", 0}, {"c2", 1}, {"p", 2}};
  inst.params = {{"n", static_cast<double>(n)}, {"epsilon", epsilon}};
  if (!(inst.witness_violation >= static_cast<double>(n) / 8.0))
    throw std::logic_error("k-center instance: p is not unstable by n/8");
  return inst;
}

// ---------------------------------------------------------------------------
// Single linkage

/// v1 = 0, v2 = 1 and v3..vn at 1 + eps, 1 + 2 eps, ...: single linkage
/// joins v2..vn along the eps gaps before the unit gap, so its 2-cut is
/// {v1}, {v2..vn}, and v2 is unstable by eps (n-1) / 2, i.e. (n-1)/4 at
/// eps = 1/2.
inline HardInstance gen_single_linkage_hard(std::size_t n, double epsilon) {
  if (n < 5) throw std::domain_error("need n >= 5");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must lie in (0, 1)");
  HardInstance inst;
  inst.family = "single-linkage";
  inst.features = FeatureMatrix(n, 1);
  inst.features.at(0, 0) = 0.0;
  for (std::size_t i = 1; i < n; ++i) inst.features.at(i, 0) = 1.0 + static_cast<double>(i - 1) * epsilon;
  std::vector<std::size_t> labels(n, 1);
  labels[0] = 0;
  inst.clustering = Clustering(std::move(labels), 2);
  inst.witness = 1;
  inst.witness_violation = epsilon * static_cast<double>(n - 1) / 2.0;
  inst.named_points = {{"v1", 0}, {"v2", 1}};
  inst.params = {{"n", static_cast<double>(n)}, {"epsilon", epsilon}};
  detail::self_check(inst, inst.witness_violation, 1e-6, "single linkage");
  return inst;
}

// ---------------------------------------------------------------------------
// Fixtures

/// Four points with no IP-stable 2-clustering.
inline HardInstance fixture_no_stable() {
  HardInstance inst;
  inst.family = "fig1";
  inst.matrix_n = 4;
  const double d12 = 0.72, d13 = 0.64, d14 = 0.71, d23 = 0.51, d24 = 0.95, d34 = 0.48;
  inst.matrix = {0.0, d12, d13, d14,  //
                 d12, 0.0, d23, d24,  //
                 d13, d23, 0.0, d34,  //
                 d14, d24, d34, 0.0};
  return inst;
}

/// Five points on a line with consecutive gaps 8, 1, 1/3, 8; more than one
/// IP-stable 2-clustering exists.
inline HardInstance fixture_two_stable() {
  HardInstance inst;
  inst.family = "fig2";
  const std::vector<double> xs{0.0, 8.0, 9.0, 9.0 + 1.0 / 3.0, 17.0 + 1.0 / 3.0};
  inst.features = FeatureMatrix::from_column(xs);
  return inst;
}

/// {0, 1, 7, 8}: the only IP-stable 2-clustering is {0,1}, {7,8}.
inline HardInstance fixture_unique_stable() {
  HardInstance inst;
  inst.family = "line4";
  const std::vector<double> xs{0.0, 1.0, 7.0, 8.0};
  inst.features = FeatureMatrix::from_column(xs);
  inst.clustering = Clustering({0, 0, 1, 1}, 2);
  return inst;
}

inline std::vector<HardInstance> fixtures() {
  return {fixture_no_stable(), fixture_two_stable(), fixture_unique_stable()};
}

}  // namespace ipstable
