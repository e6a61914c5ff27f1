#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace ipstable;
namespace ts = testing_support;

namespace {

DistanceOracle fig1() { return fixture_no_stable().oracle(); }

}  // namespace

TEST(DistanceOracle, VectorMetrics) {
  const auto f = FeatureMatrix::from_rows({{0.0, 0.0}, {3.0, -4.0}});
  EXPECT_DOUBLE_EQ(DistanceOracle::from_features(f, MetricKind::euclidean)(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(DistanceOracle::from_features(f, MetricKind::manhattan)(0, 1), 7.0);
  EXPECT_DOUBLE_EQ(DistanceOracle::from_features(f, MetricKind::chebyshev)(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(DistanceOracle::from_features(f, MetricKind::euclidean)(1, 1), 0.0);
}

TEST(DistanceOracle, MatrixValidation) {
  EXPECT_THROW(DistanceOracle::from_matrix({{0.0, 1.0}, {2.0, 0.0}}), std::domain_error);
  EXPECT_THROW(DistanceOracle::from_matrix({{0.5, 1.0}, {1.0, 0.0}}), std::domain_error);
  EXPECT_THROW(DistanceOracle::from_matrix({{0.0, -1.0}, {-1.0, 0.0}}), std::domain_error);
  EXPECT_THROW(DistanceOracle::from_matrix({{0.0, 1.0}}), std::invalid_argument);
  EXPECT_NO_THROW(DistanceOracle::from_matrix({{0.0, 1.0}, {1.0 + 1e-13, 0.0}}));
}

TEST(DistanceOracle, ParseMetricNames) {
  EXPECT_EQ(parse_metric("euclidean"), MetricKind::euclidean);
  EXPECT_EQ(parse_metric("manhattan"), MetricKind::manhattan);
  EXPECT_EQ(parse_metric("chebyshev"), MetricKind::chebyshev);
  EXPECT_EQ(parse_metric("matrix"), MetricKind::matrix);
  EXPECT_EQ(parse_metric("tree"), MetricKind::tree);
  EXPECT_THROW(parse_metric("cosine"), std::invalid_argument);
}

TEST(ClusteringType, RejectsEmptyClusters) {
  EXPECT_THROW(Clustering({0, 0, 2}, 3), std::domain_error);
  EXPECT_THROW(Clustering({0, 3}, 2), std::domain_error);
  EXPECT_EQ(Clustering({1, 0, 1}).k(), 2u);
  EXPECT_TRUE(same_partition(Clustering({1, 1, 0}), Clustering({0, 0, 1})));
  EXPECT_FALSE(same_partition(Clustering({1, 0, 0}), Clustering({0, 0, 1})));
}

TEST(AvgDist, NoStableFixtureForeignAverage) {
  const std::vector<std::size_t> c{1, 2};
  EXPECT_NEAR(avg_dist(fig1(), 0, c, false), 0.68, 1e-12);
}

TEST(AvgDist, SingletonOwnClusterIsZero) {
  const std::vector<std::size_t> c{2};
  EXPECT_EQ(avg_dist(fig1(), 2, c, true), 0.0);
}

TEST(AvgDist, ZeroMetric) {
  const auto o = DistanceOracle::from_matrix(std::vector<double>(9, 0.0), 3);
  const std::vector<std::size_t> c{0, 1, 2};
  EXPECT_EQ(avg_dist(o, 0, c, true), 0.0);
  EXPECT_EQ(avg_dist(o, 1, c, false), 0.0);
}

TEST(AvgDist, Errors) {
  const std::vector<std::size_t> empty;
  EXPECT_THROW(avg_dist(fig1(), 0, empty, false), std::domain_error);
  const std::vector<std::size_t> c{1, 2};
  EXPECT_THROW(avg_dist(fig1(), 0, c, true), std::domain_error);
}

TEST(Violation, NoStableFixtureExamples) {
  const Clustering c14({0, 1, 1, 0}, 2);
  EXPECT_NEAR(violation(fig1(), c14, 0), 0.71 / 0.68, 1e-12);
  EXPECT_NEAR(violation(fig1(), c14, 0), 1.0441, 1e-4);
  const Clustering c1({0, 1, 1, 1}, 2);
  EXPECT_NEAR(violation(fig1(), c1, 3), 0.715 / 0.71, 1e-12);
  EXPECT_NEAR(violation(fig1(), c1, 3), 1.00704, 1e-5);
}

TEST(Violation, SingleClusterHasNoViolation) {
  const Clustering one({0, 0, 0, 0}, 1);
  for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(violation(fig1(), one, x), 0.0);
}

TEST(Violation, InfiniteSentinel) {
  // a and c coincide, b is elsewhere; a sits with b while c is alone.
  const auto o = DistanceOracle::from_matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  const Clustering c({0, 0, 1}, 2);
  EXPECT_TRUE(std::isinf(violation(o, c, 0)));
  const auto r = audit(o, c);
  EXPECT_TRUE(std::isinf(r.max_violation));
  EXPECT_GE(r.num_unstable, 1u);
}

TEST(Audit, NoStableFixtureClustering) {
  const auto r = audit(fig1(), Clustering({0, 1, 1, 0}, 2));
  EXPECT_GE(r.num_unstable, 1u);
  EXPECT_NEAR(r.max_violation, 0.71 / 0.68, 1e-12);
  EXPECT_FALSE(r.obj.has_value());
}

TEST(Audit, Singletons) {
  const auto r = audit(fig1(), Clustering({0, 1, 2, 3}, 4));
  EXPECT_EQ(r.num_unstable, 0u);
  EXPECT_EQ(r.max_violation, 0.0);
  EXPECT_EQ(r.mean_violation, 0.0);
  EXPECT_EQ(r.cost, 0.0);
}

TEST(Audit, CostAndObjective) {
  // Line {0, 1, 3} | {10, 14}: pair averages 2 and 4.
  const auto o = DistanceOracle::from_features(FeatureMatrix::from_column(std::vector<double>{0, 1, 3, 10, 14}),
                                               MetricKind::euclidean);
  const std::vector<double> targets{2.0, 3.0};
  const auto r = audit(o, Clustering({0, 0, 0, 1, 1}, 2), targets, 1.0);
  EXPECT_DOUBLE_EQ(r.cost, 6.0);
  ASSERT_TRUE(r.obj.has_value());
  EXPECT_DOUBLE_EQ(*r.obj, 2.0);
  const auto rinf = audit(o, Clustering({0, 0, 0, 1, 1}, 2), targets, kInfNorm);
  EXPECT_DOUBLE_EQ(*rinf.obj, 1.0);
  const std::vector<double> bad{5.0};
  EXPECT_THROW(audit(o, Clustering({0, 0, 0, 1, 1}, 2), bad), std::domain_error);
}

TEST(Audit, MatchesNaiveRecomputation) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto o = ts::random_dissimilarity(6, rng);
    const auto labels = ts::random_labels(6, 2, rng);
    const auto d = ts::to_dense(o);
    const auto r = audit(o, Clustering(labels, 2));
    std::size_t uns = 0;
    double mx = 0.0, sum = 0.0;
    for (std::size_t x = 0; x < 6; ++x) {
      const double vi = ts::naive_vi(d, labels, 2, x);
      EXPECT_NEAR(r.vi[x], vi, 1e-12);
      mx = std::max(mx, vi);
      if (vi > 1.0 + kStabilityTol) {
        ++uns;
        sum += vi;
      }
    }
    EXPECT_EQ(r.num_unstable, uns);
    EXPECT_NEAR(r.max_violation, mx, 1e-12);
    EXPECT_NEAR(r.mean_violation, uns ? sum / static_cast<double>(uns) : 0.0, 1e-12);
  }
}

TEST(Audit, PerPointDecisionsMatchNaiveOnSmallInstances) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n)(rng);
    const auto o = rep % 2 ? ts::random_dissimilarity(n, rng) : ts::random_euclidean(n, 2, rng);
    const auto labels = ts::random_labels(n, k, rng);
    const auto d = ts::to_dense(o);
    const auto r = audit(o, Clustering(labels, k));
    for (std::size_t x = 0; x < n; ++x)
      EXPECT_EQ(r.vi[x] > 1.0 + kStabilityTol, ts::naive_vi(d, labels, k, x) > 1.0 + kStabilityTol);
    EXPECT_EQ(r.num_unstable == 0, ts::naive_stable(d, labels, k));
    EXPECT_EQ(is_ip_stable(o, Clustering(labels, k)), r.max_violation <= 1.0 + kStabilityTol);
  }
}

TEST(Audit, RelabelInvariance) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const auto o = ts::random_euclidean(9, 2, rng);
    auto labels = ts::random_labels(9, 3, rng);
    const auto a = audit(o, Clustering(labels, 3));
    for (auto& l : labels) l = (l + 1) % 3;
    const auto b = audit(o, Clustering(labels, 3));
    EXPECT_EQ(a.vi, b.vi);
    EXPECT_EQ(a.num_unstable, b.num_unstable);
    EXPECT_DOUBLE_EQ(a.cost, b.cost);
  }
}

TEST(Audit, ScaleInvariance) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 30; ++rep) {
    const auto o = ts::random_dissimilarity(8, rng);
    const Clustering c(ts::random_labels(8, 3, rng), 3);
    const double s = 3.7;
    const auto a = audit(o, c);
    const auto b = audit(o.scaled(s), c);
    EXPECT_EQ(a.num_unstable, b.num_unstable);
    EXPECT_NEAR(a.max_violation, b.max_violation, 1e-12);
    EXPECT_NEAR(a.mean_violation, b.mean_violation, 1e-12);
    EXPECT_NEAR(b.cost, s * a.cost, 1e-12);
    for (std::size_t x = 0; x < 8; ++x) EXPECT_NEAR(a.vi[x], b.vi[x], 1e-12);
  }
}

TEST(TStability, NoStableFixture) {
  const Clustering c({0, 1, 1, 0}, 2);
  EXPECT_FALSE(is_t_stable(fig1(), c, 1.0));
  EXPECT_TRUE(is_t_stable(fig1(), c, 1.05));
  EXPECT_TRUE(is_t_stable(fig1(), c, 1e12));
  EXPECT_THROW(is_t_stable(fig1(), c, 0.9), std::domain_error);
}

TEST(BruteForce, PartitionCountsAreStirlingNumbers) {
  auto count = [](std::size_t n, std::size_t k) {
    std::size_t c = 0;
    for_each_partition(n, k, [&](const std::vector<std::size_t>&) {
      ++c;
      return true;
    });
    return c;
  };
  EXPECT_EQ(count(4, 2), 7u);
  EXPECT_EQ(count(5, 3), 25u);
  EXPECT_EQ(count(6, 1), 1u);
  EXPECT_EQ(count(6, 6), 1u);
  EXPECT_EQ(count(7, 3), 301u);
}

TEST(BruteForce, NoStableFixtureHasNoStableTwoClustering) {
  const auto r = brute_force(fig1(), 2, BruteForceMode::find_stable);
  EXPECT_FALSE(r.clustering.has_value());
  EXPECT_TRUE(all_stable_clusterings(fig1(), 2).empty());
}

TEST(BruteForce, FarPairs) {
  const auto o = DistanceOracle::from_features(FeatureMatrix::from_column(std::vector<double>{0, 1, 50, 51}),
                                               MetricKind::euclidean);
  const auto r = brute_force(o, 2, BruteForceMode::min_max_violation);
  ASSERT_TRUE(r.clustering.has_value());
  EXPECT_TRUE(same_partition(*r.clustering, Clustering({0, 0, 1, 1}, 2)));
  EXPECT_LT(r.max_violation, 1.0);
}

TEST(BruteForce, TwoStableFixtureHasSeveralStableClusterings) {
  const auto o = fixture_two_stable().oracle();
  EXPECT_GE(all_stable_clusterings(o, 2).size(), 2u);
}

TEST(BruteForce, MinMaxViolationMatchesExhaustiveNaive) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto o = ts::random_dissimilarity(6, rng);
    const auto d = ts::to_dense(o);
    double best = std::numeric_limits<double>::infinity();
    for_each_partition(6, 3, [&](const std::vector<std::size_t>& l) {
      best = std::min(best, ts::naive_max_vi(d, l, 3));
      return true;
    });
    EXPECT_NEAR(brute_force(o, 3, BruteForceMode::min_max_violation).max_violation, best, 1e-12);
  }
}

TEST(BruteForce, RefusesLargeInstances) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(brute_force(ts::random_euclidean(15, 1, rng), 2, BruteForceMode::find_stable), Refused);
}
