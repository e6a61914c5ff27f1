#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace ipstable;
namespace ts = testing_support;

namespace {

struct Planted {
  DistanceOracle oracle;
  Clustering truth;
};

/// Tight 2-D groups of the given sizes on a wide circle.
Planted planted(const std::vector<std::size_t>& sizes, double radius, double spread, std::mt19937_64& rng) {
  std::size_t n = 0;
  for (std::size_t s : sizes) n += s;
  FeatureMatrix m(n, 2);
  std::vector<std::size_t> labels;
  std::uniform_real_distribution<double> u(-spread, spread);
  std::size_t row = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double angle = 2.0 * 3.141592653589793 * static_cast<double>(c) / static_cast<double>(sizes.size());
    for (std::size_t i = 0; i < sizes[c]; ++i, ++row) {
      m.at(row, 0) = radius * std::cos(angle) + u(rng);
      m.at(row, 1) = radius * std::sin(angle) + u(rng);
      labels.push_back(c);
    }
  }
  return {DistanceOracle::from_features(m, MetricKind::euclidean), Clustering(labels, sizes.size())};
}

/// True when every supercluster lies inside one cluster of `truth`.
bool refines(const SuperclusterPartition& p, const Clustering& truth) {
  for (const auto& c : p.clusters)
    for (std::size_t x : c)
      if (truth[x] != truth[c.front()]) return false;
  return true;
}

/// Replays a merge log from singletons, checking each entry with
/// merge_justified against the clusters that existed just before it.
void expect_log_justified(const DistanceOracle& o, const SuperclusterPartition& p, double alpha, double gamma) {
  const std::size_t n = o.size();
  std::vector<std::size_t> slot(n);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t x = 0; x < n; ++x) {
    slot[x] = x;
    members[x] = {x};
  }
  for (const auto& m : p.merges) {
    const std::size_t a = slot[m.x], b = slot[m.y];
    ASSERT_NE(a, b);
    EXPECT_EQ(members[a].size(), m.size_x);
    EXPECT_EQ(members[b].size(), m.size_y);
    EXPECT_TRUE(merge_justified(o, m, members[a], members[b], alpha, gamma))
        << "criterion " << static_cast<int>(m.criterion);
    for (std::size_t y : members[b]) slot[y] = a;
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    members[b].clear();
  }
  std::size_t alive = 0;
  for (const auto& m : members) alive += !m.empty();
  EXPECT_EQ(alive, p.size());
}

}  // namespace

TEST(CheckAlphaGamma, ThreeByThreeLine) {
  // {0,1,2} and {100,101,102}: own average 1.5 or 1, foreign at least 98.
  const std::vector<double> xs{0, 1, 2, 100, 101, 102};
  const auto o = DistanceOracle::from_features(FeatureMatrix::from_column(xs), MetricKind::euclidean);
  const Clustering c({0, 0, 0, 1, 1, 1}, 2);
  EXPECT_TRUE(check_alpha_gamma(o, c, 0.5, 4.0));
  EXPECT_TRUE(check_alpha_gamma(o, c, 0.5, 60.0));
  EXPECT_FALSE(check_alpha_gamma(o, c, 0.5, 70.0));  // point 2: 99 / 1.5 = 66
  EXPECT_FALSE(check_alpha_gamma(o, c, 0.6, 4.0));
  EXPECT_FALSE(check_alpha_gamma(o, Clustering({0, 0, 1, 1, 1, 1}, 2), 0.3, 4.0));
}

TEST(AlphaGammaParams, Validation) {
  EXPECT_NO_THROW((AlphaGammaParams{0.25, 4.0}.validate(8)));
  EXPECT_THROW((AlphaGammaParams{0.0, 4.0}.validate(8)), std::domain_error);
  EXPECT_THROW((AlphaGammaParams{0.05, 4.0}.validate(8)), std::domain_error);
  EXPECT_THROW((AlphaGammaParams{0.25, 3.0}.validate(8)), std::domain_error);
}

TEST(MergeThresholds, Values) {
  const MergeThresholds th(4.0);
  EXPECT_NEAR(th.cross_ratio, std::pow(17.0 / 9.0, 2.0), 1e-12);
  EXPECT_NEAR(th.own_factor, 8.0 / 9.0, 1e-12);
}

TEST(LinkageSizeGuard, FourBlobsBecomeFourSuperclusters) {
  std::mt19937_64 rng(4);
  const auto pts = ts::planted_blobs(4, 10, 100.0, 1.0, rng);
  const auto o = DistanceOracle::from_features(pts, MetricKind::euclidean);
  const auto p = linkage_size_guard(o, 0.25);
  EXPECT_EQ(p.size(), 4u);
  EXPECT_TRUE(same_partition(Clustering(p.label, p.size()), Clustering(ts::blob_labels(4, 10), 4)));
  EXPECT_EQ(p.representatives, (std::vector<std::size_t>{0, 10, 20, 30}));
  EXPECT_EQ(p.merges.size(), 36u);
}

TEST(LinkageSizeGuard, NeverMixesPlantedClusters) {
  std::mt19937_64 rng(48);
  std::size_t checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = std::uniform_int_distribution<std::size_t>(3, 12)(rng);
    const double spread = std::uniform_real_distribution<double>(0.5, 10.0)(rng);
    const auto inst = planted(sizes, 50.0, spread, rng);
    const double alpha = static_cast<double>(*std::min_element(sizes.begin(), sizes.end())) /
                         static_cast<double>(inst.oracle.size());
    if (!check_alpha_gamma(inst.oracle, inst.truth, alpha, kMinGamma)) continue;
    ++checked;
    const auto p = linkage_size_guard(inst.oracle, alpha);
    EXPECT_TRUE(refines(p, inst.truth));
    EXPECT_GE(p.size(), k);
  }
  EXPECT_GT(checked, 20u);
}

TEST(ExactEnumerate, RecoversPlantedClustering) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = planted({6, 8, 10}, 40.0, 2.0, rng);
    const double alpha = 6.0 / 24.0;
    ASSERT_TRUE(check_alpha_gamma(inst.oracle, inst.truth, alpha, kMinGamma));
    const auto c = exact_enumerate(inst.oracle, 3, alpha);
    EXPECT_EQ(audit(inst.oracle, c).num_unstable, 0u);
    EXPECT_TRUE(same_partition(c, inst.truth));
  }
}

TEST(ExactEnumerate, ResultIsStableOnSmallRandomInstances) {
  // Whatever the promise, a returned clustering must be stable; otherwise
  // the call reports infeasibility.
  std::mt19937_64 rng(70);
  for (int rep = 0; rep < 40; ++rep) {
    const auto o = ts::random_euclidean(12, 2, rng);
    try {
      const auto c = exact_enumerate(o, 2, 0.25);
      EXPECT_EQ(audit(o, c).num_unstable, 0u);
    } catch (const Infeasible&) {
    }
  }
}

TEST(ExactEnumerate, RefusalAndErrors) {
  std::mt19937_64 rng(1);
  const auto o = ts::random_euclidean(20, 2, rng);
  EXPECT_THROW(exact_enumerate(o, 8, 0.05), Refused);
  EXPECT_THROW(exact_enumerate(o, 0, 0.5), std::domain_error);
  EXPECT_THROW(exact_enumerate(o, 3, 1.0), Infeasible);  // one supercluster
  EXPECT_EQ(exact_enumerate(o, 1, 0.5).k(), 1u);
}

TEST(LinkageConditioned, PlantedFourClustersAndJustifiedLog) {
  std::mt19937_64 rng(25);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = planted({5, 5, 5, 5}, 60.0, 1.0, rng);
    ASSERT_TRUE(check_alpha_gamma(inst.oracle, inst.truth, 0.25, 4.0));
    const auto p = linkage_conditioned(inst.oracle, 0.25, 4.0);
    EXPECT_TRUE(same_partition(Clustering(p.label, p.size()), inst.truth));
    expect_log_justified(inst.oracle, p, 0.25, 4.0);
  }
}

TEST(LinkageConditioned, LogIsJustifiedOnArbitraryInputs) {
  std::mt19937_64 rng(26);
  for (int rep = 0; rep < 40; ++rep) {
    const auto o = rep % 2 ? ts::random_euclidean(20, 2, rng) : ts::random_dissimilarity(20, rng);
    const double gamma = rep % 3 == 0 ? kMinGamma : 5.0;
    const auto p = linkage_conditioned(o, 0.2, gamma);
    expect_log_justified(o, p, 0.2, gamma);
    for (std::size_t s = 0; s < p.size(); ++s) EXPECT_EQ(p.representatives[s], p.clusters[s].front());
  }
}

TEST(LinkageConditioned, RefinesPlantedClusteringsUnderThePromise) {
  std::mt19937_64 rng(27);
  std::size_t checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = std::uniform_int_distribution<std::size_t>(3, 10)(rng);
    const auto inst = planted(sizes, 50.0, std::uniform_real_distribution<double>(0.5, 8.0)(rng), rng);
    const double alpha = static_cast<double>(*std::min_element(sizes.begin(), sizes.end())) /
                         static_cast<double>(inst.oracle.size());
    if (!check_alpha_gamma(inst.oracle, inst.truth, alpha, kMinGamma)) continue;
    ++checked;
    EXPECT_TRUE(refines(linkage_conditioned(inst.oracle, alpha, kMinGamma), inst.truth));
  }
  EXPECT_GT(checked, 20u);
}

TEST(Pipeline, PlantedInstance) {
  std::mt19937_64 rng(31);
  const auto inst = planted({5, 5, 5, 5}, 60.0, 1.0, rng);
  const auto r = pipeline(inst.oracle, 4, 0.25, 4.0, 11);
  EXPECT_TRUE(same_partition(r.clustering, inst.truth));
  EXPECT_EQ(r.max_violation, audit(inst.oracle, r.clustering).max_violation);
  EXPECT_LE(r.max_violation, 1.0 + kStabilityTol);
  EXPECT_GE(r.rep_stretch, 1.0);
  EXPECT_GE(r.uniformity, 1.0);
}

TEST(Pipeline, CertificateBoundsMaxViolation) {
  std::mt19937_64 rng(32);
  std::size_t runs = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const auto o = rep % 2 ? ts::random_euclidean(24, 2, rng)
                           : DistanceOracle::from_features(ts::planted_blobs(3, 8, 6.0, 2.0, rng),
                                                           MetricKind::euclidean);
    if (linkage_conditioned(o, 0.25, kMinGamma).size() < 2) continue;
    ++runs;
    const auto r = pipeline(o, 2, 0.25, kMinGamma, rep);
    EXPECT_LE(r.max_violation, r.certificate * (1.0 + 1e-12));
    EXPECT_EQ(r.rep_groups.size(), r.superclusters.size());
    for (std::size_t x = 0; x < 24; ++x) EXPECT_EQ(r.clustering[x], r.rep_groups[r.superclusters.label[x]]);
  }
  EXPECT_GT(runs, 10u);
}

TEST(Pipeline, TooFewSuperclusters) {
  std::mt19937_64 rng(3);
  const auto o = ts::random_euclidean(10, 2, rng);
  EXPECT_THROW(pipeline(o, 3, 1.0, 4.0, 0), std::domain_error);
}
