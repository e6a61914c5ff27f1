#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ipstable;
namespace ts = testing_support;

TEST(KMeansPPHard, SingleBlockViolationEqualsAlpha) {
  const auto inst = gen_kmeanspp_hard(5.0, 1, 1.0);
  const auto d = ts::to_dense(inst.oracle());
  EXPECT_NEAR(ts::naive_vi(d, inst.clustering->assignment(), 2, inst.point("v")), 5.0, 1e-9);
  EXPECT_EQ(inst.witness, inst.point("v"));
  EXPECT_DOUBLE_EQ(inst.witness_violation, 5.0);
}

TEST(KMeansPPHard, ManyBlocksMaxViolation) {
  const auto inst = gen_kmeanspp_hard(3.0, 4, 2.0);
  ASSERT_EQ(inst.size(), 16u);
  const auto d = ts::to_dense(inst.oracle());
  EXPECT_NEAR(ts::naive_max_vi(d, inst.clustering->assignment(), 8), 3.0, 1e-9);
  EXPECT_NEAR(audit(inst.oracle(), *inst.clustering).max_violation, 3.0, 1e-9);
}

TEST(KMeansPPHard, SpacingBoundAndParams) {
  EXPECT_NEAR(kmeanspp_min_spacing(2.0, 3, 1.5), 2.0 * 1.5 * std::sqrt(3.0 * 3.0 * 200.0 * 3.0), 1e-9);
  const auto inst = gen_kmeanspp_hard(2.0, 12);
  double k = 0.0, spacing = 0.0;
  for (const auto& [name, v] : inst.params) {
    if (name == "k") k = v;
    if (name == "spacing") spacing = v;
  }
  EXPECT_EQ(k, 13.0);
  EXPECT_GT(spacing, kmeanspp_min_spacing(2.0, 12, 1.0));
  EXPECT_DOUBLE_EQ(inst.features.at(4, 0) - inst.features.at(0, 0), spacing);
  EXPECT_THROW(gen_kmeanspp_hard(2.0, 12, 1.0, 10.0), std::domain_error);
  EXPECT_THROW(gen_kmeanspp_hard(1.0, 1), std::domain_error);
  EXPECT_THROW(gen_kmeanspp_hard(2.0, 0), std::domain_error);
}

TEST(KCenterHard, PIsEquidistantAndUnstable) {
  for (std::size_t n : {2u, 8u, 16u, 40u}) {
    const double eps = 1.0 / (2.0 * static_cast<double>(n));
    const auto inst = gen_kcenter_hard(n, eps);
    ASSERT_EQ(inst.size(), 2 * n + 2);
    const auto o = inst.oracle();
    const std::size_t p = inst.point("p");
    EXPECT_NEAR(o(p, inst.point("c1")), 1.0, 1e-12);
    EXPECT_NEAR(o(p, inst.point("c2")), 1.0, 1e-12);
    const double vi = ts::naive_vi(ts::to_dense(o), inst.clustering->assignment(), 2, p);
    EXPECT_GE(vi, static_cast<double>(n) / 8.0);
    EXPECT_NEAR(vi, inst.witness_violation, 1e-12);
  }
  EXPECT_THROW(gen_kcenter_hard(16, 0.1), std::domain_error);
  EXPECT_THROW(gen_kcenter_hard(1, 0.1), std::domain_error);
}

TEST(SingleLinkageHard, ViolationFormula) {
  const auto inst = gen_single_linkage_hard(21, 0.5);
  EXPECT_NEAR(ts::naive_vi(ts::to_dense(inst.oracle()), inst.clustering->assignment(), 2, 1), 5.0, 1e-9);
  for (std::size_t n : {5u, 9u, 30u}) {
    const auto g = gen_single_linkage_hard(n, 0.25);
    EXPECT_NEAR(violation(g.oracle(), *g.clustering, g.witness), 0.25 * static_cast<double>(n - 1) / 2.0, 1e-9);
  }
  EXPECT_THROW(gen_single_linkage_hard(4, 0.5), std::domain_error);
  EXPECT_THROW(gen_single_linkage_hard(10, 1.0), std::domain_error);
}

TEST(Fixtures, NoStableClustering) {
  const auto fx = fixture_no_stable();
  EXPECT_TRUE(fx.is_matrix());
  EXPECT_FALSE(brute_force(fx.oracle(), 2, BruteForceMode::find_stable).clustering.has_value());
}

TEST(Fixtures, SeveralStableClusterings) {
  const auto fx = fixture_two_stable();
  EXPECT_GE(all_stable_clusterings(fx.oracle(), 2).size(), 2u);
}

TEST(Fixtures, UniqueStableClustering) {
  const auto fx = fixture_unique_stable();
  const auto all = all_stable_clusterings(fx.oracle(), 2);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_TRUE(same_partition(all[0], *fx.clustering));
  EXPECT_EQ(fixtures().size(), 3u);
}
