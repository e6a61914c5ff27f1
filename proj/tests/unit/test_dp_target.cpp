#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace ipstable;
namespace ts = testing_support;

namespace {

/// Best objective over every contiguous stable k-clustering, by enumeration.
double exhaustive_optimum(const LineInstance& inst, const std::vector<double>& targets, double p) {
  const auto o = inst.sorted_oracle();
  double best = kInfNorm;
  ts::for_each_composition(inst.size(), targets.size(), [&](const std::vector<std::size_t>& starts) {
    const auto c = inst.contiguous(starts);
    const auto r = audit(o, c, std::span<const double>(targets), p);
    if (r.num_unstable == 0) best = std::min(best, *r.obj);
  });
  return best;
}

std::vector<double> random_targets(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  // Random composition of n into k positive parts.
  std::vector<std::size_t> cuts(n - 1);
  for (std::size_t i = 0; i < n - 1; ++i) cuts[i] = i + 1;
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(k - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> t;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    t.push_back(static_cast<double>(c - prev));
    prev = c;
  }
  t.push_back(static_cast<double>(n - prev));
  return t;
}

LineInstance line(const std::vector<double>& v) { return LineInstance::from_unsorted(v); }

}  // namespace

TEST(DpTarget, AllSingletons) {
  const auto inst = line({5.0, 2.0, 9.0, 1.0});
  const std::vector<double> t{1, 1, 1, 1};
  for (double p : {1.0, 2.0, kInfNorm}) {
    const auto table = build_table(inst, t, p);
    EXPECT_EQ(table.optimum(), 0.0);
    const auto sol = reconstruct(table, inst);
    EXPECT_EQ(sol.sizes, (std::vector<std::size_t>{1, 1, 1, 1}));
    EXPECT_EQ(sol.obj, 0.0);
  }
}

TEST(DpTarget, FourPointLine) {
  const auto inst = line({0, 1, 7, 8});
  const std::vector<double> even{2, 2};
  for (double p : {1.0, kInfNorm}) {
    const auto sol = solve_dp(inst, even, p);
    EXPECT_EQ(sol.obj, 0.0);
    EXPECT_TRUE(same_partition(sol.clustering, Clustering({0, 0, 1, 1}, 2)));
  }
  const std::vector<double> skew{1, 3};
  const auto sol = solve_dp(inst, skew, kInfNorm);
  EXPECT_EQ(sol.obj, 1.0);
  EXPECT_EQ(sol.sizes, (std::vector<std::size_t>{2, 2}));
  EXPECT_DOUBLE_EQ(sol.obj, exhaustive_optimum(inst, skew, kInfNorm));
}

TEST(DpTarget, BaseCasesAndInfinityFill) {
  std::mt19937_64 rng(4);
  const auto inst = line(ts::random_line(9, rng));
  const std::vector<double> t{2, 3, 4};
  for (double p : {1.0, 3.0, kInfNorm}) {
    const auto table = build_table(inst, t, p);
    auto pw = [&](double dev) { return std::isinf(p) ? std::abs(dev) : std::pow(std::abs(dev), p); };
    for (std::size_t i = 1; i <= 9; ++i)
      for (std::size_t j = 1; j <= 9; ++j) {
        EXPECT_EQ(table.at(i, j, 1), j == i ? pw(static_cast<double>(i) - t[0]) : kInfNorm);
        for (std::size_t l = 1; l <= 3; ++l) {
          if (j + l - 1 > i) EXPECT_EQ(table.at(i, j, l), kInfNorm);
        }
      }
    for (std::size_t l = 2; l <= 3; ++l) {
      double expect = 0.0;
      for (std::size_t s = 0; s < l; ++s)
        expect = std::isinf(p) ? std::max(expect, pw(1.0 - t[s])) : expect + pw(1.0 - t[s]);
      EXPECT_EQ(table.at(l, 1, l), expect);
      for (std::size_t j = 2; j <= 9; ++j) EXPECT_EQ(table.at(l, j, l), kInfNorm);
    }
  }
}

TEST(DpTarget, TableMatchesExhaustiveOptimum) {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(4, n))(rng);
    const auto inst = line(ts::random_line(n, rng, rep % 4 == 0));
    const auto t = random_targets(n, k, rng);
    for (double p : {1.0, kInfNorm}) {
      const double want = exhaustive_optimum(inst, t, p);
      const auto table = build_table(inst, t, p);
      ASSERT_TRUE(std::isfinite(want));
      // The table holds the p-th power of the norm for finite p.
      EXPECT_NEAR(table.optimum(), std::isinf(p) ? want : std::pow(want, p), 1e-9);
      const auto sol = reconstruct(table, inst);
      EXPECT_NEAR(sol.obj, want, 1e-9);
      const auto r = audit(inst.sorted_oracle(), sol.sorted_clustering, std::span<const double>(t), p);
      EXPECT_EQ(r.num_unstable, 0u);
      EXPECT_NEAR(*r.obj, sol.obj, 1e-9);
    }
  }
}

TEST(DpTarget, RelaxingTargetsToOutputSizesGivesZero) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const auto inst = line(ts::random_line(30, rng));
    const auto t = random_targets(30, 4, rng);
    const auto sol = solve_dp(inst, t, kInfNorm);
    std::vector<double> own(sol.sizes.begin(), sol.sizes.end());
    EXPECT_EQ(solve_dp(inst, own, kInfNorm).obj, 0.0);
    EXPECT_EQ(solve_dp(inst, own, 2.0).obj, 0.0);
  }
}

TEST(DpTarget, ClusteringIsReportedInInputOrder) {
  const std::vector<double> raw{8.0, 0.0, 7.0, 1.0};
  const std::vector<double> t{2, 2};
  const auto sol = solve_dp(line(raw), t, kInfNorm);
  EXPECT_TRUE(same_partition(sol.clustering, Clustering({0, 1, 0, 1}, 2)));
}

TEST(DpTarget, RejectsInconsistentTargets) {
  const auto inst = line({0, 1, 2, 3});
  const std::vector<double> wrong_sum{1, 2};
  const std::vector<double> fractional{1.5, 2.5};
  const std::vector<double> zero{0, 4};
  EXPECT_THROW(build_table(inst, wrong_sum, 1.0), std::domain_error);
  EXPECT_THROW(build_table(inst, fractional, 1.0), std::domain_error);
  EXPECT_THROW(build_table(inst, zero, 1.0), std::domain_error);
  const std::vector<double> ok{2, 2};
  EXPECT_THROW(build_table(inst, ok, 0.5), std::domain_error);
}

TEST(DpTarget, UniformTargets) {
  EXPECT_EQ(uniform_targets(10, 5), (std::vector<double>(5, 2.0)));
  EXPECT_THROW(uniform_targets(10, 3), std::domain_error);
}

TEST(DpTarget, LargePFlagsOverflowRisk) {
  const auto inst = line({0, 1, 2, 3});
  const std::vector<double> t{2, 2};
  EXPECT_TRUE(build_table(inst, t, 40.0).overflow_risk);
  EXPECT_FALSE(build_table(inst, t, kInfNorm).overflow_risk);
  EXPECT_GT(dp_table_cells(1000, 250), kDpCellWarnThreshold);
}
