#include <gtest/gtest.h>

#include <set>

#include "rlabo/runner.hpp"
#include "test_support.hpp"

using namespace rlabo;

namespace {

EnvConfig env(BenchmarkId id, std::uint64_t seed, int horizon = 6) {
  return {Benchmark(id), horizon, 3, seed};
}

void expect_well_formed(const RunTrace& tr, int horizon) {
  ASSERT_EQ(tr.records.size(), static_cast<std::size_t>(3 + horizon));
  double best = -kInf;
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    const auto& r = tr.records[i];
    best = std::max(best, r.y);
    EXPECT_EQ(r.best_so_far, best);
    if (i < 3) {
      EXPECT_EQ(r.t, 0);
      EXPECT_FALSE(r.action.has_value());
    } else {
      EXPECT_EQ(r.t, static_cast<int>(i) - 2);
      ASSERT_TRUE(r.action.has_value());
      EXPECT_GE(*r.action, 0);
      EXPECT_LT(*r.action, 5);
    }
  }
  EXPECT_EQ(tr.best, best);
  EXPECT_EQ(tr.best_curve().size(), static_cast<std::size_t>(horizon + 1));
}

}  // namespace

TEST(RunFixed, TraceShapeAndConstantAction) {
  const RunTrace tr = run_fixed(action_spec(2), env(BenchmarkId::Griewank, 4));
  expect_well_formed(tr, 6);
  for (std::size_t i = 3; i < tr.records.size(); ++i) EXPECT_EQ(*tr.records[i].action, 2);
  EXPECT_EQ(tr.method, "fixed-2.576");
}

TEST(RunPolicy, GreedyAndDeterministic) {
  Rng rng(1);
  const PolicyParams p = PolicyParams::initialize(4, rng);
  const RunTrace a = run_policy(p, env(BenchmarkId::Levy, 9));
  const RunTrace b = run_policy(p, env(BenchmarkId::Levy, 9));
  expect_well_formed(a, 6);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].x, b.records[i].x);
    EXPECT_EQ(a.records[i].action, b.records[i].action);
    if (a.records[i].action) {
      EXPECT_EQ(*a.records[i].action, argmax_action(actor_forward(p, a.records[i].state)));
    }
  }
}

TEST(RunPolicy, BiasedPolicyPicksItsAction) {
  PolicyParams p = PolicyParams::zeros(4);
  p.actor.b3[3] = 5.0;
  const RunTrace tr = run_policy(p, env(BenchmarkId::Ackley, 2));
  for (std::size_t i = 3; i < tr.records.size(); ++i) EXPECT_EQ(*tr.records[i].action, 3);
}

TEST(RunPolicy, ArchitectureMismatchIsConfigError) {
  EXPECT_THROW(run_policy(PolicyParams::zeros(5), env(BenchmarkId::Ackley, 1)), ConfigError);
}

TEST(Runs, MethodsShareInitialDesignForSameSeed) {
  const RunTrace a = run_fixed(action_spec(0), env(BenchmarkId::Schwefel, 3));
  const RunTrace b = run_fixed(action_spec(4), env(BenchmarkId::Schwefel, 3));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.records[i].x, b.records[i].x);
}

TEST(Stats, Quantile) {
  EXPECT_DOUBLE_EQ(quantile({4.0, 1.0, 3.0, 2.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile({7.0}, 0.75), 7.0);
}

TEST(Stats, StepsToNinetyPercent) {
  EXPECT_EQ(steps_to_90pct({0.0, 5.0, 9.0, 10.0}), 2);
  EXPECT_EQ(steps_to_90pct({1.0, 1.0, 1.0}), 0);
  EXPECT_EQ(steps_to_90pct({0.0, 0.0, 0.0, 10.0}), 3);
}

TEST(Compare, RunCountsPairingAndRanks) {
  Rng rng(4);
  std::map<BenchmarkId, PolicyParams> pol{{BenchmarkId::Levy, PolicyParams::initialize(4, rng)},
                                          {BenchmarkId::Griewank, PolicyParams::initialize(4, rng)}};
  const std::array ids{BenchmarkId::Levy, BenchmarkId::Griewank};
  const CompareConfig cfg{3, 4, 3, 11, 1};
  const ComparisonReport rep = compare(ids, pol, cfg);
  ASSERT_EQ(rep.benchmarks.size(), 2u);
  for (const auto& bc : rep.benchmarks) {
    EXPECT_EQ(bc.traces.size(), 18u);
    EXPECT_EQ(bc.methods, comparison_methods());
    // Paired seeds: every method's k-th run starts from the same design.
    for (std::size_t m = 1; m < 6; ++m) {
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(bc.traces[m * 3 + k].seed, bc.traces[k].seed);
        EXPECT_EQ(bc.traces[m * 3 + k].records[0].x, bc.traces[k].records[0].x);
      }
    }
    std::set<int> ranks;
    for (const auto& r : bc.summary) ranks.insert(r.rank);
    EXPECT_EQ(ranks, (std::set<int>{1, 2, 3, 4, 5, 6}));
    for (const auto& a : bc.summary) {
      for (const auto& b : bc.summary) {
        if (a.rank < b.rank) {
          EXPECT_GE(a.mean_final_best, b.mean_final_best);
        }
      }
    }
    for (const auto& c : bc.curves) {
      ASSERT_EQ(c.mean.size(), 5u);
      for (std::size_t t = 0; t < c.mean.size(); ++t) {
        EXPECT_LE(c.q25[t], c.q75[t]);
        if (t > 0) {
          EXPECT_GE(c.mean[t], c.mean[t - 1]);
        }
      }
    }
  }
}

TEST(Compare, IdenticalAcrossJobCounts) {
  Rng rng(5);
  std::map<BenchmarkId, PolicyParams> pol{{BenchmarkId::Eggholder, PolicyParams::initialize(4, rng)}};
  const std::array ids{BenchmarkId::Eggholder};
  const ComparisonReport a = compare(ids, pol, {2, 3, 3, 1, 1});
  const ComparisonReport b = compare(ids, pol, {2, 3, 3, 1, 4});
  for (std::size_t i = 0; i < a.benchmarks[0].traces.size(); ++i) {
    const auto& ra = a.benchmarks[0].traces[i].records;
    const auto& rb = b.benchmarks[0].traces[i].records;
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t j = 0; j < ra.size(); ++j) EXPECT_EQ(ra[j].y, rb[j].y);
  }
}

TEST(Compare, MissingPolicyIsConfigError) {
  const std::array ids{BenchmarkId::Levy};
  EXPECT_THROW(compare(ids, {}, {}), ConfigError);
}
