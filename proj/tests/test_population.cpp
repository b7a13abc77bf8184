#include <gtest/gtest.h>

#include <cmath>

#include "caci/population.hpp"
#include "caci/quality.hpp"

using namespace caci;

namespace {

// Samples random context pairs and checks |mu(s) - mu(s')| <= L |s - s'|^alpha.
void expect_hoelder(const QualityFunction &f, std::size_t dim, std::uint64_t seed, int pairs = 10000)
{
  const auto cert = f.certificate();
  Rng rng(seed);
  for (int i = 0; i < pairs; ++i)
  {
    std::vector<double> a(dim), b(dim);
    for (std::size_t k = 0; k < dim; ++k)
    {
      a[k] = rng.uniform01();
      // Half the pairs are close, where a wrong exponent would show.
      b[k] = i % 2 == 0 ? rng.uniform01() : std::clamp(a[k] + rng.uniform(-1e-3, 1e-3), 0.0, 1.0);
    }
    const ContextVector s(a), t(b);
    const double gap   = std::abs(f(s) - f(t));
    const double bound = cert.L * std::pow(euclidean_distance(s, t), cert.alpha);
    ASSERT_LE(gap, bound + 1e-12) << "pair " << i;
  }
}

}  // namespace

TEST(TrajectoryQuality, NormalizedValues)
{
  EXPECT_DOUBLE_EQ(trajectory_quality(ContextVector({0.0, 1.0}), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(trajectory_quality(ContextVector({0.0, 0.0}), 1.0), 0.0);
  EXPECT_NEAR(trajectory_quality(ContextVector({1.0, 1.0}), 1.0), 0.6065306597126334, 1e-15);
  EXPECT_THROW(trajectory_quality(ContextVector({0.0, 1.0}), 0.0), InvalidParameter);
  EXPECT_THROW(trajectory_quality(ContextVector({0.0}), 1.0), InvalidParameter);
}

TEST(QualityFunction, HoelderCertificatesHold)
{
  expect_hoelder(QualityFunction::trajectory(1.0), 2, 1);
  expect_hoelder(QualityFunction::trajectory(0.4), 2, 2);
  expect_hoelder(QualityFunction::bumps(2, 4, 0.3, 0.05, 0.95, 7), 2, 3);
  expect_hoelder(QualityFunction::bumps(3, 6, 0.15, 0.1, 0.9, 8), 3, 4);
  expect_hoelder(QualityFunction::bumps(1, 2, 0.05, 0.0, 1.0, 9), 1, 5);
  expect_hoelder(QualityFunction::constant(0.5), 2, 6);
  TableQuality table;
  table.dim            = 2;
  table.nodes_per_axis = 3;
  table.values         = {0.1, 0.5, 0.2, 0.9, 0.3, 0.7, 0.0, 1.0, 0.4};
  expect_hoelder(QualityFunction(table), 2, 7);
}

TEST(QualityFunction, BumpFieldStaysInRange)
{
  const auto f = QualityFunction::bumps(2, 5, 0.2, 0.1, 0.8, 11);
  Rng rng(1);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i)
  {
    const double v = f(ContextVector({rng.uniform01(), rng.uniform01()}));
    lo             = std::min(lo, v);
    hi             = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.1);
  EXPECT_LE(hi, 0.8);
  // The rescaling should use most of the range.
  EXPECT_LT(lo, 0.2);
  EXPECT_GT(hi, 0.7);
}

TEST(QualityFunction, TableInterpolatesNodes)
{
  TableQuality table;
  table.dim            = 1;
  table.nodes_per_axis = 3;
  table.values         = {0.0, 1.0, 0.5};
  const QualityFunction f(table);
  EXPECT_DOUBLE_EQ(f(ContextVector({0.0})), 0.0);
  EXPECT_DOUBLE_EQ(f(ContextVector({0.25})), 0.5);
  EXPECT_DOUBLE_EQ(f(ContextVector({0.5})), 1.0);
  EXPECT_DOUBLE_EQ(f(ContextVector({1.0})), 0.5);
  table.values = {0.0, 1.0};
  EXPECT_THROW((QualityFunction(table)), InvalidParameter);
}

TEST(SampleReward, Extremes)
{
  Rng rng(3);
  Worker zero, one;
  zero.quality = 0.0;
  one.quality  = 1.0;
  for (int i = 0; i < 1000; ++i)
  {
    EXPECT_EQ(sample_reward(zero, rng), 0);
    EXPECT_EQ(sample_reward(one, rng), 1);
  }
}

TEST(SampleReward, EmpiricalMeanWithinHoeffdingBand)
{
  Rng rng(42);
  Worker w;
  w.quality = 0.3;
  int sum   = 0;
  for (int i = 0; i < 100000; ++i)
  {
    sum += sample_reward(w, rng);
  }
  EXPECT_NEAR(sum / 1e5, 0.3, 0.01);
}

TEST(GenerateOfflinePool, DeterministicAndWithinSpec)
{
  PoolSpec spec;
  spec.n   = 500;
  spec.dim = 2;
  const auto f = QualityFunction::bumps(2, 4, 0.3, 0.05, 0.95, 1);
  const auto a = generate_offline_pool(spec, f, 9);
  const auto b = generate_offline_pool(spec, f, 9);
  const auto c = generate_offline_pool(spec, f, 10);
  EXPECT_EQ(a.workers(), b.workers());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    const auto &w = a.workers()[i];
    EXPECT_EQ(w.id, i);
    EXPECT_GE(w.cost, 0.2);
    EXPECT_LE(w.cost, 1.0);
    EXPECT_EQ(w.bid, w.cost);
    EXPECT_DOUBLE_EQ(w.quality, f(w.context));
  }
}

TEST(GenerateOfflinePool, StrategicBidsLieAboveCost)
{
  PoolSpec spec;
  spec.n        = 300;
  spec.bid_mode = BidMode::strategic;
  const auto pool = generate_offline_pool(spec, QualityFunction::constant(0.5), 4);
  bool any_above  = false;
  for (const auto &w : pool.workers())
  {
    EXPECT_GE(w.bid, w.cost);
    EXPECT_LE(w.bid, 1.0);
    any_above = any_above || w.bid > w.cost;
  }
  EXPECT_TRUE(any_above);
}

TEST(GenerateOfflinePool, SingleConstantWorker)
{
  PoolSpec spec;
  spec.n = 1;
  const auto pool = generate_offline_pool(spec, QualityFunction::constant(0.5), 1);
  ASSERT_EQ(pool.size(), 1U);
  EXPECT_EQ(pool.workers()[0].quality, 0.5);
}

TEST(GenerateOfflinePool, RejectsEmptyRanges)
{
  PoolSpec spec;
  spec.cost_min = 0.8;
  spec.cost_max = 0.2;
  EXPECT_THROW(generate_offline_pool(spec, QualityFunction::constant(0.5), 1), InvalidParameter);
  spec = PoolSpec{};
  spec.n = 0;
  EXPECT_THROW(generate_offline_pool(spec, QualityFunction::constant(0.5), 1), InvalidParameter);
}

TEST(OfflinePool, RejectsDuplicateIdsAndDimensionMismatch)
{
  Worker a;
  a.id      = 1;
  a.context = ContextVector({0.5, 0.5});
  a.cost = a.bid = 0.5;
  Worker b = a;
  EXPECT_THROW(OfflinePool({a, b}, 2), InvalidParameter);
  b.id = 2;
  EXPECT_NO_THROW(OfflinePool({a, b}, 2));
  EXPECT_THROW(OfflinePool({a, b}, 3), InvalidParameter);
}

TEST(OfflinePool, WithBidChangesOnlyThatWorker)
{
  PoolSpec spec;
  spec.n           = 10;
  const auto pool  = generate_offline_pool(spec, QualityFunction::constant(0.5), 2);
  const auto moved = pool.with_bid(3, 0.99);
  for (std::size_t i = 0; i < pool.size(); ++i)
  {
    EXPECT_EQ(moved.workers()[i].bid, i == 3 ? 0.99 : pool.workers()[i].bid);
    EXPECT_EQ(moved.workers()[i].cost, pool.workers()[i].cost);
  }
  EXPECT_THROW(pool.with_bid(77, 0.5), InvalidParameter);
}

TEST(SyntheticArrivals, DeterministicSlotsWithFreshIds)
{
  PoolSpec spec;
  const SyntheticArrivals arrivals(spec, 50, QualityFunction::constant(0.4), 5);
  const auto s3 = arrivals.slot(3);
  EXPECT_EQ(s3, arrivals.slot(3));
  ASSERT_EQ(s3.size(), 50U);
  EXPECT_EQ(s3.front().id, 100U);
  EXPECT_EQ(s3.back().id, 149U);
  EXPECT_NE(s3.front().context, arrivals.slot(4).front().context);
  EXPECT_TRUE(arrivals.slot(0).empty());
}

TEST(SyntheticArrivals, PersistentPopulationSamplesDistinctWorkers)
{
  PoolSpec spec;
  const SyntheticArrivals arrivals(spec, 20, QualityFunction::constant(0.4), 5, 8, 60);
  EXPECT_EQ(arrivals.horizon(), std::optional<std::uint64_t>(8));
  for (std::uint64_t t = 1; t <= 8; ++t)
  {
    const auto slot = arrivals.slot(t);
    ASSERT_EQ(slot.size(), 20U);
    for (std::size_t i = 1; i < slot.size(); ++i)
    {
      EXPECT_LT(slot[i - 1].id, slot[i].id);
      EXPECT_LT(slot[i].id, 60U);
    }
  }
  EXPECT_TRUE(arrivals.slot(9).empty());
}

TEST(RewardSource, ReplaysRecordedFeedbackWithoutReplacement)
{
  Worker w;
  w.id               = 4;
  w.quality          = 0.5;
  w.recorded_rewards = {1, 1, 0, 1};
  RewardSource source(3);
  int sum = 0;
  for (int i = 0; i < 4; ++i)
  {
    sum += source.draw(w);
  }
  EXPECT_EQ(sum, 3);
  EXPECT_EQ(source.replay_exhausted(), 0U);
  source.draw(w);
  EXPECT_EQ(source.replay_exhausted(), 1U);
}
