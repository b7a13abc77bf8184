#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "caci/mechanisms.hpp"

using namespace caci;

namespace {

Worker make_worker(std::uint64_t id, std::vector<double> ctx, double cost, double quality)
{
  Worker w;
  w.id      = id;
  w.context = ContextVector(std::move(ctx));
  w.cost    = cost;
  w.bid     = cost;
  w.quality = quality;
  return w;
}

OfflinePool random_pool(std::size_t n, std::uint64_t seed, std::size_t dim = 2)
{
  PoolSpec spec;
  spec.n   = n;
  spec.dim = dim;
  return generate_offline_pool(spec, QualityFunction::bumps(dim, 4, 0.3, 0.05, 0.95, 3), seed);
}

MechanismConfig config_k(std::size_t k)
{
  MechanismConfig c;
  c.k = k;
  return c;
}

}  // namespace

TEST(ExploreBudget, CalculatorOracles)
{
  EXPECT_NEAR(explore_budget(1e5, 1.0, 1.0, 10, 2), 22580.240557308705, 1e-6);
  EXPECT_NEAR(explore_budget(std::numbers::e, 1.0, 1.0, 1, 1), 1.9477340410546757, 1e-12);
}

TEST(ExploreBudget, ClampsToBudgetAndRejectsSmallBudgets)
{
  EXPECT_EQ(explore_budget(50.0, 1.0, 1.0, 10, 2), 50.0);
  EXPECT_THROW(explore_budget(1.0, 1.0, 1.0, 10, 2), InvalidParameter);
  EXPECT_THROW(explore_budget(0.5, 1.0, 1.0, 10, 2), InvalidParameter);
}

TEST(ExploreBudget, MuMaxShrinksOrGrowsAsCubeRoot)
{
  const double a = explore_budget(1e6, 1.0, 1.0, 5, 2);
  const double b = explore_budget(1e6, 1.0, 0.5, 5, 2);
  EXPECT_NEAR(b / a, std::cbrt(4.0), 1e-12);
}

TEST(Ucb, OfflineHandArithmetic)
{
  BanditState s(2);
  for (int i = 0; i < 100; ++i)
  {
    s.update(0, i % 2);
  }
  EXPECT_NEAR(ucb_offline(s, HypercubeId{0}, std::exp(100.0)), 1.5, 1e-12);
  EXPECT_TRUE(std::isinf(ucb_offline(s, HypercubeId{1}, 10.0)));
}

TEST(Ucb, OnlineHandArithmetic)
{
  BanditState s(1);
  for (int i = 0; i < 40; ++i)
  {
    s.update(0, i < 20 ? 1 : 0);
  }
  // (K+1) ln t / lambda with K = 3, t = 9, lambda = 40.
  EXPECT_NEAR(ucb_online(s, HypercubeId{0}, 9, 3), 0.5 + std::sqrt(4.0 * std::log(9.0) / 40.0), 1e-14);
  EXPECT_THROW(ucb_online(s, HypercubeId{0}, 9, 0), InvalidParameter);
  BanditState empty(1);
  EXPECT_TRUE(std::isinf(ucb_online(empty, HypercubeId{0}, 5, 2)));
}

TEST(Ucb, BonusVanishesWithManyPulls)
{
  BanditState s(1);
  for (int i = 0; i < 1000000; ++i)
  {
    s.update(0, 1);
  }
  EXPECT_NEAR(ucb_offline(s, HypercubeId{0}, 100.0), 1.0, 0.003);
  EXPECT_GE(ucb_offline(s, HypercubeId{0}, 100.0), s.mean(0));
}

TEST(BaselineOffline, HandSimulation)
{
  const OfflinePool pool({make_worker(0, {0.1}, 0.5, 0.9), make_worker(1, {0.2}, 0.5, 0.8),
                          make_worker(2, {0.3}, 0.5, 0.5)},
                         1);
  const auto trace = run_baseline_offline(pool, config_k(1), 10.0, 1);
  EXPECT_EQ(trace.slots_executed, 17U);
  for (const auto &slot : trace.slots)
  {
    ASSERT_EQ(slot.selections.size(), 1U);
    EXPECT_EQ(slot.selections[0].id, 0U);
    EXPECT_DOUBLE_EQ(slot.selections[0].payment, 0.5625);
  }
  EXPECT_NEAR(trace.reward_expected, 17 * 0.9, 1e-12);
  EXPECT_NEAR(trace.residual, 10.0 - 17 * 0.5625, 1e-12);
}

TEST(BaselineOffline, TooSmallBudgetRunsNothing)
{
  const OfflinePool pool({make_worker(0, {0.1}, 0.5, 0.9), make_worker(1, {0.2}, 0.5, 0.8)}, 1);
  const auto trace = run_baseline_offline(pool, config_k(1), 0.5, 1);
  EXPECT_EQ(trace.slots_executed, 0U);
  EXPECT_TRUE(trace.slots.empty());
}

TEST(BaselineOffline, SymmetricPoolPicksFirstIdsAndPaysBid)
{
  std::vector<Worker> ws;
  for (std::uint64_t i = 0; i < 6; ++i)
  {
    ws.push_back(make_worker(i, {0.5}, 0.4, 0.7));
  }
  const auto trace = run_baseline_offline(OfflinePool(ws, 1), config_k(3), 5.0, 1);
  ASSERT_FALSE(trace.slots.empty());
  for (std::size_t j = 0; j < 3; ++j)
  {
    EXPECT_EQ(trace.slots[0].selections[j].id, j);
    EXPECT_DOUBLE_EQ(trace.slots[0].selections[j].payment, 0.4);
  }
}

TEST(BaselineOffline, InsufficientCompetition)
{
  const OfflinePool pool({make_worker(0, {0.1}, 0.5, 0.9)}, 1);
  EXPECT_THROW(run_baseline_offline(pool, config_k(1), 10.0, 1), InsufficientCompetition);
}

TEST(Mechanisms, RejectBidsOutsideBounds)
{
  const OfflinePool pool({make_worker(0, {0.1}, 0.1, 0.9), make_worker(1, {0.2}, 0.5, 0.8)}, 1);
  EXPECT_THROW(run_baseline_offline(pool, config_k(1), 10.0, 1), InvalidParameter);
}

TEST(CaciOffline, ExplorationAccountingAndRoundRobinFairness)
{
  const auto pool = random_pool(3000, 5);
  MechanismConfig cfg = config_k(10);
  const double budget = 2e4;
  const auto ex       = run_caci_exploration(pool, cfg, budget, 9);
  const auto slots    = static_cast<std::uint64_t>(std::floor(ex.explore_budget / (10 * cfg.b_max)));
  EXPECT_EQ(ex.slots, slots);
  EXPECT_EQ(ex.state.total_pulls(), 10 * slots);
  const double fair = static_cast<double>(10 * slots) / static_cast<double>(ex.state.cells());
  for (std::uint64_t q = 0; q < ex.state.cells(); ++q)
  {
    EXPECT_LE(std::abs(static_cast<double>(ex.state.pulls(q)) - fair), 1.0) << "cube " << q;
  }
}

TEST(CaciOffline, PhasesAndPaymentBounds)
{
  const auto pool     = random_pool(2000, 6);
  const auto trace    = run_caci_offline(pool, config_k(8), 1.5e4, 3);
  bool saw_exploit    = false;
  std::uint64_t explore_slots = 0;
  for (const auto &slot : trace.slots)
  {
    ASSERT_EQ(slot.selections.size(), 8U);
    for (const auto &sel : slot.selections)
    {
      const auto &w = pool.workers()[*pool.index_of(sel.id)];
      if (slot.phase == Phase::exploration)
      {
        EXPECT_EQ(sel.payment, 1.0);
      }
      else
      {
        EXPECT_GE(sel.payment, w.bid - 1e-12);
        EXPECT_LE(sel.payment, 1.0);
      }
    }
    if (slot.phase == Phase::exploration)
    {
      EXPECT_FALSE(saw_exploit) << "exploration after exploitation";
      ++explore_slots;
    }
    else
    {
      saw_exploit = true;
    }
  }
  EXPECT_TRUE(saw_exploit);
  EXPECT_EQ(explore_slots, static_cast<std::uint64_t>(std::floor(trace.explore_budget / 8.0)));
  EXPECT_EQ(trace.granularity, compute_granularity(1.5e4, {1.0, 1.0}, 2));
  EXPECT_LE(trace.budget_spent, 1.5e4);
}

TEST(CaciOffline, ExploitationSetIsFrozen)
{
  const auto trace = run_caci_offline(random_pool(1500, 7), config_k(5), 1e4, 2);
  std::vector<std::uint64_t> first;
  for (const auto &slot : trace.slots)
  {
    if (slot.phase != Phase::exploitation)
      continue;
    std::vector<std::uint64_t> ids;
    for (const auto &sel : slot.selections)
      ids.push_back(sel.id);
    if (first.empty())
      first = ids;
    EXPECT_EQ(ids, first);
  }
  EXPECT_FALSE(first.empty());
}

TEST(CaciOffline, SingleCubeExploitationRanksByBid)
{
  MechanismConfig cfg = config_k(3);
  cfg.granularity     = 1;
  const auto pool     = random_pool(50, 8);
  const auto trace    = run_caci_offline(pool, cfg, 500.0, 4);
  std::vector<std::pair<double, std::uint64_t>> by_bid;
  for (const auto &w : pool.workers())
    by_bid.emplace_back(w.bid, w.id);
  std::sort(by_bid.begin(), by_bid.end());
  const auto &last = trace.slots.back();
  ASSERT_EQ(last.phase, Phase::exploitation);
  for (std::size_t j = 0; j < 3; ++j)
  {
    EXPECT_EQ(last.selections[j].id, by_bid[j].second);
  }
}

TEST(CaciOffline, EmptyCubesAreSkippedAndCounted)
{
  // Workers only in the left half of [0,1]: half of the 2x2 cubes are empty.
  std::vector<Worker> ws;
  for (std::uint64_t i = 0; i < 40; ++i)
  {
    ws.push_back(make_worker(i, {0.01 * static_cast<double>(i % 40), 0.025 * static_cast<double>(i)}, 0.5, 0.5));
  }
  MechanismConfig cfg = config_k(2);
  cfg.granularity     = 2;
  const auto trace    = run_caci_offline(OfflinePool(ws, 2), cfg, 300.0, 1);
  EXPECT_GT(trace.empty_cube_skips, 0U);
  EXPECT_FALSE(trace.diagnostics.empty());
  for (const auto &slot : trace.slots)
    EXPECT_EQ(slot.selections.size(), 2U);
}

TEST(CaciOffline, TinyBudgetGivesEmptyTrace)
{
  const auto trace = run_caci_offline(random_pool(30, 1), config_k(2), 1.0, 1);
  EXPECT_EQ(trace.slots_executed, 0U);
  EXPECT_FALSE(trace.diagnostics.empty());
}

TEST(CmabIndividual, ClampedExplorationBurnsWholeBudget)
{
  // N = 3000 cells with B = 2000: B# clamps to B, so nothing is exploited.
  const auto trace = run_cmab_individual(random_pool(3000, 2), config_k(10), 2000.0, 1);
  EXPECT_EQ(trace.explore_budget, 2000.0);
  for (const auto &slot : trace.slots)
    EXPECT_EQ(slot.phase, Phase::exploration);
  EXPECT_EQ(trace.slots_executed, 200U);
}

TEST(CmabIndividual, GenerousBudgetCoversEveryWorker)
{
  const auto pool  = random_pool(3, 3);
  const auto trace = run_cmab_individual(pool, config_k(1), 1e4, 1);
  std::set<std::uint64_t> explored;
  for (const auto &slot : trace.slots)
    if (slot.phase == Phase::exploration)
      explored.insert(slot.selections[0].id);
  EXPECT_EQ(explored.size(), 3U);
}

TEST(CmabIndividual, EqualsCaciOnOneWorkerPerCubeGrid)
{
  for (std::uint64_t seed = 0; seed < 5; ++seed)
  {
    const std::size_t n = 40;
    std::vector<Worker> ws;
    Rng rng(seed);
    for (std::uint64_t i = 0; i < n; ++i)
    {
      const double c = rng.uniform(0.2, 1.0);
      ws.push_back(make_worker(i, {(static_cast<double>(i) + 0.5) / n}, c, rng.uniform01()));
    }
    const OfflinePool pool(ws, 1);
    MechanismConfig cfg = config_k(3);
    auto cmab           = run_cmab_individual(pool, cfg, 3000.0, seed);
    cfg.granularity     = n;
    auto caci           = run_caci_offline(pool, cfg, 3000.0, seed);
    EXPECT_EQ(cmab.slots, caci.slots);
    EXPECT_EQ(cmab.reward_expected, caci.reward_expected);
  }
}

TEST(EpsilonFirstOffline, TinyEpsilonExploitsZeroMeansPayingBmax)
{
  MechanismConfig cfg = config_k(2);
  cfg.epsilon         = 1e-6;
  const auto trace    = run_epsilon_first_offline(random_pool(20, 4), cfg, 50.0, 1);
  ASSERT_FALSE(trace.slots.empty());
  for (const auto &slot : trace.slots)
  {
    EXPECT_EQ(slot.phase, Phase::exploitation);
    EXPECT_EQ(slot.selections[0].id, 0U);
    EXPECT_EQ(slot.selections[1].id, 1U);
    EXPECT_EQ(slot.selections[0].payment, 1.0);
  }
}

TEST(EpsilonFirstOffline, NearOneEpsilonIsAlmostPureExploration)
{
  MechanismConfig cfg = config_k(5);
  cfg.epsilon         = 0.999;
  const auto trace    = run_epsilon_first_offline(random_pool(500, 4), cfg, 5000.0, 1);
  std::uint64_t exploit = 0;
  for (const auto &slot : trace.slots)
    exploit += slot.phase == Phase::exploitation;
  EXPECT_LE(exploit, 5U);
  EXPECT_GE(trace.slots_executed, 999U);
}

TEST(EpsilonFirstOffline, SplitsBudget)
{
  MechanismConfig cfg = config_k(4);
  cfg.epsilon         = 0.3;
  const auto trace    = run_epsilon_first_offline(random_pool(800, 5), cfg, 4000.0, 2);
  double explore_spend = 0.0;
  for (const auto &slot : trace.slots)
    if (slot.phase == Phase::exploration)
      for (const auto &sel : slot.selections)
        explore_spend += sel.payment;
  EXPECT_LE(explore_spend, 0.3 * 4000.0);
  EXPECT_GT(explore_spend, 0.3 * 4000.0 - 4.0);
}

namespace {

class ConstantArrivals : public ArrivalProcess
{
public:
  ConstantArrivals(std::size_t per_slot, double bid, double quality, std::size_t short_slot = 0)
    : per_slot_(per_slot), bid_(bid), quality_(quality), short_slot_(short_slot)
  {}
  std::vector<Worker> slot(std::uint64_t t) const override
  {
    std::vector<Worker> out;
    const std::size_t n = t == short_slot_ ? 1 : per_slot_;
    for (std::size_t j = 0; j < n; ++j)
      out.push_back(make_worker(t * 1000 + j, {0.5, 0.5}, bid_, quality_));
    return out;
  }
  std::optional<std::uint64_t> horizon() const override { return std::nullopt; }
  std::size_t dim() const override { return 2; }
  std::uint64_t hash() const override { return 99; }

private:
  std::size_t per_slot_;
  double bid_, quality_;
  std::size_t short_slot_;
};

}  // namespace

TEST(CaciOnline, SingleCubeIdenticalWorkersPayTheBid)
{
  const ConstantArrivals arrivals(20, 0.4, 0.6);
  MechanismConfig cfg = config_k(5);
  cfg.granularity     = 1;
  const double budget = 100.0;
  const auto trace    = run_caci_online(arrivals, cfg, budget, 1);
  // Oracle: one b_max initialization pick, then K bids per slot while residual >= K b_max.
  double residual = budget - 1.0;
  std::uint64_t loops = 0;
  while (residual >= 5.0)
  {
    residual -= 5 * 0.4;
    ++loops;
  }
  ASSERT_EQ(trace.slots.size(), loops + 1);
  EXPECT_EQ(trace.slots[0].phase, Phase::init);
  EXPECT_EQ(trace.slots[0].selections.size(), 1U);
  for (std::size_t i = 1; i < trace.slots.size(); ++i)
  {
    ASSERT_EQ(trace.slots[i].selections.size(), 5U);
    for (const auto &sel : trace.slots[i].selections)
      EXPECT_DOUBLE_EQ(sel.payment, 0.4);
  }
  EXPECT_NEAR(trace.residual, residual, 1e-9);
}

TEST(CaciOnline, InitializationPaysBmaxPerPopulatedCube)
{
  PoolSpec spec;
  const SyntheticArrivals arrivals(spec, 200, QualityFunction::bumps(2, 4, 0.3, 0.05, 0.95, 1), 3);
  MechanismConfig cfg = config_k(10);
  cfg.granularity     = 3;
  const auto trace    = run_caci_online(arrivals, cfg, 2000.0, 5);
  ASSERT_FALSE(trace.slots.empty());
  EXPECT_EQ(trace.slots[0].phase, Phase::init);
  EXPECT_EQ(trace.slots[0].selections.size(), 9U);
  for (const auto &sel : trace.slots[0].selections)
    EXPECT_EQ(sel.payment, 1.0);
  EXPECT_LT(trace.residual, 10.0);
}

TEST(CaciOnline, StopsWhenResidualBelowKBmax)
{
  const ConstantArrivals arrivals(20, 0.4, 0.6);
  MechanismConfig cfg = config_k(5);
  cfg.granularity     = 1;
  const auto trace    = run_caci_online(arrivals, cfg, 5.5, 1);
  EXPECT_EQ(trace.slots.size(), 1U);  // init only: 5.5 - 1 < 5
}

TEST(OnlineMechanisms, SkipSlotsWithoutCompetition)
{
  const ConstantArrivals arrivals(8, 0.5, 0.5, 2);
  MechanismConfig cfg = config_k(3);
  cfg.granularity     = 1;
  cfg.horizon         = 6;
  for (const auto &trace : {run_baseline_online(arrivals, cfg, 100.0, 1), run_caci_online(arrivals, cfg, 100.0, 1),
                            run_epsilon_first_online(arrivals, cfg, 100.0, 1)})
  {
    EXPECT_GE(trace.skipped_slots, 1U) << trace.mechanism;
    for (const auto &slot : trace.slots)
    {
      EXPECT_NE(slot.slot, 2U) << trace.mechanism;
      if (slot.phase != Phase::init)
      {
        EXPECT_EQ(slot.selections.size(), 3U);
      }
    }
  }
}

TEST(BaselineOnline, MirrorsOfflineArithmeticPerSlot)
{
  const ConstantArrivals arrivals(4, 0.5, 0.8);
  MechanismConfig cfg = config_k(2);
  cfg.horizon         = 3;
  const auto trace    = run_baseline_online(arrivals, cfg, 100.0, 1);
  ASSERT_EQ(trace.slots.size(), 3U);
  for (const auto &slot : trace.slots)
    for (const auto &sel : slot.selections)
      EXPECT_DOUBLE_EQ(sel.payment, 0.5);
  EXPECT_NEAR(trace.reward_expected, 3 * 2 * 0.8, 1e-12);
}

TEST(Mechanisms, DeterministicTraceBytes)
{
  const auto pool = random_pool(600, 9);
  const auto a    = run_caci_offline(pool, config_k(6), 8000.0, 17);
  const auto b    = run_caci_offline(pool, config_k(6), 8000.0, 17);
  const auto c    = run_caci_offline(pool, config_k(6), 8000.0, 18);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_NE(a.serialize(), c.serialize());
}

TEST(MechanismConfig, Validation)
{
  MechanismConfig c;
  c.k = 0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c       = MechanismConfig{};
  c.b_min = 0.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c        = MechanismConfig{};
  c.mu_max = 1.5;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c         = MechanismConfig{};
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
}
