#include <gtest/gtest.h>

#include <sstream>

#include "caci/csv.hpp"

using namespace caci;

namespace {

IngestedPopulation parse(const std::string &text, IngestOptions opts = {})
{
  std::istringstream in(text);
  return parse_worker_csv(in, opts);
}

}  // namespace

TEST(WorkerCsv, ThreeRowPool)
{
  const auto pop = parse("id,cost,bid,ctx0,ctx1,quality\n"
                         "1,0.5,0.5,10,0,0.9\n"
                         "2,0.3,0.3,20,5,0.8\n"
                         "3,0.4,0.4,30,10,0.1\n");
  const auto &pool = std::get<OfflinePool>(pop);
  ASSERT_EQ(pool.size(), 3U);
  EXPECT_EQ(pool.dim(), 2U);
  EXPECT_EQ(pool.workers()[1].context, ContextVector({0.5, 0.5}));
  EXPECT_EQ(pool.workers()[2].context, ContextVector({1.0, 1.0}));
  EXPECT_DOUBLE_EQ(pool.workers()[0].quality, 0.9);
}

TEST(WorkerCsv, SlotColumnBuildsArrivalStream)
{
  const auto pop = parse("slot,id,cost,ctx0,quality\n"
                         "1,1,0.5,0.1,0.9\n"
                         "1,2,0.5,0.2,0.8\n"
                         "3,1,0.5,0.1,0.9\n");
  const auto &arrivals = std::get<RecordedArrivals>(pop);
  EXPECT_EQ(arrivals.horizon(), std::optional<std::uint64_t>(3));
  EXPECT_EQ(arrivals.slot(1).size(), 2U);
  EXPECT_TRUE(arrivals.slot(2).empty());
  EXPECT_EQ(arrivals.slot(3).size(), 1U);
}

TEST(WorkerCsv, TruthfulModeRejectsBidAboveCostNamingTheRow)
{
  try
  {
    parse("id,cost,bid,ctx0,quality\n1,0.5,0.5,0.1,0.9\n7,0.6,0.4,0.2,0.9\n");
    FAIL() << "expected a parse error";
  }
  catch (const ParseError &e)
  {
    EXPECT_EQ(e.line(), 3U);
    EXPECT_NE(std::string(e.what()).find("worker id 7"), std::string::npos);
  }
  IngestOptions strategic;
  strategic.truthful = false;
  EXPECT_THROW(parse("id,cost,bid,ctx0,quality\n7,0.6,0.4,0.2,0.9\n", strategic), ParseError);
  EXPECT_NO_THROW(parse("id,cost,bid,ctx0,quality\n7,0.4,0.6,0.2,0.9\n", strategic));
}

TEST(WorkerCsv, MalformedRowsReportLineNumbers)
{
  try
  {
    parse("id,cost,ctx0,quality\n1,0.5,0.1,0.9\n2,abc,0.1,0.9\n");
    FAIL();
  }
  catch (const ParseError &e)
  {
    EXPECT_EQ(e.line(), 3U);
  }
  EXPECT_THROW(parse("id,cost,ctx0,quality\n1,0.5,0.1\n"), ParseError);
  EXPECT_THROW(parse("id,cost,ctx0,ctx2,quality\n1,0.5,0.1,0.1,0.2\n"), ParseError);
  EXPECT_THROW(parse("id,cost,ctx0\n1,0.5,0.1\n"), ParseError);
  EXPECT_THROW(parse("id,ctx0,quality\n1,0.1,0.2\n"), ParseError);
  EXPECT_THROW(parse("id,cost,ctx0,weird\n1,0.5,0.1,0\n"), ParseError);
}

TEST(WorkerCsv, RepeatedRowsAggregateRewardsForReplay)
{
  const auto pop = parse("id,cost,ctx0,reward\n"
                         "1,0.5,0.1,1\n"
                         "1,0.5,0.1,0\n"
                         "1,0.5,0.1,1\n"
                         "2,0.4,0.9,0\n");
  const auto &pool = std::get<OfflinePool>(pop);
  ASSERT_EQ(pool.size(), 2U);
  EXPECT_EQ(pool.workers()[0].recorded_rewards.size(), 3U);
  EXPECT_NEAR(pool.workers()[0].quality, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(pool.workers()[1].quality, 0.0);
  EXPECT_THROW(parse("id,cost,ctx0,reward\n1,0.5,0.1,1\n1,0.6,0.1,0\n"), ParseError);
}

TEST(WorkerCsv, PoolRoundTripsWithoutLoss)
{
  PoolSpec spec;
  spec.n          = 200;
  spec.dim        = 3;
  const auto pool = generate_offline_pool(spec, QualityFunction::bumps(3, 3, 0.3, 0.1, 0.9, 2), 5);
  IngestOptions opts;
  opts.normalize_context = false;
  const auto back        = parse(pool_to_csv(pool), opts);
  EXPECT_EQ(std::get<OfflinePool>(back).workers(), pool.workers());
  EXPECT_EQ(std::get<OfflinePool>(back).hash(), pool.hash());
}

TEST(WorkerCsv, VerbatimContextsMustBeInRange)
{
  IngestOptions opts;
  opts.normalize_context = false;
  EXPECT_THROW(parse("id,cost,ctx0,quality\n1,0.5,3.0,0.9\n", opts), ParseError);
}
