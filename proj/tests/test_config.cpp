#include <gtest/gtest.h>

#include <fstream>

#include "caci/config.hpp"

using namespace caci;
using nlohmann::json;

namespace {

std::string error_path(const json &j)
{
  try
  {
    parse_experiment_config(j);
  }
  catch (const ConfigError &e)
  {
    return e.path();
  }
  return "<no error>";
}

json minimal() { return json{{"mechanisms", {"caci"}}}; }

}  // namespace

TEST(Config, Defaults)
{
  const auto cfg = parse_experiment_config(minimal());
  EXPECT_EQ(cfg.mode, Mode::offline);
  EXPECT_EQ(cfg.budget, 1e4);
  EXPECT_EQ(cfg.trials, 1U);
  EXPECT_EQ(cfg.auction.k, 1U);
  EXPECT_EQ(cfg.auction.b_min, 0.2);
  EXPECT_EQ(cfg.auction.b_max, 1.0);
  EXPECT_TRUE(cfg.points.empty());
}

TEST(Config, FullDocument)
{
  const json j = {
    {"mode", "online"},
    {"mechanisms", {"baseline", "caci", "eps_first"}},
    {"epsilon", {0.3, 0.5}},
    {"population",
     {{"type", "synthetic"},
      {"workers_per_slot", 150},
      {"dim", 3},
      {"quality", {{"type", "bumps"}, {"alpha", 3.5}, {"seed", 9}}}}},
    {"auction", {{"k", 10}, {"granularity", 4}, {"horizon", 500}}},
    {"sweep", {{"axis", "budget"}, {"from", 1e4}, {"to", 2e4}, {"step", 5e3}}},
    {"trials", 5},
    {"seed", 77},
  };
  const auto cfg = parse_experiment_config(j);
  EXPECT_EQ(cfg.mode, Mode::online);
  ASSERT_EQ(cfg.mechanisms.size(), 4U);
  EXPECT_EQ(cfg.mechanisms[2].label(), "eps_first_0.3");
  EXPECT_EQ(cfg.mechanisms[3].label(), "eps_first_0.5");
  EXPECT_EQ(cfg.population.workers_per_slot, 150U);
  EXPECT_EQ(cfg.population.dim, 3U);
  EXPECT_EQ(*cfg.population.quality.alpha, 3.5);
  EXPECT_EQ(cfg.hoelder_for(3).alpha, 3.5);
  EXPECT_EQ(cfg.auction.k, 10U);
  EXPECT_EQ(*cfg.auction.granularity, 4U);
  EXPECT_EQ(*cfg.auction.horizon, 500U);
  EXPECT_EQ(cfg.points, (std::vector<double>{1e4, 1.5e4, 2e4}));
  EXPECT_EQ(cfg.trials, 5U);
  EXPECT_EQ(cfg.seed, 77U);
}

TEST(Config, ErrorsNameTheKey)
{
  auto j = minimal();
  j["budgett"] = 5;
  EXPECT_EQ(error_path(j), "budgett");
  j = minimal();
  j["population"] = {{"dim", 0}};
  EXPECT_EQ(error_path(j), "population.dim");
  j = minimal();
  j["auction"] = {{"k", -1}};
  EXPECT_EQ(error_path(j), "auction.k");
  j = minimal();
  j["population"] = {{"quality", {{"sigmaa", 1}}}};
  EXPECT_EQ(error_path(j), "population.quality.sigmaa");
  j = minimal();
  j["budget"] = 1.0;
  EXPECT_EQ(error_path(j), "budget");
  j = minimal();
  j["sweep"] = {{"values", {1e4, 0.5}}};
  EXPECT_EQ(error_path(j), "sweep.values");
  j = minimal();
  j["mode"] = "batch";
  EXPECT_EQ(error_path(j), "mode");
  j = json{{"mode", "online"}, {"mechanisms", {"cmab"}}};
  EXPECT_EQ(error_path(j), "mechanisms");
  j = json{{"mechanisms", json::array()}};
  EXPECT_EQ(error_path(j), "mechanisms");
  j = minimal();
  j["population"] = {{"cost_min", 0.1}};
  EXPECT_EQ(error_path(j), "population.cost_min");
  j = minimal();
  j["population"] = {{"type", "csv"}};
  EXPECT_EQ(error_path(j), "population.csv_path");
  j = minimal();
  j["epsilon"] = 1.0;
  EXPECT_EQ(error_path(j), "epsilon");
}

TEST(Config, NullMeansDefault)
{
  const json j   = {{"mechanisms", {"caci"}},
                    {"auction", {{"granularity", nullptr}, {"horizon", nullptr}}},
                    {"population", {{"horizon", nullptr}, {"quality", {{"L", nullptr}}}}}};
  const auto cfg = parse_experiment_config(j);
  EXPECT_FALSE(cfg.auction.granularity.has_value());
  EXPECT_FALSE(cfg.population.horizon.has_value());
  EXPECT_FALSE(cfg.population.quality.L.has_value());
}

TEST(Config, DimErrorMessage)
{
  auto j          = minimal();
  j["population"] = {{"dim", 0}};
  try
  {
    parse_experiment_config(j);
    FAIL();
  }
  catch (const ConfigError &e)
  {
    EXPECT_NE(std::string(e.what()).find("context dimension M must be at least 1"), std::string::npos);
  }
}

TEST(Config, ResolvedJsonRoundTrips)
{
  const json j = {{"mechanisms", {"baseline", "caci", "cmab", "eps_first_0.4"}},
                  {"population", {{"n", 500}, {"quality", {{"type", "trajectory"}, {"sigma", 2.0}}}}},
                  {"auction", {{"k", 7}}},
                  {"sweep", {{"axis", "budget"}, {"values", {2e3, 4e3}}}},
                  {"trials", 2}};
  const auto cfg  = parse_experiment_config(j);
  const auto doc  = to_json(cfg);
  const auto back = parse_experiment_config(doc);
  EXPECT_EQ(to_json(back), doc);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  auto changed      = cfg;
  changed.auction.k = 8;
  EXPECT_NE(config_hash(changed), config_hash(cfg));
}

TEST(Config, LoadFileErrors)
{
  const std::string path = ::testing::TempDir() + "caci_bad.json";
  {
    std::ofstream(path) << "{ \"mechanisms\": [\"caci\" ";
  }
  EXPECT_THROW(load_experiment_config(path), ConfigError);
  EXPECT_THROW(load_experiment_config(path + ".missing"), ConfigError);
  {
    std::ofstream(path) << "{ \"mechanisms\": [\"caci\"], \"budget\": 5000 }";
  }
  EXPECT_EQ(load_experiment_config(path).budget, 5000.0);
}
