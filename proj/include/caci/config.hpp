#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "caci/error.hpp"
#include "caci/hash.hpp"
#include "caci/simulation.hpp"

namespace caci {

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string &base, const std::string &key)
{
  return base.empty() ? key : base + "." + key;
}

/// Present and not null; a null value means "use the default".
inline bool has(const json &obj, const char *key) { return obj.contains(key) && !obj.at(key).is_null(); }

inline void reject_unknown(const json &obj, const std::string &path, std::initializer_list<const char *> allowed)
{
  if (!obj.is_object())
  {
    throw ConfigError(path, "expected an object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto &[key, value] : obj.items())
  {
    if (!keys.count(key))
    {
      throw ConfigError(join_path(path, key), "unknown key");
    }
  }
}

inline double get_number(const json &obj, const std::string &path, const char *key, double fallback)
{
  if (!detail::has(obj, key))
  {
    return fallback;
  }
  const auto &v = obj.at(key);
  if (!v.is_number())
  {
    throw ConfigError(join_path(path, key), "expected a number");
  }
  return v.get<double>();
}

inline std::uint64_t get_count(const json &obj, const std::string &path, const char *key, std::uint64_t fallback)
{
  if (!detail::has(obj, key))
  {
    return fallback;
  }
  const auto &v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
  {
    throw ConfigError(join_path(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json &obj, const std::string &path, const char *key, std::string fallback)
{
  if (!detail::has(obj, key))
  {
    return fallback;
  }
  const auto &v = obj.at(key);
  if (!v.is_string())
  {
    throw ConfigError(join_path(path, key), "expected a string");
  }
  return v.get<std::string>();
}

inline bool get_bool(const json &obj, const std::string &path, const char *key, bool fallback)
{
  if (!detail::has(obj, key))
  {
    return fallback;
  }
  const auto &v = obj.at(key);
  if (!v.is_boolean())
  {
    throw ConfigError(join_path(path, key), "expected true or false");
  }
  return v.get<bool>();
}

inline QualitySpec parse_quality(const json &q, const std::string &path)
{
  reject_unknown(q, path, {"type", "sigma", "L", "alpha", "bumps", "width", "mu_min", "mu_max", "value", "seed"});
  QualitySpec s;
  const auto type = get_string(q, path, "type", "bumps");
  if (type == "bumps")
    s.type = QualityKind::bumps;
  else if (type == "trajectory")
    s.type = QualityKind::trajectory;
  else if (type == "constant")
    s.type = QualityKind::constant;
  else
    throw ConfigError(join_path(path, "type"), "expected bumps, trajectory or constant");
  s.sigma  = get_number(q, path, "sigma", s.sigma);
  s.bumps  = get_count(q, path, "bumps", s.bumps);
  s.width  = get_number(q, path, "width", s.width);
  s.mu_min = get_number(q, path, "mu_min", s.mu_min);
  s.mu_max = get_number(q, path, "mu_max", s.mu_max);
  s.value  = get_number(q, path, "value", s.value);
  s.seed   = get_count(q, path, "seed", s.seed);
  if (detail::has(q, "L"))
    s.L = get_number(q, path, "L", 1.0);
  if (detail::has(q, "alpha"))
    s.alpha = get_number(q, path, "alpha", 1.0);
  if (!(s.sigma > 0.0))
    throw ConfigError(join_path(path, "sigma"), "must be positive");
  if (s.bumps < 1)
    throw ConfigError(join_path(path, "bumps"), "must be at least 1");
  if (!(s.width > 0.0))
    throw ConfigError(join_path(path, "width"), "must be positive");
  if (!(s.mu_min >= 0.0 && s.mu_max <= 1.0 && s.mu_min <= s.mu_max))
    throw ConfigError(join_path(path, "mu_min"), "need 0 <= mu_min <= mu_max <= 1");
  if (!(s.value >= 0.0 && s.value <= 1.0))
    throw ConfigError(join_path(path, "value"), "must lie in [0,1]");
  if (s.L && !(*s.L > 0.0))
    throw ConfigError(join_path(path, "L"), "must be positive");
  if (s.alpha && !(*s.alpha > 0.0))
    throw ConfigError(join_path(path, "alpha"), "must be positive");
  return s;
}

inline PopulationConfig parse_population(const json &p, const std::string &path)
{
  reject_unknown(p, path, {"type", "n", "dim", "workers_per_slot", "population_size", "horizon", "csv_path",
                           "normalize_context", "cost_min", "cost_max", "bid_mode", "quality"});
  PopulationConfig c;
  const auto type = get_string(p, path, "type", "synthetic");
  if (type == "synthetic")
    c.type = PopulationKind::synthetic;
  else if (type == "csv")
    c.type = PopulationKind::csv;
  else
    throw ConfigError(join_path(path, "type"), "expected synthetic or csv");
  c.n                 = get_count(p, path, "n", c.n);
  c.dim               = get_count(p, path, "dim", c.dim);
  c.workers_per_slot  = get_count(p, path, "workers_per_slot", c.workers_per_slot);
  c.population_size   = get_count(p, path, "population_size", c.population_size);
  if (detail::has(p, "horizon"))
    c.horizon = get_count(p, path, "horizon", 0);
  c.csv_path          = get_string(p, path, "csv_path", "");
  c.normalize_context = get_bool(p, path, "normalize_context", c.normalize_context);
  c.cost_min          = get_number(p, path, "cost_min", c.cost_min);
  c.cost_max          = get_number(p, path, "cost_max", c.cost_max);
  const auto bid_mode = get_string(p, path, "bid_mode", "truthful");
  if (bid_mode == "truthful")
    c.bid_mode = BidMode::truthful;
  else if (bid_mode == "strategic")
    c.bid_mode = BidMode::strategic;
  else
    throw ConfigError(join_path(path, "bid_mode"), "expected truthful or strategic");
  if (detail::has(p, "quality"))
    c.quality = parse_quality(p.at("quality"), join_path(path, "quality"));
  if (c.dim < 1)
    throw ConfigError(join_path(path, "dim"), "context dimension M must be at least 1");
  if (c.type == PopulationKind::csv && c.csv_path.empty())
    throw ConfigError(join_path(path, "csv_path"), "required for a csv population");
  if (c.type == PopulationKind::synthetic)
  {
    if (c.n < 1)
      throw ConfigError(join_path(path, "n"), "must be at least 1");
    if (c.workers_per_slot < 1)
      throw ConfigError(join_path(path, "workers_per_slot"), "must be at least 1");
    if (!(c.cost_min > 0.0 && c.cost_min <= c.cost_max))
      throw ConfigError(join_path(path, "cost_min"), "need 0 < cost_min <= cost_max");
    if (c.quality.type == QualityKind::trajectory && c.dim != 2)
      throw ConfigError(join_path(path, "dim"), "trajectory quality needs dim = 2");
    if (c.population_size > 0 && c.population_size < c.workers_per_slot)
      throw ConfigError(join_path(path, "population_size"), "must be at least workers_per_slot");
  }
  return c;
}

}  // namespace detail

/// Builds and validates an experiment description. Every violation is
/// reported as a ConfigError carrying the offending key path.
inline ExperimentConfig parse_experiment_config(const nlohmann::json &root)
{
  using detail::get_count;
  using detail::get_number;
  using detail::get_string;
  detail::reject_unknown(root, "", {"mode", "mechanisms", "epsilon", "budget", "population", "auction", "sweep",
                                    "trials", "seed", "resample_population"});
  ExperimentConfig cfg;
  const auto mode = get_string(root, "", "mode", "offline");
  if (mode == "offline")
    cfg.mode = Mode::offline;
  else if (mode == "online")
    cfg.mode = Mode::online;
  else
    throw ConfigError("mode", "expected offline or online");

  std::vector<double> eps_list;
  if (detail::has(root, "epsilon"))
  {
    const auto &e = root.at("epsilon");
    if (e.is_number())
      eps_list.push_back(e.get<double>());
    else if (e.is_array())
      for (const auto &v : e)
      {
        if (!v.is_number())
          throw ConfigError("epsilon", "expected numbers");
        eps_list.push_back(v.get<double>());
      }
    else
      throw ConfigError("epsilon", "expected a number or a list of numbers");
    for (double v : eps_list)
      if (!(v > 0.0 && v < 1.0))
        throw ConfigError("epsilon", "values must lie in (0, 1)");
  }
  if (!root.contains("mechanisms") || !root.at("mechanisms").is_array() || root.at("mechanisms").empty())
  {
    throw ConfigError("mechanisms", "expected a non-empty list of mechanism names");
  }
  for (const auto &m : root.at("mechanisms"))
  {
    if (!m.is_string())
      throw ConfigError("mechanisms", "expected mechanism names as strings");
    const auto name = m.get<std::string>();
    if (name == "eps_first" && !eps_list.empty())
    {
      for (double e : eps_list)
        cfg.mechanisms.push_back(MechanismSpec{MechanismKind::eps_first, e});
      continue;
    }
    cfg.mechanisms.push_back(MechanismSpec::parse(name, eps_list.empty() ? 0.3 : eps_list.front()));
    if (cfg.mode == Mode::online && cfg.mechanisms.back().kind == MechanismKind::cmab)
      throw ConfigError("mechanisms", "cmab is off-line only");
  }

  if (detail::has(root, "population"))
    cfg.population = detail::parse_population(root.at("population"), "population");

  if (detail::has(root, "auction"))
  {
    const auto &a = root.at("auction");
    detail::reject_unknown(a, "auction", {"k", "b_min", "b_max", "mu_max", "granularity", "horizon"});
    cfg.auction.k      = get_count(a, "auction", "k", cfg.auction.k);
    cfg.auction.b_min  = get_number(a, "auction", "b_min", cfg.auction.b_min);
    cfg.auction.b_max  = get_number(a, "auction", "b_max", cfg.auction.b_max);
    cfg.auction.mu_max = get_number(a, "auction", "mu_max", cfg.auction.mu_max);
    if (detail::has(a, "granularity"))
      cfg.auction.granularity = get_count(a, "auction", "granularity", 1);
    if (detail::has(a, "horizon"))
      cfg.auction.horizon = get_count(a, "auction", "horizon", 1);
  }
  if (!eps_list.empty())
    cfg.auction.epsilon = eps_list.front();
  if (cfg.auction.k < 1)
    throw ConfigError("auction.k", "K must be at least 1");
  if (!(cfg.auction.b_min > 0.0 && cfg.auction.b_min <= cfg.auction.b_max))
    throw ConfigError("auction.b_min", "need 0 < b_min <= b_max");
  if (!(cfg.auction.mu_max > 0.0 && cfg.auction.mu_max <= 1.0))
    throw ConfigError("auction.mu_max", "must lie in (0, 1]");
  if (cfg.auction.granularity && *cfg.auction.granularity < 1)
    throw ConfigError("auction.granularity", "must be at least 1");
  if (cfg.population.type == PopulationKind::synthetic)
  {
    if (cfg.population.cost_min < cfg.auction.b_min || cfg.population.cost_max > cfg.auction.b_max)
      throw ConfigError("population.cost_min", "cost range must lie inside [auction.b_min, auction.b_max]");
  }

  cfg.budget = get_number(root, "", "budget", cfg.budget);
  cfg.trials = get_count(root, "", "trials", cfg.trials);
  cfg.seed   = get_count(root, "", "seed", cfg.seed);
  cfg.resample_population = detail::get_bool(root, "", "resample_population", false);
  if (cfg.trials < 1)
    throw ConfigError("trials", "must be at least 1");

  if (detail::has(root, "sweep"))
  {
    const auto &s = root.at("sweep");
    detail::reject_unknown(s, "sweep", {"axis", "values", "from", "to", "step"});
    const auto axis = get_string(s, "sweep", "axis", "budget");
    if (axis == "budget")
      cfg.axis = SweepAxis::budget;
    else if (axis == "workers")
      cfg.axis = SweepAxis::workers;
    else if (axis == "epsilon")
      cfg.axis = SweepAxis::epsilon;
    else if (axis == "dimension")
      cfg.axis = SweepAxis::dimension;
    else
      throw ConfigError("sweep.axis", "expected budget, workers, epsilon or dimension");
    if (s.contains("values"))
    {
      if (!s.at("values").is_array() || s.at("values").empty())
        throw ConfigError("sweep.values", "expected a non-empty list of numbers");
      for (const auto &v : s.at("values"))
      {
        if (!v.is_number())
          throw ConfigError("sweep.values", "expected numbers");
        cfg.points.push_back(v.get<double>());
      }
    }
    else if (s.contains("from") && s.contains("to") && s.contains("step"))
    {
      const double from = get_number(s, "sweep", "from", 0.0);
      const double to   = get_number(s, "sweep", "to", 0.0);
      const double step = get_number(s, "sweep", "step", 0.0);
      if (!(step > 0.0) || !(from <= to))
        throw ConfigError("sweep.step", "need step > 0 and from <= to");
      const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
      for (std::size_t i = 0; i < count; ++i)
        cfg.points.push_back(from + step * static_cast<double>(i));
    }
    else
    {
      throw ConfigError("sweep.values", "give either values[] or from/to/step");
    }
  }

  std::vector<double> budgets = cfg.axis == SweepAxis::budget && !cfg.points.empty() ? cfg.points
                                                                                      : std::vector<double>{cfg.budget};
  for (double b : budgets)
  {
    if (!std::isfinite(b) || !(b > 1.0))
      throw ConfigError(cfg.axis == SweepAxis::budget && !cfg.points.empty() ? "sweep.values" : "budget",
                        "budget too small for exploration formula (need B > 1)");
  }
  for (double v : cfg.points)
  {
    if (cfg.axis == SweepAxis::epsilon && !(v > 0.0 && v < 1.0))
      throw ConfigError("sweep.values", "epsilon values must lie in (0, 1)");
    if ((cfg.axis == SweepAxis::workers || cfg.axis == SweepAxis::dimension) && !(v >= 1.0 && v == std::floor(v)))
      throw ConfigError("sweep.values", "expected positive integers");
  }
  if (cfg.axis == SweepAxis::dimension && cfg.population.quality.type == QualityKind::trajectory)
    throw ConfigError("sweep.axis", "trajectory quality is fixed to dim = 2");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("", "cannot read config file '" + path + "'");
  }
  nlohmann::json root;
  try
  {
    root = nlohmann::json::parse(in, nullptr, true, true);
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_experiment_config(root);
}

/// Fully resolved configuration with every default spelled out.
inline nlohmann::json to_json(const ExperimentConfig &cfg)
{
  nlohmann::json j;
  j["mode"] = mode_name(cfg.mode);
  j["mechanisms"] = nlohmann::json::array();
  for (const auto &m : cfg.mechanisms)
    j["mechanisms"].push_back(m.label());
  j["budget"] = cfg.budget;
  j["trials"] = cfg.trials;
  j["seed"]   = cfg.seed;
  j["resample_population"] = cfg.resample_population;
  const auto &p = cfg.population;
  auto &pj      = j["population"];
  pj["type"]              = p.type == PopulationKind::synthetic ? "synthetic" : "csv";
  pj["n"]                 = p.n;
  pj["dim"]               = p.dim;
  pj["workers_per_slot"]  = p.workers_per_slot;
  pj["population_size"]   = p.population_size;
  if (p.horizon)
    pj["horizon"] = *p.horizon;
  pj["csv_path"]          = p.csv_path;
  pj["normalize_context"] = p.normalize_context;
  pj["cost_min"]          = p.cost_min;
  pj["cost_max"]          = p.cost_max;
  pj["bid_mode"]          = p.bid_mode == BidMode::truthful ? "truthful" : "strategic";
  auto &q                 = pj["quality"];
  const char *qtype       = p.quality.type == QualityKind::bumps        ? "bumps"
                            : p.quality.type == QualityKind::trajectory ? "trajectory"
                                                                        : "constant";
  q["type"]   = qtype;
  q["sigma"]  = p.quality.sigma;
  q["bumps"]  = p.quality.bumps;
  q["width"]  = p.quality.width;
  q["mu_min"] = p.quality.mu_min;
  q["mu_max"] = p.quality.mu_max;
  q["value"]  = p.quality.value;
  q["seed"]   = p.quality.seed;
  const auto h = cfg.hoelder_for(p.dim);
  q["L"]       = h.L;
  q["alpha"]   = h.alpha;
  auto &a      = j["auction"];
  a["k"]       = cfg.auction.k;
  a["b_min"]   = cfg.auction.b_min;
  a["b_max"]   = cfg.auction.b_max;
  a["mu_max"]  = cfg.auction.mu_max;
  if (cfg.auction.granularity)
    a["granularity"] = *cfg.auction.granularity;
  if (cfg.auction.horizon)
    a["horizon"] = *cfg.auction.horizon;
  if (!cfg.points.empty())
  {
    j["sweep"]["axis"]   = axis_name(cfg.axis);
    j["sweep"]["values"] = cfg.points;
  }
  return j;
}

inline std::uint64_t config_hash(const ExperimentConfig &cfg)
{
  Hasher h;
  h.add(std::string_view(to_json(cfg).dump()));
  return h.value();
}

}  // namespace caci
