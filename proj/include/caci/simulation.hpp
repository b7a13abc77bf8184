#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "caci/csv.hpp"
#include "caci/error.hpp"
#include "caci/mechanisms.hpp"
#include "caci/population.hpp"
#include "caci/quality.hpp"

namespace caci {

enum class Mode
{
  offline,
  online,
};

inline const char *mode_name(Mode m) { return m == Mode::offline ? "offline" : "online"; }

enum class MechanismKind
{
  baseline,
  caci,
  cmab,
  eps_first,
};

struct MechanismSpec
{
  MechanismKind kind = MechanismKind::caci;
  double epsilon     = 0.3;

  std::string label() const
  {
    switch (kind)
    {
    case MechanismKind::baseline:
      return "baseline";
    case MechanismKind::caci:
      return "caci";
    case MechanismKind::cmab:
      return "cmab";
    case MechanismKind::eps_first:
      break;
    }
    char buf[48];
    std::snprintf(buf, sizeof buf, "eps_first_%g", epsilon);
    return buf;
  }

  /// Accepts baseline, caci, cmab (or cmab_individual), eps_first and
  /// eps_first_<epsilon>.
  static MechanismSpec parse(const std::string &name, double default_epsilon = 0.3)
  {
    if (name == "baseline")
      return {MechanismKind::baseline, default_epsilon};
    if (name == "caci")
      return {MechanismKind::caci, default_epsilon};
    if (name == "cmab" || name == "cmab_individual")
      return {MechanismKind::cmab, default_epsilon};
    if (name == "eps_first")
      return {MechanismKind::eps_first, default_epsilon};
    const std::string prefix = "eps_first_";
    if (name.rfind(prefix, 0) == 0)
    {
      const std::string tail = name.substr(prefix.size());
      char *end              = nullptr;
      const double eps       = std::strtod(tail.c_str(), &end);
      if (!tail.empty() && end == tail.c_str() + tail.size() && eps > 0.0 && eps < 1.0)
      {
        return {MechanismKind::eps_first, eps};
      }
    }
    throw ConfigError("mechanisms", "unknown mechanism '" + name + "'");
  }
};

using Population = std::variant<std::shared_ptr<const OfflinePool>, std::shared_ptr<const ArrivalProcess>>;

inline Mode population_mode(const Population &p)
{
  return std::holds_alternative<std::shared_ptr<const OfflinePool>>(p) ? Mode::offline : Mode::online;
}

inline std::uint64_t population_hash(const Population &p)
{
  return std::visit([](const auto &ptr) { return ptr->hash(); }, p);
}

inline std::size_t population_dim(const Population &p)
{
  return std::visit([](const auto &ptr) { return ptr->dim(); }, p);
}

/// Dispatches to the mechanism runner matching the spec and population kind.
inline ExperimentTrace run_trial(const MechanismSpec &spec, const Population &population,
                                 const MechanismConfig &config, double budget, std::uint64_t seed)
{
  MechanismConfig cfg = config;
  if (spec.kind == MechanismKind::eps_first)
  {
    cfg.epsilon = spec.epsilon;
  }
  if (const auto *pool = std::get_if<std::shared_ptr<const OfflinePool>>(&population))
  {
    switch (spec.kind)
    {
    case MechanismKind::baseline:
      return run_baseline_offline(**pool, cfg, budget, seed);
    case MechanismKind::caci:
      return run_caci_offline(**pool, cfg, budget, seed);
    case MechanismKind::cmab:
      return run_cmab_individual(**pool, cfg, budget, seed);
    case MechanismKind::eps_first:
      return run_epsilon_first_offline(**pool, cfg, budget, seed);
    }
  }
  const auto &arrivals = *std::get<std::shared_ptr<const ArrivalProcess>>(population);
  switch (spec.kind)
  {
  case MechanismKind::baseline:
    return run_baseline_online(arrivals, cfg, budget, seed);
  case MechanismKind::caci:
    return run_caci_online(arrivals, cfg, budget, seed);
  case MechanismKind::cmab:
    throw ConfigError("mechanisms", "cmab is an off-line mechanism; it cannot run on an arrival stream");
  case MechanismKind::eps_first:
    return run_epsilon_first_online(arrivals, cfg, budget, seed);
  }
  throw ConfigError("mechanisms", "unhandled mechanism");
}

struct RegretReport
{
  double baseline_expected  = 0.0;
  double mechanism_expected = 0.0;
  double regret_expected    = 0.0;
  double baseline_realized  = 0.0;
  double mechanism_realized = 0.0;
  double regret_realized    = 0.0;
  /// Expected-reward regret after each slot (longer trace extended by its last
  /// value). Empty unless both traces were recorded.
  std::vector<double> per_slot;
};

inline RegretReport compute_regret(const ExperimentTrace &mechanism, const ExperimentTrace &baseline)
{
  if (mechanism.population_hash != baseline.population_hash)
  {
    throw InvalidParameter("population hash mismatch: regret needs both runs on the same population");
  }
  if (mechanism.budget != baseline.budget)
  {
    throw InvalidParameter("budget mismatch between mechanism and baseline traces");
  }
  RegretReport r;
  r.baseline_expected  = baseline.reward_expected;
  r.mechanism_expected = mechanism.reward_expected;
  r.regret_expected    = baseline.reward_expected - mechanism.reward_expected;
  r.baseline_realized  = baseline.reward_realized;
  r.mechanism_realized = mechanism.reward_realized;
  r.regret_realized    = baseline.reward_realized - mechanism.reward_realized;
  if (mechanism.recorded && baseline.recorded)
  {
    const auto &a = baseline.cumulative_expected;
    const auto &b = mechanism.cumulative_expected;
    const std::size_t n = std::max(a.size(), b.size());
    r.per_slot.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
    {
      const double av = a.empty() ? 0.0 : a[std::min(i, a.size() - 1)];
      const double bv = b.empty() ? 0.0 : b[std::min(i, b.size() - 1)];
      r.per_slot.push_back(av - bv);
    }
  }
  return r;
}

enum class QualityKind
{
  bumps,
  trajectory,
  constant,
};

struct QualitySpec
{
  QualityKind type    = QualityKind::bumps;
  double sigma        = 1.0;
  std::size_t bumps   = 4;
  double width        = 0.3;
  double mu_min       = 0.05;
  double mu_max       = 0.95;
  double value        = 0.5;
  std::uint64_t seed  = 1;
  /// Smoothness assumed by the mechanism for d; defaults to the field's certificate.
  std::optional<double> L;
  std::optional<double> alpha;

  QualityFunction build(std::size_t dim) const
  {
    switch (type)
    {
    case QualityKind::bumps:
      return QualityFunction::bumps(dim, bumps, width, mu_min, mu_max, seed);
    case QualityKind::trajectory:
      return QualityFunction::trajectory(sigma);
    case QualityKind::constant:
      return QualityFunction::constant(value);
    }
    throw ConfigError("population.quality.type", "unknown quality type");
  }
};

enum class PopulationKind
{
  synthetic,
  csv,
};

struct PopulationConfig
{
  PopulationKind type          = PopulationKind::synthetic;
  std::size_t n                = 1000;
  std::size_t dim              = 2;
  std::size_t workers_per_slot = 200;
  std::size_t population_size  = 0;  ///< on-line: persistent pool to sample from; 0 = fresh workers each slot
  std::optional<std::uint64_t> horizon;
  std::string csv_path;
  bool normalize_context = true;
  double cost_min        = 0.2;
  double cost_max        = 1.0;
  BidMode bid_mode       = BidMode::truthful;
  QualitySpec quality{};
};

/// Materializes a population. Synthetic bids are capped at b_max.
inline Population build_population(Mode mode, const PopulationConfig &cfg, double b_max, std::uint64_t seed)
{
  if (cfg.type == PopulationKind::csv)
  {
    IngestOptions opts;
    opts.truthful          = cfg.bid_mode == BidMode::truthful;
    opts.normalize_context = cfg.normalize_context;
    auto ingested          = ingest_worker_csv(cfg.csv_path, opts);
    if (auto *pool = std::get_if<OfflinePool>(&ingested))
    {
      if (mode != Mode::offline)
      {
        throw ConfigError("population.csv_path", "CSV without a slot column is an off-line pool but mode is online");
      }
      return std::make_shared<const OfflinePool>(std::move(*pool));
    }
    if (mode != Mode::online)
    {
      throw ConfigError("population.csv_path", "CSV with a slot column is an arrival stream but mode is offline");
    }
    return std::shared_ptr<const ArrivalProcess>(
      std::make_shared<const RecordedArrivals>(std::move(std::get<RecordedArrivals>(ingested))));
  }
  PoolSpec spec;
  spec.n        = cfg.n;
  spec.dim      = cfg.dim;
  spec.cost_min = cfg.cost_min;
  spec.cost_max = cfg.cost_max;
  spec.bid_max  = b_max;
  spec.bid_mode = cfg.bid_mode;
  auto quality  = cfg.quality.build(cfg.dim);
  if (mode == Mode::offline)
  {
    return std::make_shared<const OfflinePool>(generate_offline_pool(spec, quality, seed));
  }
  return std::shared_ptr<const ArrivalProcess>(std::make_shared<const SyntheticArrivals>(
    spec, cfg.workers_per_slot, std::move(quality), seed, cfg.horizon, cfg.population_size));
}

enum class SweepAxis
{
  budget,
  workers,
  epsilon,
  dimension,
};

inline const char *axis_name(SweepAxis a)
{
  switch (a)
  {
  case SweepAxis::budget:
    return "budget";
  case SweepAxis::workers:
    return "workers";
  case SweepAxis::epsilon:
    return "epsilon";
  case SweepAxis::dimension:
    return "dimension";
  }
  return "?";
}

struct ExperimentConfig
{
  Mode mode = Mode::offline;
  std::vector<MechanismSpec> mechanisms;
  PopulationConfig population{};
  MechanismConfig auction{};
  double budget = 1e4;
  SweepAxis axis = SweepAxis::budget;
  std::vector<double> points;  ///< sweep values; empty = the single budget
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  bool resample_population = false;

  /// Hoelder parameters the mechanisms assume for a population of dimension `dim`.
  HoelderParams hoelder_for(std::size_t dim) const
  {
    HoelderParams h;
    if (population.type == PopulationKind::synthetic)
    {
      h = population.quality.build(dim).certificate();
    }
    if (population.quality.L)
    {
      h.L = *population.quality.L;
    }
    if (population.quality.alpha)
    {
      h.alpha = *population.quality.alpha;
    }
    return h;
  }
};

struct TrialRecord
{
  std::string mechanism;
  double axis_value = 0.0;
  std::size_t point = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double budget      = 0.0;
  double reward_realized = 0.0;
  double reward_expected = 0.0;
  double regret_expected = 0.0;
  double regret_realized = 0.0;
  std::uint64_t slots_executed = 0;
  double budget_spent   = 0.0;
  double explore_budget = 0.0;
  std::uint64_t d       = 0;
  std::optional<ExperimentTrace> trace;
};

struct SweepCell
{
  std::string mechanism;
  double axis_value = 0.0;
  std::size_t trials = 0;
  double mean_expected = 0.0;
  double std_expected  = 0.0;
  double min_expected  = 0.0;
  double max_expected  = 0.0;
  double mean_realized = 0.0;
  double mean_regret   = 0.0;
  double std_regret    = 0.0;
};

struct SweepResult
{
  SweepAxis axis = SweepAxis::budget;
  std::vector<double> points;
  std::vector<std::string> mechanisms;
  std::vector<TrialRecord> records;  ///< ordered by (mechanism, point, trial)
  std::vector<SweepCell> cells;      ///< ordered by (mechanism, point)
  std::vector<ExperimentTrace> baseline_traces;  ///< recorded mode only, by (point, trial)

  const SweepCell &cell(const std::string &mechanism, std::size_t point) const
  {
    for (const auto &c : cells)
    {
      if (c.mechanism == mechanism && c.axis_value == points.at(point))
      {
        return c;
      }
    }
    throw InvalidParameter("no sweep cell for mechanism '" + mechanism + "'");
  }
};

struct SweepOptions
{
  unsigned jobs   = 1;     ///< 0 = hardware concurrency
  bool keep_traces = false;
};

/// (population, mechanism config, budget) for one sweep point.
struct PointSetup
{
  PopulationConfig population;
  MechanismConfig auction;
  double budget = 0.0;
  std::optional<double> epsilon;
};

inline PointSetup point_setup(const ExperimentConfig &cfg, double value)
{
  PointSetup p{cfg.population, cfg.auction, cfg.budget, std::nullopt};
  switch (cfg.axis)
  {
  case SweepAxis::budget:
    p.budget = value;
    break;
  case SweepAxis::workers:
    if (!(value >= 1.0) || value != std::floor(value))
    {
      throw ConfigError("sweep.values", "worker counts must be positive integers");
    }
    if (cfg.mode == Mode::offline)
      p.population.n = static_cast<std::size_t>(value);
    else
      p.population.workers_per_slot = static_cast<std::size_t>(value);
    break;
  case SweepAxis::epsilon:
    p.epsilon = value;
    break;
  case SweepAxis::dimension:
    if (!(value >= 1.0) || value != std::floor(value))
    {
      throw ConfigError("sweep.values", "dimensions must be positive integers");
    }
    p.population.dim = static_cast<std::size_t>(value);
    break;
  }
  p.auction.hoelder = cfg.hoelder_for(p.population.dim);
  return p;
}

/// Seed of the population used by trial `trial`; fixed across trials unless
/// populations are resampled.
inline std::uint64_t population_seed(const ExperimentConfig &cfg, std::size_t trial)
{
  const std::uint64_t base = derive_seed(cfg.seed, 0x706f70);
  return cfg.resample_population ? derive_seed(base, trial) : base;
}

/// Runs every (mechanism, point, trial), each paired with the matching
/// baseline on the identical population. Trials use seed + trial index.
inline SweepResult sweep(const ExperimentConfig &cfg, const SweepOptions &options = {})
{
  if (cfg.mechanisms.empty())
  {
    throw ConfigError("mechanisms", "at least one mechanism is required");
  }
  if (cfg.trials < 1)
  {
    throw ConfigError("trials", "trials must be at least 1");
  }
  SweepResult result;
  result.axis   = cfg.axis;
  result.points = cfg.points.empty() ? std::vector<double>{cfg.axis == SweepAxis::budget ? cfg.budget : 0.0}
                                     : cfg.points;
  if (cfg.points.empty() && cfg.axis != SweepAxis::budget)
  {
    throw ConfigError("sweep.values", "a non-budget sweep needs at least one value");
  }
  std::vector<PointSetup> setups;
  for (double v : result.points)
  {
    setups.push_back(point_setup(cfg, v));
    setups.back().auction.validate();
  }
  std::vector<MechanismSpec> specs_first;  // resolved labels at point 0, for ordering
  for (const auto &m : cfg.mechanisms)
  {
    MechanismSpec s = m;
    if (s.kind == MechanismKind::eps_first && setups[0].epsilon)
    {
      s.epsilon = *setups[0].epsilon;
    }
    result.mechanisms.push_back(cfg.axis == SweepAxis::epsilon && s.kind == MechanismKind::eps_first ? "eps_first"
                                                                                                    : s.label());
  }

  // Fixed populations are built once per point before the parallel section.
  std::vector<std::optional<Population>> shared(setups.size());
  if (!cfg.resample_population)
  {
    for (std::size_t p = 0; p < setups.size(); ++p)
    {
      const bool same_as_first = p > 0 && (cfg.axis == SweepAxis::budget || cfg.axis == SweepAxis::epsilon);
      shared[p] = same_as_first ? shared[0]
                                : build_population(cfg.mode, setups[p].population, setups[p].auction.b_max,
                                                   population_seed(cfg, 0));
    }
  }

  const std::size_t n_mech  = cfg.mechanisms.size();
  const std::size_t n_tasks = setups.size() * cfg.trials;
  std::vector<std::vector<TrialRecord>> task_records(n_tasks);
  std::vector<std::optional<ExperimentTrace>> task_baselines(n_tasks);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;)
    {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks)
      {
        return;
      }
      try
      {
        const std::size_t p     = task / cfg.trials;
        const std::size_t trial = task % cfg.trials;
        const auto &setup       = setups[p];
        const Population population = shared[p] ? *shared[p]
                                                : build_population(cfg.mode, setup.population, setup.auction.b_max,
                                                                   population_seed(cfg, trial));
        const std::uint64_t seed = cfg.seed + trial;
        MechanismConfig mcfg     = setup.auction;
        mcfg.record_slots        = options.keep_traces;
        const auto base = run_trial(MechanismSpec{MechanismKind::baseline}, population, mcfg, setup.budget, seed);
        std::vector<TrialRecord> recs;
        for (std::size_t m = 0; m < n_mech; ++m)
        {
          MechanismSpec spec = cfg.mechanisms[m];
          if (spec.kind == MechanismKind::eps_first && setup.epsilon)
          {
            spec.epsilon = *setup.epsilon;
          }
          ExperimentTrace tr = spec.kind == MechanismKind::baseline
                                 ? base
                                 : run_trial(spec, population, mcfg, setup.budget, seed);
          const auto regret = compute_regret(tr, base);
          TrialRecord rec;
          rec.mechanism       = result.mechanisms[m];
          rec.axis_value      = result.points[p];
          rec.point           = p;
          rec.trial           = trial;
          rec.seed            = seed;
          rec.budget          = setup.budget;
          rec.reward_realized = tr.reward_realized;
          rec.reward_expected = tr.reward_expected;
          rec.regret_expected = regret.regret_expected;
          rec.regret_realized = regret.regret_realized;
          rec.slots_executed  = tr.slots_executed;
          rec.budget_spent    = tr.budget_spent;
          rec.explore_budget  = tr.explore_budget;
          rec.d               = tr.granularity;
          if (options.keep_traces)
          {
            rec.trace = std::move(tr);
          }
          recs.push_back(std::move(rec));
        }
        task_records[task] = std::move(recs);
        if (options.keep_traces)
        {
          task_baselines[task] = base;
        }
      }
      catch (...)
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error)
        {
          error = std::current_exception();
        }
        next.store(n_tasks);
        return;
      }
    }
  };

  unsigned jobs = options.jobs == 0 ? std::max(1U, std::thread::hardware_concurrency()) : options.jobs;
  jobs          = static_cast<unsigned>(std::min<std::size_t>(jobs, n_tasks));
  if (jobs <= 1)
  {
    worker();
  }
  else
  {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j)
    {
      pool.emplace_back(worker);
    }
    for (auto &t : pool)
    {
      t.join();
    }
  }
  if (error)
  {
    std::rethrow_exception(error);
  }

  for (std::size_t m = 0; m < n_mech; ++m)
  {
    for (std::size_t p = 0; p < setups.size(); ++p)
    {
      SweepCell cell;
      cell.mechanism  = result.mechanisms[m];
      cell.axis_value = result.points[p];
      cell.trials     = cfg.trials;
      std::vector<double> expected, regret;
      double realized = 0.0;
      for (std::size_t trial = 0; trial < cfg.trials; ++trial)
      {
        auto &rec = task_records[p * cfg.trials + trial][m];
        expected.push_back(rec.reward_expected);
        regret.push_back(rec.regret_expected);
        realized += rec.reward_realized;
        result.records.push_back(std::move(rec));
      }
      // Welford: identical trials give back exactly the single-trial value.
      auto stats = [](const std::vector<double> &v, double &mean, double &sd) {
        mean      = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
        {
          const double delta = v[i] - mean;
          mean += delta / static_cast<double>(i + 1);
          m2 += delta * (v[i] - mean);
        }
        sd = v.size() > 1 ? std::sqrt(m2 / static_cast<double>(v.size() - 1)) : 0.0;
      };
      stats(expected, cell.mean_expected, cell.std_expected);
      stats(regret, cell.mean_regret, cell.std_regret);
      cell.min_expected  = *std::min_element(expected.begin(), expected.end());
      cell.max_expected  = *std::max_element(expected.begin(), expected.end());
      cell.mean_realized = realized / static_cast<double>(cfg.trials);
      result.cells.push_back(cell);
    }
  }
  if (options.keep_traces)
  {
    for (auto &b : task_baselines)
    {
      result.baseline_traces.push_back(std::move(*b));
    }
  }
  return result;
}

}  // namespace caci
