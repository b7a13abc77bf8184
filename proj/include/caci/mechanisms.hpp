#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "caci/auction.hpp"
#include "caci/context_space.hpp"
#include "caci/error.hpp"
#include "caci/hash.hpp"
#include "caci/population.hpp"
#include "caci/rng.hpp"
#include "caci/trace.hpp"

namespace caci {

struct MechanismConfig
{
  std::size_t k = 1;
  double b_min  = 0.2;
  double b_max  = 1.0;
  /// Assumed upper bound on worker quality used by the exploration budget.
  double mu_max = 1.0;
  HoelderParams hoelder{};
  std::optional<std::uint64_t> granularity;  ///< overrides the budget-derived d
  double epsilon = 0.3;                      ///< exploration fraction for epsilon-first
  bool record_slots = true;
  std::optional<std::uint64_t> horizon;  ///< on-line slot cap T

  void validate() const
  {
    if (k < 1)
    {
      throw InvalidParameter("K must be at least 1");
    }
    if (!(b_min > 0.0) || !(b_min <= b_max) || !std::isfinite(b_max))
    {
      throw InvalidParameter("bid bounds must satisfy 0 < b_min <= b_max");
    }
    if (!(mu_max > 0.0 && mu_max <= 1.0))
    {
      throw InvalidParameter("mu_max must lie in (0, 1]");
    }
    hoelder.validate();
    if (granularity && *granularity < 1)
    {
      throw InvalidParameter("granularity override must be at least 1");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0))
    {
      throw InvalidParameter("epsilon must lie in (0, 1)");
    }
  }

  std::uint64_t hash() const
  {
    Hasher h;
    h.add(static_cast<std::uint64_t>(k))
      .add(b_min)
      .add(b_max)
      .add(mu_max)
      .add(hoelder.L)
      .add(hoelder.alpha)
      .add(granularity.value_or(0))
      .add(epsilon)
      .add(horizon.value_or(0));
    return h.value();
  }
};

/// Exploration budget (b_max / mu_max^2)^{1/3} (cells)^{1/3} B^{2/3} (ln B)^{1/3},
/// evaluated as a single cube root and clamped to B.
inline double explore_budget_for_cells(double budget, double b_max, double mu_max, double cells)
{
  if (!(budget > 1.0) || !std::isfinite(budget))
  {
    throw InvalidParameter("budget too small for exploration formula (need B > 1)");
  }
  if (!(b_max > 0.0) || !(mu_max > 0.0) || !(cells >= 1.0))
  {
    throw InvalidParameter("exploration budget needs b_max > 0, mu_max > 0, cells >= 1");
  }
  const double value = std::cbrt(b_max / (mu_max * mu_max) * cells * budget * budget * std::log(budget));
  return std::min(value, budget);
}

inline double explore_budget(double budget, double b_max, double mu_max, std::uint64_t d, std::size_t dim)
{
  return explore_budget_for_cells(budget, b_max, mu_max, static_cast<double>(PartitionGrid(dim, d).cell_count()));
}

/// Off-line index r(Q) + sqrt(ln B / lambda(Q)); +inf for an unexplored cube.
inline double ucb_offline(const BanditState &state, HypercubeId cube, double budget)
{
  const auto n = state.pulls(cube.linear_index);
  if (n == 0)
  {
    return std::numeric_limits<double>::infinity();
  }
  return state.mean(cube.linear_index) + std::sqrt(std::log(budget) / static_cast<double>(n));
}

/// On-line index r(Q) + sqrt((K+1) ln t / lambda(Q)); +inf for an unexplored cube.
inline double ucb_online(const BanditState &state, HypercubeId cube, std::uint64_t t, std::size_t k)
{
  if (k < 1)
  {
    throw InvalidParameter("K must be at least 1");
  }
  if (t < 1)
  {
    throw InvalidParameter("slot index t must be at least 1");
  }
  const auto n = state.pulls(cube.linear_index);
  if (n == 0)
  {
    return std::numeric_limits<double>::infinity();
  }
  return state.mean(cube.linear_index) +
         std::sqrt(static_cast<double>(k + 1) * std::log(static_cast<double>(t)) / static_cast<double>(n));
}

namespace detail {

inline void check_bids(const std::vector<Worker> &workers, const MechanismConfig &config)
{
  for (const auto &w : workers)
  {
    if (!(w.bid >= config.b_min && w.bid <= config.b_max))
    {
      throw InvalidParameter("bid of worker " + std::to_string(w.id) + " outside [b_min, b_max]");
    }
  }
}

class Recorder
{
public:
  Recorder(std::string mechanism, const MechanismConfig &config, double budget, std::uint64_t seed,
           std::uint64_t population_hash)
    : record_(config.record_slots)
  {
    trace_.mechanism       = std::move(mechanism);
    trace_.seed            = seed;
    trace_.budget          = budget;
    trace_.population_hash = population_hash;
    trace_.recorded        = record_;
    Hasher h;
    h.add(std::string_view(trace_.mechanism)).add(config.hash()).add(budget);
    trace_.config_hash = h.value();
    trace_.residual    = budget;
  }

  ExperimentTrace &trace() noexcept { return trace_; }

  void slot(std::uint64_t t, Phase phase, std::vector<Selection> selections, const BudgetLedger &ledger)
  {
    ++trace_.slots_executed;
    for (const auto &s : selections)
    {
      trace_.reward_realized += s.reward;
      trace_.reward_expected += s.quality;
    }
    trace_.selection_count += selections.size();
    if (record_)
    {
      trace_.cumulative_realized.push_back(trace_.reward_realized);
      trace_.cumulative_expected.push_back(trace_.reward_expected);
      trace_.slots.push_back(SlotRecord{t, phase, std::move(selections), ledger.residual()});
    }
  }

  ExperimentTrace finish(const BudgetLedger &ledger)
  {
    trace_.residual     = ledger.residual();
    trace_.budget_spent = ledger.spent();
    return std::move(trace_);
  }

private:
  ExperimentTrace trace_;
  bool record_;
};

/// Workers of each cube (as indices into the worker list) plus the sorted list
/// of non-empty cubes for round-robin cycling.
struct CubeMembership
{
  std::vector<std::uint64_t> cube_of;
  std::vector<std::vector<std::size_t>> members_by_cube;  // only for non-empty cubes
  std::vector<std::uint64_t> nonempty;                    // sorted cube ids
  std::uint64_t cells = 0;

  CubeMembership(std::vector<std::uint64_t> cubes, std::uint64_t cell_count)
    : cube_of(std::move(cubes))
    , cells(cell_count)
  {
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    order.reserve(cube_of.size());
    for (std::size_t i = 0; i < cube_of.size(); ++i)
    {
      order.emplace_back(cube_of[i], i);
    }
    std::sort(order.begin(), order.end());
    for (const auto &[cube, idx] : order)
    {
      if (nonempty.empty() || nonempty.back() != cube)
      {
        nonempty.push_back(cube);
        members_by_cube.emplace_back();
      }
      members_by_cube.back().push_back(idx);
    }
  }

  /// Position in `nonempty` of the first non-empty cube at or after `cube`
  /// (cyclically), and how many cubes were passed over to reach it.
  std::pair<std::size_t, std::uint64_t> next_nonempty(std::uint64_t cube) const
  {
    auto it = std::lower_bound(nonempty.begin(), nonempty.end(), cube);
    if (it == nonempty.end())
    {
      return {0, cells - cube + nonempty.front()};
    }
    return {static_cast<std::size_t>(it - nonempty.begin()), *it - cube};
  }
};

/// Round-robin cube cursor. Each pick visits cube (counter mod cells), skipping
/// empty cubes and cubes whose workers were all picked already in this slot.
class CubeCycler
{
public:
  CubeCycler(const CubeMembership &membership, std::uint64_t start)
    : m_(membership)
    , counter_(start)
  {}

  /// Picks one worker index uniformly among the current cube's members not in
  /// `taken`. Returns the worker index; counts skipped cubes into `skips`.
  std::size_t pick(Rng &rng, const std::vector<std::size_t> &taken, std::uint64_t &skips)
  {
    for (;;)
    {
      const std::uint64_t cube = counter_ % m_.cells;
      const auto [pos, passed] = m_.next_nonempty(cube);
      if (passed > 0)
      {
        skips += passed;
        counter_ += passed;
      }
      const auto &members = m_.members_by_cube[pos];
      // Positions (within the sorted member list) of members already taken.
      positions_.clear();
      for (std::size_t t : taken)
      {
        if (m_.cube_of[t] == m_.nonempty[pos])
        {
          positions_.push_back(static_cast<std::size_t>(
            std::lower_bound(members.begin(), members.end(), t) - members.begin()));
        }
      }
      ++counter_;
      if (positions_.size() >= members.size())
      {
        ++skips;
        continue;
      }
      // Uniform among the free members: the rank-th member not taken.
      std::size_t rank = rng.below(members.size() - positions_.size());
      std::sort(positions_.begin(), positions_.end());
      for (std::size_t p : positions_)
      {
        if (p > rank)
        {
          break;
        }
        ++rank;
      }
      return members[rank];
    }
  }

private:
  const CubeMembership &m_;
  std::uint64_t counter_;
  std::vector<std::size_t> positions_;
};

/// Exploration phase of the off-line cube bandit: floor(B# / (K b_max)) slots,
/// the first pick of slot t visiting cube ((t-1)K + 1) mod cells. Returns the
/// number of slots run. Ledger and recorder are optional.
inline std::uint64_t explore_offline(const std::vector<Worker> &workers, const CubeMembership &membership,
                                     const MechanismConfig &config, double b_sharp, Rng &select_rng,
                                     RewardSource &rewards, BanditState &state, std::uint64_t &skips,
                                     BudgetLedger *ledger, Recorder *rec)
{
  const std::size_t k   = config.k;
  const double slot_cost = static_cast<double>(k) * config.b_max;
  const auto slots      = static_cast<std::uint64_t>(std::floor(b_sharp / slot_cost));
  CubeCycler cycler(membership, 1);
  std::vector<std::size_t> taken;
  std::uint64_t t = 0;
  for (; t < slots && (ledger == nullptr || ledger->covers(slot_cost)); ++t)
  {
    taken.clear();
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const std::size_t idx = cycler.pick(select_rng, taken, skips);
      taken.push_back(idx);
      const auto &w = workers[idx];
      const int r   = rewards.draw(w);
      picks.push_back(Selection{w.id, config.b_max, static_cast<std::uint8_t>(r), w.quality});
    }
    for (std::size_t j = 0; j < k; ++j)
    {
      state.update(membership.cube_of[taken[j]], picks[j].reward);
    }
    if (ledger != nullptr)
    {
      ledger->spend(slot_cost);
      if (rec != nullptr)
      {
        rec->slot(t + 1, Phase::exploration, std::move(picks), *ledger);
      }
    }
  }
  return t;
}

/// Shared control flow of off-line CACI and its one-cube-per-worker
/// degeneration: round-robin cube exploration with budget B#, then a frozen
/// UCB-ranked exploitation set paid second-price until the budget runs out.
inline ExperimentTrace run_cube_bandit_offline(const OfflinePool &pool, const CubeMembership &membership,
                                               std::uint64_t granularity, const MechanismConfig &config,
                                               double budget, std::uint64_t seed, std::string name)
{
  config.validate();
  check_bids(pool.workers(), config);
  const auto &workers = pool.workers();
  const std::size_t k = config.k;
  if (workers.size() < k + 1)
  {
    throw InsufficientCompetition(workers.size(), k);
  }
  Recorder rec(std::move(name), config, budget, seed, pool.hash());
  BudgetLedger ledger(budget, config.record_slots);
  auto &trace       = rec.trace();
  trace.granularity = granularity;
  trace.cell_count  = membership.cells;
  if (!(budget > 1.0))
  {
    trace.note("budget too small for exploration formula; nothing executed");
    return rec.finish(ledger);
  }

  Rng select_rng(derive_seed(seed, 1));
  RewardSource rewards(derive_seed(seed, 2));
  BanditState state(membership.cells);

  const double b_sharp = explore_budget_for_cells(budget, config.b_max, config.mu_max,
                                                  static_cast<double>(membership.cells));
  trace.explore_budget           = b_sharp;
  std::uint64_t t = explore_offline(workers, membership, config, b_sharp, select_rng, rewards, state,
                                    trace.empty_cube_skips, &ledger, &rec);
  if (trace.empty_cube_skips > 0)
  {
    trace.note("exploration skipped " + std::to_string(trace.empty_cube_skips) + " empty or exhausted cube visits");
  }

  std::vector<ScoredWorker> scored;
  scored.reserve(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i)
  {
    scored.push_back(ScoredWorker{workers[i].id, ucb_offline(state, HypercubeId{membership.cube_of[i]}, budget),
                                  workers[i].bid});
  }
  const auto outcome = select_top_k(std::move(scored), k, config.b_max);
  const double cost  = outcome.total_payment();

  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::uint64_t id : outcome.selected)
  {
    chosen.push_back(*pool.index_of(id));
  }
  std::uint64_t unexplored = 0;
  for (double u : outcome.scores)
  {
    if (std::isinf(u))
    {
      ++unexplored;
    }
  }
  if (unexplored > 0)
  {
    trace.note("exploitation set contains " + std::to_string(unexplored) + " workers from unexplored cubes");
  }

  while (cost > 0.0 && ledger.covers(cost))
  {
    ++t;
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const auto &w = workers[chosen[j]];
      const int r   = rewards.draw(w);
      picks.push_back(Selection{w.id, outcome.payments[j], static_cast<std::uint8_t>(r), w.quality});
    }
    trace.infinite_ucb += unexplored;
    ledger.spend(cost);
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

inline std::uint64_t resolve_granularity(const MechanismConfig &config, double budget, std::size_t dim)
{
  if (config.granularity)
  {
    return *config.granularity;
  }
  return compute_granularity(std::max(budget, 1.0), config.hoelder, dim);
}

inline std::uint64_t online_horizon(const ArrivalProcess &arrivals, const MechanismConfig &config, double budget,
                                    std::uint64_t cells)
{
  std::optional<std::uint64_t> cap = config.horizon;
  if (auto h = arrivals.horizon())
  {
    cap = cap ? std::min(*cap, *h) : *h;
  }
  if (cap)
  {
    return *cap;
  }
  // No slot executes for less than K * b_min, so this many slots always suffices.
  return static_cast<std::uint64_t>(std::ceil(budget / (static_cast<double>(config.k) * config.b_min))) + cells + 1;
}

}  // namespace detail

/// Known-quality off-line baseline: rank once by mu/b, price second-price, and
/// repeat the same K workers while the residual covers the payment sum.
inline ExperimentTrace run_baseline_offline(const OfflinePool &pool, const MechanismConfig &config, double budget,
                                            std::uint64_t seed)
{
  config.validate();
  detail::check_bids(pool.workers(), config);
  const auto &workers = pool.workers();
  if (workers.size() < config.k + 1)
  {
    throw InsufficientCompetition(workers.size(), config.k);
  }
  detail::Recorder rec("baseline", config, budget, seed, pool.hash());
  BudgetLedger ledger(budget, config.record_slots);
  RewardSource rewards(derive_seed(seed, 2));

  std::vector<ScoredWorker> scored;
  scored.reserve(workers.size());
  for (const auto &w : workers)
  {
    scored.push_back(ScoredWorker{w.id, w.quality, w.bid});
  }
  const auto outcome = select_top_k(std::move(scored), config.k, config.b_max);
  const double cost  = outcome.total_payment();
  std::vector<const Worker *> chosen;
  for (std::uint64_t id : outcome.selected)
  {
    chosen.push_back(&workers[*pool.index_of(id)]);
  }
  std::uint64_t t = 0;
  while (cost > 0.0 && ledger.covers(cost))
  {
    ++t;
    std::vector<Selection> picks;
    picks.reserve(config.k);
    for (std::size_t j = 0; j < chosen.size(); ++j)
    {
      const int r = rewards.draw(*chosen[j]);
      picks.push_back(Selection{chosen[j]->id, outcome.payments[j], static_cast<std::uint8_t>(r), chosen[j]->quality});
    }
    ledger.spend(cost);
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

/// Off-line CACI: learns hypercube qualities on the d^M partition, then
/// exploits a frozen UCB-ranked worker set.
inline ExperimentTrace run_caci_offline(const OfflinePool &pool, const MechanismConfig &config, double budget,
                                        std::uint64_t seed)
{
  config.validate();
  const std::uint64_t d = detail::resolve_granularity(config, budget, pool.dim());
  const PartitionGrid grid(pool.dim(), d);
  std::vector<std::uint64_t> cubes;
  cubes.reserve(pool.size());
  for (const auto &w : pool.workers())
  {
    cubes.push_back(grid.locate(w.context).linear_index);
  }
  const detail::CubeMembership membership(std::move(cubes), grid.cell_count());
  return detail::run_cube_bandit_offline(pool, membership, d, config, budget, seed, "caci");
}

struct ExplorationResult
{
  BanditState state;
  std::vector<std::uint64_t> cube_of;  ///< hypercube of each pool worker
  std::uint64_t granularity = 0;
  double explore_budget     = 0.0;
  std::uint64_t slots       = 0;
};

/// Only the exploration phase of off-line CACI, with the same seeding as a full
/// run. Budget accounting is skipped; exploration never exceeds B# <= B.
inline ExplorationResult run_caci_exploration(const OfflinePool &pool, const MechanismConfig &config, double budget,
                                              std::uint64_t seed)
{
  config.validate();
  const std::uint64_t d = detail::resolve_granularity(config, budget, pool.dim());
  const PartitionGrid grid(pool.dim(), d);
  std::vector<std::uint64_t> cubes;
  cubes.reserve(pool.size());
  for (const auto &w : pool.workers())
  {
    cubes.push_back(grid.locate(w.context).linear_index);
  }
  ExplorationResult out;
  out.granularity    = d;
  out.explore_budget = explore_budget_for_cells(budget, config.b_max, config.mu_max,
                                                static_cast<double>(grid.cell_count()));
  out.state          = BanditState(grid.cell_count());
  const detail::CubeMembership membership(cubes, grid.cell_count());
  Rng select_rng(derive_seed(seed, 1));
  RewardSource rewards(derive_seed(seed, 2));
  std::uint64_t skips = 0;
  out.slots = detail::explore_offline(pool.workers(), membership, config, out.explore_budget, select_rng, rewards,
                                      out.state, skips, nullptr, nullptr);
  out.cube_of = std::move(cubes);
  return out;
}

/// Classic per-worker CMAB: off-line CACI where every worker is its own cube
/// (virtual grid with N cells indexed by pool position).
inline ExperimentTrace run_cmab_individual(const OfflinePool &pool, const MechanismConfig &config, double budget,
                                           std::uint64_t seed)
{
  std::vector<std::uint64_t> cubes(pool.size());
  for (std::size_t i = 0; i < cubes.size(); ++i)
  {
    cubes[i] = i;
  }
  const detail::CubeMembership membership(std::move(cubes), std::max<std::uint64_t>(pool.size(), 1));
  return detail::run_cube_bandit_offline(pool, membership, pool.size(), config, budget, seed, "cmab");
}

/// Epsilon-first over individual workers: spend eps*B exploring workers in a
/// random cyclic order at b_max, then exploit a frozen set ranked by empirical
/// mean over bid.
inline ExperimentTrace run_epsilon_first_offline(const OfflinePool &pool, const MechanismConfig &config, double budget,
                                                 std::uint64_t seed)
{
  config.validate();
  detail::check_bids(pool.workers(), config);
  const auto &workers = pool.workers();
  const std::size_t k = config.k;
  if (workers.size() < k + 1)
  {
    throw InsufficientCompetition(workers.size(), k);
  }
  detail::Recorder rec("eps_first_" + [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", config.epsilon);
    return std::string(buf);
  }(), config, budget, seed, pool.hash());
  BudgetLedger ledger(budget, config.record_slots);
  auto &trace = rec.trace();
  trace.granularity = workers.size();
  trace.cell_count  = workers.size();
  Rng select_rng(derive_seed(seed, 1));
  RewardSource rewards(derive_seed(seed, 2));
  BanditState state(workers.size());

  const double explore     = config.epsilon * budget;
  trace.explore_budget     = explore;
  const double slot_cost   = static_cast<double>(k) * config.b_max;
  const auto explore_slots = static_cast<std::uint64_t>(std::floor(explore / slot_cost));

  std::vector<std::size_t> order(workers.size());
  for (std::size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  for (std::size_t i = order.size(); i > 1; --i)
  {
    std::swap(order[i - 1], order[select_rng.below(i)]);
  }
  std::size_t cursor = 0;
  std::uint64_t t    = 0;
  for (std::uint64_t s = 1; s <= explore_slots && ledger.covers(slot_cost); ++s)
  {
    ++t;
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const std::size_t idx = order[cursor];
      cursor                = (cursor + 1) % order.size();
      const auto &w         = workers[idx];
      const int r           = rewards.draw(w);
      state.update(idx, r);
      picks.push_back(Selection{w.id, config.b_max, static_cast<std::uint8_t>(r), w.quality});
    }
    ledger.spend(slot_cost);
    rec.slot(t, Phase::exploration, std::move(picks), ledger);
  }

  std::vector<ScoredWorker> scored;
  scored.reserve(workers.size());
  for (std::size_t i = 0; i < workers.size(); ++i)
  {
    scored.push_back(ScoredWorker{workers[i].id, state.mean(i), workers[i].bid});
  }
  const auto outcome = select_top_k(std::move(scored), k, config.b_max);
  const double cost  = outcome.total_payment();
  std::vector<const Worker *> chosen;
  for (std::uint64_t id : outcome.selected)
  {
    chosen.push_back(&workers[*pool.index_of(id)]);
  }
  while (cost > 0.0 && ledger.covers(cost))
  {
    ++t;
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const int r = rewards.draw(*chosen[j]);
      picks.push_back(Selection{chosen[j]->id, outcome.payments[j], static_cast<std::uint8_t>(r), chosen[j]->quality});
    }
    ledger.spend(cost);
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

/// Known-quality on-line baseline: in every slot rank the available workers by
/// mu/b and hire the priced top K if the residual covers them.
inline ExperimentTrace run_baseline_online(const ArrivalProcess &arrivals, const MechanismConfig &config, double budget,
                                           std::uint64_t seed)
{
  config.validate();
  detail::Recorder rec("baseline", config, budget, seed, arrivals.hash());
  BudgetLedger ledger(budget, config.record_slots);
  auto &trace = rec.trace();
  RewardSource rewards(derive_seed(seed, 2));
  const std::size_t k         = config.k;
  const std::uint64_t horizon = detail::online_horizon(arrivals, config, budget, 1);
  const double cheapest_slot  = static_cast<double>(k) * config.b_min;

  for (std::uint64_t t = 1; t <= horizon && ledger.covers(cheapest_slot); ++t)
  {
    const auto workers = arrivals.slot(t);
    if (workers.size() < k + 1)
    {
      ++trace.skipped_slots;
      continue;
    }
    detail::check_bids(workers, config);
    std::vector<ScoredWorker> scored;
    scored.reserve(workers.size());
    for (const auto &w : workers)
    {
      scored.push_back(ScoredWorker{w.id, w.quality, w.bid});
    }
    const auto outcome = select_top_k(std::move(scored), k, config.b_max);
    const double cost  = outcome.total_payment();
    if (!ledger.covers(cost))
    {
      ++trace.skipped_slots;
      continue;
    }
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const Worker *w = nullptr;
      for (const auto &cand : workers)
      {
        if (cand.id == outcome.selected[j])
        {
          w = &cand;
          break;
        }
      }
      const int r = rewards.draw(*w);
      picks.push_back(Selection{w->id, outcome.payments[j], static_cast<std::uint8_t>(r), w->quality});
    }
    ledger.spend(cost);
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

namespace detail {

inline std::vector<std::uint64_t> locate_all(const std::vector<Worker> &workers, const PartitionGrid &grid)
{
  std::vector<std::uint64_t> cubes;
  cubes.reserve(workers.size());
  for (const auto &w : workers)
  {
    cubes.push_back(grid.locate(w.context).linear_index);
  }
  return cubes;
}

inline const Worker &find_worker(const std::vector<Worker> &workers, std::uint64_t id)
{
  for (const auto &w : workers)
  {
    if (w.id == id)
    {
      return w;
    }
  }
  throw InvalidParameter("selected worker " + std::to_string(id) + " not in slot");
}

}  // namespace detail

/// On-line CACI: one b_max-paid worker per hypercube in slot 1, then per slot
/// hire the top K by on-line UCB over bid at second-price payments while the
/// residual covers K * b_max.
inline ExperimentTrace run_caci_online(const ArrivalProcess &arrivals, const MechanismConfig &config, double budget,
                                       std::uint64_t seed)
{
  config.validate();
  const std::size_t k   = config.k;
  const std::uint64_t d = detail::resolve_granularity(config, budget, arrivals.dim());
  const PartitionGrid grid(arrivals.dim(), d);
  detail::Recorder rec("caci", config, budget, seed, arrivals.hash());
  BudgetLedger ledger(budget, config.record_slots);
  auto &trace       = rec.trace();
  trace.granularity = d;
  trace.cell_count  = grid.cell_count();
  Rng select_rng(derive_seed(seed, 1));
  RewardSource rewards(derive_seed(seed, 2));
  BanditState state(grid.cell_count());
  const std::uint64_t horizon = detail::online_horizon(arrivals, config, budget, grid.cell_count());

  {
    const auto workers = arrivals.slot(1);
    detail::check_bids(workers, config);
    const detail::CubeMembership membership(detail::locate_all(workers, grid), grid.cell_count());
    std::vector<Selection> picks;
    std::uint64_t empty = grid.cell_count() - membership.nonempty.size();
    for (std::size_t pos = 0; pos < membership.nonempty.size(); ++pos)
    {
      if (!ledger.covers(config.b_max))
      {
        trace.note("initialization stopped early: residual below b_max");
        break;
      }
      const auto &members = membership.members_by_cube[pos];
      const auto &w       = workers[members[select_rng.below(members.size())]];
      const int r         = rewards.draw(w);
      state.update(membership.nonempty[pos], r);
      ledger.spend(config.b_max);
      picks.push_back(Selection{w.id, config.b_max, static_cast<std::uint8_t>(r), w.quality});
    }
    if (empty > 0)
    {
      trace.empty_cube_skips += empty;
      trace.note("initialization found " + std::to_string(empty) + " empty hypercubes; their index stays +inf");
    }
    if (!picks.empty())
    {
      rec.slot(1, Phase::init, std::move(picks), ledger);
    }
  }

  const double slot_cap = static_cast<double>(k) * config.b_max;
  for (std::uint64_t t = 2; t <= horizon && ledger.covers(slot_cap); ++t)
  {
    const auto workers = arrivals.slot(t);
    if (workers.size() < k + 1)
    {
      ++trace.skipped_slots;
      continue;
    }
    detail::check_bids(workers, config);
    const auto cubes = detail::locate_all(workers, grid);
    std::vector<ScoredWorker> scored;
    scored.reserve(workers.size());
    for (std::size_t i = 0; i < workers.size(); ++i)
    {
      scored.push_back(ScoredWorker{workers[i].id, ucb_online(state, HypercubeId{cubes[i]}, t, k), workers[i].bid});
    }
    const auto outcome = select_top_k(std::move(scored), k, config.b_max);
    std::vector<Selection> picks;
    picks.reserve(k);
    std::vector<std::pair<std::uint64_t, int>> observed;
    for (std::size_t j = 0; j < k; ++j)
    {
      const auto &w = detail::find_worker(workers, outcome.selected[j]);
      const int r   = rewards.draw(w);
      if (std::isinf(outcome.scores[j]))
      {
        ++trace.infinite_ucb;
      }
      observed.emplace_back(grid.locate(w.context).linear_index, r);
      picks.push_back(Selection{w.id, outcome.payments[j], static_cast<std::uint8_t>(r), w.quality});
    }
    for (const auto &[cube, r] : observed)
    {
      state.update(cube, r);
    }
    ledger.spend(outcome.total_payment());
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

/// On-line epsilon-first over hypercubes: spend eps*B exploring cubes
/// round-robin at b_max, then rank arrivals by the frozen cube means over bid.
inline ExperimentTrace run_epsilon_first_online(const ArrivalProcess &arrivals, const MechanismConfig &config,
                                                double budget, std::uint64_t seed)
{
  config.validate();
  const std::size_t k   = config.k;
  const std::uint64_t d = detail::resolve_granularity(config, budget, arrivals.dim());
  const PartitionGrid grid(arrivals.dim(), d);
  char label[32];
  std::snprintf(label, sizeof label, "eps_first_%g", config.epsilon);
  detail::Recorder rec(label, config, budget, seed, arrivals.hash());
  BudgetLedger ledger(budget, config.record_slots);
  auto &trace       = rec.trace();
  trace.granularity = d;
  trace.cell_count  = grid.cell_count();
  Rng select_rng(derive_seed(seed, 1));
  RewardSource rewards(derive_seed(seed, 2));
  BanditState state(grid.cell_count());
  const std::uint64_t horizon = detail::online_horizon(arrivals, config, budget, grid.cell_count());

  const double explore   = config.epsilon * budget;
  trace.explore_budget   = explore;
  const double slot_cost = static_cast<double>(k) * config.b_max;
  double explore_spent   = 0.0;
  std::uint64_t counter  = 0;
  std::uint64_t t        = 1;
  for (; t <= horizon && explore_spent + slot_cost <= explore && ledger.covers(slot_cost); ++t)
  {
    const auto workers = arrivals.slot(t);
    if (workers.size() < k + 1)
    {
      ++trace.skipped_slots;
      continue;
    }
    detail::check_bids(workers, config);
    const detail::CubeMembership membership(detail::locate_all(workers, grid), grid.cell_count());
    detail::CubeCycler cycler(membership, counter);
    std::vector<std::size_t> taken;
    std::vector<Selection> picks;
    for (std::size_t j = 0; j < k; ++j)
    {
      const std::size_t idx = cycler.pick(select_rng, taken, trace.empty_cube_skips);
      taken.push_back(idx);
      const auto &w = workers[idx];
      const int r   = rewards.draw(w);
      picks.push_back(Selection{w.id, config.b_max, static_cast<std::uint8_t>(r), w.quality});
    }
    counter += k;
    for (std::size_t j = 0; j < k; ++j)
    {
      state.update(membership.cube_of[taken[j]], picks[j].reward);
    }
    ledger.spend(slot_cost);
    explore_spent += slot_cost;
    rec.slot(t, Phase::exploration, std::move(picks), ledger);
  }

  const double cheapest_slot = static_cast<double>(k) * config.b_min;
  for (; t <= horizon && ledger.covers(cheapest_slot); ++t)
  {
    const auto workers = arrivals.slot(t);
    if (workers.size() < k + 1)
    {
      ++trace.skipped_slots;
      continue;
    }
    detail::check_bids(workers, config);
    std::vector<ScoredWorker> scored;
    scored.reserve(workers.size());
    for (const auto &w : workers)
    {
      scored.push_back(ScoredWorker{w.id, state.mean(grid.locate(w.context).linear_index), w.bid});
    }
    const auto outcome = select_top_k(std::move(scored), k, config.b_max);
    const double cost  = outcome.total_payment();
    if (!ledger.covers(cost))
    {
      ++trace.skipped_slots;
      continue;
    }
    std::vector<Selection> picks;
    picks.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
    {
      const auto &w = detail::find_worker(workers, outcome.selected[j]);
      const int r   = rewards.draw(w);
      picks.push_back(Selection{w.id, outcome.payments[j], static_cast<std::uint8_t>(r), w.quality});
    }
    ledger.spend(cost);
    rec.slot(t, Phase::exploitation, std::move(picks), ledger);
  }
  return rec.finish(ledger);
}

}  // namespace caci
