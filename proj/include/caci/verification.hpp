#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "caci/auction.hpp"
#include "caci/context_space.hpp"
#include "caci/error.hpp"
#include "caci/mechanisms.hpp"
#include "caci/simulation.hpp"

namespace caci {

/// Evenly spaced grid of `n` points over [lo, hi] (n = 1 gives {lo}).
inline std::vector<double> linear_grid(double lo, double hi, std::size_t n)
{
  if (n < 1 || !(lo <= hi))
  {
    throw InvalidParameter("grid needs n >= 1 and lo <= hi");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

struct TruthProbeResult
{
  std::uint64_t worker_id = 0;
  double true_cost        = 0.0;
  std::vector<double> bids;
  std::vector<double> utilities;  ///< summed over the whole run
  std::vector<bool> selected;     ///< chosen at least once in a priced (non-exploration) slot
  double truthful_utility = 0.0;
  /// Largest grid bid still chosen in a priced slot; NaN if never chosen.
  double critical_payment = std::numeric_limits<double>::quiet_NaN();
  double max_gain         = 0.0;  ///< max over the grid of utility(bid) - utility(true cost)
  bool single_step        = true; ///< utility changes at most once along the bid grid
};

namespace detail {

/// Utility of `id` summed over a trace, and whether it was picked in a
/// second-price slot.
inline std::pair<double, bool> utility_in_trace(const ExperimentTrace &trace, std::uint64_t id, double cost)
{
  double total = 0.0;
  bool priced  = false;
  for (const auto &slot : trace.slots)
  {
    for (const auto &sel : slot.selections)
    {
      if (sel.id == id)
      {
        total += utility(true, sel.payment, cost);
        priced = priced || slot.phase == Phase::exploitation;
      }
    }
  }
  return {total, priced};
}

inline std::optional<Worker> find_in_arrivals(const ArrivalProcess &arrivals, std::uint64_t id,
                                              std::uint64_t max_slots)
{
  const std::uint64_t last = arrivals.horizon().value_or(max_slots);
  for (std::uint64_t t = 1; t <= std::min(last, max_slots); ++t)
  {
    for (auto &w : arrivals.slot(t))
    {
      if (w.id == id)
      {
        return w;
      }
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Reruns the mechanism once per grid bid with only `worker_id`'s bid changed
/// and the seed held fixed, and compares its total utility with truthful bidding.
inline TruthProbeResult probe_truthfulness(const MechanismSpec &spec, const Population &population,
                                           const MechanismConfig &config, double budget, std::uint64_t worker_id,
                                           const std::vector<double> &bid_grid, std::uint64_t seed,
                                           std::uint64_t search_slots = 10000)
{
  if (bid_grid.empty())
  {
    throw InvalidParameter("bid grid must not be empty");
  }
  MechanismConfig cfg = config;
  cfg.record_slots    = true;
  TruthProbeResult out;
  out.worker_id = worker_id;

  std::function<Population(double)> with_bid;
  if (const auto *pool = std::get_if<std::shared_ptr<const OfflinePool>>(&population))
  {
    const auto idx = (*pool)->index_of(worker_id);
    if (!idx)
    {
      throw InvalidParameter("worker id " + std::to_string(worker_id) + " not in population");
    }
    out.true_cost = (*pool)->workers()[*idx].cost;
    with_bid      = [pool = *pool, worker_id](double b) -> Population {
      return std::make_shared<const OfflinePool>(pool->with_bid(worker_id, b));
    };
  }
  else
  {
    const auto arrivals = std::get<std::shared_ptr<const ArrivalProcess>>(population);
    const auto found    = detail::find_in_arrivals(*arrivals, worker_id, search_slots);
    if (!found)
    {
      throw InvalidParameter("worker id " + std::to_string(worker_id) + " not in population");
    }
    out.true_cost = found->cost;
    with_bid      = [arrivals, worker_id](double b) -> Population {
      return std::shared_ptr<const ArrivalProcess>(std::make_shared<BidOverrideArrivals>(arrivals, worker_id, b));
    };
  }

  const auto truthful  = run_trial(spec, with_bid(out.true_cost), cfg, budget, seed);
  out.truthful_utility = detail::utility_in_trace(truthful, worker_id, out.true_cost).first;
  out.max_gain         = -std::numeric_limits<double>::infinity();
  for (double b : bid_grid)
  {
    const auto trace           = run_trial(spec, with_bid(b), cfg, budget, seed);
    const auto [u, priced]     = detail::utility_in_trace(trace, worker_id, out.true_cost);
    out.bids.push_back(b);
    out.utilities.push_back(u);
    out.selected.push_back(priced);
    out.max_gain = std::max(out.max_gain, u - out.truthful_utility);
    if (priced)
    {
      out.critical_payment = std::isnan(out.critical_payment) ? b : std::max(out.critical_payment, b);
    }
  }
  // Shape check over bids in increasing order.
  std::vector<std::size_t> order(out.bids.size());
  for (std::size_t i = 0; i < order.size(); ++i)
  {
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return out.bids[a] < out.bids[b]; });
  // Utility is piecewise constant in the bid with a single jump at the
  // critical value (up or down, depending on whether it exceeds the cost).
  int jumps = 0;
  for (std::size_t i = 1; i < order.size(); ++i)
  {
    if (std::abs(out.utilities[order[i]] - out.utilities[order[i - 1]]) > 1e-9)
    {
      ++jumps;
    }
  }
  out.single_step = jumps <= 1;
  return out;
}

struct IrViolation
{
  std::uint64_t slot = 0;
  std::uint64_t worker_id = 0;
  double payment = 0.0;
  double cost    = 0.0;
};

struct IrReport
{
  std::uint64_t checked = 0;
  std::vector<IrViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks p >= c - 1e-9 for every selection in a recorded trace.
inline IrReport audit_individual_rationality(const ExperimentTrace &trace, const Population &population,
                                             double tolerance = 1e-9)
{
  if (!trace.recorded)
  {
    throw InvalidParameter("IR audit needs a trace with per-slot records");
  }
  IrReport report;
  std::unordered_map<std::uint64_t, double> costs;
  const auto *pool = std::get_if<std::shared_ptr<const OfflinePool>>(&population);
  if (pool)
  {
    for (const auto &w : (*pool)->workers())
    {
      costs.emplace(w.id, w.cost);
    }
  }
  for (const auto &slot : trace.slots)
  {
    if (!pool)
    {
      costs.clear();
      for (const auto &w : std::get<std::shared_ptr<const ArrivalProcess>>(population)->slot(slot.slot))
      {
        costs.emplace(w.id, w.cost);
      }
    }
    for (const auto &sel : slot.selections)
    {
      const auto it = costs.find(sel.id);
      if (it == costs.end())
      {
        throw InvalidParameter("trace selects worker " + std::to_string(sel.id) + " absent from the population");
      }
      ++report.checked;
      if (sel.payment < it->second - tolerance)
      {
        report.violations.push_back(IrViolation{slot.slot, sel.id, sel.payment, it->second});
      }
    }
  }
  return report;
}

struct ConcentrationReport
{
  std::uint64_t trials     = 0;
  std::uint64_t violations = 0;  ///< runs where some explored cube left the band
  double frequency         = 0.0;
  double violation_bound       = 0.0;  ///< 2 d^M / B^2
  double band_width        = 0.0;  ///< 2 sqrt(d^M b_max ln B / B#)
  std::uint64_t granularity = 0;
  std::uint64_t cells      = 0;

  /// Concentration bound plus a three-sigma binomial allowance.
  double tolerance() const
  {
    const double p = violation_bound;
    return p + 3.0 * std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(trials));
  }
};

/// Runs only the exploration phase `trials` times (seeds seed, seed+1, ...) and
/// counts runs where some explored cube has u - mu_Q outside (0, band).
inline ConcentrationReport check_ucb_concentration(const OfflinePool &pool, const MechanismConfig &config,
                                                   double budget, std::uint64_t trials, std::uint64_t seed)
{
  if (trials < 1)
  {
    throw InvalidParameter("trials must be at least 1");
  }
  ConcentrationReport out;
  out.trials = trials;
  for (std::uint64_t r = 0; r < trials; ++r)
  {
    const auto ex = run_caci_exploration(pool, config, budget, seed + r);
    if (r == 0)
    {
      out.granularity = ex.granularity;
      out.cells       = ex.state.cells();
      const double cells = static_cast<double>(out.cells);
      out.violation_bound = 2.0 * cells / (budget * budget);
      out.band_width  = 2.0 * std::sqrt(cells * config.b_max * std::log(budget) / ex.explore_budget);
    }
    // True cube quality: mean mu of the workers in the cube.
    std::vector<double> mu_sum(out.cells, 0.0);
    std::vector<std::uint64_t> members(out.cells, 0);
    for (std::size_t i = 0; i < pool.size(); ++i)
    {
      mu_sum[ex.cube_of[i]] += pool.workers()[i].quality;
      ++members[ex.cube_of[i]];
    }
    bool violated = false;
    for (std::uint64_t q = 0; q < out.cells && !violated; ++q)
    {
      if (ex.state.pulls(q) == 0)
      {
        continue;
      }
      const double gap = ucb_offline(ex.state, HypercubeId{q}, budget) - mu_sum[q] / static_cast<double>(members[q]);
      violated         = !(gap > 0.0 && gap < out.band_width);
    }
    out.violations += violated ? 1 : 0;
  }
  out.frequency = static_cast<double>(out.violations) / static_cast<double>(trials);
  return out;
}

struct RegretBoundParams
{
  double delta_min    = 0.0;
  bool degenerate     = false;  ///< all K-subset sums equal
  bool approximate    = false;  ///< delta_min from sampled subsets (an upper estimate)
  double nabla_max    = 0.0;
  double delta        = 0.0;   ///< Hoelder spread inside one cube
  std::uint64_t subsets = 0;   ///< subsets evaluated
};

namespace detail {

inline double binomial(std::size_t n, std::size_t k)
{
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
  {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace detail

/// Population constants of the regret analysis for one worker set:
/// Delta_min, the smallest gap between distinct K-subset sums of mu_Q(i)/b_i;
/// nabla_max, the largest difference of cube qualities; and delta.
inline RegretBoundParams compute_bound_constants(const std::vector<Worker> &workers, const PartitionGrid &grid,
                                                 const MechanismConfig &config, bool allow_sampling = false,
                                                 std::uint64_t samples = 200000, std::uint64_t seed = 1)
{
  const std::size_t k = config.k;
  const std::size_t n = workers.size();
  if (k < 1 || k > n)
  {
    throw InvalidParameter("bound constants need 1 <= K <= N");
  }
  RegretBoundParams out;
  std::unordered_map<std::uint64_t, std::pair<double, std::uint64_t>> cube_mu;
  std::vector<std::uint64_t> cube_of(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    cube_of[i] = grid.locate(workers[i].context).linear_index;
    auto &acc  = cube_mu[cube_of[i]];
    acc.first += workers[i].quality;
    ++acc.second;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto &[cube, acc] : cube_mu)
  {
    const double mu = acc.first / static_cast<double>(acc.second);
    lo              = std::min(lo, mu);
    hi              = std::max(hi, mu);
  }
  out.nabla_max = hi - lo;
  out.delta     = delta_bound(config.hoelder, grid);

  std::vector<double> ratio(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    const auto &acc = cube_mu[cube_of[i]];
    ratio[i]        = acc.first / static_cast<double>(acc.second) / workers[i].bid;
  }
  std::vector<double> sums;
  const double count = detail::binomial(n, k);
  if (count <= 1e6)
  {
    std::vector<std::size_t> pick(k);
    for (std::size_t i = 0; i < k; ++i)
    {
      pick[i] = i;
    }
    for (;;)
    {
      double s = 0.0;
      for (std::size_t i : pick)
      {
        s += ratio[i];
      }
      sums.push_back(s);
      std::size_t pos = k;
      while (pos > 0 && pick[pos - 1] == n - k + pos - 1)
      {
        --pos;
      }
      if (pos == 0)
      {
        break;
      }
      ++pick[pos - 1];
      for (std::size_t i = pos; i < k; ++i)
      {
        pick[i] = pick[i - 1] + 1;
      }
    }
  }
  else
  {
    if (!allow_sampling)
    {
      throw InvalidParameter("C(N,K) exceeds 1e6; enable sampling for an approximate Delta_min");
    }
    out.approximate = true;
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (std::uint64_t s = 0; s < samples; ++s)
    {
      for (std::size_t i = 0; i < n; ++i)
      {
        idx[i] = i;
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j)
      {
        std::swap(idx[j], idx[j + rng.below(n - j)]);
        sum += ratio[idx[j]];
      }
      sums.push_back(sum);
    }
  }
  out.subsets = sums.size();
  std::sort(sums.begin(), sums.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sums.size(); ++i)
  {
    const double gap = sums[i] - sums[i - 1];
    if (gap > 0.0)
    {
      best = std::min(best, gap);
    }
  }
  if (std::isinf(best))
  {
    out.degenerate = true;
    out.delta_min  = 0.0;
  }
  else
  {
    out.delta_min = best;
  }
  return out;
}

struct ExponentFit
{
  double slope     = 0.0;
  double intercept = 0.0;
  double r2        = 0.0;
  std::size_t points_used = 0;
};

/// Least-squares slope of log(regret) against log(budget). Non-positive
/// regrets are dropped.
inline ExponentFit fit_regret_exponent(const std::vector<double> &budgets, const std::vector<double> &regrets)
{
  if (budgets.size() != regrets.size())
  {
    throw InvalidParameter("budget and regret series differ in length");
  }
  if (budgets.size() < 4)
  {
    throw InvalidParameter("exponent fit needs at least 4 budget points");
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < budgets.size(); ++i)
  {
    if (regrets[i] > 0.0 && budgets[i] > 0.0)
    {
      x.push_back(std::log(budgets[i]));
      y.push_back(std::log(regrets[i]));
    }
  }
  if (x.size() < 3)
  {
    throw InvalidParameter("fewer than 3 positive regret points remain for the exponent fit");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
  {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0))
  {
    throw InvalidParameter("exponent fit needs distinct budgets");
  }
  ExponentFit fit;
  fit.slope       = sxy / sxx;
  fit.intercept   = my - fit.slope * mx;
  fit.r2          = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points_used = x.size();
  return fit;
}

}  // namespace caci
