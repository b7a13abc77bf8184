#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "caci/error.hpp"

namespace caci {

/// A worker as seen by the reverse auction: a quality score (true mu, a cube
/// estimate, or a UCB index) and the submitted bid.
struct ScoredWorker
{
  std::uint64_t id = 0;
  double score     = 0.0;
  double bid       = 1.0;

  /// Quality-to-bid ratio. Always recomputed from score and bid.
  double ratio() const noexcept { return score / bid; }
};

struct SelectionOutcome
{
  std::vector<std::uint64_t> selected;  ///< ranked order, size K
  std::vector<double> payments;         ///< aligned with `selected`
  std::vector<double> scores;           ///< aligned with `selected`
  double pivot_ratio = 0.0;             ///< ratio of the (K+1)-th ranked worker

  double total_payment() const
  {
    double sum = 0.0;
    for (double p : payments)
    {
      sum += p;
    }
    return sum;
  }
};

/// Strict ranking order: higher ratio first, ties by ascending id.
inline bool ranks_before(const ScoredWorker &a, const ScoredWorker &b) noexcept
{
  const double ra = a.ratio();
  const double rb = b.ratio();
  if (ra != rb)
  {
    return ra > rb;
  }
  return a.id < b.id;
}

namespace detail {

inline void check_scored(std::span<const ScoredWorker> workers)
{
  for (const auto &w : workers)
  {
    if (!(w.bid > 0.0) || !std::isfinite(w.bid))
    {
      throw InvalidParameter("bid of worker " + std::to_string(w.id) + " must be positive and finite");
    }
    if (!(w.score >= 0.0))
    {
      throw InvalidParameter("score of worker " + std::to_string(w.id) + " must be non-negative");
    }
  }
}

}  // namespace detail

inline std::vector<ScoredWorker> rank_by_ratio(std::vector<ScoredWorker> workers)
{
  detail::check_scored(workers);
  std::sort(workers.begin(), workers.end(), ranks_before);
  return workers;
}

/// Second-price style pricing of the top K of an already ranked list:
/// p_i = min(u_i / rho_{K+1}, b_max). A zero or infinite pivot pays b_max.
inline SelectionOutcome select_and_price(std::span<const ScoredWorker> ranked, std::size_t k, double b_max)
{
  if (k < 1)
  {
    throw InvalidParameter("K must be at least 1");
  }
  if (ranked.size() < k + 1)
  {
    throw InsufficientCompetition(ranked.size(), k);
  }
  SelectionOutcome out;
  out.pivot_ratio          = ranked[k].ratio();
  const bool degenerate    = !(out.pivot_ratio > 0.0) || !std::isfinite(out.pivot_ratio);
  out.selected.reserve(k);
  out.payments.reserve(k);
  out.scores.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
  {
    const auto &w = ranked[i];
    out.selected.push_back(w.id);
    out.scores.push_back(w.score);
    out.payments.push_back(degenerate ? b_max : std::min(w.score / out.pivot_ratio, b_max));
  }
  return out;
}

/// Ranks only as far as needed (top K+1) and prices. Equivalent to
/// select_and_price(rank_by_ratio(workers), k, b_max).
inline SelectionOutcome select_top_k(std::vector<ScoredWorker> workers, std::size_t k, double b_max)
{
  if (k < 1)
  {
    throw InvalidParameter("K must be at least 1");
  }
  if (workers.size() < k + 1)
  {
    throw InsufficientCompetition(workers.size(), k);
  }
  detail::check_scored(workers);
  const auto middle = workers.begin() + static_cast<std::ptrdiff_t>(k + 1);
  std::partial_sort(workers.begin(), middle, workers.end(), ranks_before);
  return select_and_price(std::span<const ScoredWorker>(workers.data(), k + 1), k, b_max);
}

/// Worker utility x * (p - c); zero when not selected.
inline double utility(bool selected, double payment, double true_cost)
{
  if (payment < 0.0)
  {
    throw InvalidParameter("payment must be non-negative");
  }
  return selected ? payment - true_cost : 0.0;
}

}  // namespace caci
