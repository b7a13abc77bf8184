#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <unordered_set>
#include <vector>

#include "caci/context_space.hpp"
#include "caci/error.hpp"
#include "caci/hash.hpp"
#include "caci/quality.hpp"
#include "caci/rng.hpp"

namespace caci {

struct Worker
{
  std::uint64_t id = 0;
  ContextVector context;
  double cost    = 0.0;
  double bid     = 0.0;
  double quality = 0.0;  ///< hidden from learning mechanisms
  /// Observed feedback for dataset replay; empty for synthetic workers.
  std::vector<std::uint8_t> recorded_rewards;

  bool operator==(const Worker &) const = default;
};

inline void hash_worker(Hasher &h, const Worker &w)
{
  h.add(w.id).add(w.cost).add(w.bid).add(w.quality);
  for (double c : w.context.coords())
  {
    h.add(c);
  }
  h.add(static_cast<std::uint64_t>(w.recorded_rewards.size()));
  h.bytes(w.recorded_rewards.data(), w.recorded_rewards.size());
}

/// A fixed group of workers. Immutable after construction.
class OfflinePool
{
public:
  OfflinePool() = default;

  OfflinePool(std::vector<Worker> workers, std::size_t dim)
    : workers_(std::move(workers))
    , dim_(dim)
  {
    by_id_.reserve(workers_.size());
    for (std::size_t i = 0; i < workers_.size(); ++i)
    {
      by_id_.emplace_back(workers_[i].id, i);
    }
    std::sort(by_id_.begin(), by_id_.end());
    for (std::size_t i = 1; i < by_id_.size(); ++i)
    {
      if (by_id_[i].first == by_id_[i - 1].first)
      {
        throw InvalidParameter("duplicate worker id " + std::to_string(by_id_[i].first));
      }
    }
    for (const auto &w : workers_)
    {
      if (w.context.size() != dim_)
      {
        throw InvalidParameter("worker " + std::to_string(w.id) + " has context dimension " +
                               std::to_string(w.context.size()) + ", pool expects " + std::to_string(dim_));
      }
      if (!(w.quality >= 0.0 && w.quality <= 1.0))
      {
        throw InvalidParameter("worker " + std::to_string(w.id) + " quality outside [0,1]");
      }
    }
    Hasher h;
    h.add(std::string_view("pool")).add(static_cast<std::uint64_t>(dim_));
    for (const auto &w : workers_)
    {
      hash_worker(h, w);
    }
    hash_ = h.value();
  }

  const std::vector<Worker> &workers() const noexcept { return workers_; }
  std::size_t size() const noexcept { return workers_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t hash() const noexcept { return hash_; }

  std::optional<std::size_t> index_of(std::uint64_t id) const
  {
    const auto it = std::lower_bound(by_id_.begin(), by_id_.end(), std::make_pair(id, std::size_t{0}));
    if (it == by_id_.end() || it->first != id)
    {
      return std::nullopt;
    }
    return it->second;
  }

  /// Copy of the pool with one worker's bid replaced (other bids frozen).
  OfflinePool with_bid(std::uint64_t id, double bid) const
  {
    auto idx = index_of(id);
    if (!idx)
    {
      throw InvalidParameter("worker id " + std::to_string(id) + " not in pool");
    }
    auto copy          = workers_;
    copy[*idx].bid     = bid;
    return OfflinePool(std::move(copy), dim_);
  }

private:
  std::vector<Worker> workers_;
  std::vector<std::pair<std::uint64_t, std::size_t>> by_id_;  // sorted by id
  std::size_t dim_     = 1;
  std::uint64_t hash_  = 0;
};

/// Stream of per-slot worker sets N^[t], t = 1, 2, ... Implementations are
/// deterministic: slot(t) returns the same workers on every call.
class ArrivalProcess
{
public:
  virtual ~ArrivalProcess() = default;

  virtual std::vector<Worker> slot(std::uint64_t t) const = 0;
  /// Last slot with workers, if the stream is finite.
  virtual std::optional<std::uint64_t> horizon() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::uint64_t hash() const = 0;
};

enum class BidMode
{
  truthful,
  strategic,
};

struct PoolSpec
{
  std::size_t n    = 1;
  std::size_t dim  = 2;
  double cost_min  = 0.2;
  double cost_max  = 1.0;
  double bid_max   = 1.0;
  BidMode bid_mode = BidMode::truthful;

  void validate() const
  {
    if (dim < 1)
    {
      throw InvalidParameter("population dimension must be at least 1");
    }
    if (!(cost_min > 0.0) || !(cost_min <= cost_max))
    {
      throw InvalidParameter("cost range must satisfy 0 < cost_min <= cost_max");
    }
    if (bid_mode == BidMode::strategic && !(bid_max >= cost_max))
    {
      throw InvalidParameter("strategic bids need bid_max >= cost_max");
    }
  }
};

namespace detail {

inline Worker draw_worker(std::uint64_t id, const PoolSpec &spec, const QualityFunction &quality, Rng &rng)
{
  std::vector<double> coords(spec.dim);
  for (auto &c : coords)
  {
    c = rng.uniform01();
  }
  Worker w;
  w.id      = id;
  w.context = ContextVector(std::move(coords));
  w.cost    = rng.uniform(spec.cost_min, spec.cost_max);
  w.bid     = spec.bid_mode == BidMode::strategic ? rng.uniform(w.cost, spec.bid_max) : w.cost;
  w.quality = quality(w.context);
  return w;
}

}  // namespace detail

/// Workers with i.i.d. uniform contexts and costs; ids 0..n-1.
inline OfflinePool generate_offline_pool(const PoolSpec &spec, const QualityFunction &quality, std::uint64_t seed)
{
  spec.validate();
  if (spec.n < 1)
  {
    throw InvalidParameter("pool size must be at least 1");
  }
  Rng rng(seed);
  std::vector<Worker> workers;
  workers.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i)
  {
    workers.push_back(detail::draw_worker(i, spec, quality, rng));
  }
  return OfflinePool(std::move(workers), spec.dim);
}

/// Synthetic arrivals. Without id reuse every slot brings `workers_per_slot`
/// fresh workers (ids (t-1)*n + j). With reuse, each slot samples distinct
/// workers from a persistent population of `population_size`.
class SyntheticArrivals : public ArrivalProcess
{
public:
  SyntheticArrivals(PoolSpec spec, std::size_t workers_per_slot, QualityFunction quality, std::uint64_t seed,
                    std::optional<std::uint64_t> horizon = std::nullopt, std::size_t population_size = 0)
    : spec_(spec)
    , workers_per_slot_(workers_per_slot)
    , quality_(std::move(quality))
    , seed_(seed)
    , horizon_(horizon)
  {
    spec_.validate();
    if (workers_per_slot_ < 1)
    {
      throw InvalidParameter("workers_per_slot must be at least 1");
    }
    if (population_size > 0)
    {
      if (population_size < workers_per_slot_)
      {
        throw InvalidParameter("persistent population smaller than workers_per_slot");
      }
      PoolSpec base = spec_;
      base.n        = population_size;
      persistent_   = generate_offline_pool(base, quality_, derive_seed(seed_, 0)).workers();
    }
    Hasher h;
    h.add(std::string_view("synthetic-arrivals"))
      .add(static_cast<std::uint64_t>(spec_.dim))
      .add(spec_.cost_min)
      .add(spec_.cost_max)
      .add(spec_.bid_max)
      .add(static_cast<std::uint64_t>(spec_.bid_mode))
      .add(static_cast<std::uint64_t>(workers_per_slot_))
      .add(seed_)
      .add(horizon_.value_or(0))
      .add(static_cast<std::uint64_t>(population_size));
    // The quality map is sampled at fixed probes so distinct fields hash apart.
    Rng probe(0xC0FFEE);
    for (int i = 0; i < 16; ++i)
    {
      std::vector<double> c(spec_.dim);
      for (auto &x : c)
      {
        x = probe.uniform01();
      }
      h.add(quality_(ContextVector(std::move(c))));
    }
    hash_ = h.value();
  }

  std::vector<Worker> slot(std::uint64_t t) const override
  {
    if (t < 1 || (horizon_ && t > *horizon_))
    {
      return {};
    }
    Rng rng(derive_seed(seed_, t));
    std::vector<Worker> out;
    out.reserve(workers_per_slot_);
    if (persistent_.empty())
    {
      for (std::size_t j = 0; j < workers_per_slot_; ++j)
      {
        out.push_back(detail::draw_worker((t - 1) * workers_per_slot_ + j, spec_, quality_, rng));
      }
      return out;
    }
    // Partial Fisher-Yates over indices of the persistent population.
    std::vector<std::size_t> idx(persistent_.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
    {
      idx[i] = i;
    }
    for (std::size_t j = 0; j < workers_per_slot_; ++j)
    {
      const std::size_t pick = j + rng.below(idx.size() - j);
      std::swap(idx[j], idx[pick]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(workers_per_slot_));
    for (std::size_t j = 0; j < workers_per_slot_; ++j)
    {
      out.push_back(persistent_[idx[j]]);
    }
    return out;
  }

  std::optional<std::uint64_t> horizon() const override { return horizon_; }
  std::size_t dim() const override { return spec_.dim; }
  std::uint64_t hash() const override { return hash_; }
  std::size_t workers_per_slot() const noexcept { return workers_per_slot_; }

private:
  PoolSpec spec_;
  std::size_t workers_per_slot_;
  QualityFunction quality_;
  std::uint64_t seed_;
  std::optional<std::uint64_t> horizon_;
  std::vector<Worker> persistent_;
  std::uint64_t hash_ = 0;
};

/// Arrivals replayed from a table of per-slot worker lists (slot 1 first).
class RecordedArrivals : public ArrivalProcess
{
public:
  RecordedArrivals(std::vector<std::vector<Worker>> slots, std::size_t dim)
    : slots_(std::move(slots))
    , dim_(dim)
  {
    Hasher h;
    h.add(std::string_view("recorded-arrivals")).add(static_cast<std::uint64_t>(dim_));
    for (const auto &slot : slots_)
    {
      h.add(static_cast<std::uint64_t>(slot.size()));
      std::unordered_set<std::uint64_t> seen;
      for (const auto &w : slot)
      {
        if (!seen.insert(w.id).second)
        {
          throw InvalidParameter("duplicate worker id " + std::to_string(w.id) + " within one slot");
        }
        if (w.context.size() != dim_)
        {
          throw InvalidParameter("worker context dimension mismatch in recorded arrivals");
        }
        hash_worker(h, w);
      }
    }
    hash_ = h.value();
  }

  std::vector<Worker> slot(std::uint64_t t) const override
  {
    if (t < 1 || t > slots_.size())
    {
      return {};
    }
    return slots_[t - 1];
  }

  std::optional<std::uint64_t> horizon() const override { return slots_.size(); }
  std::size_t dim() const override { return dim_; }
  std::uint64_t hash() const override { return hash_; }

private:
  std::vector<std::vector<Worker>> slots_;
  std::size_t dim_;
  std::uint64_t hash_ = 0;
};

/// Wraps an arrival stream and overrides one worker's bid wherever it appears.
class BidOverrideArrivals : public ArrivalProcess
{
public:
  BidOverrideArrivals(std::shared_ptr<const ArrivalProcess> inner, std::uint64_t worker_id, double bid)
    : inner_(std::move(inner))
    , worker_id_(worker_id)
    , bid_(bid)
  {}

  std::vector<Worker> slot(std::uint64_t t) const override
  {
    auto workers = inner_->slot(t);
    for (auto &w : workers)
    {
      if (w.id == worker_id_)
      {
        w.bid = bid_;
      }
    }
    return workers;
  }

  std::optional<std::uint64_t> horizon() const override { return inner_->horizon(); }
  std::size_t dim() const override { return inner_->dim(); }
  // Same population as the wrapped stream: only the strategic input changed.
  std::uint64_t hash() const override { return inner_->hash(); }

private:
  std::shared_ptr<const ArrivalProcess> inner_;
  std::uint64_t worker_id_;
  double bid_;
};

/// One Bernoulli(mu) reward draw.
inline int sample_reward(const Worker &worker, Rng &rng)
{
  return rng.bernoulli(worker.quality) ? 1 : 0;
}

/// Per-run reward oracle. Workers carrying recorded feedback yield those
/// observations without replacement; once exhausted (or for synthetic workers)
/// rewards are Bernoulli(mu).
class RewardSource
{
public:
  explicit RewardSource(std::uint64_t seed)
    : rng_(seed)
  {}

  int draw(const Worker &worker)
  {
    if (worker.recorded_rewards.empty())
    {
      return sample_reward(worker, rng_);
    }
    auto [it, inserted] = remaining_.try_emplace(worker.id);
    if (inserted)
    {
      it->second = worker.recorded_rewards;
    }
    auto &left = it->second;
    if (left.empty())
    {
      ++replay_exhausted_;
      return sample_reward(worker, rng_);
    }
    const std::size_t pick = rng_.below(left.size());
    const int reward       = left[pick];
    left[pick]             = left.back();
    left.pop_back();
    return reward;
  }

  std::uint64_t replay_exhausted() const noexcept { return replay_exhausted_; }

private:
  Rng rng_;
  std::unordered_map<std::uint64_t, std::vector<std::uint8_t>> remaining_;
  std::uint64_t replay_exhausted_ = 0;
};

}  // namespace caci
