#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "caci/error.hpp"
#include "caci/hash.hpp"

namespace caci {

enum class Phase : std::uint8_t
{
  init,
  exploration,
  exploitation,
};

inline const char *phase_name(Phase p)
{
  switch (p)
  {
  case Phase::init:
    return "init";
  case Phase::exploration:
    return "exploration";
  case Phase::exploitation:
    return "exploitation";
  }
  return "?";
}

struct Selection
{
  std::uint64_t id = 0;
  double payment   = 0.0;
  std::uint8_t reward = 0;
  double quality   = 0.0;  ///< true mu, for expected-reward accounting only

  bool operator==(const Selection &) const = default;
};

struct SlotRecord
{
  std::uint64_t slot = 0;
  Phase phase        = Phase::exploitation;
  std::vector<Selection> selections;
  double residual = 0.0;  ///< budget left after this slot

  bool operator==(const SlotRecord &) const = default;
};

/// Outcome of one mechanism run. Totals are always maintained; per-slot records
/// and cumulative series only when recording is enabled.
struct ExperimentTrace
{
  std::string mechanism;
  std::uint64_t seed            = 0;
  std::uint64_t config_hash     = 0;
  std::uint64_t population_hash = 0;
  double budget                 = 0.0;
  double explore_budget         = 0.0;
  std::uint64_t granularity     = 0;
  std::uint64_t cell_count      = 0;

  std::vector<SlotRecord> slots;
  std::vector<double> cumulative_realized;
  std::vector<double> cumulative_expected;

  std::uint64_t slots_executed  = 0;
  std::uint64_t selection_count = 0;
  double reward_realized        = 0.0;
  double reward_expected        = 0.0;
  double budget_spent           = 0.0;
  double residual               = 0.0;

  std::uint64_t skipped_slots    = 0;  ///< on-line slots skipped (competition or budget)
  std::uint64_t empty_cube_skips = 0;
  std::uint64_t infinite_ucb     = 0;  ///< selections made on an unexplored (+inf) index
  std::vector<std::string> diagnostics;

  bool recorded = false;  ///< per-slot records and series were kept

  void note(std::string msg)
  {
    if (diagnostics.size() < 32)
    {
      diagnostics.push_back(std::move(msg));
    }
  }

  /// Canonical text form; equal traces serialize to identical bytes.
  std::string serialize() const
  {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    os << "mechanism=" << mechanism << "\nseed=" << seed << "\nconfig_hash=" << hex_digest(config_hash)
       << "\npopulation_hash=" << hex_digest(population_hash) << "\nbudget=" << num(budget)
       << "\nexplore_budget=" << num(explore_budget) << "\nd=" << granularity << "\ncells=" << cell_count
       << "\nslots_executed=" << slots_executed << "\nselections=" << selection_count
       << "\nreward_realized=" << num(reward_realized) << "\nreward_expected=" << num(reward_expected)
       << "\nbudget_spent=" << num(budget_spent) << "\nresidual=" << num(residual)
       << "\nskipped_slots=" << skipped_slots << "\nempty_cube_skips=" << empty_cube_skips
       << "\ninfinite_ucb=" << infinite_ucb << "\n";
    for (const auto &s : slots)
    {
      os << s.slot << ',' << phase_name(s.phase) << ',' << num(s.residual);
      for (const auto &sel : s.selections)
      {
        os << ';' << sel.id << ':' << num(sel.payment) << ':' << int(sel.reward) << ':' << num(sel.quality);
      }
      os << '\n';
    }
    return os.str();
  }

  /// Flat per-selection CSV for external plotting.
  std::string to_csv() const
  {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    os << "slot,phase,worker_id,payment,reward,quality,residual\n";
    for (const auto &s : slots)
    {
      for (const auto &sel : s.selections)
      {
        os << s.slot << ',' << phase_name(s.phase) << ',' << sel.id << ',' << num(sel.payment) << ','
           << int(sel.reward) << ',' << num(sel.quality) << ',' << num(s.residual) << '\n';
      }
    }
    return os.str();
  }
};

/// Residual budget with an assertion-backed spend history.
class BudgetLedger
{
public:
  explicit BudgetLedger(double initial, bool keep_history = true)
    : initial_(initial)
    , residual_(initial)
    , keep_history_(keep_history)
  {
    if (!(initial >= 0.0) || !std::isfinite(initial))
    {
      throw InvalidParameter("budget must be non-negative and finite");
    }
  }

  double initial() const noexcept { return initial_; }
  double residual() const noexcept { return residual_; }
  double spent() const noexcept { return initial_ - residual_; }
  bool covers(double amount) const noexcept { return residual_ >= amount; }
  const std::vector<double> &history() const noexcept { return history_; }

  void spend(double amount)
  {
    if (!(amount >= 0.0) || amount > residual_)
    {
      throw InvalidParameter("spend exceeds residual budget");
    }
    // residual >= amount implies the rounded difference is non-negative.
    residual_ -= amount;
    if (keep_history_)
    {
      history_.push_back(amount);
    }
  }

private:
  double initial_;
  double residual_;
  bool keep_history_;
  std::vector<double> history_;
};

/// Per-hypercube pull counts and reward sums; mean = sum / count.
class BanditState
{
public:
  explicit BanditState(std::uint64_t cells = 0)
    : pulls_(cells, 0)
    , reward_sum_(cells, 0.0)
  {}

  std::uint64_t cells() const noexcept { return pulls_.size(); }
  std::uint64_t pulls(std::uint64_t cube) const { return pulls_.at(cube); }
  double mean(std::uint64_t cube) const
  {
    const auto n = pulls_.at(cube);
    return n == 0 ? 0.0 : reward_sum_[cube] / static_cast<double>(n);
  }
  std::uint64_t total_pulls() const noexcept { return total_; }

  /// One observation for `cube`. Folding a slot's observations one at a time
  /// gives the same counts and means as the batched slot update.
  void update(std::uint64_t cube, int reward)
  {
    ++pulls_.at(cube);
    reward_sum_[cube] += reward;
    ++total_;
  }

  const std::vector<std::uint64_t> &pull_counts() const noexcept { return pulls_; }

  bool operator==(const BanditState &) const = default;

private:
  std::vector<std::uint64_t> pulls_;
  std::vector<double> reward_sum_;
  std::uint64_t total_ = 0;
};

}  // namespace caci
