#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "caci/error.hpp"
#include "caci/population.hpp"

namespace caci {

struct IngestOptions
{
  /// Require bid == cost (a missing bid column means bid = cost).
  bool truthful = true;
  /// Min-max rescale every context column onto [0,1]. When off, values must
  /// already lie in [0,1] and are kept verbatim.
  bool normalize_context = true;
};

using IngestedPopulation = std::variant<OfflinePool, RecordedArrivals>;

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
  {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
  {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;)
  {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos)
    {
      return out;
    }
    start = comma + 1;
  }
}

inline double parse_double(std::string_view field, std::size_t line, std::string_view column)
{
  double v        = 0.0;
  const auto *end = field.data() + field.size();
  auto [ptr, ec]  = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v))
  {
    throw ParseError(line, "column '" + std::string(column) + "': not a finite number: '" + std::string(field) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view field, std::size_t line, std::string_view column)
{
  std::uint64_t v = 0;
  const auto *end = field.data() + field.size();
  auto [ptr, ec]  = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end)
  {
    throw ParseError(line, "column '" + std::string(column) + "': not a non-negative integer: '" +
                             std::string(field) + "'");
  }
  return v;
}

struct RawRow
{
  std::size_t line = 0;
  std::uint64_t id = 0;
  std::uint64_t slot = 0;
  double cost = 0.0;
  double bid  = 0.0;
  std::vector<double> ctx;
  std::optional<double> quality;
  std::optional<int> reward;
};

}  // namespace detail

/// Parses a worker table. Rows sharing (slot, id) are one worker with several
/// recorded reward observations. With a `slot` column the result is an arrival
/// stream (slots 1..max, empty slots allowed), otherwise an off-line pool.
inline IngestedPopulation parse_worker_csv(std::istream &in, const IngestOptions &options = {})
{
  std::string text;
  std::size_t line_no = 0;
  if (!std::getline(in, text))
  {
    throw ParseError(1, "missing header row");
  }
  ++line_no;
  const auto header = detail::split_fields(text);
  std::optional<std::size_t> col_id, col_slot, col_cost, col_bid, col_quality, col_reward;
  std::map<std::size_t, std::size_t> ctx_cols;  // context index -> column
  for (std::size_t c = 0; c < header.size(); ++c)
  {
    const auto name = header[c];
    auto assign     = [&](std::optional<std::size_t> &slot) {
      if (slot)
      {
        throw ParseError(1, "duplicate column '" + std::string(name) + "'");
      }
      slot = c;
    };
    if (name == "id")
      assign(col_id);
    else if (name == "slot")
      assign(col_slot);
    else if (name == "cost")
      assign(col_cost);
    else if (name == "bid")
      assign(col_bid);
    else if (name == "quality")
      assign(col_quality);
    else if (name == "reward")
      assign(col_reward);
    else if (name.size() > 3 && name.substr(0, 3) == "ctx")
    {
      const auto idx = detail::parse_uint(name.substr(3), 1, name);
      if (!ctx_cols.emplace(idx, c).second)
      {
        throw ParseError(1, "duplicate column '" + std::string(name) + "'");
      }
    }
    else
    {
      throw ParseError(1, "unknown column '" + std::string(name) + "'");
    }
  }
  if (!col_id || !col_cost)
  {
    throw ParseError(1, "header must contain 'id' and 'cost'");
  }
  if (ctx_cols.empty())
  {
    throw ParseError(1, "header must contain context columns ctx0..ctx{M-1}");
  }
  const std::size_t dim = ctx_cols.size();
  if (ctx_cols.rbegin()->first != dim - 1)
  {
    throw ParseError(1, "context columns must be ctx0..ctx" + std::to_string(dim - 1) + " without gaps");
  }
  if (!col_quality && !col_reward)
  {
    throw ParseError(1, "without a 'quality' column a 'reward' column is required for replay");
  }

  std::vector<detail::RawRow> rows;
  while (std::getline(in, text))
  {
    ++line_no;
    if (detail::trim(text).empty())
    {
      continue;
    }
    const auto f = detail::split_fields(text);
    if (f.size() != header.size())
    {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(f.size()));
    }
    detail::RawRow row;
    row.line = line_no;
    row.id   = detail::parse_uint(f[*col_id], line_no, "id");
    row.slot = col_slot ? detail::parse_uint(f[*col_slot], line_no, "slot") : 0;
    if (col_slot && row.slot < 1)
    {
      throw ParseError(line_no, "slot numbers start at 1");
    }
    row.cost = detail::parse_double(f[*col_cost], line_no, "cost");
    row.bid  = col_bid ? detail::parse_double(f[*col_bid], line_no, "bid") : row.cost;
    if (!(row.cost > 0.0))
    {
      throw ParseError(line_no, "cost must be positive (worker id " + std::to_string(row.id) + ")");
    }
    if (options.truthful && row.bid != row.cost)
    {
      throw ParseError(line_no, "truthful mode requires bid == cost (worker id " + std::to_string(row.id) +
                                  ", cost " + std::string(f[*col_cost]) + ")");
    }
    if (row.bid < row.cost)
    {
      throw ParseError(line_no, "bid below cost (worker id " + std::to_string(row.id) + ")");
    }
    for (const auto &[idx, c] : ctx_cols)
    {
      row.ctx.push_back(detail::parse_double(f[c], line_no, header[c]));
    }
    if (col_quality)
    {
      const double q = detail::parse_double(f[*col_quality], line_no, "quality");
      if (!(q >= 0.0 && q <= 1.0))
      {
        throw ParseError(line_no, "quality outside [0,1]");
      }
      row.quality = q;
    }
    if (col_reward && !f[*col_reward].empty())
    {
      const auto r = detail::parse_uint(f[*col_reward], line_no, "reward");
      if (r > 1)
      {
        throw ParseError(line_no, "reward must be 0 or 1");
      }
      row.reward = static_cast<int>(r);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty())
  {
    throw ParseError(line_no, "no data rows");
  }

  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto &row : rows)
  {
    for (std::size_t i = 0; i < dim; ++i)
    {
      lo[i] = std::min(lo[i], row.ctx[i]);
      hi[i] = std::max(hi[i], row.ctx[i]);
    }
  }
  auto scaled = [&](const detail::RawRow &row) {
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < dim; ++i)
    {
      if (!options.normalize_context)
      {
        if (!(row.ctx[i] >= 0.0 && row.ctx[i] <= 1.0))
        {
          throw ParseError(row.line, "context value outside [0,1] with normalization disabled");
        }
        out[i] = row.ctx[i];
      }
      else
      {
        const double span = hi[i] - lo[i];
        out[i]            = span > 0.0 ? std::clamp((row.ctx[i] - lo[i]) / span, 0.0, 1.0) : 0.0;
      }
    }
    return out;
  };

  // Group observations into workers, keyed by (slot, id), in first-seen order.
  struct Accum
  {
    Worker worker;
    std::size_t first_line = 0;
    std::vector<double> raw_ctx;
  };
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> index;
  std::vector<Accum> accums;
  for (const auto &row : rows)
  {
    const auto key        = std::make_pair(row.slot, row.id);
    auto [it, inserted]   = index.try_emplace(key, accums.size());
    if (inserted)
    {
      Accum a;
      a.first_line      = row.line;
      a.raw_ctx         = row.ctx;
      a.worker.id       = row.id;
      a.worker.cost     = row.cost;
      a.worker.bid      = row.bid;
      a.worker.context  = ContextVector(scaled(row));
      a.worker.quality  = row.quality.value_or(0.0);
      accums.push_back(std::move(a));
    }
    auto &a = accums[it->second];
    if (!inserted && (a.worker.cost != row.cost || a.worker.bid != row.bid || a.raw_ctx != row.ctx ||
                      (row.quality && *row.quality != a.worker.quality)))
    {
      throw ParseError(row.line, "repeated row for worker " + std::to_string(row.id) +
                                   " disagrees with line " + std::to_string(a.first_line));
    }
    if (row.reward)
    {
      a.worker.recorded_rewards.push_back(static_cast<std::uint8_t>(*row.reward));
    }
  }
  for (auto &a : accums)
  {
    if (!col_quality)
    {
      if (a.worker.recorded_rewards.empty())
      {
        throw ParseError(a.first_line, "worker " + std::to_string(a.worker.id) + " has no quality and no rewards");
      }
      double sum = 0.0;
      for (auto r : a.worker.recorded_rewards)
      {
        sum += r;
      }
      a.worker.quality = sum / static_cast<double>(a.worker.recorded_rewards.size());
    }
  }

  if (!col_slot)
  {
    std::vector<Worker> workers;
    workers.reserve(accums.size());
    for (auto &a : accums)
    {
      workers.push_back(std::move(a.worker));
    }
    return OfflinePool(std::move(workers), dim);
  }
  const std::uint64_t max_slot = index.rbegin()->first.first;
  std::vector<std::vector<Worker>> slots(max_slot);
  for (const auto &[key, pos] : index)
  {
    slots[key.first - 1].push_back(std::move(accums[pos].worker));
  }
  return RecordedArrivals(std::move(slots), dim);
}

inline IngestedPopulation ingest_worker_csv(const std::string &path, const IngestOptions &options = {})
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("population.csv_path", "cannot open '" + path + "'");
  }
  return parse_worker_csv(in, options);
}

/// Writes a pool in the ingest schema with 17 significant digits, so that
/// re-ingesting with normalization off reproduces it exactly.
inline std::string pool_to_csv(const OfflinePool &pool)
{
  std::ostringstream os;
  os << "id,cost,bid";
  for (std::size_t i = 0; i < pool.dim(); ++i)
  {
    os << ",ctx" << i;
  }
  os << ",quality\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto &w : pool.workers())
  {
    os << w.id << ',' << num(w.cost) << ',' << num(w.bid);
    for (double c : w.context.coords())
    {
      os << ',' << num(c);
    }
    os << ',' << num(w.quality) << '\n';
  }
  return os.str();
}

}  // namespace caci
