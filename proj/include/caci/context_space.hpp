#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "caci/error.hpp"

namespace caci {

/// Smoothness certificate |mu(s) - mu(s')| <= L * ||s - s'||^alpha.
struct HoelderParams
{
  double L     = 1.0;
  double alpha = 1.0;

  void validate() const
  {
    if (!(L > 0.0) || !std::isfinite(L))
    {
      throw InvalidParameter("Hoelder constant L must be positive and finite");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha))
    {
      throw InvalidParameter("Hoelder exponent alpha must be positive and finite");
    }
  }
};

/// A point of the unit context cube [0,1]^M.
class ContextVector
{
public:
  ContextVector() = default;

  explicit ContextVector(std::vector<double> coords)
    : coords_(std::move(coords))
  {
    if (coords_.empty())
    {
      throw InvalidParameter("context vector must have at least one dimension");
    }
    for (double c : coords_)
    {
      if (!(c >= 0.0 && c <= 1.0))
      {
        throw InvalidParameter("context coordinate outside [0,1]: " + std::to_string(c));
      }
    }
  }

  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }

  bool operator==(const ContextVector &) const = default;

private:
  std::vector<double> coords_;
};

inline double euclidean_distance(const ContextVector &a, const ContextVector &b)
{
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

struct HypercubeId
{
  std::uint64_t linear_index = 0;

  auto operator<=>(const HypercubeId &) const = default;
};

/// Uniform partition of [0,1]^M into d^M hypercubes. Linear ids are row-major
/// with dimension 0 as the most significant digit.
class PartitionGrid
{
public:
  PartitionGrid(std::size_t dim, std::uint64_t granularity)
    : dim_(dim)
    , granularity_(granularity)
  {
    if (dim_ < 1)
    {
      throw InvalidParameter("context dimension M must be at least 1");
    }
    if (granularity_ < 1)
    {
      throw InvalidParameter("granularity d must be at least 1");
    }
    cell_count_ = 1;
    for (std::size_t i = 0; i < dim_; ++i)
    {
      if (cell_count_ > std::numeric_limits<std::uint64_t>::max() / granularity_)
      {
        throw InvalidParameter("d^M overflows 64 bits (d=" + std::to_string(granularity_) +
                               ", M=" + std::to_string(dim_) + ")");
      }
      cell_count_ *= granularity_;
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t granularity() const noexcept { return granularity_; }
  std::uint64_t cell_count() const noexcept { return cell_count_; }

  /// Per-dimension cell index of a coordinate; 1.0 folds into the last cell.
  std::uint64_t axis_index(double coord) const
  {
    const double scaled = std::floor(coord * static_cast<double>(granularity_));
    const auto idx      = scaled <= 0.0 ? std::uint64_t{0} : static_cast<std::uint64_t>(scaled);
    return std::min(idx, granularity_ - 1);
  }

  HypercubeId locate(const ContextVector &context) const
  {
    if (context.size() != dim_)
    {
      throw InvalidParameter("context has dimension " + std::to_string(context.size()) +
                             " but grid has dimension " + std::to_string(dim_));
    }
    std::uint64_t linear = 0;
    for (std::size_t i = 0; i < dim_; ++i)
    {
      linear = linear * granularity_ + axis_index(context[i]);
    }
    return HypercubeId{linear};
  }

  std::vector<std::uint64_t> cell_indices(HypercubeId id) const
  {
    std::vector<std::uint64_t> out(dim_);
    std::uint64_t rest = id.linear_index;
    for (std::size_t i = dim_; i-- > 0;)
    {
      out[i] = rest % granularity_;
      rest /= granularity_;
    }
    return out;
  }

  HypercubeId from_indices(std::span<const std::uint64_t> indices) const
  {
    if (indices.size() != dim_)
    {
      throw InvalidParameter("index tuple has wrong dimension");
    }
    std::uint64_t linear = 0;
    for (std::uint64_t idx : indices)
    {
      if (idx >= granularity_)
      {
        throw InvalidParameter("cell index out of range");
      }
      linear = linear * granularity_ + idx;
    }
    return HypercubeId{linear};
  }

  bool operator==(const PartitionGrid &) const = default;

private:
  std::size_t dim_;
  std::uint64_t granularity_;
  std::uint64_t cell_count_ = 1;
};

/// d = ceil(B^(1/(3 alpha + M))). Near-integer powers snap to that integer.
inline std::uint64_t compute_granularity(double budget, const HoelderParams &hoelder, std::size_t dim)
{
  if (!std::isfinite(budget))
  {
    throw InvalidParameter("budget must be finite");
  }
  if (budget < 1.0)
  {
    throw InvalidParameter("budget must be at least 1 to derive a granularity");
  }
  if (!(hoelder.alpha > 0.0) || !std::isfinite(hoelder.alpha))
  {
    throw InvalidParameter("Hoelder exponent alpha must be positive and finite");
  }
  if (dim < 1)
  {
    throw InvalidParameter("context dimension M must be at least 1");
  }
  const double x       = std::pow(budget, 1.0 / (3.0 * hoelder.alpha + static_cast<double>(dim)));
  const double nearest = std::round(x);
  double d             = std::abs(x - nearest) <= 1e-9 * std::max(1.0, nearest) ? nearest : std::ceil(x);
  d                    = std::max(d, 1.0);
  if (d > static_cast<double>(std::numeric_limits<std::uint32_t>::max()))
  {
    throw InvalidParameter("granularity too large");
  }
  return static_cast<std::uint64_t>(d);
}

inline HypercubeId locate(const ContextVector &context, const PartitionGrid &grid)
{
  return grid.locate(context);
}

/// Worst-case quality spread inside one hypercube, L * (sqrt(M) / d)^alpha.
inline double delta_bound(const HoelderParams &hoelder, const PartitionGrid &grid)
{
  hoelder.validate();
  const double diameter = std::sqrt(static_cast<double>(grid.dim())) / static_cast<double>(grid.granularity());
  return hoelder.L * std::pow(diameter, hoelder.alpha);
}

}  // namespace caci
