#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "caci/context_space.hpp"
#include "caci/error.hpp"
#include "caci/hash.hpp"
#include "caci/rng.hpp"

namespace caci {

/// Normalized trajectory-style sensing ability sqrt(s1) * exp(-s0^2 / (2 sigma^2)).
///
/// The raw form (1/sigma) sqrt(s1 / 2 pi) exp(-s0^2 / 2 sigma^2) peaks at
/// s = (0, 1); dividing by that peak maps [0,1]^2 onto [0,1].
inline double trajectory_quality(const ContextVector &context, double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(sigma))
  {
    throw InvalidParameter("trajectory sigma must be positive");
  }
  if (context.size() != 2)
  {
    throw InvalidParameter("trajectory quality needs a 2-dimensional context (distance, battery)");
  }
  const double s0 = context[0];
  const double s1 = context[1];
  return std::sqrt(s1) * std::exp(-(s0 * s0) / (2.0 * sigma * sigma));
}

/// Sum of isotropic Gaussian bumps, min-max rescaled into [lo, hi] and clamped.
///
/// The Lipschitz constant follows from max_r (r / w^2) exp(-r^2 / 2 w^2) = e^{-1/2} / w
/// per bump, scaled by the rescaling factor. Clamping cannot increase it.
struct BumpField
{
  struct Bump
  {
    std::vector<double> center;
    double weight;
  };

  std::size_t dim = 0;
  double width    = 0.2;
  double lo       = 0.1;
  double hi       = 0.9;
  std::vector<Bump> bumps;
  double raw_min = 0.0;
  double raw_max = 1.0;

  static BumpField random(std::size_t dim, std::size_t bump_count, double width, double lo, double hi,
                          std::uint64_t seed)
  {
    if (dim < 1 || bump_count < 1)
    {
      throw InvalidParameter("bump field needs dim >= 1 and at least one bump");
    }
    if (!(width > 0.0))
    {
      throw InvalidParameter("bump width must be positive");
    }
    if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi))
    {
      throw InvalidParameter("bump field range must satisfy 0 <= lo <= hi <= 1");
    }
    BumpField field;
    field.dim   = dim;
    field.width = width;
    field.lo    = lo;
    field.hi    = hi;
    Rng rng(seed);
    for (std::size_t b = 0; b < bump_count; ++b)
    {
      Bump bump;
      bump.center.resize(dim);
      for (auto &c : bump.center)
      {
        c = rng.uniform01();
      }
      bump.weight = rng.uniform(0.3, 1.0);
      field.bumps.push_back(std::move(bump));
    }
    field.calibrate();
    return field;
  }

  double raw(std::span<const double> s) const
  {
    double total = 0.0;
    for (const auto &bump : bumps)
    {
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i)
      {
        const double diff = s[i] - bump.center[i];
        r2 += diff * diff;
      }
      total += bump.weight * std::exp(-r2 / (2.0 * width * width));
    }
    return total;
  }

  double operator()(const ContextVector &s) const
  {
    if (s.size() != dim)
    {
      throw InvalidParameter("context dimension does not match quality field");
    }
    const double span = raw_max - raw_min;
    if (span <= 0.0)
    {
      return lo;
    }
    const double v = lo + (hi - lo) * (raw(s.coords()) - raw_min) / span;
    return std::clamp(v, lo, hi);
  }

  HoelderParams certificate() const
  {
    double weight_sum = 0.0;
    for (const auto &bump : bumps)
    {
      weight_sum += bump.weight;
    }
    const double span = raw_max - raw_min;
    if (span <= 0.0 || hi == lo)
    {
      return {1e-12, 1.0};
    }
    const double raw_lipschitz = weight_sum * std::exp(-0.5) / width;
    return {std::max((hi - lo) / span * raw_lipschitz, 1e-12), 1.0};
  }

private:
  // Estimates raw extrema on a lattice plus the bump centers. Underestimating the
  // range only clamps more values; the certificate stays valid.
  void calibrate()
  {
    std::size_t per_axis = static_cast<std::size_t>(std::floor(std::pow(20000.0, 1.0 / static_cast<double>(dim))));
    per_axis             = std::max<std::size_t>(per_axis, 2);
    std::size_t total    = 1;
    for (std::size_t i = 0; i < dim && total <= 200000; ++i)
    {
      total *= per_axis;
    }
    raw_min = std::numeric_limits<double>::infinity();
    raw_max = -std::numeric_limits<double>::infinity();
    std::vector<double> point(dim);
    for (std::size_t n = 0; n < total; ++n)
    {
      std::size_t rest = n;
      for (std::size_t i = 0; i < dim; ++i)
      {
        point[i] = static_cast<double>(rest % per_axis) / static_cast<double>(per_axis - 1);
        rest /= per_axis;
      }
      const double v = raw(point);
      raw_min        = std::min(raw_min, v);
      raw_max        = std::max(raw_max, v);
    }
    for (const auto &bump : bumps)
    {
      raw_max = std::max(raw_max, raw(bump.center));
    }
  }
};

struct TrajectoryQuality
{
  double sigma = 1.0;

  double operator()(const ContextVector &s) const { return trajectory_quality(s, sigma); }

  /// |sqrt(a) - sqrt(b)| <= |a-b|^{1/2} plus the exp factor's Lipschitz constant
  /// e^{-1/2}/sigma, folded into exponent 1/2 over the diameter sqrt(2).
  HoelderParams certificate() const { return {1.0 + std::pow(2.0, 0.25) * std::exp(-0.5) / sigma, 0.5}; }
};

struct ConstantQuality
{
  double value = 0.5;

  double operator()(const ContextVector &) const { return value; }
  HoelderParams certificate() const { return {1e-12, 1.0}; }
};

/// Multilinear interpolation over a regular lattice of `nodes_per_axis`^M values
/// (row-major, dimension 0 most significant).
struct TableQuality
{
  std::size_t dim            = 1;
  std::size_t nodes_per_axis = 2;
  std::vector<double> values;

  void validate() const
  {
    if (dim < 1 || nodes_per_axis < 2)
    {
      throw InvalidParameter("quality table needs dim >= 1 and at least 2 nodes per axis");
    }
    std::size_t expected = 1;
    for (std::size_t i = 0; i < dim; ++i)
    {
      expected *= nodes_per_axis;
    }
    if (values.size() != expected)
    {
      throw InvalidParameter("quality table has " + std::to_string(values.size()) + " values, expected " +
                             std::to_string(expected));
    }
    for (double v : values)
    {
      if (!(v >= 0.0 && v <= 1.0))
      {
        throw InvalidParameter("quality table values must lie in [0,1]");
      }
    }
  }

  double operator()(const ContextVector &s) const
  {
    if (s.size() != dim)
    {
      throw InvalidParameter("context dimension does not match quality table");
    }
    const double cells = static_cast<double>(nodes_per_axis - 1);
    std::vector<std::size_t> base(dim);
    std::vector<double> frac(dim);
    for (std::size_t i = 0; i < dim; ++i)
    {
      const double x = s[i] * cells;
      base[i]        = std::min(static_cast<std::size_t>(x), nodes_per_axis - 2);
      frac[i]        = x - static_cast<double>(base[i]);
    }
    double total = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner)
    {
      double w           = 1.0;
      std::size_t linear = 0;
      for (std::size_t i = 0; i < dim; ++i)
      {
        const bool up = (corner >> (dim - 1 - i)) & 1U;
        w *= up ? frac[i] : 1.0 - frac[i];
        linear = linear * nodes_per_axis + base[i] + (up ? 1 : 0);
      }
      total += w * values[linear];
    }
    return std::clamp(total, 0.0, 1.0);
  }

  HoelderParams certificate() const
  {
    double max_step = 0.0;
    std::size_t stride = 1;
    for (std::size_t axis = dim; axis-- > 0;)
    {
      for (std::size_t n = 0; n < values.size(); ++n)
      {
        const std::size_t coord = (n / stride) % nodes_per_axis;
        if (coord + 1 < nodes_per_axis)
        {
          max_step = std::max(max_step, std::abs(values[n + stride] - values[n]));
        }
      }
      stride *= nodes_per_axis;
    }
    const double L = std::sqrt(static_cast<double>(dim)) * static_cast<double>(nodes_per_axis - 1) * max_step;
    return {std::max(L, 1e-12), 1.0};
  }
};

/// A deterministic quality map [0,1]^M -> [0,1] together with its certified
/// Hoelder parameters.
class QualityFunction
{
public:
  using Variant = std::variant<BumpField, TrajectoryQuality, ConstantQuality, TableQuality>;

  QualityFunction()
    : impl_(ConstantQuality{})
  {}

  explicit QualityFunction(Variant impl)
    : impl_(std::move(impl))
  {
    if (const auto *table = std::get_if<TableQuality>(&impl_))
    {
      table->validate();
    }
    if (const auto *constant = std::get_if<ConstantQuality>(&impl_))
    {
      if (!(constant->value >= 0.0 && constant->value <= 1.0))
      {
        throw InvalidParameter("constant quality must lie in [0,1]");
      }
    }
    if (const auto *traj = std::get_if<TrajectoryQuality>(&impl_))
    {
      if (!(traj->sigma > 0.0))
      {
        throw InvalidParameter("trajectory sigma must be positive");
      }
    }
  }

  static QualityFunction constant(double value) { return QualityFunction(ConstantQuality{value}); }
  static QualityFunction trajectory(double sigma) { return QualityFunction(TrajectoryQuality{sigma}); }
  static QualityFunction bumps(std::size_t dim, std::size_t count, double width, double lo, double hi,
                               std::uint64_t seed)
  {
    return QualityFunction(BumpField::random(dim, count, width, lo, hi, seed));
  }

  double operator()(const ContextVector &s) const
  {
    return std::visit([&](const auto &f) { return f(s); }, impl_);
  }

  HoelderParams certificate() const
  {
    return std::visit([](const auto &f) { return f.certificate(); }, impl_);
  }

  std::string kind() const
  {
    struct Namer
    {
      std::string operator()(const BumpField &) const { return "bumps"; }
      std::string operator()(const TrajectoryQuality &) const { return "trajectory"; }
      std::string operator()(const ConstantQuality &) const { return "constant"; }
      std::string operator()(const TableQuality &) const { return "table"; }
    };
    return std::visit(Namer{}, impl_);
  }

  const Variant &variant() const noexcept { return impl_; }

private:
  Variant impl_;
};

}  // namespace caci
