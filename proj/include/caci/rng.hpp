#pragma once

#include <cstdint>
#include <random>

namespace caci {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (base, stream). Adding streams never perturbs
/// the seeds handed to existing ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept
{
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// mt19937_64 with portable (library-independent) uniform draws, so traces are
/// bit-identical across standard library implementations.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n); n must be positive. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n)
  {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = engine_();
    while (x >= limit)
    {
      x = engine_();
    }
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::mt19937_64 &engine() noexcept { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace caci
