#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace caci {

/// Incremental FNV-1a (64 bit). Doubles are hashed by bit pattern.
class Hasher
{
public:
  Hasher &bytes(const void *data, std::size_t size)
  {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < size; ++i)
    {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }

  Hasher &add(std::uint64_t v) { return bytes(&v, sizeof v); }
  Hasher &add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }
  Hasher &add(std::string_view s)
  {
    add(static_cast<std::uint64_t>(s.size()));
    return bytes(s.data(), s.size());
  }

  std::uint64_t value() const noexcept { return state_; }

private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string hex_digest(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace caci
