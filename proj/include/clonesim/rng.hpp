#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace clonesim {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ (mix64(v + kGolden) + (h << 6) + (h >> 2)));
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
  // FNV-1a, then finalized.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return mix64(h);
}

}  // namespace detail

/// Counter-based random stream.
///
/// A stream is identified by a 64-bit key derived from the run seed, a
/// substream name and any number of integer coordinates (job, task, copy
/// ordinal, slot...). Draw n of a stream is mix(key + n * golden), so two
/// streams with different coordinates never share state and a stream can be
/// recreated anywhere from its coordinates alone. This is what gives common
/// random numbers across policies: the workload of copy #k of a given task is
/// the same no matter which policy launched it or when.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) noexcept : key_(key) {}

  static RngStream derive(std::uint64_t seed, std::string_view name,
                          std::initializer_list<std::uint64_t> coords = {}) noexcept {
    std::uint64_t key = detail::hash_combine(detail::mix64(seed), detail::hash_name(name));
    for (std::uint64_t c : coords) key = detail::hash_combine(key, c);
    return RngStream(key);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  // Uniform on (0, 1].
  double uniform_open0() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller (one value per call; portable across standard libraries).
  double normal() noexcept {
    const double u1 = uniform_open0();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Poisson inter-arrival gap with the given rate.
  double exponential(double rate) noexcept { return -std::log(uniform_open0()) / rate; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace clonesim
