// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace urnlab {

namespace detail {

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// Absorbs one path component into a running key. The tag keeps components
// positional, so (a, b) and (b, a) derive different keys.
constexpr std::uint64_t absorb(std::uint64_t key, std::uint64_t value,
                               std::uint64_t tag) noexcept {
  return mix64(key ^ mix64(value + tag * kGolden));
}

}  // namespace detail

/// Independent sub-streams inside one (player, round) cell.
enum class Lane : std::uint64_t {
  Nature = 0,  ///< state and signal draws
  Policy = 1,  ///< the agent's own randomization
};

/// Identifies a single simulated game. Every random number used while
/// simulating it is a pure function of these fields plus the
/// (player, round, lane) coordinates of the draw.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replication = 0;
  std::uint64_t game = 0;

  friend constexpr bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Player id reserved for draws that belong to the game, not to an agent.
inline constexpr std::uint64_t kNaturePlayer =
    std::numeric_limits<std::uint64_t>::max();

/// Counter-based random stream. The n-th output is mix64(key + n * golden),
/// so a stream is fully determined by its key and the number of values
/// consumed; there is no hidden shared state.
///
/// Satisfies UniformRandomBitGenerator, but the member samplers below are
/// preferred: their results do not depend on the standard library vendor.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr Stream derive(const SeedSpec& seed, std::uint64_t player,
                                 std::uint64_t round, Lane lane) noexcept {
    std::uint64_t k = detail::mix64(seed.master_seed ^ 0x75726e6c6162ull);
    k = detail::absorb(k, seed.replication, 1);
    k = detail::absorb(k, seed.game, 2);
    k = detail::absorb(k, player, 3);
    k = detail::absorb(k, round, 4);
    k = detail::absorb(k, static_cast<std::uint64_t>(lane), 5);
    return Stream(k);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection,
  /// so the result is exactly uniform.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) {
      (*this)();
      return 0;
    }
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const unsigned __int128 m =
          static_cast<unsigned __int128>((*this)()) * bound;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  /// Standard normal via Box-Muller. Consumes two values.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t consumed() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace urnlab
