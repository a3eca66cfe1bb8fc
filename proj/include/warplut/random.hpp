#pragma once

#include <cstdint>
#include <limits>

namespace warplut {

// SplitMix64 finalizer. Used to derive independent substreams from a master
// seed and as a counter-based generator for per-node noise.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) noexcept {
  return splitmix64(seed ^ splitmix64(a + 0x632BE59BD9B4E019ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive_seed(derive_seed(seed, a), b);
}

// Counter-based stream: value i depends only on (key, i), so any partition of
// the work sees the same numbers. Satisfies uniform_random_bit_generator.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterStream(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return at(counter_++); }
  constexpr result_type at(std::uint64_t i) const noexcept {
    return splitmix64(key_ + i * 0xD1B54A32D192ED03ull);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Maps 64 random bits to a double strictly inside (0, 1).
constexpr double bits_to_open01(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace warplut
