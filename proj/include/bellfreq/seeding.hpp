#pragma once

// Reproducible random streams.
//
// Every stochastic quantity is drawn from a stream identified by
// (master seed, label, chunk index). The child seed is
//
//   h0 = splitmix64(master)
//   h1 = splitmix64(h0 ^ fnv1a64(label))
//   child = splitmix64(h1 ^ chunk)
//
// and seeds a std::mt19937_64, whose output sequence is fixed by the standard.
// Conversions to doubles and bounded integers are done here rather than with
// <random> distributions, whose algorithms are implementation-defined.

#include <cstdint>
#include <random>
#include <string_view>

namespace bellfreq {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t chunk) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ fnv1a64(label));
  return splitmix64(h ^ chunk);
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, std::string_view label, std::uint64_t chunk)
      : engine_(derive_seed(master, label, chunk)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on {0, ..., n-1}; multiply-high reduction, bias below n / 2^64.
  std::size_t below(std::size_t n) {
    const unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::size_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bellfreq
