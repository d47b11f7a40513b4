#pragma once

// Deterministic seedable generator for randomized batches. splitmix64 is used
// everywhere so that a batch is reproducible from its seed alone, including by
// reimplementations in other languages (the constants below are the full
// specification of the stream).

#include <cstdint>

#include "annulab/rational.hpp"

namespace annulab {

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  // lo + k*(hi-lo)/2^bits with k uniform in [0, 2^bits); exact rational.
  Rat rat_in(const Rat& lo, const Rat& hi, int bits = 32) {
    std::uint64_t k = bits >= 64 ? next() : below(std::uint64_t{1} << bits);
    Rat t(Int(static_cast<unsigned long>(k >> 32)) * pow2(32) +
          Int(static_cast<unsigned long>(k & 0xFFFFFFFFULL)));
    return lo + (hi - lo) * t * pow2(-bits);
  }

private:
  std::uint64_t state_;
};

}  // namespace annulab
