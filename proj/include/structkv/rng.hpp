#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "structkv/common.hpp"

namespace structkv {

// Deterministic RNG wrapper. mt19937_64 has a standard-mandated output
// sequence, and the transforms below avoid std::*_distribution, whose
// algorithms are implementation-defined. Same seed => same stream.
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  Scalar uniform() {
    return static_cast<Scalar>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be positive.
  Index uniform_index(Index n) {
    return static_cast<Index>(engine_() % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller (two engine draws per sample).
  Scalar gaussian() {
    const Scalar u1 = 1.0 - uniform();  // (0, 1]
    const Scalar u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi_v<Scalar> * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace structkv
