#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace structkv {

// All floating-point state in the reference path is 64-bit.
using Scalar = double;
using Index = Eigen::Index;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IndexList = std::vector<Index>;

inline constexpr const char* kEngineVersion = "structkv-0.1.0";

// Error taxonomy. Config/budget/usage errors are caller-fixable and map to
// CLI exit codes; internal errors indicate a broken invariant.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// FNV-1a, 64-bit. Used for config hashes, weight checksums and manifest
// provenance stamps.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t state = kFnvOffset) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    state ^= static_cast<std::uint64_t>(bytes[i]);
    state *= kFnvPrime;
  }
  return state;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t state = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), state);
}

inline std::uint64_t fnv1a64(const Mat& m, std::uint64_t state = kFnvOffset) {
  return fnv1a64(m.data(), sizeof(Scalar) * static_cast<std::size_t>(m.size()),
                 state);
}

inline std::uint64_t fnv1a64(const Vec& v, std::uint64_t state = kFnvOffset) {
  return fnv1a64(v.data(), sizeof(Scalar) * static_cast<std::size_t>(v.size()),
                 state);
}

}  // namespace structkv
