#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "structkv/common.hpp"
#include "structkv/config.hpp"
#include "structkv/toy_model.hpp"

namespace structkv {

enum class ScenarioKind { hub, needle, random };

ScenarioKind scenario_from_string(const std::string& name);
std::string to_string(ScenarioKind kind);

// A scenario spec fully determines its output (retries included).
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::random;
  Index n_tokens = 256;
  std::uint64_t seed = 0;

  // hub parameters
  Scalar hub_depth = 0.25;   // hub position as a fraction of n_tokens
  Index band_start = 2;      // first layer of the dormancy band
  Index band_end = -1;       // one past the band; -1 = l_limit + 1
  Scalar bias_strength = 12.0;

  // needle parameters
  Scalar needle_depth = 0.5;
};

struct Scenario {
  std::vector<std::int32_t> tokens;
  std::shared_ptr<const AttentionBias> bias;  // null for needle/random
  Index truth_pos = -1;  // hub or needle position; -1 for random
  Index retries_used = 0;
  // Model seed the scenario was generated (and, for hub, verified) against.
  std::uint64_t model_seed = 0;
};

// Manufactures a token that is highly attended in layers [0, band_start)
// and suppressed inside the dormancy band covering the pivot, becoming
// salient again past the band. Self-verifies by measuring the produced
// slices (hub saliency rank <= 3 in every early layer, rank > structural
// budget at the detected pivot); retries with a perturbed seed up to 16
// times, then fails with a scenario error.
Scenario gen_hub_scenario(const ScenarioSpec& spec, const ModelConfig& mcfg,
                          const StructKvConfig& scfg);

// Filler tokens with a unique marker token pair at floor(depth * N).
// Retrieval success at desk scale is membership of the needle position in
// the structural index set (a proxy, reported as such).
Scenario gen_needle(const ScenarioSpec& spec, const ModelConfig& mcfg);

// Plain seeded filler tokens.
Scenario gen_random(const ScenarioSpec& spec, const ModelConfig& mcfg);

Scenario generate_scenario(const ScenarioSpec& spec, const ModelConfig& mcfg,
                           const StructKvConfig& scfg);

}  // namespace structkv
