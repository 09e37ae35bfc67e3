#include "structkv/scenarios.hpp"

#include <algorithm>

#include "structkv/propagation.hpp"
#include "structkv/rng.hpp"

namespace structkv {

namespace {

constexpr Index kMaxRetries = 16;

std::vector<std::int32_t> draw_tokens(Index n, Index vocab, Index reserved,
                                      std::uint64_t seed) {
  DetRng rng(seed);
  std::vector<std::int32_t> tokens(static_cast<std::size_t>(n));
  const Index usable = vocab - reserved;
  if (usable < 1) throw ConfigError("scenario: vocabulary too small");
  for (auto& t : tokens) {
    t = static_cast<std::int32_t>(rng.uniform_index(usable));
  }
  return tokens;
}

// Rank of position `pos` by descending score: 1 + #scores strictly greater.
Index saliency_rank(const SaliencyVector& s, Index pos) {
  Index row = -1;
  for (std::size_t i = 0; i < s.key_positions.size(); ++i) {
    if (s.key_positions[i] == pos) {
      row = static_cast<Index>(i);
      break;
    }
  }
  if (row < 0) return s.scores.size() + 1;  // dropped => beyond any rank
  Index rank = 1;
  for (Index i = 0; i < s.scores.size(); ++i) {
    if (s.scores[i] > s.scores[row]) ++rank;
  }
  return rank;
}

}  // namespace

ScenarioKind scenario_from_string(const std::string& name) {
  if (name == "hub") return ScenarioKind::hub;
  if (name == "needle") return ScenarioKind::needle;
  if (name == "random") return ScenarioKind::random;
  throw ConfigError("unknown scenario: " + name);
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::hub: return "hub";
    case ScenarioKind::needle: return "needle";
    case ScenarioKind::random: return "random";
  }
  throw InternalError("unknown scenario kind");
}

Scenario gen_hub_scenario(const ScenarioSpec& spec, const ModelConfig& mcfg,
                          const StructKvConfig& scfg) {
  if (spec.n_tokens < 32) {
    throw ConfigError("hub scenario: need at least 32 tokens");
  }
  const Index n = spec.n_tokens;
  const Index band_start = spec.band_start;
  const Index band_end = spec.band_end < 0 ? scfg.l_limit + 1 : spec.band_end;
  if (band_start > band_end || band_end > mcfg.n_layers) {
    throw ConfigError("hub scenario: invalid dormancy band");
  }
  // Empty band: the hub is salient at every layer (control case).
  const bool has_band = band_start < band_end;

  Index hub_pos = static_cast<Index>(spec.hub_depth * static_cast<Scalar>(n));
  // The hub must sit outside the protected window or retention is vacuous.
  hub_pos = std::clamp<Index>(hub_pos, 0, n - scfg.window - 1);

  // Salient outside the band, suppressed inside it.
  auto bias = std::make_shared<AttentionBias>();
  bias->key_bias.resize(static_cast<std::size_t>(mcfg.n_layers));
  for (Index l = 0; l < mcfg.n_layers; ++l) {
    Vec b = Vec::Zero(n);
    const bool dormant = has_band && l >= band_start && l < band_end;
    b[hub_pos] = dormant ? -spec.bias_strength : spec.bias_strength;
    bias->key_bias[static_cast<std::size_t>(l)] = b;
  }

  // Verification binds to the model seeded by spec.seed; retries redraw
  // tokens only, so the check transfers to the caller's run.
  ToyModel model(mcfg, spec.seed);
  model.set_attention_bias(bias);

  const Index budget = budget_count(n, scfg.r_struct);
  for (Index retry = 0; retry <= kMaxRetries; ++retry) {
    const std::uint64_t token_seed =
        (spec.seed ^ 0xa5a5a5a5a5a5a5a5ULL) +
        0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(retry);
    Scenario scenario;
    scenario.tokens = draw_tokens(n, mcfg.vocab_size, 0, token_seed);
    scenario.bias = bias;
    scenario.truth_pos = hub_pos;
    scenario.retries_used = retry;
    scenario.model_seed = spec.seed;
    // Verify against the measured slices of an actual run.
    const PrefillResult run =
        prefill_structkv(model, scenario.tokens, scfg, false);
    const Index pivot = run.trace.pivot.pivot_layer;

    bool ok = !has_band || (pivot >= band_start && pivot < band_end);
    const Index early_end = has_band ? band_start : pivot + 1;
    for (Index l = 0; ok && l < early_end; ++l) {
      const auto& sal = run.trace.layers[static_cast<std::size_t>(l)].saliency;
      ok = saliency_rank(sal, hub_pos) <= 3;
    }
    if (ok && has_band) {
      const auto& pivot_sal =
          run.trace.layers[static_cast<std::size_t>(pivot)].saliency;
      ok = saliency_rank(pivot_sal, hub_pos) > budget;
    }
    if (ok) return scenario;
  }
  throw ScenarioError("hub scenario: construction failed after retries");
}

Scenario gen_needle(const ScenarioSpec& spec, const ModelConfig& mcfg) {
  if (!(spec.needle_depth >= 0.0 && spec.needle_depth <= 1.0)) {
    throw ConfigError("needle scenario: depth must lie in [0, 1]");
  }
  const Index n = spec.n_tokens;
  if (n < 4) throw ConfigError("needle scenario: sequence too short");
  if (mcfg.vocab_size < 8) {
    throw ConfigError("needle scenario: vocabulary too small");
  }

  // Two reserved marker ids form the needle; filler never uses them.
  const auto marker_a = static_cast<std::int32_t>(mcfg.vocab_size - 1);
  const auto marker_b = static_cast<std::int32_t>(mcfg.vocab_size - 2);

  Scenario scenario;
  scenario.tokens = draw_tokens(n, mcfg.vocab_size, 2, spec.seed);
  Index pos = static_cast<Index>(spec.needle_depth * static_cast<Scalar>(n));
  pos = std::clamp<Index>(pos, 0, n - 2);
  scenario.tokens[static_cast<std::size_t>(pos)] = marker_a;
  scenario.tokens[static_cast<std::size_t>(pos) + 1] = marker_b;
  scenario.truth_pos = pos;
  scenario.model_seed = spec.seed;

  // Self-check: the marker pair is unique by construction.
  for (std::size_t i = 0; i < scenario.tokens.size(); ++i) {
    const bool is_marker = scenario.tokens[i] == marker_a ||
                           scenario.tokens[i] == marker_b;
    const bool in_needle = static_cast<Index>(i) == pos ||
                           static_cast<Index>(i) == pos + 1;
    if (is_marker && !in_needle) {
      throw ScenarioError("needle scenario: marker leaked into filler");
    }
  }
  return scenario;
}

Scenario gen_random(const ScenarioSpec& spec, const ModelConfig& mcfg) {
  Scenario scenario;
  scenario.tokens = draw_tokens(spec.n_tokens, mcfg.vocab_size, 0, spec.seed);
  scenario.model_seed = spec.seed;
  return scenario;
}

Scenario generate_scenario(const ScenarioSpec& spec, const ModelConfig& mcfg,
                           const StructKvConfig& scfg) {
  switch (spec.kind) {
    case ScenarioKind::hub: return gen_hub_scenario(spec, mcfg, scfg);
    case ScenarioKind::needle: return gen_needle(spec, mcfg);
    case ScenarioKind::random: return gen_random(spec, mcfg);
  }
  throw InternalError("unknown scenario kind");
}

}  // namespace structkv
