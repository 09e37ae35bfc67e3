#include "structkv/baselines.hpp"

#include "prefill_engine.hpp"

namespace structkv {

PolicyId policy_from_string(const std::string& name) {
  if (name == "full") return PolicyId::full;
  if (name == "recent_window") return PolicyId::recent_window;
  if (name == "snapshot_layer") return PolicyId::snapshot_layer;
  if (name == "structkv") return PolicyId::structkv;
  throw ConfigError("unknown policy: " + name);
}

std::string to_string(PolicyId policy) {
  switch (policy) {
    case PolicyId::full: return "full";
    case PolicyId::recent_window: return "recent_window";
    case PolicyId::snapshot_layer: return "snapshot_layer";
    case PolicyId::structkv: return "structkv";
  }
  throw InternalError("unknown policy id");
}

PrefillResult run_policy(const ToyModel& model,
                         const std::vector<std::int32_t>& tokens,
                         const StructKvConfig& cfg,
                         const PolicyOptions& options) {
  detail::PrefillEngine engine(model, tokens, cfg, options);
  HiddenStates states = engine.initial_states();
  for (Index layer = 0; layer < engine.n_layers(); ++layer) {
    states = engine.step(layer, states).states;
  }
  return engine.take_result(std::move(states));
}

PrefillResult prefill_window_policy(const ToyModel& model,
                                    const std::vector<std::int32_t>& tokens,
                                    const StructKvConfig& cfg, Index window,
                                    Index n_sinks, bool oracle) {
  StructKvConfig local = cfg;
  local.window = window;
  local.n_sinks = n_sinks;
  PolicyOptions options;
  options.policy = PolicyId::recent_window;
  options.oracle = oracle;
  return run_policy(model, tokens, local, options);
}

PrefillResult prefill_snapshot_policy(const ToyModel& model,
                                      const std::vector<std::int32_t>& tokens,
                                      const StructKvConfig& cfg,
                                      Index fixed_pivot, bool oracle) {
  PolicyOptions options;
  options.policy = PolicyId::snapshot_layer;
  options.fixed_pivot = fixed_pivot;
  options.oracle = oracle;
  return run_policy(model, tokens, cfg, options);
}

}  // namespace structkv
