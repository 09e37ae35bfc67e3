#pragma once

#include <string>

#include "structkv/propagation.hpp"

namespace structkv {

enum class PolicyId { full, recent_window, snapshot_layer, structkv };

PolicyId policy_from_string(const std::string& name);
std::string to_string(PolicyId policy);

struct PolicyOptions {
  PolicyId policy = PolicyId::structkv;
  Index fixed_pivot = -1;  // snapshot_layer only; -1 = cfg.l_limit
  bool oracle = false;
};

// Shared prefill driver; every policy emits a trace in the same schema.
PrefillResult run_policy(const ToyModel& model,
                         const std::vector<std::int32_t>& tokens,
                         const StructKvConfig& cfg,
                         const PolicyOptions& options);

// StreamingLLM-style: first n_sinks plus the recent window in every layer's
// cache, no prefill reduction.
PrefillResult prefill_window_policy(const ToyModel& model,
                                    const std::vector<std::int32_t>& tokens,
                                    const StructKvConfig& cfg, Index window,
                                    Index n_sinks, bool oracle = false);

// FastKV-style comparator: same pipeline, but selection at a fixed pivot
// layer from that single layer's local saliency. No accumulation, no
// detection.
PrefillResult prefill_snapshot_policy(const ToyModel& model,
                                      const std::vector<std::int32_t>& tokens,
                                      const StructKvConfig& cfg,
                                      Index fixed_pivot, bool oracle = false);

}  // namespace structkv
