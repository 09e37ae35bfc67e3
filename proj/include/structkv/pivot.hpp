#pragma once

#include <optional>
#include <vector>

#include "structkv/common.hpp"
#include "structkv/toy_model.hpp"

namespace structkv {

// Per-layer attention statistics driving pivot detection.
struct LayerMetrics {
  Index layer = 0;
  Scalar entropy = 0.0;   // nats, in [0, ln(n_keys)]
  Scalar sparsity = 0.0;  // top-k mass, in [0, 1]
  Scalar variance = 0.0;  // population variance of the head slices, >= 0
};

// Mean over heads of the window-row mean of -sum_j a log a (0 log 0 := 0).
Scalar attention_entropy(const AttentionSlice& slice);

// Mean over heads and window rows of the summed top-k weights,
// k = max(1, ceil(frac * n_keys)).
Scalar attention_sparsity(const AttentionSlice& slice, Scalar frac);

// Mean over heads of the population variance of the flattened
// [n_queries x n_keys] head slice.
Scalar attention_variance(const AttentionSlice& slice);

// Normalized discrete gradient: delta_l = M_l - M_{l-1} for l >= 1, then
// min-max scaled to [0,1] across layers. Output has size series.size()-1;
// entry i corresponds to layer i+1. Degenerate (max == min) => all zeros.
Vec normalize_gradients(const Vec& series);

// Composite transition score, layer-indexed: T[0] is an unused placeholder,
// T[l] = w1*norm(grad(-entropy)) + w2*norm(grad(sparsity)) +
// w3*norm(grad(variance)) for l >= 1. Each metric normalizes independently.
Vec transition_scores(const std::vector<LayerMetrics>& metrics, Scalar w1,
                      Scalar w2, Scalar w3);

struct PivotDecision {
  Index pivot_layer = -1;          // L*
  bool triggered_by_limit = false;
  Index peak_layer = -1;           // layer carrying the maximal T
  Vec transition_scores;           // layer-indexed snapshot at decision time
};

struct DetectorOptions {
  Index min_pivot = 2;  // earliest layer eligible as a transition peak
  Index patience = 1;   // layers the running max must survive
};

// Online rule over the layer-indexed prefix T[1..current_layer]: fire once
// the prefix argmax (over layers >= min_pivot) is at least `patience` layers
// old, with L* = peak + 1; reaching l_limit forces the trigger.
std::optional<PivotDecision> detect_pivot(const Vec& scores, Index l_limit,
                                          Index current_layer,
                                          const DetectorOptions& opts = {});

// Offline exact mode: global argmax over layers 1..min(last, l_limit), ties
// toward the earlier layer; L* = argmax + 1 clamped to l_limit.
PivotDecision detect_pivot_offline(const Vec& scores, Index l_limit);

}  // namespace structkv
