#pragma once

#include <string>
#include <vector>

#include "structkv/common.hpp"
#include "structkv/index_set.hpp"
#include "structkv/trace.hpp"

namespace structkv {

// Attention-mass recovery of a retained set against the uncompressed run.
struct FidelityReport {
  std::string policy;
  Vec per_layer;       // recovery in [0, 1] per layer
  Scalar mean = 0.0;
  std::uint64_t config_hash = 0;
};

// Fraction of the uncompressed model's layer-l window attention mass that
// falls on the retained keys, averaged over heads and window rows. The
// reference trace must have been run in oracle mode.
Scalar attention_mass_recovery(const PrefillTrace& full_trace,
                               const IndexSet& retained, Index layer);

// Per-layer recovery of a policy run's cache selections against the full
// reference run.
FidelityReport recovery_report(const PrefillTrace& full_trace,
                               const PrefillTrace& policy_trace);

// Analytical FLOP accounting from shapes. Formulas (n = rows at the layer,
// d = head_dim, H/G heads/groups, h = hidden_dim, m = MLP dim):
//   attention scores  2*H*n^2*d   (Q K^T)
//   attention output  2*H*n^2*d   (A V)
//   projections       2*n*h*(H*d) + 2*2*n*h*(G*d) + 2*n*(H*d)*h
//   mlp               2*n*h*m * 3 (gate, up, down)
struct FlopReport {
  std::vector<Scalar> attention_per_layer;
  std::vector<Scalar> mlp_per_layer;
  std::vector<Scalar> projection_per_layer;
  std::vector<Scalar> attention_per_layer_full;  // full-length baseline
  Scalar total = 0.0;
  Scalar total_full = 0.0;
  Scalar total_ratio = 1.0;
  // Ratio of quadratic attention FLOPs vs the full baseline, over layers
  // strictly past the pivot; 1.0 when the run never truncates.
  Scalar post_pivot_attention_ratio = 1.0;
  Index pivot_layer = -1;
};

FlopReport flop_report(const PrefillTrace& trace);

std::string recovery_csv(const FidelityReport& report,
                         std::uint64_t manifest_hash);
std::string flop_csv(const FlopReport& report, std::uint64_t manifest_hash);

}  // namespace structkv
