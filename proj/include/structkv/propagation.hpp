#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structkv/centrality.hpp"
#include "structkv/common.hpp"
#include "structkv/config.hpp"
#include "structkv/index_set.hpp"
#include "structkv/trace.hpp"
#include "structkv/toy_model.hpp"

namespace structkv {

// Structural truncation decision at the pivot layer.
struct SelectionOutcome {
  IndexSet i_struct;
  IndexSet i_win;
  Index budget_used = 0;
  Vec scores_snapshot;  // the centrality values at selection time
};

// Per-layer decoupled KV storage covering all layers of a run.
struct DecoupledCache {
  std::vector<KvCacheEntry> layers;
  Scalar r_kv = 1.0;
  Index n_tokens = 0;
  Index pivot_layer = -1;
  std::uint64_t config_hash = 0;

  void validate() const;
};

// top-k over C with k = budget_count(N, r_struct), union the window set.
// Ties break toward the lower original index; output sorted ascending.
SelectionOutcome select_struct_indices(const CentralityState& c,
                                       Scalar r_struct,
                                       const IndexSet& i_win);

// Row-gather of activations and position ids; original positions retained.
HiddenStates truncate_states(const HiddenStates& h, const IndexSet& keep);

// top-k over S with k = budget_count(N_original, r_kv), union the window
// set, clipped to tokens that still exist. Output in original positions.
IndexSet select_kv_indices(const SaliencyVector& s, Scalar r_kv,
                           const IndexSet& i_win);

struct PrefillResult {
  PrefillTrace trace;
  DecoupledCache cache;
};

// Full three-phase prefill: accumulate centrality and watch for the phase
// transition, truncate to the structural skeleton at the pivot, and store
// the decoupled per-layer cache throughout.
PrefillResult prefill_structkv(const ToyModel& model,
                               const std::vector<std::int32_t>& tokens,
                               const StructKvConfig& cfg, bool oracle = false);

// Mixed-length batch driver over a padded workspace with per-sequence
// addressing; results are bit-identical to per-sequence solo runs and the
// trace records the padding overhead.
std::vector<PrefillResult> batch_prefill(
    const ToyModel& model,
    const std::vector<std::vector<std::int32_t>>& batch,
    const StructKvConfig& cfg, bool oracle = false);

// One greedy decode step against the compressed cache, proving the stored
// indices and positions are addressable. Returns the next-token logits.
Vec decode_one_step(const ToyModel& model, const DecoupledCache& cache,
                    std::int32_t token, Index position,
                    const StructKvConfig& cfg);

// Binary container: fixed header (magic, version, config hash, N, L*,
// r_kv, layer count), then per layer the kept index list and the K/V
// matrices. Layout documented in propagation.cpp next to the writer.
void save_cache(const DecoupledCache& cache, const std::string& path);
DecoupledCache load_cache(const std::string& path);

}  // namespace structkv
