#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structkv/centrality.hpp"
#include "structkv/common.hpp"
#include "structkv/config.hpp"
#include "structkv/index_set.hpp"
#include "structkv/pivot.hpp"
#include "structkv/saliency.hpp"

namespace structkv {

struct LayerRecord {
  Index layer = 0;
  Index n_current = 0;        // sequence length processed at this layer
  SaliencyVector saliency;    // key positions are original positions
  LayerMetrics metrics;
  IndexSet kv_indices;        // decoupled per-layer cache selection
};

struct PivotRecord {
  Index pivot_layer = -1;     // -1: policy never truncates
  bool triggered_by_limit = false;
  Index peak_layer = -1;
  Vec transition_scores;      // layer-indexed; entry 0 unused
};

// Full record of one prefill run. Append-only while running; binary
// serialization round-trips losslessly.
struct PrefillTrace {
  std::string policy;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t manifest_hash = 0;
  Index n_tokens = 0;
  ModelConfig model_cfg;   // config echo
  StructKvConfig skv_cfg;

  std::vector<LayerRecord> layers;
  PivotRecord pivot;
  IndexSet i_struct;          // empty set when the policy never truncates
  IndexSet i_win;
  Vec centrality_snapshot;    // C at selection time; empty if unused

  Mat final_hidden;           // output of the last layer

  bool has_recovery = false;  // attention-mass recovery vs the full run
  Vec recovery_per_layer;

  // Batch accounting: padded slots carried vs rows actually active.
  Index padded_slots_processed = 0;
  Index active_rows_processed = 0;

  // Oracle mode only; memory-resident, never serialized.
  std::vector<std::vector<Mat>> oracle_attention;  // [layer][head], n x n

  bool has_oracle() const { return !oracle_attention.empty(); }
};

void save_trace(const PrefillTrace& trace, const std::string& path);
PrefillTrace load_trace(const std::string& path);

}  // namespace structkv
