#pragma once

#include <cstdint>
#include <vector>

#include "structkv/baselines.hpp"
#include "structkv/propagation.hpp"

namespace structkv::detail {

// Layer-stepped prefill state machine. One instance per sequence. The
// caller owns activation placement (solo runs feed states straight back;
// the batch driver routes them through a padded workspace), while the
// engine owns control flow: saliency, centrality, pivot detection,
// structural truncation and decoupled KV storage.
class PrefillEngine {
 public:
  PrefillEngine(const ToyModel& model, const std::vector<std::int32_t>& tokens,
                const StructKvConfig& cfg, const PolicyOptions& options);

  struct StepOutcome {
    HiddenStates states;
    bool truncated = false;
    IndexList kept_rows;  // row indices into the pre-truncation states
  };

  // Runs layer `layer` on `in`. Layers must be stepped in order, once each.
  StepOutcome step(Index layer, const HiddenStates& in);

  HiddenStates initial_states() const;
  Index n_layers() const { return model_->config().n_layers; }
  bool pruned() const { return pruned_; }

  // Valid after the final layer.
  PrefillResult take_result(HiddenStates final_states);

 private:
  void maybe_select_structkv(Index layer, const SaliencyVector& sal);
  void select_at_pivot(Index layer, const Vec& position_scores);
  IndexSet kv_selection(const SaliencyVector& sal,
                        const IndexList& current_positions) const;

  const ToyModel* model_;
  const std::vector<std::int32_t>* tokens_;
  StructKvConfig cfg_;
  PolicyOptions options_;
  std::vector<Index> group_map_;

  Index n_tokens_ = 0;
  Index next_layer_ = 0;
  IndexSet i_win_;
  CentralityState centrality_;
  std::vector<LayerMetrics> metrics_history_;
  bool pruned_ = false;
  SelectionOutcome selection_;

  PrefillTrace trace_;
  DecoupledCache cache_;
};

}  // namespace structkv::detail
