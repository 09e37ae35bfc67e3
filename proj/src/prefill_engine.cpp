#include "prefill_engine.hpp"

#include <algorithm>

namespace structkv::detail {

namespace {

// Rows of `positions` holding the members of `wanted` (both sorted).
IndexList rows_of_positions(const IndexList& positions,
                            const IndexList& wanted) {
  IndexList rows;
  rows.reserve(wanted.size());
  std::size_t r = 0;
  for (Index pos : wanted) {
    while (r < positions.size() && positions[r] < pos) ++r;
    if (r == positions.size() || positions[r] != pos) {
      throw InternalError("kv selection references a dropped position");
    }
    rows.push_back(static_cast<Index>(r));
  }
  return rows;
}

Mat gather_rows(const Mat& m, const IndexList& rows) {
  Mat out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

PrefillEngine::PrefillEngine(const ToyModel& model,
                             const std::vector<std::int32_t>& tokens,
                             const StructKvConfig& cfg,
                             const PolicyOptions& options)
    : model_(&model), tokens_(&tokens), cfg_(cfg), options_(options) {
  model.config().validate();
  cfg.validate(model.config().n_layers);
  n_tokens_ = static_cast<Index>(tokens.size());
  if (n_tokens_ <= cfg.window) {
    throw ConfigError("prefill: sequence must be longer than the window");
  }
  group_map_ = make_contiguous_group_map(model.config().n_heads,
                                         model.config().n_kv_groups);

  i_win_ = make_window_indices(n_tokens_, cfg.window);
  if (cfg.n_sinks > 0) {
    const Index sinks = std::min(cfg.n_sinks, n_tokens_);
    IndexList head(static_cast<std::size_t>(sinks));
    for (Index i = 0; i < sinks; ++i) head[static_cast<std::size_t>(i)] = i;
    i_win_ = i_win_.union_with(IndexSet::from_sorted(std::move(head), n_tokens_));
  }

  centrality_ = CentralityState::init(n_tokens_, cfg.decay);

  if (options_.policy == PolicyId::snapshot_layer) {
    if (options_.fixed_pivot < 0) options_.fixed_pivot = cfg.l_limit;
    if (options_.fixed_pivot >= model.config().n_layers) {
      throw ConfigError("snapshot policy: pivot layer out of range");
    }
  }

  trace_.policy = to_string(options_.policy);
  trace_.seed = model.seed();
  trace_.n_tokens = n_tokens_;
  trace_.model_cfg = model.config();
  trace_.skv_cfg = cfg_;
  trace_.i_win = i_win_;
  trace_.i_struct = IndexSet::empty(n_tokens_);
  trace_.layers.reserve(static_cast<std::size_t>(model.config().n_layers));

  cache_.layers.reserve(static_cast<std::size_t>(model.config().n_layers));
  cache_.r_kv = cfg.r_kv;
  cache_.n_tokens = n_tokens_;
}

HiddenStates PrefillEngine::initial_states() const {
  return model_->embed(*tokens_);
}

IndexSet PrefillEngine::kv_selection(const SaliencyVector& sal,
                                     const IndexList& current_positions) const {
  switch (options_.policy) {
    case PolicyId::full:
      return IndexSet::from_sorted(current_positions, n_tokens_);
    case PolicyId::recent_window: {
      // First n_sinks plus the recent window; degenerate overlap keeps all.
      IndexSet keep = make_window_indices(n_tokens_, cfg_.window);
      if (cfg_.n_sinks > 0) {
        const Index sinks = std::min(cfg_.n_sinks, n_tokens_);
        IndexList head(static_cast<std::size_t>(sinks));
        for (Index i = 0; i < sinks; ++i) head[static_cast<std::size_t>(i)] = i;
        keep = keep.union_with(IndexSet::from_sorted(std::move(head), n_tokens_));
      }
      return keep;
    }
    case PolicyId::snapshot_layer:
    case PolicyId::structkv:
      return select_kv_indices(sal, cfg_.r_kv, i_win_);
  }
  throw InternalError("unknown policy");
}

void PrefillEngine::select_at_pivot(Index layer, const Vec& position_scores) {
  const Index budget = budget_count(n_tokens_, cfg_.r_struct);
  const IndexList top = top_k_indices(position_scores, budget);
  IndexSet top_set = IndexSet::from_sorted(top, n_tokens_);
  selection_.i_struct = top_set.union_with(i_win_);
  selection_.i_win = i_win_;
  selection_.budget_used = budget;
  selection_.scores_snapshot = position_scores;

  trace_.pivot.pivot_layer = layer;
  trace_.i_struct = selection_.i_struct;
  trace_.centrality_snapshot = position_scores;
  cache_.pivot_layer = layer;
}

void PrefillEngine::maybe_select_structkv(Index layer,
                                          const SaliencyVector& sal) {
  centrality_ = accumulate(centrality_, sal);
  if (layer < 1) return;

  const Vec t = transition_scores(metrics_history_, cfg_.w1, cfg_.w2, cfg_.w3);
  trace_.pivot.transition_scores = t;
  const auto decision = detect_pivot(t, cfg_.l_limit, layer);
  if (!decision) return;
  PivotDecision applied = *decision;
  if (applied.pivot_layer != layer) {
    // Per-layer renormalization can shift an old layer into the argmax
    // after its confirmation window has passed; truncation cannot act
    // retroactively, so such a decision is skipped. The layer limit still
    // forces a trigger.
    if (layer != cfg_.l_limit) return;
    applied.pivot_layer = cfg_.l_limit;
    applied.triggered_by_limit = true;
  }
  trace_.pivot.triggered_by_limit = applied.triggered_by_limit;
  trace_.pivot.peak_layer = applied.peak_layer;
  select_at_pivot(layer, centrality_.scores);
}

PrefillEngine::StepOutcome PrefillEngine::step(Index layer,
                                               const HiddenStates& in) {
  if (layer != next_layer_) {
    throw InternalError("prefill engine: layers must be stepped in order");
  }
  ++next_layer_;

  ForwardOptions fwd_opts;
  fwd_opts.window = cfg_.window;
  fwd_opts.oracle = options_.oracle;
  LayerResult fwd = model_->forward_layer(layer, in, fwd_opts);

  SaliencyVector sal = local_saliency(fwd.slice, group_map_,
                                      model_->config().n_kv_groups);

  LayerRecord record;
  record.layer = layer;
  record.n_current = in.rows();
  record.saliency = sal;
  record.metrics.layer = layer;
  record.metrics.entropy = attention_entropy(fwd.slice);
  record.metrics.sparsity = attention_sparsity(fwd.slice, cfg_.sparsity_frac);
  record.metrics.variance = attention_variance(fwd.slice);

  bool pivot_now = false;
  if (!pruned_) {
    metrics_history_.push_back(record.metrics);
    if (options_.policy == PolicyId::structkv) {
      maybe_select_structkv(layer, sal);
      pivot_now = trace_.pivot.pivot_layer == layer;
    } else if (options_.policy == PolicyId::snapshot_layer &&
               layer == options_.fixed_pivot) {
      // Selection from this single layer's local saliency alone.
      select_at_pivot(layer, sal.scores);
      pivot_now = true;
    }
  }

  // Decoupled per-layer storage; the layer's K/V cover the input rows.
  const IndexSet i_kv = kv_selection(sal, in.position_ids);
  const IndexList kv_rows = rows_of_positions(in.position_ids, i_kv.indices);
  KvCacheEntry entry;
  entry.layer = layer;
  entry.keys = gather_rows(fwd.keys, kv_rows);
  entry.values = gather_rows(fwd.values, kv_rows);
  entry.kept_indices = i_kv;
  entry.position_ids = i_kv.indices;
  entry.validate();
  cache_.layers.push_back(std::move(entry));

  record.kv_indices = i_kv;
  trace_.layers.push_back(std::move(record));
  if (options_.oracle) {
    trace_.oracle_attention.push_back(std::move(fwd.full_attention));
  }

  StepOutcome outcome;
  if (pivot_now) {
    outcome.kept_rows =
        rows_of_positions(in.position_ids, selection_.i_struct.indices);
    outcome.states = truncate_states(fwd.states, selection_.i_struct);
    outcome.truncated = true;
    pruned_ = true;
  } else {
    outcome.states = std::move(fwd.states);
    outcome.kept_rows.resize(static_cast<std::size_t>(outcome.states.rows()));
    for (std::size_t i = 0; i < outcome.kept_rows.size(); ++i) {
      outcome.kept_rows[i] = static_cast<Index>(i);
    }
  }
  return outcome;
}

PrefillResult PrefillEngine::take_result(HiddenStates final_states) {
  if (next_layer_ != model_->config().n_layers) {
    throw InternalError("prefill engine: not all layers were stepped");
  }
  trace_.final_hidden = std::move(final_states.activations);
  trace_.config_hash = model_config_hash(model_->config());
  cache_.config_hash = trace_.config_hash;
  PrefillResult result;
  result.trace = std::move(trace_);
  result.cache = std::move(cache_);
  return result;
}

}  // namespace structkv::detail
