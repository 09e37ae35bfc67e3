#include "structkv/propagation.hpp"

#include <algorithm>

#include "structkv/baselines.hpp"
#include "structkv/binary_io.hpp"
#include "prefill_engine.hpp"

namespace structkv {

namespace {

constexpr std::uint32_t kCacheMagic = 0x53564b43;  // "CKVS"
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

void DecoupledCache::validate() const {
  for (const auto& entry : layers) {
    entry.validate();
    if (pivot_layer >= 0 && entry.layer > pivot_layer) {
      // Past the pivot only propagated tokens exist.
      if (entry.kept_indices.origin_len != n_tokens) {
        throw InternalError("cache entry: wrong origin length");
      }
    }
  }
}

SelectionOutcome select_struct_indices(const CentralityState& c,
                                       Scalar r_struct,
                                       const IndexSet& i_win) {
  const Index n = c.scores.size();
  const Index budget = budget_count(n, r_struct);
  IndexSet top = IndexSet::from_sorted(top_k_indices(c.scores, budget), n);
  SelectionOutcome out;
  out.i_struct = top.union_with(i_win);
  out.i_win = i_win;
  out.budget_used = budget;
  out.scores_snapshot = c.scores;
  return out;
}

HiddenStates truncate_states(const HiddenStates& h, const IndexSet& keep) {
  h.validate();
  HiddenStates out;
  out.activations.resize(keep.size(), h.activations.cols());
  out.position_ids.reserve(keep.indices.size());

  std::size_t row = 0;
  Index out_row = 0;
  for (Index pos : keep.indices) {
    while (row < h.position_ids.size() && h.position_ids[row] < pos) ++row;
    if (row >= h.position_ids.size() || h.position_ids[row] != pos) {
      throw InternalError("truncate_states: index not present");
    }
    out.activations.row(out_row++) = h.activations.row(static_cast<Index>(row));
    out.position_ids.push_back(pos);
  }
  return out;
}

IndexSet select_kv_indices(const SaliencyVector& s, Scalar r_kv,
                           const IndexSet& i_win) {
  s.validate();
  const Index n_original = i_win.origin_len;  // budget base is the original N
  const Index n_current = s.scores.size();
  const Index budget = std::min(budget_count(n_original, r_kv), n_current);

  const IndexList top_rows = top_k_indices(s.scores, budget);
  IndexList top_positions;
  top_positions.reserve(top_rows.size());
  for (Index r : top_rows) {
    top_positions.push_back(s.key_positions[static_cast<std::size_t>(r)]);
  }
  IndexSet selected =
      IndexSet::from_unsorted(std::move(top_positions), n_original)
          .union_with(i_win);

  // Clip to tokens that still exist.
  IndexList clipped;
  clipped.reserve(selected.indices.size());
  std::set_intersection(selected.indices.begin(), selected.indices.end(),
                        s.key_positions.begin(), s.key_positions.end(),
                        std::back_inserter(clipped));
  return IndexSet::from_sorted(std::move(clipped), n_original);
}

PrefillResult prefill_structkv(const ToyModel& model,
                               const std::vector<std::int32_t>& tokens,
                               const StructKvConfig& cfg, bool oracle) {
  PolicyOptions options;
  options.policy = PolicyId::structkv;
  options.oracle = oracle;
  return run_policy(model, tokens, cfg, options);
}

std::vector<PrefillResult> batch_prefill(
    const ToyModel& model, const std::vector<std::vector<std::int32_t>>& batch,
    const StructKvConfig& cfg, bool oracle) {
  if (batch.empty()) throw ConfigError("batch_prefill: empty batch");
  const std::size_t b_count = batch.size();

  PolicyOptions options;
  options.policy = PolicyId::structkv;
  options.oracle = oracle;

  std::vector<detail::PrefillEngine> engines;
  engines.reserve(b_count);
  Index n_max = 0;
  for (const auto& tokens : batch) {
    engines.emplace_back(model, tokens, cfg, options);
    n_max = std::max(n_max, static_cast<Index>(tokens.size()));
  }

  // Padded workspace: every sequence owns n_max slots; an addressing list
  // says which slots are live. Structural truncation shrinks the address
  // list in place, it never compacts storage (masked state transition).
  const Index hidden = model.config().hidden_dim;
  std::vector<Mat> storage(b_count, Mat::Zero(n_max, hidden));
  std::vector<IndexList> slots(b_count);
  std::vector<IndexList> positions(b_count);
  std::vector<Index> padded_processed(b_count, 0);
  std::vector<Index> active_processed(b_count, 0);

  for (std::size_t b = 0; b < b_count; ++b) {
    const HiddenStates init = engines[b].initial_states();
    const Index n_b = init.rows();
    storage[b].topRows(n_b) = init.activations;
    slots[b].resize(static_cast<std::size_t>(n_b));
    for (Index i = 0; i < n_b; ++i) slots[b][static_cast<std::size_t>(i)] = i;
    positions[b] = init.position_ids;
  }

  const Index n_layers = model.config().n_layers;
  for (Index layer = 0; layer < n_layers; ++layer) {
    for (std::size_t b = 0; b < b_count; ++b) {
      const auto n_active = static_cast<Index>(slots[b].size());
      padded_processed[b] += n_max;
      active_processed[b] += n_active;

      HiddenStates in;
      in.activations.resize(n_active, hidden);
      for (Index i = 0; i < n_active; ++i) {
        in.activations.row(i) = storage[b].row(slots[b][static_cast<std::size_t>(i)]);
      }
      in.position_ids = positions[b];

      auto outcome = engines[b].step(layer, in);
      if (outcome.truncated) {
        IndexList next_slots;
        next_slots.reserve(outcome.kept_rows.size());
        for (Index row : outcome.kept_rows) {
          next_slots.push_back(slots[b][static_cast<std::size_t>(row)]);
        }
        slots[b] = std::move(next_slots);
      }
      positions[b] = outcome.states.position_ids;
      for (std::size_t i = 0; i < slots[b].size(); ++i) {
        storage[b].row(slots[b][i]) =
            outcome.states.activations.row(static_cast<Index>(i));
      }
    }
  }

  std::vector<PrefillResult> results;
  results.reserve(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    HiddenStates final_states;
    final_states.position_ids = positions[b];
    final_states.activations.resize(static_cast<Index>(slots[b].size()), hidden);
    for (std::size_t i = 0; i < slots[b].size(); ++i) {
      final_states.activations.row(static_cast<Index>(i)) =
          storage[b].row(slots[b][i]);
    }
    PrefillResult r = engines[b].take_result(std::move(final_states));
    r.trace.padded_slots_processed = padded_processed[b];
    r.trace.active_rows_processed = active_processed[b];
    results.push_back(std::move(r));
  }
  return results;
}

Vec decode_one_step(const ToyModel& model, const DecoupledCache& cache,
                    std::int32_t token, Index position,
                    const StructKvConfig& cfg) {
  cache.validate();
  if (static_cast<Index>(cache.layers.size()) != model.config().n_layers) {
    throw UsageError("decode: cache does not cover all layers");
  }
  HiddenStates states = model.embed({token});
  states.position_ids[0] = position;

  ForwardOptions opts;
  opts.window = cfg.window;
  for (Index layer = 0; layer < model.config().n_layers; ++layer) {
    const auto& entry = cache.layers[static_cast<std::size_t>(layer)];
    KvOverride kv;
    kv.keys = &entry.keys;
    kv.values = &entry.values;
    kv.key_positions = &entry.position_ids;
    states = model.forward_layer(layer, states, opts, &kv).states;
  }
  return model.logits(states);
}

// Cache container layout (all little-endian):
//   u32 magic "CKVS", u32 version, u64 config hash, u64 n_tokens,
//   i64 pivot layer, f64 r_kv, u64 layer count; then per layer:
//   i64 layer id, u64 kept count, i64 kept indices [count],
//   keys (u64 rows, u64 cols, f64 col-major), values likewise.
void save_cache(const DecoupledCache& cache, const std::string& path) {
  BinaryWriter w(path);
  w.u32(kCacheMagic);
  w.u32(kCacheVersion);
  w.u64(cache.config_hash);
  w.u64(static_cast<std::uint64_t>(cache.n_tokens));
  w.i64(cache.pivot_layer);
  w.f64(cache.r_kv);
  w.u64(cache.layers.size());
  for (const auto& entry : cache.layers) {
    w.i64(entry.layer);
    w.index_list(entry.kept_indices.indices);
    w.mat(entry.keys);
    w.mat(entry.values);
  }
  w.close();
}

DecoupledCache load_cache(const std::string& path) {
  BinaryReader r(path);
  if (r.u32() != kCacheMagic) throw UsageError("cache: bad magic: " + path);
  if (r.u32() != kCacheVersion) {
    throw UsageError("cache: unsupported version: " + path);
  }
  DecoupledCache cache;
  cache.config_hash = r.u64();
  cache.n_tokens = static_cast<Index>(r.u64());
  cache.pivot_layer = static_cast<Index>(r.i64());
  cache.r_kv = r.f64();
  const std::uint64_t n_layers = r.u64();
  cache.layers.resize(n_layers);
  for (auto& entry : cache.layers) {
    entry.layer = static_cast<Index>(r.i64());
    entry.kept_indices =
        IndexSet::from_sorted(r.index_list(), cache.n_tokens);
    entry.position_ids = entry.kept_indices.indices;
    entry.keys = r.mat();
    entry.values = r.mat();
    entry.validate();
  }
  return cache;
}

}  // namespace structkv
