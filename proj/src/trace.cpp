#include "structkv/trace.hpp"

#include "structkv/binary_io.hpp"

namespace structkv {

namespace {

constexpr std::uint32_t kTraceMagic = 0x53564b54;  // "TKVS"
constexpr std::uint32_t kTraceVersion = 1;

void write_model_cfg(BinaryWriter& w, const ModelConfig& cfg) {
  w.i64(cfg.n_layers);
  w.i64(cfg.n_heads);
  w.i64(cfg.n_kv_groups);
  w.i64(cfg.head_dim);
  w.i64(cfg.hidden_dim);
  w.i64(cfg.vocab_size);
  w.f64(cfg.rope_base);
}

ModelConfig read_model_cfg(BinaryReader& r) {
  ModelConfig cfg;
  cfg.n_layers = static_cast<Index>(r.i64());
  cfg.n_heads = static_cast<Index>(r.i64());
  cfg.n_kv_groups = static_cast<Index>(r.i64());
  cfg.head_dim = static_cast<Index>(r.i64());
  cfg.hidden_dim = static_cast<Index>(r.i64());
  cfg.vocab_size = static_cast<Index>(r.i64());
  cfg.rope_base = r.f64();
  return cfg;
}

void write_skv_cfg(BinaryWriter& w, const StructKvConfig& cfg) {
  w.i64(cfg.window);
  w.f64(cfg.decay);
  w.f64(cfg.w1);
  w.f64(cfg.w2);
  w.f64(cfg.w3);
  w.f64(cfg.r_struct);
  w.f64(cfg.r_kv);
  w.i64(cfg.l_limit);
  w.f64(cfg.sparsity_frac);
  w.i64(cfg.block_size);
  w.i64(cfg.n_sinks);
}

StructKvConfig read_skv_cfg(BinaryReader& r) {
  StructKvConfig cfg;
  cfg.window = static_cast<Index>(r.i64());
  cfg.decay = r.f64();
  cfg.w1 = r.f64();
  cfg.w2 = r.f64();
  cfg.w3 = r.f64();
  cfg.r_struct = r.f64();
  cfg.r_kv = r.f64();
  cfg.l_limit = static_cast<Index>(r.i64());
  cfg.sparsity_frac = r.f64();
  cfg.block_size = static_cast<Index>(r.i64());
  cfg.n_sinks = static_cast<Index>(r.i64());
  return cfg;
}

}  // namespace

void save_trace(const PrefillTrace& trace, const std::string& path) {
  BinaryWriter w(path);
  w.u32(kTraceMagic);
  w.u32(kTraceVersion);
  w.u64(trace.manifest_hash);
  w.str(trace.policy);
  w.u64(trace.seed);
  w.u64(trace.config_hash);
  w.i64(trace.n_tokens);
  write_model_cfg(w, trace.model_cfg);
  write_skv_cfg(w, trace.skv_cfg);

  w.u64(trace.layers.size());
  for (const auto& rec : trace.layers) {
    w.i64(rec.layer);
    w.i64(rec.n_current);
    w.vec(rec.saliency.scores);
    w.index_list(rec.saliency.key_positions);
    w.f64(rec.metrics.entropy);
    w.f64(rec.metrics.sparsity);
    w.f64(rec.metrics.variance);
    w.index_list(rec.kv_indices.indices);
  }

  w.i64(trace.pivot.pivot_layer);
  w.u32(trace.pivot.triggered_by_limit ? 1 : 0);
  w.i64(trace.pivot.peak_layer);
  w.vec(trace.pivot.transition_scores);

  w.index_list(trace.i_struct.indices);
  w.index_list(trace.i_win.indices);
  w.vec(trace.centrality_snapshot);
  w.mat(trace.final_hidden);

  w.u32(trace.has_recovery ? 1 : 0);
  w.vec(trace.recovery_per_layer);
  w.i64(trace.padded_slots_processed);
  w.i64(trace.active_rows_processed);
  w.close();
}

PrefillTrace load_trace(const std::string& path) {
  BinaryReader r(path);
  if (r.u32() != kTraceMagic) throw UsageError("trace: bad magic: " + path);
  if (r.u32() != kTraceVersion) {
    throw UsageError("trace: unsupported version: " + path);
  }
  PrefillTrace trace;
  trace.manifest_hash = r.u64();
  trace.policy = r.str();
  trace.seed = r.u64();
  trace.config_hash = r.u64();
  trace.n_tokens = static_cast<Index>(r.i64());
  trace.model_cfg = read_model_cfg(r);
  trace.skv_cfg = read_skv_cfg(r);

  const std::uint64_t n_layers = r.u64();
  trace.layers.resize(n_layers);
  for (auto& rec : trace.layers) {
    rec.layer = static_cast<Index>(r.i64());
    rec.n_current = static_cast<Index>(r.i64());
    rec.saliency.layer = rec.layer;
    rec.saliency.scores = r.vec();
    rec.saliency.key_positions = r.index_list();
    rec.metrics.layer = rec.layer;
    rec.metrics.entropy = r.f64();
    rec.metrics.sparsity = r.f64();
    rec.metrics.variance = r.f64();
    rec.kv_indices = IndexSet::from_sorted(r.index_list(), trace.n_tokens);
  }

  trace.pivot.pivot_layer = static_cast<Index>(r.i64());
  trace.pivot.triggered_by_limit = r.u32() != 0;
  trace.pivot.peak_layer = static_cast<Index>(r.i64());
  trace.pivot.transition_scores = r.vec();

  trace.i_struct = IndexSet::from_sorted(r.index_list(), trace.n_tokens);
  trace.i_win = IndexSet::from_sorted(r.index_list(), trace.n_tokens);
  trace.centrality_snapshot = r.vec();
  trace.final_hidden = r.mat();

  trace.has_recovery = r.u32() != 0;
  trace.recovery_per_layer = r.vec();
  trace.padded_slots_processed = static_cast<Index>(r.i64());
  trace.active_rows_processed = static_cast<Index>(r.i64());
  return trace;
}

}  // namespace structkv
