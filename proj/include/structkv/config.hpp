#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "structkv/common.hpp"

namespace structkv {

// Architecture of the toy GQA transformer substrate.
struct ModelConfig {
  Index n_layers = 8;
  Index n_heads = 4;       // H query heads
  Index n_kv_groups = 2;   // G key/value groups, must divide H
  Index head_dim = 16;     // d_k, even (rotary pairs)
  Index hidden_dim = 64;   // H * head_dim
  Index vocab_size = 512;
  Scalar rope_base = 10000.0;

  Index heads_per_group() const { return n_heads / n_kv_groups; }
  Index kv_dim() const { return n_kv_groups * head_dim; }
  Index mlp_dim() const { return 2 * hidden_dim; }

  void validate() const;
};

// Compression pipeline parameters.
struct StructKvConfig {
  Index window = 8;                  // w, recent local window
  Scalar decay = 0.9;                // lambda in (0, 1]
  Scalar w1 = 0.2;                   // transition weight: entropy drop
  Scalar w2 = 0.3;                   // transition weight: sparsity rise
  Scalar w3 = 0.5;                   // transition weight: variance rise
  Scalar r_struct = 0.2;             // structural retention rate (compute)
  Scalar r_kv = 0.1;                 // KV cache retention rate (memory)
  Index l_limit = 6;                 // latest layer at which pruning triggers
  Scalar sparsity_frac = 0.1;        // top-k fraction for the sparsity metric
  Index block_size = 16;             // block-level aggregation granularity
  Index n_sinks = 0;                 // optional initial sink tokens kept in the window set

  void validate(Index n_layers_total) const;
};

// Flat key=value config file. '#' starts a comment, keys match field names.
// Unknown keys are an error so typos fail loudly.
struct RunConfig {
  ModelConfig model;
  StructKvConfig skv;

  // Run-level settings (overridable by CLI flags).
  std::uint64_t seed = 0;
  Index n_tokens = 256;
  std::string policy = "structkv";
  std::string scenario = "random";
  bool oracle = false;
  Index fixed_pivot = -1;     // snapshot_layer policy; -1 = use l_limit
  Scalar hub_depth = 0.25;    // hub position as a fraction of n_tokens
  Index band_start = 2;       // first dormant layer for hub scenarios
  Index band_end = -1;        // one past the last dormant layer; -1 = l_limit + 1
  Scalar needle_depth = 0.5;  // needle position as a fraction of n_tokens

  void apply_key(const std::string& key, const std::string& value);
  void validate() const;
  // Canonical, sorted key=value rendering; also the config-hash input.
  std::string to_kv_string() const;
  std::uint64_t config_hash() const;
};

RunConfig load_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Hash of the architecture fields alone; stamps weight blobs and caches.
std::uint64_t model_config_hash(const ModelConfig& cfg);

}  // namespace structkv
