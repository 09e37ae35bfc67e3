#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "structkv/common.hpp"
#include "structkv/config.hpp"
#include "structkv/index_set.hpp"

namespace structkv {

// Activations plus the original position of every row. Rows stay in
// original order under gathers, so position_ids are strictly increasing.
struct HiddenStates {
  Mat activations;         // [n_tokens x hidden_dim]
  IndexList position_ids;  // original positions, one per row

  Index rows() const { return activations.rows(); }
  void validate() const;
};

// Post-softmax attention over the recent query window of one layer.
// weights[h] is [n_window_queries x n_keys]; rows sum to 1, causal zeros
// where key position > query position.
struct AttentionSlice {
  Index layer = 0;
  std::vector<Mat> weights;    // one matrix per query head
  IndexList query_positions;   // original positions of the window rows
  IndexList key_positions;     // original positions of the key columns

  Index n_heads() const { return static_cast<Index>(weights.size()); }
  Index n_queries() const { return weights.empty() ? 0 : weights[0].rows(); }
  Index n_keys() const { return weights.empty() ? 0 : weights[0].cols(); }
};

// Per-layer cached keys/values for the retained tokens. Keys are stored
// post-RoPE at their original positions.
struct KvCacheEntry {
  Index layer = 0;
  Mat keys;              // [n_kept x G*d_k]
  Mat values;            // [n_kept x G*d_k]
  IndexSet kept_indices; // original positions
  IndexList position_ids;

  void validate() const;
};

// Additive pre-softmax attention bias, keyed by original key position.
// Test surface for scenario construction; absent by default.
struct AttentionBias {
  std::vector<Vec> key_bias;  // [layer] -> bias per original key position

  bool has_layer(Index layer) const {
    return layer < static_cast<Index>(key_bias.size()) &&
           key_bias[static_cast<std::size_t>(layer)].size() > 0;
  }
};

// Rotary embedding: pair (x_{2i}, x_{2i+1}) within each head block rotated
// by angle p * rope_base^(-2i/head_dim). Column count must be a multiple of
// head_dim; head_dim must be even.
Mat apply_rope(const Eigen::Ref<const Mat>& x, const IndexList& positions,
               Index head_dim, Scalar rope_base);

// Row-wise x / sqrt(mean(x^2) + eps).
Mat rms_norm(const Eigen::Ref<const Mat>& x, Scalar eps = 1e-6);

struct ForwardOptions {
  Index window = 8;
  bool oracle = false;  // also materialize the full [H x n x n] tensor
};

// Cached K/V another sequence prefix already produced, used to run a
// single decode step against a compressed cache.
struct KvOverride {
  const Mat* keys = nullptr;    // [n_cached x G*d_k], post-RoPE
  const Mat* values = nullptr;  // [n_cached x G*d_k]
  const IndexList* key_positions = nullptr;
};

struct LayerResult {
  HiddenStates states;
  AttentionSlice slice;
  Mat keys;    // post-RoPE keys of the input rows, [n x G*d_k]
  Mat values;  // [n x G*d_k]
  std::vector<Mat> full_attention;  // oracle mode only, one [n x n] per head
};

// Deterministic seeded GQA transformer. Block structure:
// rms_norm -> GQA attention with RoPE -> residual -> rms_norm -> gated MLP
// -> residual. Immutable after construction; forward passes have no side
// effects and may run in parallel over different inputs.
class ToyModel {
 public:
  ToyModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  HiddenStates embed(const std::vector<std::int32_t>& tokens) const;

  LayerResult forward_layer(Index layer, const HiddenStates& states,
                            const ForwardOptions& opts,
                            const KvOverride* kv_override = nullptr) const;

  // Tied-embedding logits for the last row of the given states.
  Vec logits(const HiddenStates& states) const;

  void set_attention_bias(std::shared_ptr<const AttentionBias> bias) {
    bias_ = std::move(bias);
  }
  const AttentionBias* attention_bias() const { return bias_.get(); }

  std::uint64_t weight_checksum() const;

  // Flat binary blob: 16-byte header (magic, version, config hash) followed
  // by the weight matrices in a fixed order.
  void save_weights(const std::string& path) const;
  static ToyModel load_weights(const ModelConfig& config, std::uint64_t seed,
                               const std::string& path);

  struct LayerWeights {
    Mat wq, wk, wv, wo;        // attention projections
    Mat w_gate, w_up, w_down;  // gated MLP
  };

  const Mat& embedding() const { return embedding_; }
  const std::vector<LayerWeights>& layers() const { return layers_; }

 private:
  ToyModel() = default;

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  Mat embedding_;
  std::vector<LayerWeights> layers_;
  std::shared_ptr<const AttentionBias> bias_;
};

}  // namespace structkv
