#include "structkv/toy_model.hpp"

#include <cmath>
#include <limits>

#include "structkv/binary_io.hpp"
#include "structkv/rng.hpp"

namespace structkv {

namespace {

constexpr std::uint32_t kWeightsMagic = 0x53564b57;  // "WKVS"
constexpr std::uint32_t kWeightsVersion = 1;

void fill_gaussian(Mat& m, DetRng& rng, Scalar stddev) {
  Scalar* data = m.data();
  for (Index i = 0; i < m.size(); ++i) data[i] = rng.gaussian() * stddev;
}

void softmax_rows_inplace(Mat& scores) {
  for (Index t = 0; t < scores.rows(); ++t) {
    auto row = scores.row(t);
    const Scalar m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
  }
}

}  // namespace

void HiddenStates::validate() const {
  if (activations.rows() != static_cast<Index>(position_ids.size())) {
    throw InternalError("hidden states: row/position count mismatch");
  }
  for (std::size_t i = 1; i < position_ids.size(); ++i) {
    if (position_ids[i] <= position_ids[i - 1]) {
      throw InternalError("hidden states: positions not strictly increasing");
    }
  }
}

void KvCacheEntry::validate() const {
  if (keys.rows() != values.rows() ||
      keys.rows() != kept_indices.size() ||
      keys.rows() != static_cast<Index>(position_ids.size())) {
    throw InternalError("kv cache entry: row count mismatch");
  }
  kept_indices.validate();
}

Mat apply_rope(const Eigen::Ref<const Mat>& x, const IndexList& positions,
               Index head_dim, Scalar rope_base) {
  if (head_dim % 2 != 0) {
    throw ConfigError("apply_rope: head_dim must be even");
  }
  if (x.cols() % head_dim != 0) {
    throw InternalError("apply_rope: columns not a multiple of head_dim");
  }
  if (x.rows() != static_cast<Index>(positions.size())) {
    throw InternalError("apply_rope: row/position count mismatch");
  }
  const Index n_blocks = x.cols() / head_dim;
  const Index half = head_dim / 2;

  Vec freqs(half);
  for (Index i = 0; i < half; ++i) {
    freqs[i] = std::pow(rope_base, -2.0 * static_cast<Scalar>(i) /
                                        static_cast<Scalar>(head_dim));
  }

  Mat out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const auto p = static_cast<Scalar>(positions[static_cast<std::size_t>(r)]);
    for (Index i = 0; i < half; ++i) {
      const Scalar angle = p * freqs[i];
      const Scalar c = std::cos(angle);
      const Scalar s = std::sin(angle);
      for (Index b = 0; b < n_blocks; ++b) {
        const Index c0 = b * head_dim + 2 * i;
        const Scalar x0 = x(r, c0);
        const Scalar x1 = x(r, c0 + 1);
        out(r, c0) = x0 * c - x1 * s;
        out(r, c0 + 1) = x0 * s + x1 * c;
      }
    }
  }
  return out;
}

Mat rms_norm(const Eigen::Ref<const Mat>& x, Scalar eps) {
  Mat out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar ms = x.row(r).squaredNorm() / static_cast<Scalar>(x.cols());
    out.row(r) = x.row(r) / std::sqrt(ms + eps);
  }
  return out;
}

ToyModel::ToyModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed) {
  config_.validate();
  DetRng rng(seed);
  const Scalar stddev =
      1.0 / std::sqrt(static_cast<Scalar>(config_.hidden_dim));
  const Index h = config_.hidden_dim;
  const Index qd = config_.n_heads * config_.head_dim;
  const Index kd = config_.kv_dim();
  const Index m = config_.mlp_dim();

  embedding_.resize(config_.vocab_size, h);
  fill_gaussian(embedding_, rng, stddev);

  layers_.resize(static_cast<std::size_t>(config_.n_layers));
  for (auto& lw : layers_) {
    lw.wq.resize(h, qd);
    lw.wk.resize(h, kd);
    lw.wv.resize(h, kd);
    lw.wo.resize(qd, h);
    lw.w_gate.resize(h, m);
    lw.w_up.resize(h, m);
    lw.w_down.resize(m, h);
    fill_gaussian(lw.wq, rng, stddev);
    fill_gaussian(lw.wk, rng, stddev);
    fill_gaussian(lw.wv, rng, stddev);
    fill_gaussian(lw.wo, rng, stddev);
    fill_gaussian(lw.w_gate, rng, stddev);
    fill_gaussian(lw.w_up, rng, stddev);
    fill_gaussian(lw.w_down, rng, stddev);
  }
}

HiddenStates ToyModel::embed(const std::vector<std::int32_t>& tokens) const {
  if (tokens.empty()) throw ConfigError("embed: empty token sequence");
  HiddenStates states;
  states.activations.resize(static_cast<Index>(tokens.size()),
                            config_.hidden_dim);
  states.position_ids.resize(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto id = tokens[i];
    if (id < 0 || id >= config_.vocab_size) {
      throw ConfigError("embed: token id out of vocabulary");
    }
    states.activations.row(static_cast<Index>(i)) = embedding_.row(id);
    states.position_ids[i] = static_cast<Index>(i);
  }
  return states;
}

LayerResult ToyModel::forward_layer(Index layer, const HiddenStates& states,
                                    const ForwardOptions& opts,
                                    const KvOverride* kv_override) const {
  if (layer < 0 || layer >= config_.n_layers) {
    throw InternalError("forward_layer: layer out of range");
  }
  states.validate();
  const Index n = states.rows();
  if (n < 1) throw InternalError("forward_layer: empty states");
  if (states.activations.cols() != config_.hidden_dim) {
    throw InternalError("forward_layer: hidden dim mismatch at layer " +
                        std::to_string(layer));
  }

  const auto& lw = layers_[static_cast<std::size_t>(layer)];
  const Index d = config_.head_dim;
  const Index heads = config_.n_heads;
  const Index per_group = config_.heads_per_group();
  const auto neg_inf = -std::numeric_limits<Scalar>::infinity();

  const Mat x_norm = rms_norm(states.activations);
  const Mat q = apply_rope(x_norm * lw.wq, states.position_ids, d,
                           config_.rope_base);
  const Mat k_self = apply_rope(x_norm * lw.wk, states.position_ids, d,
                                config_.rope_base);
  const Mat v_self = x_norm * lw.wv;

  // Key/value source: cached rows first, then the current rows.
  Mat k_all, v_all;
  IndexList key_positions;
  if (kv_override != nullptr) {
    const Index n_cached = kv_override->keys->rows();
    k_all.resize(n_cached + n, k_self.cols());
    v_all.resize(n_cached + n, v_self.cols());
    k_all.topRows(n_cached) = *kv_override->keys;
    k_all.bottomRows(n) = k_self;
    v_all.topRows(n_cached) = *kv_override->values;
    v_all.bottomRows(n) = v_self;
    key_positions = *kv_override->key_positions;
    key_positions.insert(key_positions.end(), states.position_ids.begin(),
                         states.position_ids.end());
  } else {
    k_all = k_self;
    v_all = v_self;
    key_positions = states.position_ids;
  }
  const Index n_keys = k_all.rows();
  const Index w_eff = std::min(opts.window, n);

  const bool biased = bias_ && bias_->has_layer(layer);
  const Vec* layer_bias =
      biased ? &bias_->key_bias[static_cast<std::size_t>(layer)] : nullptr;

  LayerResult result;
  result.slice.layer = layer;
  result.slice.weights.resize(static_cast<std::size_t>(heads));
  result.slice.key_positions = key_positions;
  result.slice.query_positions.assign(
      states.position_ids.end() - w_eff, states.position_ids.end());
  if (opts.oracle) result.full_attention.resize(static_cast<std::size_t>(heads));

  Mat context(n, heads * d);
  const Scalar inv_sqrt_d = 1.0 / std::sqrt(static_cast<Scalar>(d));
  for (Index h = 0; h < heads; ++h) {
    const Index g = h / per_group;
    Mat scores = q.middleCols(h * d, d) *
                 k_all.middleCols(g * d, d).transpose() * inv_sqrt_d;
    if (layer_bias != nullptr) {
      for (Index j = 0; j < n_keys; ++j) {
        const Index pos = key_positions[static_cast<std::size_t>(j)];
        if (pos < layer_bias->size()) {
          scores.col(j).array() += (*layer_bias)[pos];
        }
      }
    }
    // Causal mask by original position; key columns are sorted, so each
    // query row masks a contiguous tail.
    for (Index t = 0; t < n; ++t) {
      const Index qp = states.position_ids[static_cast<std::size_t>(t)];
      Index first_masked = n_keys;
      while (first_masked > 0 &&
             key_positions[static_cast<std::size_t>(first_masked - 1)] > qp) {
        --first_masked;
      }
      if (first_masked < n_keys) {
        scores.row(t).tail(n_keys - first_masked).setConstant(neg_inf);
      }
    }
    softmax_rows_inplace(scores);
    context.middleCols(h * d, d) = scores * v_all.middleCols(g * d, d);
    result.slice.weights[static_cast<std::size_t>(h)] =
        scores.bottomRows(w_eff);
    if (opts.oracle) {
      result.full_attention[static_cast<std::size_t>(h)] = std::move(scores);
    }
  }

  const Mat x_attn = states.activations + context * lw.wo;
  const Mat mlp_in = rms_norm(x_attn);
  const Mat gate = mlp_in * lw.w_gate;
  const Mat up = mlp_in * lw.w_up;
  // silu(gate) * up
  const Mat act =
      (gate.array() / (1.0 + (-gate.array()).exp()) * up.array()).matrix();

  result.states.activations = x_attn + act * lw.w_down;
  result.states.position_ids = states.position_ids;
  result.keys = k_self;
  result.values = v_self;
  return result;
}

Vec ToyModel::logits(const HiddenStates& states) const {
  if (states.rows() < 1) throw InternalError("logits: empty states");
  const Mat last = rms_norm(states.activations.bottomRows(1));
  return embedding_ * last.row(0).transpose();
}

std::uint64_t ToyModel::weight_checksum() const {
  std::uint64_t h = fnv1a64(embedding_);
  for (const auto& lw : layers_) {
    h = fnv1a64(lw.wq, h);
    h = fnv1a64(lw.wk, h);
    h = fnv1a64(lw.wv, h);
    h = fnv1a64(lw.wo, h);
    h = fnv1a64(lw.w_gate, h);
    h = fnv1a64(lw.w_up, h);
    h = fnv1a64(lw.w_down, h);
  }
  return h;
}

void ToyModel::save_weights(const std::string& path) const {
  BinaryWriter w(path);
  w.u32(kWeightsMagic);
  w.u32(kWeightsVersion);
  w.u64(model_config_hash(config_));
  w.mat(embedding_);
  for (const auto& lw : layers_) {
    w.mat(lw.wq);
    w.mat(lw.wk);
    w.mat(lw.wv);
    w.mat(lw.wo);
    w.mat(lw.w_gate);
    w.mat(lw.w_up);
    w.mat(lw.w_down);
  }
  w.close();
}

ToyModel ToyModel::load_weights(const ModelConfig& config, std::uint64_t seed,
                                const std::string& path) {
  config.validate();
  BinaryReader r(path);
  if (r.u32() != kWeightsMagic) {
    throw UsageError("weight blob: bad magic: " + path);
  }
  if (r.u32() != kWeightsVersion) {
    throw UsageError("weight blob: unsupported version: " + path);
  }
  if (r.u64() != model_config_hash(config)) {
    throw ConfigError("weight blob: config hash mismatch: " + path);
  }
  ToyModel model;
  model.config_ = config;
  model.seed_ = seed;
  model.embedding_ = r.mat();
  model.layers_.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& lw : model.layers_) {
    lw.wq = r.mat();
    lw.wk = r.mat();
    lw.wv = r.mat();
    lw.wo = r.mat();
    lw.w_gate = r.mat();
    lw.w_up = r.mat();
    lw.w_down = r.mat();
  }
  return model;
}

}  // namespace structkv
