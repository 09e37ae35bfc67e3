#include <doctest.h>

#include <cstdio>

#include "oracles.hpp"
#include "structkv/propagation.hpp"
#include "structkv/toy_model.hpp"

using namespace structkv;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.n_layers = 3;
  cfg.n_heads = 4;
  cfg.n_kv_groups = 2;
  cfg.head_dim = 8;
  cfg.hidden_dim = 32;
  cfg.vocab_size = 64;
  return cfg;
}

std::vector<std::int32_t> ramp_tokens(Index n, Index vocab) {
  std::vector<std::int32_t> tokens(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    tokens[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i % vocab);
  }
  return tokens;
}

}  // namespace

TEST_CASE("model init is deterministic and seed sensitive") {
  const ModelConfig cfg = small_config();
  CHECK(ToyModel(cfg, 0).weight_checksum() == ToyModel(cfg, 0).weight_checksum());
  CHECK(ToyModel(cfg, 0).weight_checksum() != ToyModel(cfg, 1).weight_checksum());

  ModelConfig bad = cfg;
  bad.hidden_dim = cfg.hidden_dim + cfg.head_dim;
  CHECK_THROWS_AS(ToyModel(bad, 0), ConfigError);
}

TEST_CASE("rope: zero position is identity, pairs keep their norm") {
  DetRng rng(3);
  Mat x(4, 16);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) x(r, c) = rng.gaussian();
  }

  const Mat roped0 = apply_rope(x, {0, 5, 9, 12}, 8, 10000.0);
  CHECK(roped0.row(0) == x.row(0));

  const Mat roped = apply_rope(x, {3, 7, 21, 400}, 8, 10000.0);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); c += 2) {
      const Scalar before = std::hypot(x(r, c), x(r, c + 1));
      const Scalar after = std::hypot(roped(r, c), roped(r, c + 1));
      CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
  }

  CHECK_THROWS_AS(apply_rope(x, {0, 1, 2, 3}, 7, 10000.0), ConfigError);
}

TEST_CASE("rope commutes with row gather, exactly") {
  DetRng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 6 + rng.uniform_index(20);
    Mat x(n, 24);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < 24; ++c) x(r, c) = rng.gaussian();
    }
    IndexList positions(static_cast<std::size_t>(n));
    Index p = rng.uniform_index(4);
    for (Index i = 0; i < n; ++i) {
      positions[static_cast<std::size_t>(i)] = p;
      p += 1 + rng.uniform_index(3);
    }

    IndexList keep;
    for (Index i = 0; i < n; ++i) {
      if (rng.uniform() < 0.5) keep.push_back(i);
    }
    if (keep.empty()) keep.push_back(0);

    Mat gathered(static_cast<Index>(keep.size()), x.cols());
    IndexList kept_positions;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      gathered.row(static_cast<Index>(i)) = x.row(keep[i]);
      kept_positions.push_back(positions[static_cast<std::size_t>(keep[i])]);
    }

    const Mat rope_then_gather = [&] {
      const Mat full = apply_rope(x, positions, 8, 10000.0);
      Mat out(static_cast<Index>(keep.size()), x.cols());
      for (std::size_t i = 0; i < keep.size(); ++i) {
        out.row(static_cast<Index>(i)) = full.row(keep[i]);
      }
      return out;
    }();
    const Mat gather_then_rope = apply_rope(gathered, kept_positions, 8, 10000.0);
    CHECK(rope_then_gather == gather_then_rope);  // bit-exact
  }
}

TEST_CASE("forward layer: causality, row sums, determinism") {
  const ModelConfig cfg = small_config();
  const ToyModel model(cfg, 9);
  const auto tokens = ramp_tokens(24, cfg.vocab_size);
  const HiddenStates states = model.embed(tokens);

  ForwardOptions opts;
  opts.window = 6;
  opts.oracle = true;
  const LayerResult a = model.forward_layer(0, states, opts);
  const LayerResult b = model.forward_layer(0, states, opts);
  CHECK(a.states.activations == b.states.activations);  // bit-identical

  REQUIRE(a.slice.n_heads() == cfg.n_heads);
  CHECK(a.slice.n_queries() == 6);
  CHECK(a.slice.n_keys() == 24);
  for (Index h = 0; h < cfg.n_heads; ++h) {
    const Mat& w = a.slice.weights[static_cast<std::size_t>(h)];
    for (Index t = 0; t < w.rows(); ++t) {
      CHECK(w.row(t).sum() == doctest::Approx(1.0).epsilon(1e-9));
      const Index qpos = a.slice.query_positions[static_cast<std::size_t>(t)];
      for (Index j = 0; j < w.cols(); ++j) {
        CHECK(w(t, j) >= 0.0);
        if (a.slice.key_positions[static_cast<std::size_t>(j)] > qpos) {
          CHECK(w(t, j) == 0.0);
        }
      }
    }
  }

  // Oracle-mode windowed slice equals the last rows of the full tensor.
  for (Index h = 0; h < cfg.n_heads; ++h) {
    const Mat& full = a.full_attention[static_cast<std::size_t>(h)];
    CHECK(Mat(full.bottomRows(6)) ==
          a.slice.weights[static_cast<std::size_t>(h)]);
  }
}

TEST_CASE("forward layer: single token attends only to itself") {
  const ModelConfig cfg = small_config();
  const ToyModel model(cfg, 1);
  const HiddenStates states = model.embed({5});
  const LayerResult r = model.forward_layer(0, states, {.window = 8});
  for (Index h = 0; h < cfg.n_heads; ++h) {
    REQUIRE(r.slice.weights[static_cast<std::size_t>(h)].size() == 1);
    CHECK(r.slice.weights[static_cast<std::size_t>(h)](0, 0) == 1.0);
  }
}

TEST_CASE("weight blob round trips and rejects mismatched config") {
  const ModelConfig cfg = small_config();
  const ToyModel model(cfg, 23);
  const std::string path = "toy_weights_test.bin";
  model.save_weights(path);

  const ToyModel loaded = ToyModel::load_weights(cfg, 23, path);
  CHECK(loaded.weight_checksum() == model.weight_checksum());

  const auto tokens = ramp_tokens(16, cfg.vocab_size);
  const HiddenStates s1 = model.embed(tokens);
  const HiddenStates s2 = loaded.embed(tokens);
  CHECK(model.forward_layer(1, s1, {.window = 4}).states.activations ==
        loaded.forward_layer(1, s2, {.window = 4}).states.activations);

  ModelConfig other = cfg;
  other.vocab_size += 1;
  CHECK_THROWS_AS(ToyModel::load_weights(other, 23, path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("attention bias hook shifts mass toward the boosted key") {
  const ModelConfig cfg = small_config();
  ToyModel model(cfg, 4);
  const auto tokens = ramp_tokens(20, cfg.vocab_size);

  auto bias = std::make_shared<AttentionBias>();
  bias->key_bias.resize(static_cast<std::size_t>(cfg.n_layers));
  Vec b = Vec::Zero(20);
  b[3] = 10.0;
  bias->key_bias[0] = b;

  const HiddenStates states = model.embed(tokens);
  const LayerResult plain = model.forward_layer(0, states, {.window = 4});
  model.set_attention_bias(bias);
  const LayerResult boosted = model.forward_layer(0, states, {.window = 4});

  for (Index h = 0; h < cfg.n_heads; ++h) {
    const Scalar before =
        plain.slice.weights[static_cast<std::size_t>(h)].col(3).sum();
    const Scalar after =
        boosted.slice.weights[static_cast<std::size_t>(h)].col(3).sum();
    CHECK(after > before);
    CHECK(after > 0.9 * static_cast<Scalar>(4));  // near-total mass per row
  }
  // Layer 1 carries no bias entry and is untouched.
  const LayerResult l1_plain = model.forward_layer(1, plain.states, {.window = 4});
  CHECK(l1_plain.slice.weights[0].col(3).sum() < 3.9);
}
