#include <doctest.h>

#include "oracles.hpp"
#include "structkv/centrality.hpp"

using namespace structkv;

namespace {

SaliencyVector make_sal(std::initializer_list<Scalar> values) {
  SaliencyVector s;
  s.scores.resize(static_cast<Index>(values.size()));
  Index i = 0;
  for (Scalar v : values) {
    s.scores[i] = v;
    s.key_positions.push_back(i);
    ++i;
  }
  return s;
}

}  // namespace

TEST_CASE("centrality: plain sum at lambda=1") {
  auto c = CentralityState::init(2, 1.0);
  c = accumulate(c, make_sal({1, 0}));
  c = accumulate(c, make_sal({0, 1}));
  c = accumulate(c, make_sal({1, 1}));
  CHECK(c.scores[0] == 2.0);
  CHECK(c.scores[1] == 2.0);
  CHECK(c.layers_accumulated == 3);
}

TEST_CASE("centrality: hand arithmetic at lambda=0.5") {
  auto c = CentralityState::init(2, 0.5);
  c = accumulate(c, make_sal({4, 0}));
  c = accumulate(c, make_sal({0, 1}));
  CHECK(c.scores[0] == 2.0);  // 0.5*4 + 0
  CHECK(c.scores[1] == 1.0);  // 0.5*0 + 1
}

TEST_CASE("centrality recursive form equals the closed form") {
  DetRng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 4 + rng.uniform_index(24);
    const Index depth = 2 + rng.uniform_index(8);
    const Scalar lambda = 0.05 + 0.95 * rng.uniform();

    std::vector<Vec> saliencies;
    auto c = CentralityState::init(n, lambda);
    for (Index l = 0; l < depth; ++l) {
      SaliencyVector s;
      s.scores.resize(n);
      for (Index j = 0; j < n; ++j) {
        s.scores[j] = rng.uniform();
        if (l == 0) s.key_positions.push_back(j);
      }
      s.key_positions.resize(static_cast<std::size_t>(n));
      for (Index j = 0; j < n; ++j) s.key_positions[static_cast<std::size_t>(j)] = j;
      saliencies.push_back(s.scores);
      c = accumulate(c, s);
    }
    const Vec expected = oracle::centrality_closed_form(saliencies, lambda);
    for (Index j = 0; j < n; ++j) {
      CHECK(c.scores[j] == doctest::Approx(expected[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("centrality: length mismatch is an internal error") {
  auto c = CentralityState::init(4, 0.9);
  CHECK_THROWS_AS(accumulate(c, make_sal({1, 2})), InternalError);
}

TEST_CASE("block aggregation: hand sums and degenerate partition") {
  auto c = CentralityState::init(4, 1.0);
  c = accumulate(c, make_sal({1, 2, 3, 4}));

  const BlockScores b2 = block_aggregate(c, 2);
  REQUIRE(b2.n_blocks() == 2);
  CHECK(b2.scores[0] == 3.0);
  CHECK(b2.scores[1] == 7.0);

  const BlockScores big = block_aggregate(c, 16);
  REQUIRE(big.n_blocks() == 1);
  CHECK(big.scores[0] == 10.0);
}

TEST_CASE("block aggregation conserves the partition sum") {
  DetRng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 3 + rng.uniform_index(200);
    auto c = CentralityState::init(n, 1.0);
    SaliencyVector s;
    s.scores.resize(n);
    for (Index j = 0; j < n; ++j) {
      s.scores[j] = rng.uniform() * 5.0;
      s.key_positions.push_back(j);
    }
    c = accumulate(c, s);
    const Index block = 1 + rng.uniform_index(17);
    const BlockScores bs = block_aggregate(c, block);
    CHECK(bs.scores.sum() == doctest::Approx(c.scores.sum()).epsilon(1e-9));
  }
}

TEST_CASE("evict blocks: retained positions and tie handling") {
  auto c = CentralityState::init(4, 1.0);
  c = accumulate(c, make_sal({1, 2, 3, 4}));
  const BlockScores bs = block_aggregate(c, 2);  // [3, 7]

  CHECK(evict_blocks(bs, 1).indices == IndexList{2, 3});
  CHECK(evict_blocks(bs, 0).indices == IndexList{0, 1, 2, 3});
  CHECK_THROWS_AS(evict_blocks(bs, 2), BudgetError);

  // Equal scores: the later block goes first.
  auto ct = CentralityState::init(4, 1.0);
  ct = accumulate(ct, make_sal({2, 2, 2, 2}));
  const BlockScores tied = block_aggregate(ct, 2);
  CHECK(evict_blocks(tied, 1).indices == IndexList{0, 1});
}

TEST_CASE("evict blocks matches the full-sort oracle") {
  DetRng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 16 + rng.uniform_index(128);
    const Index block = 1 + rng.uniform_index(16);
    auto c = CentralityState::init(n, 1.0);
    SaliencyVector s;
    s.scores.resize(n);
    for (Index j = 0; j < n; ++j) {
      s.scores[j] = static_cast<Scalar>(rng.uniform_index(6));
      s.key_positions.push_back(j);
    }
    c = accumulate(c, s);
    const BlockScores bs = block_aggregate(c, block);
    const Index n_evict = rng.uniform_index(bs.n_blocks());

    const IndexSet kept = evict_blocks(bs, n_evict);
    const IndexList survivors =
        oracle::surviving_blocks_sorted(bs.scores, n_evict);
    IndexList expected;
    for (Index b : survivors) {
      const Index begin = b * block;
      const Index end = std::min(begin + block, n);
      for (Index t = begin; t < end; ++t) expected.push_back(t);
    }
    CHECK(kept.indices == expected);
  }
}

TEST_CASE("block holding the top token survives when its score dominates") {
  DetRng rng(55);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 64;
    const Index block = 16;
    auto c = CentralityState::init(n, 1.0);
    SaliencyVector s;
    s.scores.resize(n);
    for (Index j = 0; j < n; ++j) {
      s.scores[j] = rng.uniform();
      s.key_positions.push_back(j);
    }
    c = accumulate(c, s);
    const BlockScores bs = block_aggregate(c, block);

    Index top_token = 0;
    c.scores.maxCoeff(&top_token);
    const Index top_block = top_token / block;

    const Index n_evict = 1 + rng.uniform_index(bs.n_blocks() - 1);
    // Sorted block scores, ascending; eviction removes the first n_evict.
    Vec sorted = bs.scores;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    if (bs.scores[top_block] > sorted[n_evict - 1]) {
      CHECK(evict_blocks(bs, n_evict).contains(top_token));
    }
  }
}
