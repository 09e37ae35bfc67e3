#include "structkv/centrality.hpp"

#include <algorithm>

namespace structkv {

CentralityState CentralityState::init(Index n_tokens, Scalar decay) {
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("centrality: decay must lie in (0, 1]");
  }
  CentralityState s;
  s.scores = Vec::Zero(n_tokens);
  s.decay = decay;
  return s;
}

CentralityState accumulate(const CentralityState& state,
                           const SaliencyVector& s) {
  if (s.scores.size() != state.scores.size()) {
    throw InternalError("centrality: saliency length mismatch");
  }
  CentralityState next = state;
  next.scores = state.decay * state.scores + s.scores;
  next.layers_accumulated = state.layers_accumulated + 1;
  return next;
}

BlockScores block_aggregate(const CentralityState& state, Index block_size) {
  if (block_size < 1) throw ConfigError("block_aggregate: block_size >= 1");
  const Index n = state.scores.size();
  const Index n_blocks = (n + block_size - 1) / block_size;
  BlockScores bs;
  bs.block_size = block_size;
  bs.n_tokens = n;
  bs.scores = Vec::Zero(n_blocks);
  for (Index b = 0; b < n_blocks; ++b) {
    const Index begin = b * block_size;
    const Index len = std::min(block_size, n - begin);
    bs.scores[b] = state.scores.segment(begin, len).sum();
  }
  return bs;
}

IndexSet evict_blocks(const BlockScores& bs, Index n_evict) {
  const Index n_blocks = bs.n_blocks();
  if (n_evict >= n_blocks) {
    throw BudgetError("evict_blocks: cannot evict every block");
  }
  IndexList order(static_cast<std::size_t>(n_blocks));
  for (Index b = 0; b < n_blocks; ++b) order[static_cast<std::size_t>(b)] = b;
  // Lowest score first; ties evict the higher block index first.
  std::sort(order.begin(), order.end(), [&bs](Index a, Index b) {
    if (bs.scores[a] != bs.scores[b]) return bs.scores[a] < bs.scores[b];
    return a > b;
  });
  std::vector<bool> evicted(static_cast<std::size_t>(n_blocks), false);
  for (Index i = 0; i < n_evict; ++i) {
    evicted[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  }
  IndexList kept;
  for (Index b = 0; b < n_blocks; ++b) {
    if (evicted[static_cast<std::size_t>(b)]) continue;
    const Index begin = b * bs.block_size;
    const Index end = std::min(begin + bs.block_size, bs.n_tokens);
    for (Index t = begin; t < end; ++t) kept.push_back(t);
  }
  return IndexSet::from_sorted(std::move(kept), bs.n_tokens);
}

}  // namespace structkv
