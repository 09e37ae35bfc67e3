#pragma once

#include "structkv/common.hpp"
#include "structkv/index_set.hpp"
#include "structkv/saliency.hpp"

namespace structkv {

// Cumulative global in-degree centrality over original token positions.
// Only accumulated while the sequence is full-length; frozen at the pivot.
struct CentralityState {
  Vec scores;                  // length N, indexed by original position
  Index layers_accumulated = 0;
  Scalar decay = 1.0;          // lambda echo

  static CentralityState init(Index n_tokens, Scalar decay);
};

// scores' = lambda * scores + S. Accumulating layers 0..M this way yields
// sum_{l=0}^{M} lambda^(M-l) * S^(l) exactly.
CentralityState accumulate(const CentralityState& state,
                           const SaliencyVector& s);

// Per contiguous physical block, the sum of member token centralities.
struct BlockScores {
  Index block_size = 1;
  Vec scores;         // one per block; last block may cover fewer tokens
  Index n_tokens = 0;

  Index n_blocks() const { return scores.size(); }
};

BlockScores block_aggregate(const CentralityState& state, Index block_size);

// Drop the n_evict lowest-scoring blocks (ties evict the higher block index
// first, preserving earlier context); returns the surviving token positions.
IndexSet evict_blocks(const BlockScores& bs, Index n_evict);

}  // namespace structkv
