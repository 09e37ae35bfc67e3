#pragma once

#include "structkv/common.hpp"
#include "structkv/toy_model.hpp"

namespace structkv {

// Window-pooled, GQA-summed attention mass per key position at one layer.
struct SaliencyVector {
  Index layer = 0;
  Vec scores;              // one per key position, all >= 0
  IndexList key_positions; // original positions

  void validate() const;
};

// Contiguous head->group assignment: head h belongs to group h / (H/G).
std::vector<Index> make_contiguous_group_map(Index n_heads, Index n_groups);

// S_j = sum_g ( (1/w_eff) sum_t sum_{h in H_g} a[h](t, j) ), where w_eff is
// the actual number of window query rows in the slice.
SaliencyVector local_saliency(const AttentionSlice& slice,
                              const std::vector<Index>& group_map,
                              Index n_groups);

// sum_j S_j; equals H for any row-stochastic slice.
Scalar saliency_total(const SaliencyVector& v);

}  // namespace structkv
