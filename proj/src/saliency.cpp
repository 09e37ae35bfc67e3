#include "structkv/saliency.hpp"

namespace structkv {

void SaliencyVector::validate() const {
  if (scores.size() != static_cast<Index>(key_positions.size())) {
    throw InternalError("saliency: score/position count mismatch");
  }
  for (Index i = 0; i < scores.size(); ++i) {
    if (scores[i] < 0.0) throw InternalError("saliency: negative score");
  }
}

std::vector<Index> make_contiguous_group_map(Index n_heads, Index n_groups) {
  if (n_groups < 1 || n_heads % n_groups != 0) {
    throw ConfigError("group map: heads must split evenly into groups");
  }
  const Index per_group = n_heads / n_groups;
  std::vector<Index> map(static_cast<std::size_t>(n_heads));
  for (Index h = 0; h < n_heads; ++h) map[static_cast<std::size_t>(h)] = h / per_group;
  return map;
}

SaliencyVector local_saliency(const AttentionSlice& slice,
                              const std::vector<Index>& group_map,
                              Index n_groups) {
  const Index heads = slice.n_heads();
  if (static_cast<Index>(group_map.size()) != heads) {
    throw ConfigError("local_saliency: group map does not cover all heads");
  }
  std::vector<bool> seen(static_cast<std::size_t>(n_groups), false);
  for (Index g : group_map) {
    if (g < 0 || g >= n_groups) {
      throw ConfigError("local_saliency: group id out of range");
    }
    seen[static_cast<std::size_t>(g)] = true;
  }
  for (bool s : seen) {
    if (!s) throw ConfigError("local_saliency: empty GQA group");
  }

  const Index w_eff = slice.n_queries();
  const Index n_keys = slice.n_keys();
  SaliencyVector out;
  out.layer = slice.layer;
  out.key_positions = slice.key_positions;
  out.scores = Vec::Zero(n_keys);

  // Group-wise window mean of the within-group head sum.
  for (Index g = 0; g < n_groups; ++g) {
    Vec group_sum = Vec::Zero(n_keys);
    for (Index h = 0; h < heads; ++h) {
      if (group_map[static_cast<std::size_t>(h)] != g) continue;
      group_sum +=
          slice.weights[static_cast<std::size_t>(h)].colwise().sum().transpose();
    }
    out.scores += group_sum / static_cast<Scalar>(w_eff);
  }
  return out;
}

Scalar saliency_total(const SaliencyVector& v) { return v.scores.sum(); }

}  // namespace structkv
