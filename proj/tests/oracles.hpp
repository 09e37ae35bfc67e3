#pragma once

// Independent brute-force references for the test suites. Everything here
// is written as plain loops straight from the definitions and stays
// independent of the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include "structkv/common.hpp"
#include "structkv/rng.hpp"
#include "structkv/toy_model.hpp"

namespace structkv::oracle {

// Random row-stochastic attention slice: softmax of uniform logits, with an
// optional causal cutoff so column j > row_position(t) carries zero weight.
inline AttentionSlice random_slice(DetRng& rng, Index heads, Index w_eff,
                                   Index n_keys, bool causal = false) {
  AttentionSlice slice;
  slice.layer = 0;
  slice.weights.resize(static_cast<std::size_t>(heads));
  for (Index j = 0; j < n_keys; ++j) slice.key_positions.push_back(j);
  for (Index t = 0; t < w_eff; ++t) {
    slice.query_positions.push_back(n_keys - w_eff + t);
  }
  for (Index h = 0; h < heads; ++h) {
    Mat a(w_eff, n_keys);
    for (Index t = 0; t < w_eff; ++t) {
      const Index cutoff = causal ? (n_keys - w_eff + t + 1) : n_keys;
      Scalar max_logit = -1e300;
      std::vector<Scalar> logits(static_cast<std::size_t>(n_keys), 0.0);
      for (Index j = 0; j < cutoff; ++j) {
        logits[static_cast<std::size_t>(j)] = 4.0 * rng.uniform() - 2.0;
        max_logit = std::max(max_logit, logits[static_cast<std::size_t>(j)]);
      }
      Scalar sum = 0.0;
      for (Index j = 0; j < cutoff; ++j) {
        logits[static_cast<std::size_t>(j)] =
            std::exp(logits[static_cast<std::size_t>(j)] - max_logit);
        sum += logits[static_cast<std::size_t>(j)];
      }
      for (Index j = 0; j < n_keys; ++j) {
        a(t, j) = j < cutoff ? logits[static_cast<std::size_t>(j)] / sum : 0.0;
      }
    }
    slice.weights[static_cast<std::size_t>(h)] = a;
  }
  return slice;
}

// Eq.-style direct summation: S_j = sum_g (1/w) sum_t sum_{h in group g} a.
inline Vec saliency_direct(const AttentionSlice& slice,
                           const std::vector<Index>& group_map,
                           Index n_groups) {
  const Index n_keys = slice.n_keys();
  const Index w_eff = slice.n_queries();
  Vec s = Vec::Zero(n_keys);
  for (Index j = 0; j < n_keys; ++j) {
    for (Index g = 0; g < n_groups; ++g) {
      Scalar inner = 0.0;
      for (Index t = 0; t < w_eff; ++t) {
        for (std::size_t h = 0; h < group_map.size(); ++h) {
          if (group_map[h] != g) continue;
          inner += slice.weights[h](t, j);
        }
      }
      s[j] += inner / static_cast<Scalar>(w_eff);
    }
  }
  return s;
}

inline Scalar entropy_direct(const AttentionSlice& slice) {
  const Index heads = slice.n_heads();
  const Index w_eff = slice.n_queries();
  const Index n_keys = slice.n_keys();
  Scalar outer = 0.0;
  for (Index h = 0; h < heads; ++h) {
    Scalar mid = 0.0;
    for (Index t = 0; t < w_eff; ++t) {
      for (Index j = 0; j < n_keys; ++j) {
        const Scalar a = slice.weights[static_cast<std::size_t>(h)](t, j);
        if (a > 0.0) mid += a * std::log(a);
      }
    }
    outer += mid / static_cast<Scalar>(w_eff);
  }
  return -outer / static_cast<Scalar>(heads);
}

inline Scalar sparsity_direct(const AttentionSlice& slice, Scalar frac) {
  const Index heads = slice.n_heads();
  const Index w_eff = slice.n_queries();
  const Index n_keys = slice.n_keys();
  const Index k = std::max<Index>(
      1, static_cast<Index>(std::ceil(frac * static_cast<Scalar>(n_keys))));
  Scalar outer = 0.0;
  for (Index h = 0; h < heads; ++h) {
    Scalar mid = 0.0;
    for (Index t = 0; t < w_eff; ++t) {
      std::vector<Scalar> row;
      for (Index j = 0; j < n_keys; ++j) {
        row.push_back(slice.weights[static_cast<std::size_t>(h)](t, j));
      }
      std::sort(row.begin(), row.end(), std::greater<Scalar>());
      for (Index j = 0; j < k; ++j) mid += row[static_cast<std::size_t>(j)];
    }
    outer += mid / static_cast<Scalar>(w_eff);
  }
  return outer / static_cast<Scalar>(heads);
}

// Two-pass population variance of the flattened head slice, head-averaged.
inline Scalar variance_direct(const AttentionSlice& slice) {
  const Index heads = slice.n_heads();
  Scalar outer = 0.0;
  for (Index h = 0; h < heads; ++h) {
    const Mat& a = slice.weights[static_cast<std::size_t>(h)];
    Scalar mean = 0.0;
    for (Index t = 0; t < a.rows(); ++t) {
      for (Index j = 0; j < a.cols(); ++j) mean += a(t, j);
    }
    mean /= static_cast<Scalar>(a.size());
    Scalar var = 0.0;
    for (Index t = 0; t < a.rows(); ++t) {
      for (Index j = 0; j < a.cols(); ++j) {
        const Scalar d = a(t, j) - mean;
        var += d * d;
      }
    }
    outer += var / static_cast<Scalar>(a.size());
  }
  return outer / static_cast<Scalar>(heads);
}

// Closed-form centrality: C_j = sum_{l=0}^{M} lambda^(M-l) * S_j^(l).
inline Vec centrality_closed_form(const std::vector<Vec>& saliencies,
                                  Scalar lambda) {
  const auto depth = static_cast<Index>(saliencies.size());
  Vec c = Vec::Zero(saliencies.front().size());
  for (Index l = 0; l < depth; ++l) {
    const Scalar weight =
        std::pow(lambda, static_cast<Scalar>(depth - 1 - l));
    c += weight * saliencies[static_cast<std::size_t>(l)];
  }
  return c;
}

// Full-sort top-k with the tie rule (score desc, index asc), sorted output.
inline IndexList top_k_sorted(const Vec& scores, Index k) {
  IndexList order(static_cast<std::size_t>(scores.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  if (k < static_cast<Index>(order.size())) {
    order.resize(static_cast<std::size_t>(k));
  }
  std::sort(order.begin(), order.end());
  return order;
}

// Full-sort eviction: drop the n_evict lowest blocks (ties drop the higher
// block index), return surviving blocks ascending.
inline IndexList surviving_blocks_sorted(const Vec& block_scores,
                                         Index n_evict) {
  IndexList order(static_cast<std::size_t>(block_scores.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (block_scores[a] != block_scores[b]) {
      return block_scores[a] < block_scores[b];
    }
    return a > b;
  });
  order.erase(order.begin(), order.begin() + n_evict);
  std::sort(order.begin(), order.end());
  return order;
}

// Hand min-max normalization of the first-order differences.
inline Vec normalized_gradient_hand(const Vec& series) {
  Vec grad(series.size() - 1);
  for (Index l = 1; l < series.size(); ++l) {
    grad[l - 1] = series[l] - series[l - 1];
  }
  Scalar lo = grad[0], hi = grad[0];
  for (Index i = 0; i < grad.size(); ++i) {
    lo = std::min(lo, grad[i]);
    hi = std::max(hi, grad[i]);
  }
  Vec out(grad.size());
  for (Index i = 0; i < grad.size(); ++i) {
    out[i] = hi == lo ? 0.0 : (grad[i] - lo) / (hi - lo);
  }
  return out;
}

}  // namespace structkv::oracle
