#include "structkv/pivot.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace structkv {

Scalar attention_entropy(const AttentionSlice& slice) {
  const Index heads = slice.n_heads();
  const Index w_eff = slice.n_queries();
  Scalar acc = 0.0;
  for (Index h = 0; h < heads; ++h) {
    const Mat& a = slice.weights[static_cast<std::size_t>(h)];
    // 0 * log 0 := 0
    const Scalar head_sum =
        (a.array() > 0.0)
            .select(a.array() * a.array().max(1e-300).log(), 0.0)
            .sum();
    acc += head_sum / static_cast<Scalar>(w_eff);
  }
  return -acc / static_cast<Scalar>(heads);
}

Scalar attention_sparsity(const AttentionSlice& slice, Scalar frac) {
  if (!(frac > 0.0 && frac < 1.0)) {
    throw ConfigError("attention_sparsity: frac must lie in (0, 1)");
  }
  const Index heads = slice.n_heads();
  const Index w_eff = slice.n_queries();
  const Index n_keys = slice.n_keys();
  const Index k = std::max<Index>(
      1, static_cast<Index>(std::ceil(frac * static_cast<Scalar>(n_keys))));

  std::vector<Scalar> row(static_cast<std::size_t>(n_keys));
  Scalar acc = 0.0;
  for (Index h = 0; h < heads; ++h) {
    const Mat& a = slice.weights[static_cast<std::size_t>(h)];
    Scalar head_acc = 0.0;
    for (Index t = 0; t < w_eff; ++t) {
      for (Index j = 0; j < n_keys; ++j) row[static_cast<std::size_t>(j)] = a(t, j);
      std::nth_element(row.begin(), row.begin() + (k - 1), row.end(),
                       std::greater<Scalar>());
      Scalar top = 0.0;
      for (Index j = 0; j < k; ++j) top += row[static_cast<std::size_t>(j)];
      head_acc += top;
    }
    acc += head_acc / static_cast<Scalar>(w_eff);
  }
  return acc / static_cast<Scalar>(heads);
}

Scalar attention_variance(const AttentionSlice& slice) {
  const Index heads = slice.n_heads();
  Scalar acc = 0.0;
  for (Index h = 0; h < heads; ++h) {
    const Mat& a = slice.weights[static_cast<std::size_t>(h)];
    const auto n = static_cast<Scalar>(a.size());
    const Scalar mean = a.sum() / n;
    const Scalar mean_sq = a.array().square().sum() / n;
    acc += mean_sq - mean * mean;
  }
  return acc / static_cast<Scalar>(heads);
}

Vec normalize_gradients(const Vec& series) {
  const Index n = series.size();
  if (n < 2) {
    throw InternalError("normalize_gradients: need at least two layers");
  }
  if (!series.allFinite()) {
    throw InternalError("normalize_gradients: non-finite input");
  }
  Vec grad(n - 1);
  for (Index l = 1; l < n; ++l) grad[l - 1] = series[l] - series[l - 1];
  const Scalar lo = grad.minCoeff();
  const Scalar hi = grad.maxCoeff();
  if (hi == lo) return Vec::Zero(n - 1);
  return (grad.array() - lo) / (hi - lo);
}

Vec transition_scores(const std::vector<LayerMetrics>& metrics, Scalar w1,
                      Scalar w2, Scalar w3) {
  const auto n = static_cast<Index>(metrics.size());
  if (n < 2) {
    throw InternalError("transition_scores: need at least two layers");
  }
  Vec neg_entropy(n), sparsity(n), variance(n);
  for (Index l = 0; l < n; ++l) {
    const auto& m = metrics[static_cast<std::size_t>(l)];
    neg_entropy[l] = -m.entropy;
    sparsity[l] = m.sparsity;
    variance[l] = m.variance;
  }
  const Vec ge = normalize_gradients(neg_entropy);
  const Vec gs = normalize_gradients(sparsity);
  const Vec gv = normalize_gradients(variance);

  Vec t = Vec::Zero(n);  // layer-indexed; entry 0 unused
  for (Index l = 1; l < n; ++l) {
    t[l] = w1 * ge[l - 1] + w2 * gs[l - 1] + w3 * gv[l - 1];
  }
  return t;
}

namespace {

// Prefix argmax over layers [min_layer, last], ties toward the earlier layer.
Index prefix_argmax(const Vec& scores, Index min_layer, Index last) {
  Index best = -1;
  for (Index l = min_layer; l <= last; ++l) {
    if (best < 0 || scores[l] > scores[best]) best = l;
  }
  return best;
}

}  // namespace

std::optional<PivotDecision> detect_pivot(const Vec& scores, Index l_limit,
                                          Index current_layer,
                                          const DetectorOptions& opts) {
  const Index last = std::min<Index>(current_layer, scores.size() - 1);
  // Earliest prefix argmax = the latest strict running maximum. A peak is
  // only eligible once min_pivot layers exist behind it; an initial flat
  // stretch therefore never confirms.
  const Index peak = prefix_argmax(scores, 1, last);

  if (peak >= opts.min_pivot && current_layer - peak >= opts.patience) {
    PivotDecision d;
    d.pivot_layer = peak + 1;
    d.peak_layer = peak;
    d.triggered_by_limit = false;
    d.transition_scores = scores;
    return d;
  }
  if (current_layer == l_limit) {
    PivotDecision d;
    d.pivot_layer = l_limit;
    d.peak_layer = peak;
    d.triggered_by_limit = true;
    d.transition_scores = scores;
    return d;
  }
  return std::nullopt;
}

PivotDecision detect_pivot_offline(const Vec& scores, Index l_limit) {
  if (scores.size() < 2) {
    throw InternalError("detect_pivot_offline: need at least two layers");
  }
  const Index last = std::min<Index>(scores.size() - 1, l_limit);
  const Index peak = prefix_argmax(scores, 1, last);
  PivotDecision d;
  d.peak_layer = peak;
  d.transition_scores = scores;
  if (peak + 1 > l_limit) {
    d.pivot_layer = l_limit;
    d.triggered_by_limit = true;
  } else {
    d.pivot_layer = peak + 1;
    d.triggered_by_limit = false;
  }
  return d;
}

}  // namespace structkv
