#include "structkv/index_set.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace structkv {

void IndexSet::validate() const {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= origin_len) {
      throw InternalError("index set: position out of range");
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw InternalError("index set: not strictly increasing");
    }
  }
}

IndexSet IndexSet::from_sorted(IndexList sorted, Index origin_len) {
  IndexSet s{std::move(sorted), origin_len};
  s.validate();
  return s;
}

IndexSet IndexSet::from_unsorted(IndexList any, Index origin_len) {
  std::sort(any.begin(), any.end());
  any.erase(std::unique(any.begin(), any.end()), any.end());
  return from_sorted(std::move(any), origin_len);
}

IndexSet IndexSet::all(Index origin_len) {
  IndexList v(static_cast<std::size_t>(origin_len));
  std::iota(v.begin(), v.end(), Index{0});
  return IndexSet{std::move(v), origin_len};
}

IndexSet IndexSet::empty(Index origin_len) { return IndexSet{{}, origin_len}; }

bool IndexSet::contains(Index pos) const {
  return std::binary_search(indices.begin(), indices.end(), pos);
}

bool IndexSet::is_subset_of(const IndexSet& other) const {
  return std::includes(other.indices.begin(), other.indices.end(),
                       indices.begin(), indices.end());
}

IndexSet IndexSet::union_with(const IndexSet& other) const {
  IndexList merged;
  merged.reserve(indices.size() + other.indices.size());
  std::set_union(indices.begin(), indices.end(), other.indices.begin(),
                 other.indices.end(), std::back_inserter(merged));
  return IndexSet{std::move(merged), std::max(origin_len, other.origin_len)};
}

IndexSet make_window_indices(Index n, Index w) {
  if (n < 1) throw InternalError("make_window_indices: n must be >= 1");
  const Index count = std::min(w, n);
  IndexList v(static_cast<std::size_t>(count));
  std::iota(v.begin(), v.end(), n - count);
  return IndexSet{std::move(v), n};
}

Index budget_count(Index n, Scalar rate) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ConfigError("budget rate must lie in (0, 1]");
  }
  const auto k = static_cast<Index>(
      std::ceil(static_cast<Scalar>(n) * rate));
  return std::max<Index>(k, 1);
}

IndexList top_k_indices(const Vec& scores, Index k) {
  const Index n = scores.size();
  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  const auto better = [&scores](Index a, Index b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // ties toward the lower original index
  };
  if (k < n) {
    std::nth_element(order.begin(), order.begin() + k, order.end(), better);
    order.resize(static_cast<std::size_t>(k));
  }
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace structkv
