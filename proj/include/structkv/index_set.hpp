#pragma once

#include "structkv/common.hpp"

namespace structkv {

// Sorted set of original-sequence token positions. Strictly increasing,
// no duplicates, all < origin_len.
struct IndexSet {
  IndexList indices;
  Index origin_len = 0;

  static IndexSet from_sorted(IndexList sorted, Index origin_len);
  static IndexSet from_unsorted(IndexList any, Index origin_len);
  static IndexSet all(Index origin_len);
  static IndexSet empty(Index origin_len);

  Index size() const { return static_cast<Index>(indices.size()); }
  bool contains(Index pos) const;
  bool is_subset_of(const IndexSet& other) const;
  IndexSet union_with(const IndexSet& other) const;

  void validate() const;

  bool operator==(const IndexSet& other) const = default;
};

// Last min(w, n) positions {n - min(w, n), ..., n - 1}.
IndexSet make_window_indices(Index n, Index w);

// ceil(n * rate), minimum 1. rate must be in (0, 1].
Index budget_count(Index n, Scalar rate);

// Indices of the k largest scores; ties broken toward the lower index.
// Result sorted ascending. k >= scores.size() returns everything.
IndexList top_k_indices(const Vec& scores, Index k);

}  // namespace structkv
