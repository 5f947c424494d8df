#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stackparse/num/tensor.h"

namespace stackparse {

// Arc score matrices are (n+1) x (n+1), indexed [dependent][head]; node 0 is
// the root. Row 0 and the diagonal are ignored (conventionally -inf). Heads
// are returned per token: heads[d-1] is the head of token d.

struct GreedyDecode {
  std::vector<std::size_t> heads;
  // False when the per-token argmaxes contain a cycle.
  bool is_tree = true;
};

// Row-wise argmax over candidate heads, ties to the smaller head index. The
// result may contain cycles; `is_tree` reports them.
GreedyDecode decode_greedy(const num::Tensor& scores);

// Maximum-scoring arborescence rooted at 0 (Chu-Liu/Edmonds). With
// `single_root` the root receives exactly one child: every candidate child is
// tried and the best constrained tree kept (ties to the smaller index).
std::vector<std::size_t> decode_mst(const num::Tensor& scores, bool single_root = true);

// Sum of scores[d][heads[d-1]].
double tree_score(const num::Tensor& scores, std::span<const std::size_t> heads);

}  // namespace stackparse
