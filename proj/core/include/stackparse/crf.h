#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stackparse/num/graph.h"
#include "stackparse/num/tensor.h"

namespace stackparse {

// Linear-chain CRF over T tags. Transitions are a (T+2) x (T+2) matrix
// indexed [from][to]; row/column T is the start state and T+1 the stop
// state. Emissions are (n x T). A path y scores
//   trans[start][y1] + sum_t emit[t][y_t] + sum_t trans[y_{t-1}][y_t] + trans[y_n][stop].
// Plain-value entry points accept -inf scores.
struct CrfShape {
  std::size_t tags;
  std::size_t start() const { return tags; }
  std::size_t stop() const { return tags + 1; }
};

num::Real crf_path_score(const num::Tensor& emissions, const num::Tensor& transitions,
                         std::span<const std::size_t> path);

// log Z by the forward algorithm in log space.
num::Real crf_log_partition(const num::Tensor& emissions, const num::Tensor& transitions);

// Exact best path; ties go to the lowest tag index.
std::vector<std::size_t> viterbi_decode(const num::Tensor& emissions, const num::Tensor& transitions);

// -(score(gold) - log Z) as a graph node. `emissions` holds one (T, 1) vector
// per token.
num::Expr crf_neg_log_likelihood(num::Graph& g, std::span<const num::Expr> emissions,
                                 num::Expr transitions, std::span<const std::size_t> gold);

// Stacks per-token emission vectors into an (n x T) tensor.
num::Tensor emission_matrix(std::span<const num::Expr> emissions);

}  // namespace stackparse
