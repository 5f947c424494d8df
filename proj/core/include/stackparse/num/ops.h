#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "stackparse/num/graph.h"

namespace stackparse::num {

// Elementwise arithmetic; operands must have equal sizes.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr cmul(Expr a, Expr b);
Expr scale(Expr a, Real c);
Expr sum(std::span<const Expr> xs);

// b + sum_i W_i x_i for matrices W_i (m x k_i) and vectors x_i (k_i).
Expr affine(Expr bias, std::span<const std::pair<Expr, Expr>> terms);
Expr affine(Expr bias, Expr w, Expr x);
Expr matvec(Expr w, Expr x);

Expr tanh(Expr x);
Expr sigmoid(Expr x);
Expr leaky_relu(Expr x, Real slope = Real(0.1));
Expr one_minus(Expr x);

Expr concat(std::span<const Expr> xs);
Expr slice(Expr x, std::size_t start, std::size_t length);
Expr pick(Expr x, std::size_t index);
Expr dot(Expr a, Expr b);

Expr softmax(Expr x);
// -log softmax(x)[index]; `excluded` (if >= 0) is left out of the partition.
Expr pick_neg_log_softmax(Expr x, std::size_t index, std::ptrdiff_t excluded = -1);

// Stacks vectors (each (d, 1)) as matrix columns (d x m) or rows (m x d).
Expr columns(std::span<const Expr> xs);
Expr rows(std::span<const Expr> xs);
Expr row(Expr m, std::size_t r);
Expr matmul(Expr a, Expr b);
// a * transpose(b).
Expr matmul_nt(Expr a, Expr b);

// u^T W v for a matrix W (a x b).
Expr bilinear(Expr u, Expr w, Expr v);
// One score per label: u^T W[l] v for W of shape (labels, a, b).
Expr bilinear_labels(Expr u, Expr w, Expr v);

// Inverted dropout: identity when rate == 0 or the graph is not training.
Expr dropout(Expr x, Real rate);

// Convex combination sum_i softmax(scores)_i * items_i.
Expr attention_pool(Expr scores, std::span<const Expr> items);

// Plain numeric helpers shared by the CRF and the tests.
Real log_sum_exp(std::span<const Real> xs);

}  // namespace stackparse::num
