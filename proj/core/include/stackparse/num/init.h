#pragma once

#include <cstddef>

#include "stackparse/num/rng.h"
#include "stackparse/num/tensor.h"

namespace stackparse::num {

// uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))) for a
// (rows x cols) matrix; fan_out = rows, fan_in = cols.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Square orthogonal matrix from Gram-Schmidt on a Gaussian draw.
Tensor orthogonal(std::size_t n, Rng& rng);

}  // namespace stackparse::num
