#include "stackparse/num/init.h"

#include <cmath>

namespace stackparse::num {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  return glorot_uniform({rows, cols}, cols, rows, rng);
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(rng.uniform(-bound, bound));
  return t;
}

Tensor orthogonal(std::size_t n, Rng& rng) {
  Tensor q = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<Real>(rng.normal());
  // Modified Gram-Schmidt over rows.
  for (std::size_t r = 0; r < n; ++r) {
    auto v = q.row(r);
    for (std::size_t p = 0; p < r; ++p) {
      auto u = q.row(p);
      Real d = 0;
      for (std::size_t k = 0; k < n; ++k) d += v[k] * u[k];
      for (std::size_t k = 0; k < n; ++k) v[k] -= d * u[k];
    }
    Real norm = 0;
    for (std::size_t k = 0; k < n; ++k) norm += v[k] * v[k];
    norm = std::sqrt(norm);
    if (norm < Real(1e-12)) {
      // Degenerate draw; fall back to the unit vector.
      for (std::size_t k = 0; k < n; ++k) v[k] = k == r ? Real(1) : Real(0);
      continue;
    }
    for (std::size_t k = 0; k < n; ++k) v[k] /= norm;
  }
  return q;
}

}  // namespace stackparse::num
