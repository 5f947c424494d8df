#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "stackparse/num/graph.h"
#include "stackparse/num/parameter.h"

namespace stackparse::num {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per parameter; every coordinate when the parameter
  // is at most this large.
  std::size_t coords_per_param = 12;
  std::uint64_t seed = 17;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

// Compares reverse-mode gradients with central finite differences. The loss
// builder must be deterministic (no dropout). Relative error per coordinate
// is |g_ad - g_fd| / max(1e-6, |g_ad| + |g_fd|); the floor absorbs
// finite-difference round-off on coordinates whose true gradient is zero.
GradCheckResult grad_check(const std::function<Expr(Graph&)>& loss_fn,
                           std::span<Parameter* const> params, const GradCheckOptions& options = {});

}  // namespace stackparse::num
