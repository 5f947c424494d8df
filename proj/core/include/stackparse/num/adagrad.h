#pragma once

#include <span>
#include <unordered_map>

#include "stackparse/num/parameter.h"

namespace stackparse::num {

struct AdagradConfig {
  Real learning_rate = Real(0.01);
  Real epsilon = Real(1e-8);
  Real l2_lambda = Real(1e-6);
};

// Adagrad with L2 regularization folded into the gradient:
//   g' = g + lambda * w;  acc += g'^2;  w -= lr * g' / (sqrt(acc) + eps)
// Gradients are consumed (zeroed) by step().
class Adagrad {
 public:
  explicit Adagrad(AdagradConfig config = {}) : config_(config) {}

  void step(std::span<Parameter* const> params);

  const AdagradConfig& config() const { return config_; }
  // Accumulated squared gradients for `p` (empty before its first update).
  const Tensor* accumulator(const Parameter& p) const;

 private:
  AdagradConfig config_;
  std::unordered_map<const Parameter*, Tensor> accumulators_;
};

}  // namespace stackparse::num
