#include "stackparse/num/adagrad.h"

#include <cmath>

namespace stackparse::num {

void Adagrad::step(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient for " + p->name);
  }
  for (Parameter* p : params) {
    if (!p->trainable) {
      p->zero_grad();
      continue;
    }
    auto [it, inserted] = accumulators_.try_emplace(p, p->value.shape());
    Tensor& acc = it->second;
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Real gi = g[i] + config_.l2_lambda * w[i];
      if (gi == 0) continue;
      acc[i] += gi * gi;
      w[i] -= config_.learning_rate * gi / (std::sqrt(acc[i]) + config_.epsilon);
    }
    p->zero_grad();
  }
}

const Tensor* Adagrad::accumulator(const Parameter& p) const {
  auto it = accumulators_.find(&p);
  return it == accumulators_.end() ? nullptr : &it->second;
}

}  // namespace stackparse::num
