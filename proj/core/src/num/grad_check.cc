#include "stackparse/num/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stackparse/num/rng.h"

namespace stackparse::num {
namespace {

double evaluate(const std::function<Expr(Graph&)>& loss_fn) {
  Graph g(false);
  return static_cast<double>(loss_fn(g).value()[0]);
}

}  // namespace

GradCheckResult grad_check(const std::function<Expr(Graph&)>& loss_fn,
                           std::span<Parameter* const> params, const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g(false);
    Expr loss = loss_fn(g);
    g.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  for (Parameter* p : params) p->zero_grad();

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<std::size_t> coords;
    if (p.value.size() <= options.coords_per_param) {
      for (std::size_t i = 0; i < p.value.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t s = 0; s < options.coords_per_param; ++s) {
        coords.push_back(static_cast<std::size_t>(rng.below(p.value.size())));
      }
    }
    for (std::size_t i : coords) {
      const Real saved = p.value[i];
      p.value[i] = saved + static_cast<Real>(options.epsilon);
      const double up = evaluate(loss_fn);
      p.value[i] = saved - static_cast<Real>(options.epsilon);
      const double down = evaluate(loss_fn);
      p.value[i] = saved;
      const double fd = (up - down) / (2.0 * options.epsilon);
      const double ad = static_cast<double>(analytic[k][i]);
      const double rel = std::abs(ad - fd) / std::max(1e-6, std::abs(ad) + std::abs(fd));
      ++result.coordinates_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace stackparse::num
