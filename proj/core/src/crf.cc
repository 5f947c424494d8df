#include "stackparse/crf.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stackparse/num/ops.h"

namespace stackparse {
namespace {

using num::Real;
using num::Tensor;

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

void check_shapes(const Tensor& emissions, const Tensor& transitions) {
  const std::size_t T = emissions.cols();
  if (transitions.rows() != T + 2 || transitions.cols() != T + 2) {
    throw num::ShapeError("crf: transitions must be (T+2)x(T+2) for T=" + std::to_string(T));
  }
  if (emissions.rows() == 0) throw num::ShapeError("crf: empty sequence");
}

Real lse2(Real a, Real b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const Real m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// alpha[t][y] = log sum of scores of prefixes ending in y at t.
Tensor forward_table(const Tensor& e, const Tensor& tr) {
  const std::size_t n = e.rows(), T = e.cols();
  const CrfShape s{T};
  Tensor alpha({n, T});
  for (std::size_t y = 0; y < T; ++y) alpha.at(0, y) = tr.at(s.start(), y) + e.at(0, y);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < T; ++y) {
      Real acc = kNegInf;
      for (std::size_t p = 0; p < T; ++p) acc = lse2(acc, alpha.at(t - 1, p) + tr.at(p, y));
      alpha.at(t, y) = acc + e.at(t, y);
    }
  }
  return alpha;
}

// beta[t][y] = log sum of scores of suffixes after position t given y at t.
Tensor backward_table(const Tensor& e, const Tensor& tr) {
  const std::size_t n = e.rows(), T = e.cols();
  const CrfShape s{T};
  Tensor beta({n, T});
  for (std::size_t y = 0; y < T; ++y) beta.at(n - 1, y) = tr.at(y, s.stop());
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t y = 0; y < T; ++y) {
      Real acc = kNegInf;
      for (std::size_t q = 0; q < T; ++q) acc = lse2(acc, tr.at(y, q) + e.at(t + 1, q) + beta.at(t + 1, q));
      beta.at(t, y) = acc;
    }
  }
  return beta;
}

}  // namespace

Real crf_path_score(const Tensor& emissions, const Tensor& transitions, std::span<const std::size_t> path) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), T = emissions.cols();
  if (path.size() != n) throw num::ShapeError("crf: path length mismatch");
  const CrfShape s{T};
  Real score = transitions.at(s.start(), path[0]);
  for (std::size_t t = 0; t < n; ++t) {
    if (path[t] >= T) throw std::out_of_range("crf: tag index out of range");
    score += emissions.at(t, path[t]);
    if (t > 0) score += transitions.at(path[t - 1], path[t]);
  }
  return score + transitions.at(path[n - 1], s.stop());
}

Real crf_log_partition(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  const Tensor alpha = forward_table(emissions, transitions);
  const std::size_t n = emissions.rows(), T = emissions.cols();
  Real z = kNegInf;
  for (std::size_t y = 0; y < T; ++y) z = lse2(z, alpha.at(n - 1, y) + transitions.at(y, T + 1));
  return z;
}

std::vector<std::size_t> viterbi_decode(const Tensor& emissions, const Tensor& transitions) {
  check_shapes(emissions, transitions);
  const std::size_t n = emissions.rows(), T = emissions.cols();
  const CrfShape s{T};
  Tensor best({n, T});
  std::vector<std::size_t> back(n * T, 0);
  for (std::size_t y = 0; y < T; ++y) best.at(0, y) = transitions.at(s.start(), y) + emissions.at(0, y);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < T; ++y) {
      Real top = kNegInf;
      std::size_t arg = 0;
      bool any = false;
      for (std::size_t p = 0; p < T; ++p) {
        const Real v = best.at(t - 1, p) + transitions.at(p, y);
        if (!any || v > top) {
          top = v;
          arg = p;
          any = true;
        }
      }
      best.at(t, y) = top + emissions.at(t, y);
      back[t * T + y] = arg;
    }
  }
  Real top = kNegInf;
  std::size_t last = 0;
  for (std::size_t y = 0; y < T; ++y) {
    const Real v = best.at(n - 1, y) + transitions.at(y, s.stop());
    if (y == 0 || v > top) {
      top = v;
      last = y;
    }
  }
  std::vector<std::size_t> path(n);
  path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) path[t - 1] = back[t * T + path[t]];
  return path;
}

Tensor emission_matrix(std::span<const num::Expr> emissions) {
  if (emissions.empty()) throw num::ShapeError("crf: empty sequence");
  const std::size_t T = emissions[0].value().size();
  Tensor e({emissions.size(), T});
  for (std::size_t t = 0; t < emissions.size(); ++t) {
    const Tensor& v = emissions[t].value();
    if (v.size() != T) throw num::ShapeError("crf: ragged emissions");
    for (std::size_t y = 0; y < T; ++y) e.at(t, y) = v[y];
  }
  return e;
}

num::Expr crf_neg_log_likelihood(num::Graph& g, std::span<const num::Expr> emissions,
                                 num::Expr transitions, std::span<const std::size_t> gold) {
  Tensor e = emission_matrix(emissions);
  const Tensor& tr = transitions.value();
  check_shapes(e, tr);
  const Real log_z = crf_log_partition(e, tr);
  const Real gold_score = crf_path_score(e, tr, gold);

  std::vector<num::Expr> inputs(emissions.begin(), emissions.end());
  inputs.push_back(transitions);
  std::vector<int> emission_ids;
  for (const auto& x : emissions) emission_ids.push_back(x.id);
  std::vector<std::size_t> gold_path(gold.begin(), gold.end());

  auto backward = [emission_ids = std::move(emission_ids), tr_id = transitions.id,
                   gold_path = std::move(gold_path), e = std::move(e), log_z](num::Graph& g, int self) {
    const Real go = g.grad(self)[0];
    const Tensor& tr = g.value(tr_id);
    const std::size_t n = e.rows(), T = e.cols();
    const CrfShape s{T};
    const Tensor alpha = forward_table(e, tr);
    const Tensor beta = backward_table(e, tr);

    for (std::size_t t = 0; t < n; ++t) {
      if (!g.requires_grad(emission_ids[t])) continue;
      Tensor& ge = g.grad(emission_ids[t]);
      for (std::size_t y = 0; y < T; ++y) {
        const Real marginal = std::exp(alpha.at(t, y) + beta.at(t, y) - log_z);
        ge[y] += go * (marginal - (gold_path[t] == y ? Real(1) : Real(0)));
      }
    }
    if (!g.requires_grad(tr_id)) return;
    Tensor& gt = g.grad(tr_id);
    for (std::size_t y = 0; y < T; ++y) {
      gt.at(s.start(), y) += go * std::exp(tr.at(s.start(), y) + e.at(0, y) + beta.at(0, y) - log_z);
      gt.at(y, s.stop()) += go * std::exp(alpha.at(n - 1, y) + tr.at(y, s.stop()) - log_z);
    }
    for (std::size_t t = 1; t < n; ++t) {
      for (std::size_t p = 0; p < T; ++p) {
        for (std::size_t q = 0; q < T; ++q) {
          const Real pair = alpha.at(t - 1, p) + tr.at(p, q) + e.at(t, q) + beta.at(t, q) - log_z;
          gt.at(p, q) += go * std::exp(pair);
        }
      }
    }
    gt.at(s.start(), gold_path[0]) -= go;
    gt.at(gold_path[n - 1], s.stop()) -= go;
    for (std::size_t t = 1; t < n; ++t) gt.at(gold_path[t - 1], gold_path[t]) -= go;
  };
  return g.add(Tensor({1, 1}, log_z - gold_score), inputs, std::move(backward), "crf_nll");
}

}  // namespace stackparse
