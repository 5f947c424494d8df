#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "stackparse/crf.h"
#include "stackparse/num/grad_check.h"
#include "stackparse/num/ops.h"

using namespace stackparse;
using num::Real;
using num::Tensor;

namespace {

struct Brute {
  double log_z;
  std::vector<std::size_t> best;
};

// Every tag sequence, scored from the definition.
Brute enumerate(const Tensor& emit, const Tensor& trans) {
  const std::size_t n = emit.rows(), T = emit.cols();
  std::vector<std::size_t> path(n, 0);
  std::vector<double> scores;
  Brute out{0, {}};
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    double s = trans.at(T, path[0]) + trans.at(path[n - 1], T + 1);
    for (std::size_t t = 0; t < n; ++t) s += emit.at(t, path[t]);
    for (std::size_t t = 1; t < n; ++t) s += trans.at(path[t - 1], path[t]);
    scores.push_back(s);
    if (s > best) {
      best = s;
      out.best = path;
    }
    std::size_t k = n;
    while (k > 0 && ++path[k - 1] == T) path[--k] = 0;
    if (k == 0) break;
  }
  double m = best, acc = 0;
  for (double s : scores) acc += std::exp(s - m);
  out.log_z = m + std::log(acc);
  return out;
}

Tensor random_matrix(std::size_t r, std::size_t c, num::Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-2, 2));
  return t;
}

}  // namespace

TEST(Crf, UniformSingleTokenLossIsLogTwo) {
  num::Graph g;
  std::vector<num::Expr> e{g.constant(Tensor::vector(2))};
  num::Expr trans = g.constant(Tensor::matrix(4, 4));
  const std::vector<std::size_t> gold{1};
  EXPECT_NEAR(crf_neg_log_likelihood(g, e, trans, gold).value()[0], std::log(2.0), 1e-12);
}

TEST(Crf, PartitionMatchesTwentySevenPaths) {
  num::Rng rng(1);
  const Tensor emit = random_matrix(3, 3, rng), trans = random_matrix(5, 5, rng);
  EXPECT_NEAR(crf_log_partition(emit, trans), enumerate(emit, trans).log_z, 1e-10);
}

TEST(Crf, PathScoreMatchesDefinition) {
  num::Rng rng(2);
  const Tensor emit = random_matrix(3, 2, rng), trans = random_matrix(4, 4, rng);
  const std::vector<std::size_t> path{1, 0, 1};
  const double want = trans.at(2, 1) + emit.at(0, 1) + trans.at(1, 0) + emit.at(1, 0) + trans.at(0, 1) +
                      emit.at(2, 1) + trans.at(1, 3);
  EXPECT_NEAR(crf_path_score(emit, trans, path), want, 1e-12);
}

TEST(Crf, CertainGoldHasZeroLoss) {
  const Real inf = std::numeric_limits<Real>::infinity();
  Tensor trans = Tensor::matrix(4, 4, -inf);
  trans.at(2, 0) = 0;  // start -> 0
  trans.at(0, 1) = 0;
  trans.at(1, 3) = 0;  // 1 -> stop
  const Tensor emit({2, 2}, std::vector<Real>{0.3, -0.1, 0.2, 0.5});
  const std::vector<std::size_t> gold{0, 1};
  EXPECT_NEAR(crf_log_partition(emit, trans), crf_path_score(emit, trans, gold), 1e-12);
}

TEST(Crf, NegLogLikelihoodMatchesEnumeration) {
  num::Rng rng(3);
  const Tensor emit = random_matrix(3, 3, rng), trans = random_matrix(5, 5, rng);
  const std::vector<std::size_t> gold{2, 0, 1};
  num::Graph g;
  std::vector<num::Expr> e;
  for (std::size_t t = 0; t < 3; ++t) {
    Tensor v = Tensor::vector(3);
    for (std::size_t k = 0; k < 3; ++k) v[k] = emit.at(t, k);
    e.push_back(g.constant(v));
  }
  const double want = enumerate(emit, trans).log_z - crf_path_score(emit, trans, gold);
  EXPECT_NEAR(crf_neg_log_likelihood(g, e, g.constant(trans), gold).value()[0], want, 1e-10);
  EXPECT_EQ(emission_matrix(e), emit);
}

TEST(Crf, GradientsMatchFiniteDifferences) {
  num::Rng rng(4);
  num::ParameterStore store;
  store.add("emit", random_matrix(3, 3, rng));
  store.add("trans", random_matrix(5, 5, rng));
  std::vector<num::Parameter*> ps{&store[0], &store[1]};
  const std::vector<std::size_t> gold{1, 1, 2};
  auto loss = [&](num::Graph& g) {
    num::Expr em = g.param(store[0]);
    std::vector<num::Expr> e;
    for (std::size_t t = 0; t < 3; ++t) e.push_back(num::row(em, t));
    return crf_neg_log_likelihood(g, e, g.param(store[1]), gold);
  };
  EXPECT_LT(num::grad_check(loss, ps).max_relative_error, 1e-6);
}

TEST(Viterbi, SingleTokenAddsStartAndStop) {
  // Tag 0: 1 + 0.2 + 0 = 1.2. Tag 1: 0 + 0.9 - 0.5 = 0.4.
  Tensor trans = Tensor::matrix(4, 4);
  trans.at(2, 0) = 1.0;
  trans.at(1, 3) = -0.5;
  const Tensor emit({1, 2}, std::vector<Real>{0.2, 0.9});
  EXPECT_EQ(viterbi_decode(emit, trans), (std::vector<std::size_t>{0}));
}

TEST(Viterbi, MatchesExhaustiveArgmax) {
  num::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor emit = random_matrix(3, 3, rng), trans = random_matrix(5, 5, rng);
    EXPECT_EQ(viterbi_decode(emit, trans), enumerate(emit, trans).best);
  }
}

TEST(Viterbi, AllZeroScoresPickLowestTags) {
  const Tensor emit = Tensor::matrix(4, 3), trans = Tensor::matrix(5, 5);
  EXPECT_EQ(viterbi_decode(emit, trans), (std::vector<std::size_t>(4, 0)));
}
