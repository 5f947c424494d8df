#include <benchmark/benchmark.h>

#include <limits>
#include <string>
#include <vector>

#include "stackparse/crf.h"
#include "stackparse/decode.h"
#include "stackparse/langmodel.h"
#include "stackparse/num/lstm.h"

using namespace stackparse;
using num::Real;
using num::Tensor;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  num::Rng rng(seed);
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.data()) v = static_cast<Real>(rng.uniform(-2, 2));
  return t;
}

void BM_CrfLogPartition(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor emit = random_matrix(n, 17, 1), trans = random_matrix(19, 19, 2);
  for (auto _ : state) benchmark::DoNotOptimize(crf_log_partition(emit, trans));
}
BENCHMARK(BM_CrfLogPartition)->Arg(10)->Arg(40);

void BM_Viterbi(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor emit = random_matrix(n, 17, 3), trans = random_matrix(19, 19, 4);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_decode(emit, trans));
}
BENCHMARK(BM_Viterbi)->Arg(10)->Arg(40);

void BM_Mst(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor s = random_matrix(n + 1, n + 1, 5);
  for (std::size_t i = 0; i <= n; ++i) {
    s.at(0, i) = -std::numeric_limits<Real>::infinity();
    s.at(i, i) = -std::numeric_limits<Real>::infinity();
  }
  for (auto _ : state) benchmark::DoNotOptimize(decode_mst(s));
}
BENCHMARK(BM_Mst)->Arg(10)->Arg(40);

void BM_LstmStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  num::ParameterStore store;
  num::Rng rng(6);
  const num::LstmCell cell = num::make_lstm_cell(store, "lstm", num::LstmVariant::kPeephole, dim, dim, rng);
  std::vector<Real> x(dim, Real(0.1)), h(dim, Real(0)), c(dim, Real(0));
  for (auto _ : state) benchmark::DoNotOptimize(num::lstm_step_values(cell, store, x, h, c));
}
BENCHMARK(BM_LstmStep)->Arg(100)->Arg(400);

void BM_KneserNeyScoring(benchmark::State& state) {
  num::Rng rng(7);
  std::vector<TokenSeq> corpus;
  for (int i = 0; i < 2000; ++i) {
    TokenSeq s;
    for (int t = 0; t < 12; ++t) s.push_back("w" + std::to_string(rng.below(300)));
    corpus.push_back(s);
  }
  const NgramLM lm = NgramLM::train(corpus, 5);
  for (auto _ : state) {
    for (int i = 0; i < 100; ++i) benchmark::DoNotOptimize(sentence_logprob(lm, corpus[i]));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_KneserNeyScoring);

}  // namespace

BENCHMARK_MAIN();
