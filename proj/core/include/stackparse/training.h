#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <tuple>
#include <span>
#include <utility>
#include <vector>

#include "stackparse/num/adagrad.h"
#include "stackparse/num/graph.h"
#include "stackparse/num/rng.h"

namespace stackparse {

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-sentence loss
  double dev_score = 0.0;   // accuracy or UAS
  double dev_score2 = 0.0;  // LAS for parsers, unused for taggers
};

struct TrainingReport {
  std::size_t best_epoch = 0;
  double best_dev_score = -1.0;
  double best_dev_score2 = -1.0;
  std::vector<EpochReport> epochs;
};

// Options shared by every trainer. Each epoch visits the training sentences
// in a seeded shuffled order and updates after every sentence; the returned
// model is the epoch with the best development score (ties keep the earlier
// epoch). Training ends early once the development score is perfect, since
// no later epoch could then be selected. With an empty development set the
// training set is scored instead.
struct TrainOptions {
  std::size_t epochs = 50;
  num::AdagradConfig optimizer;
  std::uint64_t seed = 1;
  // Stop after this many epochs without improvement; 0 disables.
  std::size_t patience = 0;
  std::function<void(const EpochReport&)> on_epoch;
};

// Selection key: primary score, then secondary.
inline bool improves(double score, double score2, const TrainingReport& best) {
  return score > best.best_dev_score ||
         (score == best.best_dev_score && score2 > best.best_dev_score2);
}

// Epoch loop shared by the trainers. `loss(graph, i)` builds the loss of
// training example i on a training graph; `score()` returns the (primary,
// secondary) development scores of `model` as it currently stands. `model` is
// updated in place and the best-scoring copy is returned. With
// `secondary_counts` false only the primary score decides a perfect epoch.
template <class Model, class Loss, class Score>
Model run_epochs(Model& model, std::span<num::Parameter* const> params, std::size_t examples,
                 Loss&& loss, Score&& score, const TrainOptions& options, bool secondary_counts,
                 TrainingReport* report) {
  num::Adagrad optimizer(options.optimizer);
  num::Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainingReport local;
  Model best = model;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0;
    for (std::size_t i : order) {
      num::Graph g(true, &rng);
      num::Expr l = loss(g, i);
      total += static_cast<double>(l.value().data()[0]);
      g.backward(l);
      optimizer.step(params);
    }
    EpochReport er;
    er.epoch = epoch;
    er.train_loss = examples == 0 ? 0.0 : total / static_cast<double>(examples);
    std::tie(er.dev_score, er.dev_score2) = score();
    local.epochs.push_back(er);
    if (options.on_epoch) options.on_epoch(er);
    if (improves(er.dev_score, er.dev_score2, local)) {
      local.best_epoch = epoch;
      local.best_dev_score = er.dev_score;
      local.best_dev_score2 = er.dev_score2;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (er.dev_score >= 100.0 && (!secondary_counts || er.dev_score2 >= 100.0)) break;
    if (options.patience > 0 && since_best >= options.patience) break;
  }
  if (report != nullptr) *report = std::move(local);
  return best;
}

}  // namespace stackparse
