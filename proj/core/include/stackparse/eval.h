#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stackparse/treebank.h"

namespace stackparse {

struct ScoreReport {
  std::size_t tokens = 0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;  // head and label
  std::size_t correct_tags = 0;

  double uas() const;
  double las() const;
  double tag_accuracy() const;
  ScoreReport& operator+=(const ScoreReport& other);
};

// Aligned token-level comparison. Length mismatches throw and name the
// offending sentence. With include_punct false, gold PUNCT tokens are skipped.
ScoreReport compare(std::span<const Sentence> gold, std::span<const Sentence> predicted,
                    bool include_punct = true);
ScoreReport attachment_scores(std::span<const Sentence> gold, std::span<const Sentence> predicted,
                              bool include_punct = true);
double tagging_accuracy(std::span<const Sentence> gold, std::span<const Sentence> predicted);

// Percentage of the baseline error removed: ((100-b) - (100-i)) / (100-b) * 100.
double relative_error_reduction(double baseline_pct, double improved_pct);
// Two decimals, halves rounded away from zero.
double round_half_up(double value, int decimals = 2);
std::string format_percent(double value);

struct Agreement {
  double tag_accuracy = 0, uas = 0, las = 0;
};
// Treats `a` as the reference.
Agreement inter_annotator_agreement(std::span<const Sentence> a, std::span<const Sentence> b);

// One row per category in order of first appearance, then "Others" for
// uncategorized sentences (if any). A sentence counts toward every category
// it carries, or only its first one with primary_only.
std::vector<std::pair<std::string, ScoreReport>> per_category_scores(std::span<const Sentence> gold,
                                                                     std::span<const Sentence> predicted,
                                                                     bool include_punct = true,
                                                                     bool primary_only = false);

// Fold f holds the sentences at positions p of a seeded shuffle with p % k == f.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed);

// Trains on `train` and returns predicted tags for every sentence of `heldout`.
using TagTrainer = std::function<std::vector<std::vector<std::string>>(std::span<const Sentence> train,
                                                                       std::span<const Sentence> heldout)>;

struct JackknifeResult {
  std::vector<Sentence> sentences;                  // upos replaced by predictions
  std::vector<std::vector<std::string>> gold_tags;  // original upos per sentence
  std::vector<std::size_t> fold;                    // fold that tagged each sentence
};

JackknifeResult jackknife_tags(std::span<const Sentence> treebank, const TagTrainer& trainer,
                               std::size_t k = 10, std::uint64_t seed = 1);

// Trains on `train` with `dev` for selection; returns parses of `test`.
using ParseTrainer = std::function<std::vector<Sentence>(
    std::span<const Sentence> train, std::span<const Sentence> dev, std::span<const Sentence> test)>;

struct CrossFoldReport {
  std::vector<ScoreReport> folds;
  double mean_uas = 0;
  double mean_las = 0;
};

// Each held-out fold is split in corpus order: the first
// floor(size * dev_fraction) sentences form the dev set, the rest the test set.
CrossFoldReport cross_fold_validate(std::span<const Sentence> treebank, const ParseTrainer& trainer,
                                    std::size_t folds = 5, double dev_fraction = 0.5,
                                    std::uint64_t seed = 1, bool include_punct = true);

// Plain-text and tab-separated renderings.
std::string format_scores(const ScoreReport& r);
std::string format_category_table(std::span<const std::pair<std::string, ScoreReport>> rows);
std::string format_category_tsv(std::span<const std::pair<std::string, ScoreReport>> rows);

}  // namespace stackparse
