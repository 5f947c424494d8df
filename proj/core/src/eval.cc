#include "stackparse/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "stackparse/num/rng.h"

namespace stackparse {
namespace {

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

void add_sentence(ScoreReport& r, const Sentence& g, const Sentence& p, bool include_punct) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Token& a = g.tokens[i];
    const Token& b = p.tokens[i];
    if (!include_punct && a.upos == "PUNCT") continue;
    ++r.tokens;
    if (a.upos == b.upos) ++r.correct_tags;
    if (a.head == b.head) {
      ++r.correct_heads;
      if (a.deprel == b.deprel) ++r.correct_labeled;
    }
  }
}

void check_aligned(std::span<const Sentence> gold, std::span<const Sentence> predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("sentence count mismatch: " + std::to_string(gold.size()) + " gold vs " +
                                std::to_string(predicted.size()) + " predicted");
  }
  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != predicted[s].size()) {
      throw std::invalid_argument("sentence " + std::to_string(s + 1) + ": " + std::to_string(gold[s].size()) +
                                  " gold tokens vs " + std::to_string(predicted[s].size()) + " predicted");
    }
  }
}

}  // namespace

double ScoreReport::uas() const { return percent(correct_heads, tokens); }
double ScoreReport::las() const { return percent(correct_labeled, tokens); }
double ScoreReport::tag_accuracy() const { return percent(correct_tags, tokens); }

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  tokens += o.tokens;
  correct_heads += o.correct_heads;
  correct_labeled += o.correct_labeled;
  correct_tags += o.correct_tags;
  return *this;
}

ScoreReport compare(std::span<const Sentence> gold, std::span<const Sentence> predicted, bool include_punct) {
  check_aligned(gold, predicted);
  ScoreReport r;
  for (std::size_t s = 0; s < gold.size(); ++s) add_sentence(r, gold[s], predicted[s], include_punct);
  return r;
}

ScoreReport attachment_scores(std::span<const Sentence> gold, std::span<const Sentence> predicted,
                              bool include_punct) {
  return compare(gold, predicted, include_punct);
}

double tagging_accuracy(std::span<const Sentence> gold, std::span<const Sentence> predicted) {
  return compare(gold, predicted, true).tag_accuracy();
}

double relative_error_reduction(double baseline_pct, double improved_pct) {
  if (baseline_pct < 0 || baseline_pct > 100 || improved_pct < 0 || improved_pct > 100) {
    throw std::invalid_argument("scores must lie in [0, 100]");
  }
  if (baseline_pct >= 100) throw std::invalid_argument("baseline has no error to reduce");
  const double base_err = 100.0 - baseline_pct;
  return (base_err - (100.0 - improved_pct)) / base_err * 100.0;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // A relative nudge keeps decimal halves that binary cannot represent
  // exactly (x.xx5) on the upper side.
  const double scaled = std::abs(value) * scale * (1.0 + 1e-12);
  return std::copysign(std::floor(scaled + 0.5) / scale, value);
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", round_half_up(value));
  return buf;
}

Agreement inter_annotator_agreement(std::span<const Sentence> a, std::span<const Sentence> b) {
  const ScoreReport r = compare(a, b, true);
  return {r.tag_accuracy(), r.uas(), r.las()};
}

std::vector<std::pair<std::string, ScoreReport>> per_category_scores(std::span<const Sentence> gold,
                                                                     std::span<const Sentence> predicted,
                                                                     bool include_punct, bool primary_only) {
  check_aligned(gold, predicted);
  std::vector<std::pair<std::string, ScoreReport>> rows;
  ScoreReport others;
  bool any_other = false;
  auto row_for = [&](const std::string& name) -> ScoreReport& {
    for (auto& [n, r] : rows) {
      if (n == name) return r;
    }
    rows.emplace_back(name, ScoreReport{});
    return rows.back().second;
  };
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& cats = gold[s].categories;
    if (cats.empty()) {
      add_sentence(others, gold[s], predicted[s], include_punct);
      any_other = true;
      continue;
    }
    const std::size_t count = primary_only ? 1 : cats.size();
    for (std::size_t c = 0; c < count; ++c) add_sentence(row_for(cats[c]), gold[s], predicted[s], include_punct);
  }
  if (any_other) rows.emplace_back("Others", others);
  return rows;
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  if (k > n) {
    throw std::invalid_argument(std::to_string(k) + " folds exceed " + std::to_string(n) + " sentences");
  }
  const auto order = num::shuffled_indices(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t p = 0; p < n; ++p) folds[p % k].push_back(order[p]);
  return folds;
}

JackknifeResult jackknife_tags(std::span<const Sentence> treebank, const TagTrainer& trainer, std::size_t k,
                               std::uint64_t seed) {
  const auto folds = fold_partition(treebank.size(), k, seed);
  JackknifeResult out;
  out.sentences.assign(treebank.begin(), treebank.end());
  out.fold.assign(treebank.size(), 0);
  for (const Sentence& s : treebank) out.gold_tags.push_back(s.tags());
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<bool> held(treebank.size(), false);
    for (std::size_t i : folds[f]) held[i] = true;
    std::vector<Sentence> train, heldout;
    for (std::size_t i = 0; i < treebank.size(); ++i) {
      if (!held[i]) train.push_back(treebank[i]);
    }
    for (std::size_t i : folds[f]) heldout.push_back(treebank[i]);
    const auto predicted = trainer(train, heldout);
    if (predicted.size() != heldout.size()) throw std::runtime_error("tag trainer returned wrong sentence count");
    for (std::size_t j = 0; j < folds[f].size(); ++j) {
      Sentence& s = out.sentences[folds[f][j]];
      if (predicted[j].size() != s.size()) throw std::runtime_error("tag trainer returned wrong token count");
      for (std::size_t t = 0; t < s.size(); ++t) s.tokens[t].upos = predicted[j][t];
      out.fold[folds[f][j]] = f;
    }
  }
  return out;
}

CrossFoldReport cross_fold_validate(std::span<const Sentence> treebank, const ParseTrainer& trainer,
                                    std::size_t folds, double dev_fraction, std::uint64_t seed,
                                    bool include_punct) {
  if (dev_fraction < 0 || dev_fraction >= 1) throw std::invalid_argument("dev fraction must lie in [0, 1)");
  const auto parts = fold_partition(treebank.size(), folds, seed);
  CrossFoldReport out;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<bool> held(treebank.size(), false);
    for (std::size_t i : parts[f]) held[i] = true;
    std::vector<Sentence> train, dev, test;
    for (std::size_t i = 0; i < treebank.size(); ++i) {
      if (!held[i]) train.push_back(treebank[i]);
    }
    const auto n_dev = static_cast<std::size_t>(std::floor(static_cast<double>(parts[f].size()) * dev_fraction));
    for (std::size_t j = 0; j < parts[f].size(); ++j) (j < n_dev ? dev : test).push_back(treebank[parts[f][j]]);
    const auto predicted = trainer(train, dev, test);
    out.folds.push_back(compare(test, predicted, include_punct));
  }
  for (const auto& r : out.folds) {
    out.mean_uas += r.uas();
    out.mean_las += r.las();
  }
  out.mean_uas /= static_cast<double>(out.folds.size());
  out.mean_las /= static_cast<double>(out.folds.size());
  return out;
}

std::string format_scores(const ScoreReport& r) {
  return "tokens\t" + std::to_string(r.tokens) + "\nUAS\t" + format_percent(r.uas()) + "\nLAS\t" +
         format_percent(r.las()) + "\nPOS\t" + format_percent(r.tag_accuracy()) + "\n";
}

std::string format_category_table(std::span<const std::pair<std::string, ScoreReport>> rows) {
  std::size_t width = 8;
  for (const auto& [name, r] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s\n", static_cast<int>(width), "category", "tokens", "UAS", "LAS");
  out += buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %8zu %8s %8s\n", static_cast<int>(width), name.c_str(), r.tokens,
                  format_percent(r.uas()).c_str(), format_percent(r.las()).c_str());
    out += buf;
  }
  return out;
}

std::string format_category_tsv(std::span<const std::pair<std::string, ScoreReport>> rows) {
  std::string out = "category\ttokens\tUAS\tLAS\n";
  for (const auto& [name, r] : rows) {
    out += name + '\t' + std::to_string(r.tokens) + '\t' + format_percent(r.uas()) + '\t' +
           format_percent(r.las()) + '\n';
  }
  return out;
}

}  // namespace stackparse
