#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackparse/vocab.h"

namespace stackparse {

using TokenSeq = std::vector<std::string>;

// Interpolated modified Kneser-Ney n-gram model. Sentences are padded with
// one <s> and one </s>. The highest order and n-grams starting with <s> keep
// raw counts; lower orders use continuation counts (number of distinct left
// extensions). Discounts D1, D2, D3+ per order come from the count-of-counts
// t_k of those counts: Y = t1 / (t1 + 2 t2), D_k = k - (k + 1) Y t_{k+1} / t_k,
// clamped to [0, k]. The unigram level interpolates with the uniform
// distribution over the vocabulary, which includes </s> and <unk> (unknown
// words) but not <s>.
class NgramLM {
 public:
  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";
  static constexpr const char* kUnk = "<unk>";

  NgramLM() = default;
  static NgramLM train(std::span<const TokenSeq> corpus, std::size_t order = 5);

  std::size_t order() const { return order_; }
  // Predictable types: every seen word, </s> and <unk>.
  std::vector<std::string> vocabulary() const;
  std::array<double, 3> discounts(std::size_t n) const { return discount_.at(n - 1); }

  // p(word | context); only the last order-1 context tokens matter. The
  // context may begin with <s>; unknown words score as <unk>.
  double prob(std::span<const std::string> context, const std::string& word) const;
  // Contexts (of length order-1 or shorter when starting with <s>) seen in
  // training, for normalization checks.
  std::vector<TokenSeq> contexts() const;

  void save(const std::filesystem::path& path) const;
  static NgramLM load(const std::filesystem::path& path);

 private:
  using Key = std::vector<std::uint32_t>;
  struct ContextStats {
    double total = 0;
    std::array<std::size_t, 3> n{};  // types with count 1, 2, >= 3
  };

  void finalize();
  std::uint32_t id(const std::string& word) const;
  double prob_ids(std::span<const std::uint32_t> context, std::uint32_t word) const;

  std::size_t order_ = 0;
  Vocab words_;  // 0 = <unk>, 1 = <s>, 2 = </s>
  std::vector<std::map<Key, double>> counts_;          // [n-1]: n-gram -> (adjusted) count
  std::vector<std::map<Key, ContextStats>> context_;   // [n-1]: context -> stats
  std::vector<std::array<double, 3>> discount_;
};

// Sum of log10 p over the tokens and the closing </s>.
double sentence_logprob(const NgramLM& lm, std::span<const std::string> tokens);
double perplexity(const NgramLM& lm, std::span<const TokenSeq> sentences);

struct SelectionRecord {
  std::size_t index = 0;  // position in the input
  std::string text;
  std::size_t length = 0;
  double total = 0;       // log10
  double normalized = 0;  // total / divisor
  std::vector<std::string> hits;
};

struct RankOptions {
  std::size_t min_length = 5;
  std::size_t max_length = 50;
  // Divide by token count + 1 (the </s> event); false divides by the token count.
  bool count_end_token = true;
};

// Sentences within the length bounds (inclusive), most divergent (lowest
// normalized log-likelihood) first; ties keep input order.
std::vector<SelectionRecord> rank_by_divergence(const NgramLM& lm, std::span<const TokenSeq> sentences,
                                                const RankOptions& options = {});

// Case-insensitive matching of (possibly multiword) lexicon terms against
// contiguous token runs. Returns the distinct matched terms per sentence, in
// order of first occurrence.
std::vector<std::vector<std::string>> match_lexicon(std::span<const TokenSeq> sentences,
                                                    std::span<const std::string> lexicon);

// One sentence per line, tokens separated by spaces.
std::vector<TokenSeq> read_token_corpus(const std::filesystem::path& path);
std::vector<std::string> read_lexicon(const std::filesystem::path& path);
TokenSeq split_tokens(std::string_view line);
// Tab-separated: rank, normalized, total, length, hits (comma-joined), sentence.
std::string format_selection(std::span<const SelectionRecord> records);

}  // namespace stackparse
