#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackparse/keyvalue.h"
#include "stackparse/num/graph.h"
#include "stackparse/num/lstm.h"
#include "stackparse/num/parameter.h"
#include "stackparse/training.h"
#include "stackparse/treebank.h"
#include "stackparse/vocab.h"

namespace stackparse {

struct TaggerConfig {
  std::size_t word_dim = 50;  // trainable word embeddings
  std::size_t char_dim = 30;
  std::size_t char_attention_dim = 30;
  std::size_t window = 1;  // context radius w
  std::size_t hidden = 300;
  std::size_t layers = 1;
  double dropout = 0.15;
  // Per-token features appended by a stacking wrapper (0 for a base tagger).
  std::size_t extra_dim = 0;

  KeyValues to_key_values() const;
  static TaggerConfig from_key_values(const KeyValues& kv);
  static TaggerConfig from_key_values(const KeyValues& kv, const TaggerConfig& defaults);
};

struct TagResult {
  std::vector<std::string> tags;
  std::vector<std::vector<num::Real>> emissions;
  std::vector<std::vector<num::Real>> hidden;
};

// Bi-LSTM-CRF tagger. Input layer: per token concat(pretrained word vector,
// trainable word vector, character-attention vector[, extra features]), then
// windowed concatenation over positions t-w..t+w with a learned padding
// vector. Feature layer: peephole bi-LSTM. Output layer: linear emissions and
// a CRF with start/stop transitions.
class TaggerModel {
 public:
  TaggerModel() = default;

  static TaggerModel build(const TaggerConfig& config, std::vector<std::string> tagset,
                           std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                           std::uint64_t seed);

  const TaggerConfig& config() const { return config_; }
  const Vocab& tagset() const { return tags_; }
  std::size_t pretrained_dim() const { return pretrained_dim_; }
  std::size_t token_dim() const;
  std::size_t input_dim() const { return (2 * config_.window + 1) * token_dim(); }

  num::Expr char_attention(num::Graph& g, std::string_view word);
  std::vector<num::Expr> encode_tokens(num::Graph& g, std::span<const std::string> forms,
                                       std::span<const num::Expr> extra = {});

  struct Forward {
    std::vector<num::Expr> hidden;
    std::vector<num::Expr> emissions;
  };
  Forward forward(num::Graph& g, std::span<const std::string> forms,
                  std::span<const num::Expr> extra = {});
  num::Expr loss(num::Graph& g, const Forward& fwd, std::span<const std::size_t> gold);

  // Tag indices of a gold sentence; throws for tags outside the tagset.
  std::vector<std::size_t> gold_indices(const Sentence& sentence) const;

  // Inference; safe to call concurrently.
  TagResult tag(std::span<const std::string> forms) const;
  TagResult tag(const Sentence& sentence) const;

  num::ParameterStore& params() { return store_; }
  const num::ParameterStore& params() const { return store_; }
  num::Parameter& transitions() { return store_[transitions_]; }
  const num::Parameter& transitions() const { return store_[transitions_]; }
  num::Parameter& emission_weight() { return store_[emission_w_]; }
  num::Parameter& emission_bias() { return store_[emission_b_]; }

  // bi-LSTM and emission projection.
  std::vector<std::string> feature_layer_names() const;
  // trainable embeddings, character attention and padding.
  std::vector<std::string> input_layer_names() const;

  void save(const std::filesystem::path& dir) const;
  static TaggerModel load(const std::filesystem::path& dir);
  // Vocabularies and config only; parameters zero until assigned.
  void save_structure(const std::filesystem::path& dir) const;
  static TaggerModel load_structure(const std::filesystem::path& dir);

 private:
  void create_parameters(std::uint64_t seed);
  std::size_t word_index(std::string_view form) const;
  std::size_t pretrained_index(std::string_view form) const;

  TaggerConfig config_;
  Vocab tags_;
  Vocab words_;       // 0 = unknown
  Vocab chars_;       // 0 = unknown
  Vocab pretrained_;  // 0 = unknown; empty when no pretrained vectors
  std::size_t pretrained_dim_ = 0;

  num::ParameterStore store_;
  num::ParamId pretrained_table_ = 0;
  num::ParamId word_table_ = 0;
  num::ParamId char_table_ = 0;
  num::ParamId att_w_ = 0, att_b_ = 0, att_query_ = 0;
  num::ParamId empty_word_ = 0;
  num::ParamId pad_ = 0;
  std::vector<num::BiLstmLayer> lstm_;
  num::ParamId emission_w_ = 0, emission_b_ = 0;
  num::ParamId transitions_ = 0;
};

double tagging_accuracy_of(const TaggerModel& model, std::span<const Sentence> sentences);

TaggerModel train_tagger(std::span<const Sentence> train, std::span<const Sentence> dev,
                         const TaggerConfig& config, const TrainOptions& options,
                         const PretrainedEmbeddings* pretrained = nullptr,
                         TrainingReport* report = nullptr,
                         std::vector<std::string> tagset = LabelInventory::universal().pos_tags());

}  // namespace stackparse
