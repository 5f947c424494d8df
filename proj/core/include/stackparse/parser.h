#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stackparse/keyvalue.h"
#include "stackparse/num/graph.h"
#include "stackparse/num/lstm.h"
#include "stackparse/num/parameter.h"
#include "stackparse/training.h"
#include "stackparse/treebank.h"
#include "stackparse/vocab.h"

namespace stackparse {

struct ParserConfig {
  std::size_t word_dim = 100;
  std::size_t tag_dim = 100;
  std::size_t hidden = 400;
  std::size_t layers = 3;
  std::size_t arc_dim = 500;
  std::size_t rel_dim = 100;
  double dropout = 0.33;
  // Per-position input features appended by a stacking wrapper.
  std::size_t extra_dim = 0;

  KeyValues to_key_values() const;
  static ParserConfig from_key_values(const KeyValues& kv);
  static ParserConfig from_key_values(const KeyValues& kv, const ParserConfig& defaults);
};

enum class Decoder { kGreedy, kMst };
Decoder parse_decoder(const std::string& name);
const char* to_string(Decoder d);

struct ParseResult {
  std::vector<std::size_t> heads;
  std::vector<std::string> deprels;
  num::Tensor arc_scores;  // (n+1) x (n+1), [dependent][head]
  bool is_tree = true;
};

// Per-position outputs of the four MLP heads, root position first.
struct MlpFeatures {
  std::vector<num::Expr> arc_dep, arc_head, rel_dep, rel_head;
};

// Graph-based parser with biaffine attention. Position 0 is an artificial
// root with its own word and tag entries. Input per position: concat(frozen
// pretrained vector, trainable word vector, tag vector[, extra features]);
// coupled-input-forget bi-LSTM; leaky-ReLU MLP heads; arc scores
// [arc_dep(r_d); 1]^T U_arc arc_head(r_h); label scores per label
// [rel_dep(r_d); 1]^T U_rel[l] [rel_head(r_h); 1].
class ParserModel {
 public:
  ParserModel() = default;

  static ParserModel build(const ParserConfig& config, std::span<const Sentence> train,
                           const PretrainedEmbeddings* pretrained, std::uint64_t seed,
                           std::vector<std::string> tagset = LabelInventory::universal().pos_tags(),
                           std::vector<std::string> deprels = LabelInventory::universal().deprels());

  const ParserConfig& config() const { return config_; }
  const Vocab& deprels() const { return rels_; }
  std::size_t pretrained_dim() const { return pretrained_dim_; }
  std::size_t input_dim() const { return pretrained_dim_ + config_.word_dim + config_.tag_dim + config_.extra_dim; }

  struct Forward {
    std::vector<num::Expr> states;  // last bi-LSTM layer, n+1 positions
    MlpFeatures features;
    num::Expr arcs;                 // (n+1) x (n+1), finite
  };
  // `extra` holds one vector per position (root included); `addend` is added
  // to the MLP outputs position-wise.
  std::vector<num::Expr> embed(num::Graph& g, std::span<const std::string> forms,
                               std::span<const std::string> tags, std::span<const num::Expr> extra = {});
  Forward forward(num::Graph& g, std::span<const std::string> forms, std::span<const std::string> tags,
                  std::span<const num::Expr> extra = {}, const MlpFeatures* addend = nullptr);
  num::Expr arc_matrix(num::Graph& g, const MlpFeatures& f);
  num::Expr label_scores(num::Graph& g, const MlpFeatures& f, std::size_t dep, std::size_t head);
  // Mean over tokens of head cross-entropy plus label cross-entropy given the
  // gold head.
  num::Expr loss(num::Graph& g, const Forward& fwd, std::span<const std::size_t> heads,
                 std::span<const std::size_t> rels);
  std::vector<std::size_t> gold_rels(const Sentence& s) const;

  // Arc score values with -inf on the diagonal and in row 0.
  static num::Tensor arc_values(const num::Expr& arcs);
  ParseResult decode(num::Graph& g, const Forward& fwd, Decoder decoder);

  num::Tensor score_arcs(std::span<const std::string> forms, std::span<const std::string> tags) const;
  ParseResult parse(const Sentence& sentence, Decoder decoder = Decoder::kGreedy) const;
  ParseResult parse(std::span<const std::string> forms, std::span<const std::string> tags,
                    Decoder decoder = Decoder::kGreedy) const;

  num::ParameterStore& params() { return store_; }
  const num::ParameterStore& params() const { return store_; }
  num::Parameter& arc_tensor() { return store_[u_arc_]; }
  num::Parameter& rel_tensor() { return store_[u_rel_]; }
  // bi-LSTM and MLP heads.
  std::vector<std::string> feature_layer_names() const;
  // trainable word and tag embeddings.
  std::vector<std::string> input_layer_names() const;

  void save(const std::filesystem::path& dir) const;
  static ParserModel load(const std::filesystem::path& dir);
  // Vocabularies and config only; parameters zero until assigned.
  void save_structure(const std::filesystem::path& dir) const;
  static ParserModel load_structure(const std::filesystem::path& dir);

 private:
  struct Mlp {
    num::ParamId w = 0, b = 0;
  };
  void create_parameters(std::uint64_t seed);
  num::Expr apply(num::Graph& g, const Mlp& mlp, num::Expr x);
  std::size_t word_index(const std::string& form) const;
  std::size_t pretrained_index(const std::string& form) const;

  ParserConfig config_;
  Vocab words_;       // 0 = unknown, 1 = root
  Vocab tags_;        // 0 = unknown, 1 = root
  Vocab pretrained_;  // 0 = unknown / root
  Vocab rels_;
  std::size_t pretrained_dim_ = 0;

  num::ParameterStore store_;
  num::ParamId pretrained_table_ = 0, word_table_ = 0, tag_table_ = 0;
  std::vector<num::BiLstmLayer> lstm_;
  Mlp arc_dep_, arc_head_, rel_dep_, rel_head_;
  num::ParamId u_arc_ = 0, u_rel_ = 0;
};

// UAS and LAS (percent, punctuation included) of greedy parses using the
// sentences' own tags.
std::pair<double, double> attachment_of(const ParserModel& model, std::span<const Sentence> sentences,
                                        Decoder decoder = Decoder::kGreedy);

ParserModel train_parser(std::span<const Sentence> train, std::span<const Sentence> dev,
                         const ParserConfig& config, const TrainOptions& options,
                         const PretrainedEmbeddings* pretrained = nullptr, TrainingReport* report = nullptr);

// Copies a parse into a sentence (heads and labels replaced).
Sentence with_parse(Sentence sentence, const ParseResult& result);

}  // namespace stackparse
