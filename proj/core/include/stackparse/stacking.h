#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stackparse/keyvalue.h"
#include "stackparse/parser.h"
#include "stackparse/tagger.h"
#include "stackparse/training.h"

namespace stackparse {

// Which parameters a stacked model updates. Base feature layers (bi-LSTM and
// output projections) are fine-tuned by default, base embeddings are not.
// `freeze` lists name prefixes ("base/lstm/", "target/word_embed", ...) that
// are held fixed regardless.
struct StackingOptions {
  bool train_base_features = true;
  bool train_base_embeddings = false;
  std::vector<std::string> freeze;

  void write(KeyValues& kv) const;
  static StackingOptions read(const KeyValues& kv);
};

struct StackedTaggerConfig {
  TaggerConfig target;  // extra_dim is set from the base tagset
  StackingOptions stacking;
};

// Target tagger whose per-token input appends the base tagger's emission
// vector before windowing.
class StackedTagger {
 public:
  StackedTagger() = default;
  static StackedTagger build(TaggerModel base, const StackedTaggerConfig& config,
                             std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                             std::uint64_t seed,
                             std::vector<std::string> tagset = LabelInventory::universal().pos_tags());

  TaggerModel& base() { return base_; }
  const TaggerModel& base() const { return base_; }
  TaggerModel& target() { return target_; }
  const TaggerModel& target() const { return target_; }
  const StackingOptions& stacking() const { return options_; }

  // Windowed target inputs, one per token.
  std::vector<num::Expr> stack_inputs(num::Graph& g, std::span<const std::string> forms);
  TaggerModel::Forward forward(num::Graph& g, std::span<const std::string> forms);
  num::Expr loss(num::Graph& g, std::span<const std::string> forms, std::span<const std::size_t> gold);
  TagResult tag(std::span<const std::string> forms) const;
  TagResult tag(const Sentence& sentence) const;

  // Every parameter the optimizer updates, target first.
  std::vector<num::Parameter*> trainable_params();

  void save(const std::filesystem::path& dir) const;
  static StackedTagger load(const std::filesystem::path& dir);

 private:
  void apply_trainable_flags();

  TaggerModel base_;
  TaggerModel target_;
  StackingOptions options_;
};

struct StackedParserConfig {
  // MLP output dims and extra_dim are forced from the base parser.
  ParserConfig target = [] {
    ParserConfig c;
    c.layers = 1;
    c.hidden = 900;
    return c;
  }();
  StackingOptions stacking;
};

// Target parser whose input appends the base parser's last bi-LSTM layer
// states, whose MLP outputs add the base MLP outputs, and whose biaffine
// tensors start as copies of the base tensors.
class StackedParser {
 public:
  StackedParser() = default;
  static StackedParser build(ParserModel base, const StackedParserConfig& config,
                             std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                             std::uint64_t seed);

  ParserModel& base() { return base_; }
  const ParserModel& base() const { return base_; }
  ParserModel& target() { return target_; }
  const ParserModel& target() const { return target_; }
  const StackingOptions& stacking() const { return options_; }

  // Target inputs for positions 0..n (root first).
  std::vector<num::Expr> stack_inputs(num::Graph& g, std::span<const std::string> forms,
                                      std::span<const std::string> tags);
  ParserModel::Forward forward(num::Graph& g, std::span<const std::string> forms,
                               std::span<const std::string> tags);
  num::Tensor score_arcs(std::span<const std::string> forms, std::span<const std::string> tags) const;
  ParseResult parse(std::span<const std::string> forms, std::span<const std::string> tags,
                    Decoder decoder = Decoder::kGreedy) const;
  ParseResult parse(const Sentence& sentence, Decoder decoder = Decoder::kGreedy) const;

  std::vector<num::Parameter*> trainable_params();

  void save(const std::filesystem::path& dir) const;
  static StackedParser load(const std::filesystem::path& dir);

 private:
  void apply_trainable_flags();

  ParserModel base_;
  ParserModel target_;
  StackingOptions options_;
};

double tagging_accuracy_of(const StackedTagger& model, std::span<const Sentence> sentences);
std::pair<double, double> attachment_of(const StackedParser& model, std::span<const Sentence> sentences,
                                        Decoder decoder = Decoder::kGreedy);

StackedTagger train_stacked_tagger(const TaggerModel& base, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const StackedTaggerConfig& config,
                                   const TrainOptions& options, const PretrainedEmbeddings* pretrained = nullptr,
                                   TrainingReport* report = nullptr);

StackedParser train_stacked_parser(const ParserModel& base, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const StackedParserConfig& config,
                                   const TrainOptions& options, const PretrainedEmbeddings* pretrained = nullptr,
                                   TrainingReport* report = nullptr);

}  // namespace stackparse
