#include "stackparse/stacking.h"

#include <algorithm>
#include <stdexcept>

#include "stackparse/crf.h"
#include "stackparse/num/serialize.h"

namespace stackparse {

using num::Expr;
using num::Graph;
using num::Parameter;
using num::Tensor;

namespace {

bool contains(const std::vector<std::string>& names, const std::string& name) {
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool frozen(const StackingOptions& o, const std::string& qualified) {
  for (const auto& prefix : o.freeze) {
    if (qualified.starts_with(prefix)) return true;
  }
  return false;
}

template <class Model>
void set_flags(Model& base, Model& target, const StackingOptions& o, const std::vector<std::string>& unused_base) {
  const auto features = base.feature_layer_names();
  const auto inputs = base.input_layer_names();
  for (Parameter& p : base.params().all()) {
    bool on = false;
    if (contains(features, p.name)) on = o.train_base_features;
    if (contains(inputs, p.name)) on = o.train_base_embeddings;
    if (contains(unused_base, p.name)) on = false;
    p.trainable = on && !frozen(o, "base/" + p.name);
  }
  for (Parameter& p : target.params().all()) {
    p.trainable = p.name != "pretrained" && !frozen(o, "target/" + p.name);
  }
}

template <class Model>
std::vector<Parameter*> collect(Model& base, Model& target) {
  std::vector<Parameter*> out;
  for (Parameter& p : target.params().all()) {
    if (p.trainable) out.push_back(&p);
  }
  for (Parameter& p : base.params().all()) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

void save_stacked(const std::filesystem::path& dir, const StackingOptions& o, const std::string& kind,
                  const num::ParameterStore& base, const num::ParameterStore& target) {
  std::filesystem::create_directories(dir);
  KeyValues kv{{"kind", kind}};
  o.write(kv);
  write_key_values(dir / "stacking.cfg", kv);
  const num::ParamSection sections[] = {{"base/", &base}, {"target/", &target}};
  num::save_parameters(dir / "params", sections);
}

void check_kind(const KeyValues& kv, const std::string& kind, const std::filesystem::path& dir) {
  if (get_string(kv, "kind", "") != kind) {
    throw num::FormatError(dir.string() + " does not hold a " + kind + " model");
  }
}

}  // namespace

void StackingOptions::write(KeyValues& kv) const {
  kv["train_base_features"] = train_base_features ? "true" : "false";
  kv["train_base_embeddings"] = train_base_embeddings ? "true" : "false";
  kv["freeze"] = join(freeze);
}

StackingOptions StackingOptions::read(const KeyValues& kv) {
  StackingOptions o;
  o.train_base_features = get_bool(kv, "train_base_features", o.train_base_features);
  o.train_base_embeddings = get_bool(kv, "train_base_embeddings", o.train_base_embeddings);
  o.freeze = split_list(get_string(kv, "freeze", ""));
  return o;
}

// ---- tagger ----

StackedTagger StackedTagger::build(TaggerModel base, const StackedTaggerConfig& config,
                                   std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                                   std::uint64_t seed, std::vector<std::string> tagset) {
  StackedTagger s;
  TaggerConfig target = config.target;
  target.extra_dim = base.tagset().size();
  s.base_ = std::move(base);
  s.target_ = TaggerModel::build(target, std::move(tagset), train, pretrained, seed);
  s.options_ = config.stacking;
  s.apply_trainable_flags();
  return s;
}

void StackedTagger::apply_trainable_flags() { set_flags(base_, target_, options_, {"crf/transitions"}); }

std::vector<Expr> StackedTagger::stack_inputs(Graph& g, std::span<const std::string> forms) {
  const auto base = base_.forward(g, forms);
  return target_.encode_tokens(g, forms, base.emissions);
}

TaggerModel::Forward StackedTagger::forward(Graph& g, std::span<const std::string> forms) {
  const auto base = base_.forward(g, forms);
  return target_.forward(g, forms, base.emissions);
}

Expr StackedTagger::loss(Graph& g, std::span<const std::string> forms, std::span<const std::size_t> gold) {
  return target_.loss(g, forward(g, forms), gold);
}

TagResult StackedTagger::tag(std::span<const std::string> forms) const {
  // Inference graphs only read parameter values.
  auto& self = const_cast<StackedTagger&>(*this);
  Graph g(false);
  const auto fwd = self.forward(g, forms);
  const auto path =
      viterbi_decode(emission_matrix(fwd.emissions), target_.transitions().value);
  TagResult r;
  for (std::size_t t = 0; t < forms.size(); ++t) {
    r.tags.push_back(target_.tagset()[path[t]]);
    auto e = fwd.emissions[t].value().data();
    r.emissions.emplace_back(e.begin(), e.end());
    auto h = fwd.hidden[t].value().data();
    r.hidden.emplace_back(h.begin(), h.end());
  }
  return r;
}

TagResult StackedTagger::tag(const Sentence& sentence) const {
  const auto forms = sentence.forms();
  return tag(forms);
}

std::vector<Parameter*> StackedTagger::trainable_params() { return collect(base_, target_); }

void StackedTagger::save(const std::filesystem::path& dir) const {
  base_.save_structure(dir / "base");
  target_.save_structure(dir / "target");
  save_stacked(dir, options_, "stacked-tagger", base_.params(), target_.params());
}

StackedTagger StackedTagger::load(const std::filesystem::path& dir) {
  const KeyValues kv = read_key_values(dir / "stacking.cfg");
  check_kind(kv, "stacked-tagger", dir);
  StackedTagger s;
  s.options_ = StackingOptions::read(kv);
  s.base_ = TaggerModel::load_structure(dir / "base");
  s.target_ = TaggerModel::load_structure(dir / "target");
  const auto tensors = num::read_parameters(dir / "params");
  num::assign_parameters(s.base_.params(), tensors, "base/");
  num::assign_parameters(s.target_.params(), tensors, "target/");
  s.apply_trainable_flags();
  return s;
}

double tagging_accuracy_of(const StackedTagger& model, std::span<const Sentence> sentences) {
  std::size_t total = 0, correct = 0;
  for (const Sentence& s : sentences) {
    const TagResult r = model.tag(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      ++total;
      if (r.tags[i] == s.tokens[i].upos) ++correct;
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

StackedTagger train_stacked_tagger(const TaggerModel& base, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const StackedTaggerConfig& config,
                                   const TrainOptions& options, const PretrainedEmbeddings* pretrained,
                                   TrainingReport* report) {
  if (train.empty()) throw std::invalid_argument("train_stacked_tagger: empty treebank");
  StackedTagger model = StackedTagger::build(base, config, train, pretrained, options.seed);
  std::vector<std::vector<std::size_t>> gold;
  for (const Sentence& s : train) gold.push_back(model.target().gold_indices(s));
  const auto params = model.trainable_params();
  const std::span<const Sentence> selection = dev.empty() ? train : dev;
  return run_epochs(
      model, params, train.size(),
      [&](Graph& g, std::size_t i) {
        const auto forms = train[i].forms();
        return model.loss(g, forms, gold[i]);
      },
      [&] { return std::pair{tagging_accuracy_of(model, selection), 0.0}; }, options, false, report);
}

// ---- parser ----

StackedParser StackedParser::build(ParserModel base, const StackedParserConfig& config,
                                   std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                                   std::uint64_t seed) {
  StackedParser s;
  ParserConfig target = config.target;
  target.extra_dim = 2 * base.config().hidden;
  target.arc_dim = base.config().arc_dim;
  target.rel_dim = base.config().rel_dim;
  s.target_ = ParserModel::build(target, train, pretrained, seed, LabelInventory::universal().pos_tags(),
                                 base.deprels().items());
  s.base_ = std::move(base);
  s.target_.arc_tensor().value = s.base_.arc_tensor().value;
  s.target_.rel_tensor().value = s.base_.rel_tensor().value;
  s.options_ = config.stacking;
  s.apply_trainable_flags();
  return s;
}

void StackedParser::apply_trainable_flags() {
  set_flags(base_, target_, options_, {"biaffine/arc", "biaffine/rel"});
}

std::vector<Expr> StackedParser::stack_inputs(Graph& g, std::span<const std::string> forms,
                                              std::span<const std::string> tags) {
  const auto base = base_.forward(g, forms, tags);
  return target_.embed(g, forms, tags, base.states);
}

ParserModel::Forward StackedParser::forward(Graph& g, std::span<const std::string> forms,
                                            std::span<const std::string> tags) {
  const auto base = base_.forward(g, forms, tags);
  return target_.forward(g, forms, tags, base.states, &base.features);
}

Tensor StackedParser::score_arcs(std::span<const std::string> forms, std::span<const std::string> tags) const {
  auto& self = const_cast<StackedParser&>(*this);
  Graph g(false);
  return ParserModel::arc_values(self.forward(g, forms, tags).arcs);
}

ParseResult StackedParser::parse(std::span<const std::string> forms, std::span<const std::string> tags,
                                 Decoder decoder) const {
  // Inference graphs only read parameter values.
  auto& self = const_cast<StackedParser&>(*this);
  Graph g(false);
  const auto fwd = self.forward(g, forms, tags);
  return self.target_.decode(g, fwd, decoder);
}

ParseResult StackedParser::parse(const Sentence& sentence, Decoder decoder) const {
  const auto forms = sentence.forms();
  const auto tags = sentence.tags();
  return parse(forms, tags, decoder);
}

std::vector<Parameter*> StackedParser::trainable_params() { return collect(base_, target_); }

void StackedParser::save(const std::filesystem::path& dir) const {
  base_.save_structure(dir / "base");
  target_.save_structure(dir / "target");
  save_stacked(dir, options_, "stacked-parser", base_.params(), target_.params());
}

StackedParser StackedParser::load(const std::filesystem::path& dir) {
  const KeyValues kv = read_key_values(dir / "stacking.cfg");
  check_kind(kv, "stacked-parser", dir);
  StackedParser s;
  s.options_ = StackingOptions::read(kv);
  s.base_ = ParserModel::load_structure(dir / "base");
  s.target_ = ParserModel::load_structure(dir / "target");
  const auto tensors = num::read_parameters(dir / "params");
  num::assign_parameters(s.base_.params(), tensors, "base/");
  num::assign_parameters(s.target_.params(), tensors, "target/");
  s.apply_trainable_flags();
  return s;
}

std::pair<double, double> attachment_of(const StackedParser& model, std::span<const Sentence> sentences,
                                        Decoder decoder) {
  std::size_t total = 0, uas = 0, las = 0;
  for (const Sentence& s : sentences) {
    const ParseResult r = model.parse(s, decoder);
    for (std::size_t i = 0; i < s.size(); ++i) {
      ++total;
      if (r.heads[i] == s.tokens[i].head) {
        ++uas;
        if (r.deprels[i] == s.tokens[i].deprel) ++las;
      }
    }
  }
  if (total == 0) return {0.0, 0.0};
  return {100.0 * static_cast<double>(uas) / static_cast<double>(total),
          100.0 * static_cast<double>(las) / static_cast<double>(total)};
}

StackedParser train_stacked_parser(const ParserModel& base, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const StackedParserConfig& config,
                                   const TrainOptions& options, const PretrainedEmbeddings* pretrained,
                                   TrainingReport* report) {
  if (train.empty()) throw std::invalid_argument("train_stacked_parser: empty treebank");
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!is_tree(train[i].heads())) {
      throw std::invalid_argument("training sentence " + std::to_string(i + 1) +
                                  " does not carry a valid dependency tree");
    }
  }
  StackedParser model = StackedParser::build(base, config, train, pretrained, options.seed);
  std::vector<std::vector<std::size_t>> heads, rels;
  for (const Sentence& s : train) {
    heads.push_back(s.heads());
    rels.push_back(model.target().gold_rels(s));
  }
  const auto params = model.trainable_params();
  const std::span<const Sentence> selection = dev.empty() ? train : dev;
  return run_epochs(
      model, params, train.size(),
      [&](Graph& g, std::size_t i) {
        const auto forms = train[i].forms();
        const auto tags = train[i].tags();
        return model.target().loss(g, model.forward(g, forms, tags), heads[i], rels[i]);
      },
      [&] { return attachment_of(model, selection); }, options, true, report);
}

}  // namespace stackparse
