#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <unistd.h>

#include "stackparse/num/adagrad.h"
#include "stackparse/num/grad_check.h"
#include "stackparse/num/serialize.h"
#include "stackparse/stacking.h"
#include "support/desk.h"
#include "support/synthetic.h"

using namespace stackparse;
using num::Real;
using num::Tensor;

namespace {

PretrainedEmbeddings embeddings(std::size_t dim) {
  PretrainedEmbeddings e;
  e.words = Vocab({"the", "a", "cat", "dog"});
  e.vectors = Tensor::matrix(4, dim, 0.05);
  return e;
}

void randomize(num::ParameterStore& store, std::uint64_t seed, double scale = 0.5) {
  num::Rng rng(seed);
  for (auto& p : store.all()) {
    for (auto& v : p.value.data()) v = static_cast<Real>(rng.uniform(-scale, scale));
  }
}

std::vector<Real> values(const num::Expr& e) {
  auto d = e.value().data();
  return {d.begin(), d.end()};
}

std::set<const num::Parameter*> addresses(std::vector<num::Parameter*> ps) { return {ps.begin(), ps.end()}; }

const num::Parameter& named(const num::ParameterStore& s, const std::string& name) {
  const auto* p = s.find(name);
  if (p == nullptr) throw std::runtime_error("no parameter " + name);
  return *p;
}

Sentence three_tokens() {
  Sentence s;
  s.tokens = {Token{1, "the", "DET", 2, "det"}, Token{2, "cat", "NOUN", 3, "nsubj"},
              Token{3, "runs", "VERB", 0, "root"}};
  return s;
}

TaggerModel desk_base_tagger(std::span<const Sentence> train) {
  return TaggerModel::build(fixtures::desk_tagger(), LabelInventory::universal().pos_tags(), train, nullptr, 11);
}

ParserModel desk_base_parser(std::span<const Sentence> train) {
  return ParserModel::build(fixtures::desk_parser(), train, nullptr, 12);
}

StackedTaggerConfig desk_stacked_tagger() {
  StackedTaggerConfig c;
  c.target = fixtures::desk_tagger();
  return c;
}

}  // namespace

TEST(StackedTaggerDims, SeventeenBaseTagsAndOneHundredThirtyTokenDims) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 3, 1);
  const TaggerModel base = desk_base_tagger(tb);
  ASSERT_EQ(base.tagset().size(), 17u);
  StackedTaggerConfig c = desk_stacked_tagger();
  c.target.word_dim = 50;
  c.target.char_dim = 30;
  c.target.window = 1;
  const auto emb = embeddings(50);
  StackedTagger st = StackedTagger::build(base, c, tb, &emb, 2);
  EXPECT_EQ(st.target().input_dim(), 441u);
  num::Graph g;
  const auto forms = tb[0].forms();
  const auto in = st.stack_inputs(g, forms);
  ASSERT_EQ(in.size(), forms.size());
  for (const auto& x : in) EXPECT_EQ(x.size(), 441u);
}

TEST(StackedTaggerDims, RandomConfigurations) {
  num::Rng rng(3);
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 2);
  const LabelInventory inventory = LabelInventory::universal();
  for (int trial = 0; trial < 6; ++trial) {
    TaggerConfig bc = fixtures::desk_tagger();
    bc.hidden = 2 + rng.below(6);
    const std::size_t ntags = 2 + rng.below(5);
    const auto& all = inventory.pos_tags();
    std::vector<std::string> tagset(all.begin(), all.begin() + ntags);
    const TaggerModel base = TaggerModel::build(bc, tagset, tb, nullptr, 1);
    StackedTaggerConfig c = desk_stacked_tagger();
    c.target.word_dim = 1 + rng.below(9);
    c.target.char_dim = 1 + rng.below(9);
    c.target.window = rng.below(3);
    c.target.hidden = 2 + rng.below(6);
    StackedTagger st = StackedTagger::build(base, c, tb, nullptr, 2);
    const std::size_t want = (2 * c.target.window + 1) * (c.target.word_dim + c.target.char_dim + ntags);
    EXPECT_EQ(st.target().input_dim(), want);
    num::Graph g;
    const auto forms = tb[0].forms();
    EXPECT_EQ(st.stack_inputs(g, forms)[0].size(), want);
  }
}

TEST(StackedTagger, InputsArePure) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 3);
  StackedTagger st = StackedTagger::build(desk_base_tagger(tb), desk_stacked_tagger(), tb, nullptr, 2);
  const auto forms = tb[0].forms();
  num::Graph g1, g2;
  const auto a = st.stack_inputs(g1, forms);
  const auto b = st.stack_inputs(g2, forms);
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_EQ(values(a[t]), values(b[t]));
}

TEST(StackedTagger, ZeroedBaseProjectionGivesConstantFeatures) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 4, 4);
  TaggerModel base = desk_base_tagger(tb);
  randomize(base.params(), 5);
  base.emission_weight().value.fill(0);
  const Tensor bias = base.emission_bias().value;
  StackedTaggerConfig c = desk_stacked_tagger();
  c.target.window = 0;
  StackedTagger st = StackedTagger::build(base, c, tb, nullptr, 2);
  const std::size_t own = st.target().token_dim() - bias.size();
  for (const Sentence& s : tb) {
    num::Graph g;
    const auto forms = s.forms();
    for (const auto& x : st.stack_inputs(g, forms)) {
      const auto v = values(x);
      for (std::size_t k = 0; k < bias.size(); ++k) EXPECT_EQ(v[own + k], bias[k]);
    }
  }
}

TEST(StackedTagger, TrainableSetContainsBaseFeatureLayers) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 5);
  StackedTagger st = StackedTagger::build(desk_base_tagger(tb), desk_stacked_tagger(), tb, nullptr, 2);
  const auto trainable = addresses(st.trainable_params());
  for (const auto& name : st.base().feature_layer_names()) {
    EXPECT_TRUE(trainable.count(&named(st.base().params(), name))) << name;
  }
  std::size_t target_count = 0;
  for (auto& p : st.target().params().all()) target_count += trainable.count(&p);
  EXPECT_GT(target_count, 0u);
  EXPECT_GT(trainable.size(), st.base().feature_layer_names().size());
  // Base embeddings and the unused base CRF stay fixed by default.
  EXPECT_FALSE(trainable.count(&named(st.base().params(), "word_embed")));
  EXPECT_FALSE(trainable.count(&named(st.base().params(), "crf/transitions")));
}

TEST(StackedTagger, BaseEmbeddingsCanBeTrained) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 5);
  StackedTaggerConfig c = desk_stacked_tagger();
  c.stacking.train_base_embeddings = true;
  StackedTagger st = StackedTagger::build(desk_base_tagger(tb), c, tb, nullptr, 2);
  EXPECT_TRUE(addresses(st.trainable_params()).count(&named(st.base().params(), "word_embed")));
}

TEST(StackedTagger, GradientFlowsIntoBase) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 6);
  StackedTagger st = StackedTagger::build(desk_base_tagger(tb), desk_stacked_tagger(), tb, nullptr, 2);
  const num::ParameterStore before = st.base().params();
  const auto params = st.trainable_params();
  num::Graph g(true);
  const auto forms = tb[0].forms();
  num::Expr loss = st.loss(g, forms, st.target().gold_indices(tb[0]));
  ASSERT_GT(loss.value()[0], 0);
  g.backward(loss);
  num::Adagrad(num::AdagradConfig{0.01, 1e-8, 0}).step(params);
  bool changed = false;
  for (const auto& name : st.base().feature_layer_names()) {
    changed = changed || named(st.base().params(), name).value != named(before, name).value;
  }
  EXPECT_TRUE(changed);
  EXPECT_EQ(named(st.base().params(), "word_embed").value, named(before, "word_embed").value);
}

TEST(StackedTagger, GradientCheckOnThreeTokens) {
  const std::vector<Sentence> tb{three_tokens()};
  TaggerConfig bc = fixtures::desk_tagger();
  bc.word_dim = bc.char_dim = bc.char_attention_dim = 2;
  bc.hidden = 3;
  TaggerModel base = TaggerModel::build(bc, {"DET", "NOUN", "VERB"}, tb, nullptr, 1);
  StackedTaggerConfig c;
  c.target = bc;
  c.stacking.train_base_embeddings = true;
  StackedTagger st = StackedTagger::build(base, c, tb, nullptr, 2, {"DET", "NOUN", "VERB"});
  randomize(st.base().params(), 3);
  randomize(st.target().params(), 4);
  const auto params = st.trainable_params();
  const auto forms = tb[0].forms();
  const auto gold = st.target().gold_indices(tb[0]);
  auto loss = [&](num::Graph& g) { return st.loss(g, forms, gold); };
  const auto r = num::grad_check(loss, params, {1e-5, 6, 17});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(StackedTagger, OverfitsCopyOfBaseSentence) {
  const auto source = fixtures::generate_treebank(fixtures::Grammar::kSource, 6, 7);
  const TaggerModel base = train_tagger(source, source, fixtures::desk_tagger(), fixtures::desk_training(20));
  const std::vector<Sentence> target{source[0]};
  const StackedTagger st =
      train_stacked_tagger(base, target, target, desk_stacked_tagger(), fixtures::desk_training(200));
  EXPECT_EQ(st.tag(target[0]).tags, target[0].tags());
}

TEST(StackedTagger, FreezingAllButTargetCrfStillTrains) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 3, 8);
  StackedTaggerConfig c = desk_stacked_tagger();
  c.stacking.freeze = {"base/", "target/lstm", "target/emission", "target/word_embed", "target/char",
                       "target/empty_word", "target/pad"};
  const TaggerModel base = desk_base_tagger(tb);
  const StackedTagger fresh = StackedTagger::build(base, c, tb, nullptr, 1);
  TrainingReport report;
  const StackedTagger st = train_stacked_tagger(base, tb, tb, c, fixtures::desk_training(2), nullptr, &report);
  ASSERT_FALSE(report.epochs.empty());
  EXPECT_NE(st.target().transitions().value, fresh.target().transitions().value);
  EXPECT_EQ(named(st.target().params(), "emission/w").value, named(fresh.target().params(), "emission/w").value);
  for (std::size_t i = 0; i < st.base().params().size(); ++i) {
    EXPECT_EQ(st.base().params()[i].value, base.params()[i].value);
  }
}

TEST(StackedTagger, DeterministicAndReloadable) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 4, 9);
  const TaggerModel base = desk_base_tagger(tb);
  const auto opts = fixtures::desk_training(2);
  const StackedTagger a = train_stacked_tagger(base, tb, tb, desk_stacked_tagger(), opts);
  const StackedTagger b = train_stacked_tagger(base, tb, tb, desk_stacked_tagger(), opts);
  for (std::size_t i = 0; i < a.target().params().size(); ++i) {
    EXPECT_EQ(a.target().params()[i].value, b.target().params()[i].value);
  }
  const auto dir = std::filesystem::temp_directory_path() / ("stackparse_st_" + std::to_string(::getpid()));
  a.save(dir);
  const StackedTagger back = StackedTagger::load(dir);
  std::filesystem::remove_all(dir);
  for (const Sentence& s : tb) EXPECT_EQ(back.tag(s).emissions, a.tag(s).emissions);
  EXPECT_EQ(addresses(const_cast<StackedTagger&>(back).trainable_params()).size(),
            addresses(const_cast<StackedTagger&>(a).trainable_params()).size());
}

TEST(StackedParserDims, FiftyPlusHundredPlusHundredWithBaseHidden400) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 10);
  ParserConfig bc = fixtures::desk_parser();
  bc.hidden = 400;
  const ParserModel base = ParserModel::build(bc, tb, nullptr, 1);
  StackedParserConfig c = fixtures::desk_stacked_parser();
  c.target.word_dim = 100;
  c.target.tag_dim = 100;
  c.target.hidden = 4;
  const auto emb = embeddings(50);
  StackedParser sp = StackedParser::build(base, c, tb, &emb, 2);
  EXPECT_EQ(sp.target().input_dim(), 1050u);
  num::Graph g;
  const auto in = sp.stack_inputs(g, tb[0].forms(), tb[0].tags());
  ASSERT_EQ(in.size(), tb[0].size() + 1);
  for (const auto& x : in) EXPECT_EQ(x.size(), 1050u);
}

TEST(StackedParserDims, RandomConfigurationsAndForcedMlpDims) {
  num::Rng rng(11);
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 11);
  for (int trial = 0; trial < 6; ++trial) {
    ParserConfig bc = fixtures::desk_parser();
    bc.hidden = 2 + rng.below(8);
    bc.arc_dim = 2 + rng.below(8);
    bc.rel_dim = 2 + rng.below(8);
    const ParserModel base = ParserModel::build(bc, tb, nullptr, 1);
    StackedParserConfig c = fixtures::desk_stacked_parser();
    c.target.word_dim = 1 + rng.below(9);
    c.target.tag_dim = 1 + rng.below(9);
    c.target.hidden = 2 + rng.below(8);
    c.target.arc_dim = 99;
    c.target.rel_dim = 77;
    StackedParser sp = StackedParser::build(base, c, tb, nullptr, 2);
    EXPECT_EQ(sp.target().input_dim(), c.target.word_dim + c.target.tag_dim + 2 * bc.hidden);
    EXPECT_EQ(sp.target().config().arc_dim, bc.arc_dim);
    EXPECT_EQ(sp.target().config().rel_dim, bc.rel_dim);
  }
}

TEST(StackedParser, SingleTokenIncludesRootPosition) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 12);
  StackedParser sp = StackedParser::build(desk_base_parser(tb), fixtures::desk_stacked_parser(), tb, nullptr, 2);
  const std::vector<std::string> forms{"runs"}, tags{"VERB"};
  num::Graph g1, g2;
  const auto a = sp.stack_inputs(g1, forms, tags);
  const auto b = sp.stack_inputs(g2, forms, tags);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t p = 0; p < 2; ++p) EXPECT_EQ(values(a[p]), values(b[p]));
  EXPECT_EQ(sp.parse(forms, tags).heads, (std::vector<std::size_t>{0}));
}

TEST(StackedParser, BiaffineTensorsAreCopiedAtInit) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 13);
  ParserModel base = desk_base_parser(tb);
  randomize(base.params(), 14);
  StackedParser sp = StackedParser::build(base, fixtures::desk_stacked_parser(), tb, nullptr, 2);
  EXPECT_EQ(sp.target().arc_tensor().value, base.arc_tensor().value);
  EXPECT_EQ(sp.target().rel_tensor().value, base.rel_tensor().value);
  EXPECT_EQ(sp.target().deprels(), base.deprels());
}

TEST(StackedParser, PureTransferLimitingCase) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 4, 15);
  ParserModel base = desk_base_parser(tb);
  randomize(base.params(), 16);
  StackedParser sp = StackedParser::build(base, fixtures::desk_stacked_parser(), tb, nullptr, 2);
  for (auto& p : sp.target().params().all()) {
    if (p.name.starts_with("lstm/") || p.name.starts_with("mlp/")) p.value.fill(0);
  }
  for (const Sentence& s : tb) {
    const auto forms = s.forms(), tags = s.tags();
    const Tensor got = sp.score_arcs(forms, tags);
    const Tensor want = base.score_arcs(forms, tags);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (std::isinf(want[i])) {
        EXPECT_EQ(got[i], want[i]);
      } else {
        EXPECT_NEAR(got[i], want[i], 1e-12);
      }
    }
  }
}

TEST(StackedParser, TrainableSetContainsBaseFeatureLayers) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 17);
  StackedParser sp = StackedParser::build(desk_base_parser(tb), fixtures::desk_stacked_parser(), tb, nullptr, 2);
  const auto trainable = addresses(sp.trainable_params());
  for (const auto& name : sp.base().feature_layer_names()) {
    EXPECT_TRUE(trainable.count(&named(sp.base().params(), name))) << name;
  }
  EXPECT_GT(trainable.size(), sp.base().feature_layer_names().size());
  EXPECT_FALSE(trainable.count(&named(sp.base().params(), "biaffine/arc")));
  EXPECT_TRUE(trainable.count(&named(sp.target().params(), "biaffine/arc")));
}

TEST(StackedParser, GradientFlowsIntoBase) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 18);
  StackedParser sp = StackedParser::build(desk_base_parser(tb), fixtures::desk_stacked_parser(), tb, nullptr, 2);
  const num::ParameterStore before = sp.base().params();
  const auto params = sp.trainable_params();
  num::Graph g(true);
  const auto fwd = sp.forward(g, tb[0].forms(), tb[0].tags());
  num::Expr loss = sp.target().loss(g, fwd, tb[0].heads(), sp.target().gold_rels(tb[0]));
  ASSERT_GT(loss.value()[0], 0);
  g.backward(loss);
  num::Adagrad(num::AdagradConfig{0.01, 1e-8, 0}).step(params);
  bool changed = false;
  for (const auto& name : sp.base().feature_layer_names()) {
    changed = changed || named(sp.base().params(), name).value != named(before, name).value;
  }
  EXPECT_TRUE(changed);
}

TEST(StackedParser, GradientCheckOnThreeTokens) {
  const std::vector<Sentence> tb{three_tokens()};
  ParserConfig bc = fixtures::desk_parser();
  bc.word_dim = bc.tag_dim = 2;
  bc.hidden = 2;
  bc.arc_dim = 2;
  bc.rel_dim = 2;
  ParserModel base = ParserModel::build(bc, tb, nullptr, 1, LabelInventory::universal().pos_tags(),
                                        {"root", "det", "nsubj"});
  StackedParserConfig c;
  c.target = bc;
  c.target.hidden = 3;
  c.stacking.train_base_embeddings = true;
  StackedParser sp = StackedParser::build(base, c, tb, nullptr, 2);
  randomize(sp.base().params(), 3);
  randomize(sp.target().params(), 4);
  const auto params = sp.trainable_params();
  const auto forms = tb[0].forms(), tags = tb[0].tags();
  const auto heads = tb[0].heads();
  const auto rels = sp.target().gold_rels(tb[0]);
  auto loss = [&](num::Graph& g) { return sp.target().loss(g, sp.forward(g, forms, tags), heads, rels); };
  const auto r = num::grad_check(loss, params, {1e-5, 6, 17});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(StackedParser, OverfitsFiveTargetSentences) {
  const auto source = fixtures::generate_treebank(fixtures::Grammar::kSource, 20, 19);
  const ParserModel base = train_parser(source, source, fixtures::desk_parser(), fixtures::desk_training(10));
  const auto target = fixtures::generate_treebank(fixtures::Grammar::kTarget, 5, 20);
  const StackedParser sp =
      train_stacked_parser(base, target, target, fixtures::desk_stacked_parser(), fixtures::desk_training(200));
  EXPECT_EQ(attachment_of(sp, target).first, 100.0);
}

TEST(StackedParser, DeterministicAndReloadable) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 4, 21);
  const ParserModel base = desk_base_parser(tb);
  const auto opts = fixtures::desk_training(2);
  const StackedParser a = train_stacked_parser(base, tb, tb, fixtures::desk_stacked_parser(), opts);
  const StackedParser b = train_stacked_parser(base, tb, tb, fixtures::desk_stacked_parser(), opts);
  for (std::size_t i = 0; i < a.target().params().size(); ++i) {
    EXPECT_EQ(a.target().params()[i].value, b.target().params()[i].value);
  }
  const auto dir = std::filesystem::temp_directory_path() / ("stackparse_sp_" + std::to_string(::getpid()));
  a.save(dir);
  const StackedParser back = StackedParser::load(dir);
  std::filesystem::remove_all(dir);
  for (const Sentence& s : tb) {
    const auto forms = s.forms(), tags = s.tags();
    EXPECT_EQ(back.score_arcs(forms, tags), a.score_arcs(forms, tags));
    EXPECT_EQ(back.parse(s).deprels, a.parse(s).deprels);
  }
}

TEST(StackedParser, LoadRejectsTaggerDirectory) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 2, 22);
  const StackedTagger st = StackedTagger::build(desk_base_tagger(tb), desk_stacked_tagger(), tb, nullptr, 1);
  const auto dir = std::filesystem::temp_directory_path() / ("stackparse_kind_" + std::to_string(::getpid()));
  st.save(dir);
  EXPECT_THROW(StackedParser::load(dir), num::FormatError);
  std::filesystem::remove_all(dir);
}

TEST(StackingOptions, KeyValueRoundTrip) {
  StackingOptions o;
  o.train_base_features = false;
  o.train_base_embeddings = true;
  o.freeze = {"base/lstm/", "target/word_embed"};
  KeyValues kv;
  o.write(kv);
  const StackingOptions back = StackingOptions::read(kv);
  EXPECT_EQ(back.train_base_features, false);
  EXPECT_EQ(back.train_base_embeddings, true);
  EXPECT_EQ(back.freeze, o.freeze);
}

TEST(StackingOptions, DefaultsFollowBackpropagationIntoFeatureLayers) {
  const StackingOptions o;
  EXPECT_TRUE(o.train_base_features);
  EXPECT_FALSE(o.train_base_embeddings);
  const StackedParserConfig c;
  EXPECT_EQ(c.target.layers, 1u);
  EXPECT_EQ(c.target.hidden, 900u);
}
