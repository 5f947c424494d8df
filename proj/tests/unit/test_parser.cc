#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <unistd.h>

#include "stackparse/num/grad_check.h"
#include "stackparse/parser.h"
#include "support/desk.h"
#include "support/synthetic.h"

using namespace stackparse;
using num::Real;
using num::Tensor;

namespace {

Sentence small_tree() {
  Sentence s;
  s.tokens = {Token{1, "she", "PRON", 2, "nsubj"}, Token{2, "eats", "VERB", 0, "root"},
              Token{3, "rice", "NOUN", 2, "dobj"}};
  return s;
}

void randomize(num::ParameterStore& store, std::uint64_t seed, double scale = 0.5) {
  num::Rng rng(seed);
  for (auto& p : store.all()) {
    for (auto& v : p.value.data()) v = static_cast<Real>(rng.uniform(-scale, scale));
  }
}

ParserConfig tiny() {
  ParserConfig c = fixtures::desk_parser();
  c.word_dim = 3;
  c.tag_dim = 2;
  c.hidden = 3;
  c.arc_dim = 3;
  c.rel_dim = 2;
  return c;
}

const std::vector<std::string> kRels{"root", "nsubj", "dobj"};

ParserModel tiny_model(std::uint64_t seed = 1) {
  const std::vector<Sentence> train{small_tree()};
  ParserModel m = ParserModel::build(tiny(), train, nullptr, seed, LabelInventory::universal().pos_tags(), kRels);
  randomize(m.params(), seed + 10);
  return m;
}

double lse(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

TEST(Biaffine, ArcScoresMatchExplicitSummation) {
  ParserModel m = tiny_model();
  const Sentence s = small_tree();
  num::Graph g;
  const auto fwd = m.forward(g, s.forms(), s.tags());
  const Tensor& u = m.arc_tensor().value;  // (d+1) x d
  const std::size_t d = m.config().arc_dim;
  ASSERT_EQ(u.rows(), d + 1);
  for (std::size_t dep = 0; dep <= s.size(); ++dep) {
    for (std::size_t head = 0; head <= s.size(); ++head) {
      const Tensor& a = fwd.features.arc_dep[dep].value();
      const Tensor& b = fwd.features.arc_head[head].value();
      double want = 0;
      for (std::size_t i = 0; i <= d; ++i) {
        const double ai = i < d ? a[i] : 1.0;
        for (std::size_t j = 0; j < d; ++j) want += ai * u.at(i, j) * b[j];
      }
      EXPECT_NEAR(fwd.arcs.value().at(dep, head), want, 1e-12);
    }
  }
}

TEST(Biaffine, LabelScoresMatchExplicitSummation) {
  ParserModel m = tiny_model(2);
  const Sentence s = small_tree();
  num::Graph g;
  const auto fwd = m.forward(g, s.forms(), s.tags());
  const Tensor& u = m.rel_tensor().value;  // L x (r+1) x (r+1)
  const std::size_t r = m.config().rel_dim;
  const Tensor got = m.label_scores(g, fwd.features, 3, 2).value();
  ASSERT_EQ(got.size(), kRels.size());
  const Tensor& a = fwd.features.rel_dep[3].value();
  const Tensor& b = fwd.features.rel_head[2].value();
  for (std::size_t l = 0; l < kRels.size(); ++l) {
    double want = 0;
    for (std::size_t i = 0; i <= r; ++i) {
      for (std::size_t j = 0; j <= r; ++j) {
        const double ai = i < r ? a[i] : 1.0, bj = j < r ? b[j] : 1.0;
        want += ai * u[(l * (r + 1) + i) * (r + 1) + j] * bj;
      }
    }
    EXPECT_NEAR(got[l], want, 1e-12);
  }
}

TEST(Biaffine, LossMatchesCrossEntropyOracle) {
  ParserModel m = tiny_model(3);
  const Sentence s = small_tree();
  num::Graph g;
  const auto fwd = m.forward(g, s.forms(), s.tags());
  const auto heads = s.heads();
  const auto rels = m.gold_rels(s);
  double want = 0;
  for (std::size_t d = 1; d <= s.size(); ++d) {
    std::vector<double> row;
    for (std::size_t h = 0; h <= s.size(); ++h) {
      if (h != d) row.push_back(fwd.arcs.value().at(d, h));
    }
    want += lse(row) - fwd.arcs.value().at(d, heads[d - 1]);
    const Tensor lab = m.label_scores(g, fwd.features, d, heads[d - 1]).value();
    std::vector<double> ls(lab.data().begin(), lab.data().end());
    want += lse(ls) - lab[rels[d - 1]];
  }
  want /= static_cast<double>(s.size());
  EXPECT_NEAR(m.loss(g, fwd, heads, rels).value()[0], want, 1e-10);
}

TEST(Biaffine, ArcValuesMaskRootRowAndDiagonal) {
  ParserModel m = tiny_model(4);
  const Sentence s = small_tree();
  num::Graph g;
  const Tensor v = ParserModel::arc_values(m.forward(g, s.forms(), s.tags()).arcs);
  for (std::size_t i = 0; i <= s.size(); ++i) {
    EXPECT_TRUE(std::isinf(v.at(0, i)) && v.at(0, i) < 0);
    EXPECT_TRUE(std::isinf(v.at(i, i)) && v.at(i, i) < 0);
  }
  EXPECT_TRUE(std::isfinite(v.at(1, 0)));
}

TEST(Parser, SingleTokenAttachesToRoot) {
  ParserModel m = tiny_model(5);
  const std::vector<std::string> forms{"eats"}, tags{"VERB"};
  const ParseResult r = m.parse(forms, tags);
  EXPECT_EQ(r.heads, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(std::isfinite(r.arc_scores.at(1, 0)));
  EXPECT_TRUE(std::isinf(r.arc_scores.at(1, 1)));
}

TEST(Parser, ZeroedArcTensorTiesToRoot) {
  ParserModel m = tiny_model(6);
  m.arc_tensor().value.fill(0);
  const ParseResult r = m.parse(small_tree());
  EXPECT_EQ(r.heads, (std::vector<std::size_t>(3, 0)));
}

TEST(Parser, ZeroedLabelTensorPicksFirstLabel) {
  ParserModel m = tiny_model(7);
  m.rel_tensor().value.fill(0);
  for (const auto& rel : m.parse(small_tree()).deprels) EXPECT_EQ(rel, kRels[0]);
}

TEST(Parser, SingleLabelInventory) {
  const std::vector<Sentence> train{small_tree()};
  ParserModel m = ParserModel::build(tiny(), train, nullptr, 1, LabelInventory::universal().pos_tags(), {"dep"});
  randomize(m.params(), 8);
  for (const auto& rel : m.parse(small_tree()).deprels) EXPECT_EQ(rel, "dep");
}

TEST(Parser, GradientCheckOnThreeTokens) {
  ParserModel m = tiny_model(9);
  const Sentence s = small_tree();
  std::vector<num::Parameter*> ps;
  for (auto& p : m.params().all()) ps.push_back(&p);
  const auto forms = s.forms(), tags = s.tags();
  const auto heads = s.heads();
  const auto rels = m.gold_rels(s);
  auto loss = [&](num::Graph& g) { return m.loss(g, m.forward(g, forms, tags), heads, rels); };
  const auto r = num::grad_check(loss, ps, {1e-5, 8, 17});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(Parser, OverfitsOneSentence) {
  const std::vector<Sentence> train{small_tree()};
  const ParserModel m = train_parser(train, train, fixtures::desk_parser(), fixtures::desk_training(200));
  const ParseResult r = m.parse(train[0]);
  EXPECT_EQ(r.heads, train[0].heads());
  EXPECT_EQ(r.deprels, train[0].deprels());
  const auto [uas, las] = attachment_of(m, train);
  EXPECT_EQ(uas, 100.0);
  EXPECT_EQ(las, 100.0);
}

TEST(Parser, TrainingIsDeterministic) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 6, 1);
  const auto opts = fixtures::desk_training(3);
  const ParserModel a = train_parser(tb, tb, fixtures::desk_parser(), opts);
  const ParserModel b = train_parser(tb, tb, fixtures::desk_parser(), opts);
  for (std::size_t i = 0; i < a.params().size(); ++i) EXPECT_EQ(a.params()[i].value, b.params()[i].value);
}

TEST(Parser, NonTreeTrainingSentenceIsRejected) {
  Sentence s = small_tree();
  s.tokens[1].head = 1;
  const std::vector<Sentence> train{s};
  EXPECT_THROW(train_parser(train, {}, fixtures::desk_parser(), fixtures::desk_training(1)), std::invalid_argument);
}

TEST(Parser, MstDecodingAlwaysGivesTrees) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 10, 2);
  ParserModel m = ParserModel::build(fixtures::desk_parser(), tb, nullptr, 3);
  for (const Sentence& s : tb) {
    const ParseResult r = m.parse(s, Decoder::kMst);
    EXPECT_TRUE(r.is_tree);
    EXPECT_TRUE(is_tree(r.heads));
  }
}

TEST(Parser, SaveLoadRoundTrip) {
  const auto tb = fixtures::generate_treebank(fixtures::Grammar::kSource, 6, 3);
  const ParserModel m = train_parser(tb, tb, fixtures::desk_parser(), fixtures::desk_training(2));
  const auto dir = std::filesystem::temp_directory_path() / ("stackparse_parser_" + std::to_string(::getpid()));
  m.save(dir);
  const ParserModel back = ParserModel::load(dir);
  std::filesystem::remove_all(dir);
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(back.params()[i].value, m.params()[i].value);
  for (const Sentence& s : tb) {
    const ParseResult a = m.parse(s), b = back.parse(s);
    EXPECT_EQ(a.heads, b.heads);
    EXPECT_EQ(a.deprels, b.deprels);
    EXPECT_EQ(a.arc_scores, b.arc_scores);
  }
}

TEST(Decoder, NamesRoundTrip) {
  EXPECT_EQ(parse_decoder("greedy"), Decoder::kGreedy);
  EXPECT_EQ(parse_decoder(to_string(Decoder::kMst)), Decoder::kMst);
  EXPECT_THROW(parse_decoder("eisner"), ConfigError);
}
