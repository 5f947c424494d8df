#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cli.h"
#include "stackparse/eval.h"
#include "stackparse/keyvalue.h"
#include "support/synthetic.h"

using namespace stackparse;
using cli::RunConfig;

namespace {

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("stackparse_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
    write_conllu(path("train.conllu"), fixtures::generate_treebank(fixtures::Grammar::kSource, 30, 1));
    write_conllu(path("dev.conllu"), fixtures::generate_treebank(fixtures::Grammar::kSource, 10, 2));
    write_key_values(path("small.cfg"), {{"word_dim", "16"},
                                         {"char_dim", "8"},
                                         {"char_attention_dim", "8"},
                                         {"tag_dim", "16"},
                                         {"hidden", "24"},
                                         {"arc_dim", "24"},
                                         {"rel_dim", "16"},
                                         {"dropout", "0"},
                                         {"learning_rate", "0.1"},
                                         {"epochs", "15"}});
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::filesystem::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(RunConfig, RejectsUnknownKeys) {
  EXPECT_THROW(RunConfig(KeyValues{{"hiden", "10"}}), ConfigError);
  RunConfig cfg;
  EXPECT_THROW(cfg.set("learning-rate", "0.1"), ConfigError);
}

TEST(RunConfig, RejectsOutOfRangeValues) {
  for (const auto& [key, value] : std::vector<std::pair<std::string, std::string>>{{"hidden", "0"},
                                                                                   {"k", "1"},
                                                                                   {"dropout", "1"},
                                                                                   {"dropout", "-0.1"},
                                                                                   {"learning_rate", "0"},
                                                                                   {"l2_lambda", "-1"},
                                                                                   {"dev_fraction", "1"},
                                                                                   {"decoder", "eisner"},
                                                                                   {"include_punct", "maybe"}}) {
    EXPECT_ANY_THROW(RunConfig(KeyValues{{key, value}})) << key << " = " << value;
  }
  EXPECT_ANY_THROW(RunConfig(KeyValues{{"min_length", "9"}, {"max_length", "4"}}));
  EXPECT_ANY_THROW(RunConfig(KeyValues{{"epochs", "ten"}}));
}

TEST(RunConfig, EffectiveConfigRoundTrips) {
  const RunConfig cfg(KeyValues{{"hidden", "40"}, {"seed", "7"}, {"decoder", "mst"}});
  const KeyValues eff = cfg.effective(cli::ModelKind::kParser);
  EXPECT_EQ(eff.at("hidden"), "40");
  EXPECT_EQ(eff.at("seed"), "7");
  EXPECT_EQ(eff.at("decoder"), "mst");
  EXPECT_TRUE(eff.count("arc_dim"));
  const RunConfig again(eff);
  EXPECT_EQ(again.effective(cli::ModelKind::kParser), eff);
  EXPECT_EQ(again.parser().to_key_values(), cfg.parser().to_key_values());

  const KeyValues stacked = RunConfig(KeyValues{{"train_base_embeddings", "true"}})
                                .effective(cli::ModelKind::kStackedParser);
  EXPECT_EQ(RunConfig(stacked).stacking().train_base_embeddings, true);
}

TEST_F(Workdir, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"no-such-command"}), 2);
  EXPECT_EQ(run({"eval", path("train.conllu")}), 2);
  EXPECT_EQ(run({"train-parser", path("train.conllu")}), 2);  // missing --out
  EXPECT_NE(err_.str().find("--out"), std::string::npos);
  EXPECT_EQ(run({"eval", path("train.conllu"), path("train.conllu"), "--include-punct", "perhaps"}), 2);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(Workdir, RuntimeErrorsExitWithOne) {
  EXPECT_EQ(run({"eval", path("missing.conllu"), path("train.conllu")}), 1);
  EXPECT_NE(err_.str().find("stackparse eval:"), std::string::npos);
  EXPECT_EQ(run({"eval", path("train.conllu"), path("dev.conllu")}), 1);
}

TEST_F(Workdir, EvalOfGoldAgainstItself) {
  ASSERT_EQ(run({"eval", path("dev.conllu"), path("dev.conllu")}), 0);
  EXPECT_NE(out_.str().find("UAS\t100.00\nLAS\t100.00\n"), std::string::npos);
}

TEST_F(Workdir, ValidateReportsErrors) {
  EXPECT_EQ(run({"validate", path("train.conllu")}), 0);
  EXPECT_NE(out_.str().find("30 sentences, 0 errors"), std::string::npos);
  auto bad = read_conllu(path("dev.conllu"));
  bad[0].tokens[0].upos = "NOUNX";
  write_conllu(path("bad.conllu"), bad);
  EXPECT_EQ(run({"validate", path("bad.conllu")}), 1);
}

TEST_F(Workdir, ParseOutputReproducesDevelopmentScores) {
  ASSERT_EQ(run({"train-parser", path("train.conllu"), path("dev.conllu"), "--config", path("small.cfg"), "--out",
                 path("parser")}),
            0)
      << err_.str();
  const KeyValues report = read_key_values(path("parser/training.report"));
  ASSERT_EQ(run({"parse", path("parser"), path("dev.conllu"), "--out", path("parsed.conllu")}), 0) << err_.str();
  ASSERT_EQ(err_.str().find("re-decoded"), std::string::npos) << "greedy output was repaired";
  const auto gold = read_conllu(path("dev.conllu"));
  const auto parsed = read_conllu(path("parsed.conllu"));
  const ScoreReport r = attachment_scores(gold, parsed);
  EXPECT_EQ(format_percent(r.uas()), report.at("best_dev_score"));
  EXPECT_EQ(format_percent(r.las()), report.at("best_dev_score2"));
  for (const Sentence& s : parsed) EXPECT_TRUE(is_tree(s.heads()));

  ASSERT_EQ(run({"parse", path("parser"), path("dev.conllu")}), 0);
  std::ifstream pf(path("parsed.conllu"));
  EXPECT_EQ(out_.str(), std::string((std::istreambuf_iterator<char>(pf)), {}));
}

TEST_F(Workdir, EffectiveConfigReproducesTheRun) {
  ASSERT_EQ(run({"train-tagger", path("train.conllu"), path("dev.conllu"), "--config", path("small.cfg"), "--seed",
                 "3", "--out", path("a")}),
            0)
      << err_.str();
  ASSERT_EQ(run({"train-tagger", path("train.conllu"), path("dev.conllu"), "--config", path("a/effective.cfg"),
                 "--out", path("b")}),
            0)
      << err_.str();
  EXPECT_EQ(read_key_values(path("a/effective.cfg")).at("seed"), "3");
  EXPECT_EQ(read_key_values(path("a/effective.cfg")), read_key_values(path("b/effective.cfg")));
  EXPECT_EQ(read_key_values(path("a/training.report")), read_key_values(path("b/training.report")));
  ASSERT_EQ(run({"tag", path("a"), path("dev.conllu")}), 0);
  const std::string first = out_.str();
  ASSERT_EQ(run({"tag", path("b"), path("dev.conllu")}), 0);
  EXPECT_EQ(out_.str(), first);
}

TEST_F(Workdir, LexiconMatchListsHits) {
  std::ofstream(path("corpus.txt")) << "he is so kiasu one\nnothing here\ndon't talk cock lah\n";
  std::ofstream(path("lexicon.txt")) << "kiasu\ntalk cock\n";
  ASSERT_EQ(run({"lexicon-match", path("corpus.txt"), path("lexicon.txt")}), 0) << err_.str();
  EXPECT_EQ(out_.str(), "1\tkiasu\the is so kiasu one\n3\ttalk cock\tdon't talk cock lah\n");
}
