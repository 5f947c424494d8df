#include "cli.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "stackparse/eval.h"
#include "stackparse/langmodel.h"
#include "stackparse/treebank.h"
#include "stackparse/vocab.h"

namespace stackparse::cli {
namespace {

const std::set<std::string> kKnownKeys = {
    // training
    "seed", "epochs", "learning_rate", "l2_lambda", "patience",
    // model dimensions
    "word_dim", "char_dim", "char_attention_dim", "window", "tag_dim", "hidden", "layers", "arc_dim", "rel_dim",
    "dropout",
    // stacking
    "train_base_features", "train_base_embeddings", "freeze",
    // evaluation and folds
    "decoder", "include_punct", "k", "dev_fraction",
    // language model and selection
    "order", "min_length", "max_length", "count_end_token"};

const std::vector<std::string> kTaggerKeys = {"word_dim", "char_dim", "char_attention_dim", "window",
                                              "hidden", "layers", "dropout"};
const std::vector<std::string> kParserKeys = {"word_dim", "tag_dim", "hidden", "layers",
                                              "arc_dim", "rel_dim", "dropout"};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

RunConfig::RunConfig(KeyValues values) : values_(std::move(values)) { validate(); }

RunConfig RunConfig::from_file(const std::filesystem::path& path) { return RunConfig(read_key_values(path)); }

void RunConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  validate();
}

void RunConfig::validate() const {
  for (const auto& [key, value] : values_) {
    require(kKnownKeys.count(key) > 0, "unknown config key '" + key + "'");
  }
  for (const char* key : {"word_dim", "char_dim", "char_attention_dim", "tag_dim", "hidden", "layers", "arc_dim",
                          "rel_dim", "epochs", "order", "max_length"}) {
    require(get_size(values_, key, 1) > 0, std::string("'") + key + "' must be positive");
  }
  get_size(values_, "window", 0);
  get_size(values_, "patience", 0);
  get_size(values_, "min_length", 0);
  get_size(values_, "seed", 0);
  require(get_size(values_, "k", 2) >= 2, "'k' must be at least 2");
  const double dropout = get_double(values_, "dropout", 0.0);
  require(dropout >= 0 && dropout < 1, "'dropout' must lie in [0, 1)");
  require(get_double(values_, "learning_rate", 0.01) > 0, "'learning_rate' must be positive");
  require(get_double(values_, "l2_lambda", 0.0) >= 0, "'l2_lambda' must be non-negative");
  const double dev = get_double(values_, "dev_fraction", 0.5);
  require(dev >= 0 && dev < 1, "'dev_fraction' must lie in [0, 1)");
  require(get_size(values_, "min_length", 5) <= get_size(values_, "max_length", 50),
          "'min_length' exceeds 'max_length'");
  get_bool(values_, "train_base_features", true);
  get_bool(values_, "train_base_embeddings", false);
  get_bool(values_, "include_punct", true);
  get_bool(values_, "count_end_token", true);
  parse_decoder(get_string(values_, "decoder", "greedy"));
}

TaggerConfig RunConfig::tagger() const { return TaggerConfig::from_key_values(values_); }
ParserConfig RunConfig::parser() const { return ParserConfig::from_key_values(values_); }

StackedTaggerConfig RunConfig::stacked_tagger() const {
  StackedTaggerConfig c;
  c.target = tagger();
  c.stacking = stacking();
  return c;
}

StackedParserConfig RunConfig::stacked_parser() const {
  StackedParserConfig c;
  c.target = ParserConfig::from_key_values(values_, c.target);
  c.stacking = stacking();
  return c;
}

StackingOptions RunConfig::stacking() const { return StackingOptions::read(values_); }

TrainOptions RunConfig::training() const {
  TrainOptions o;
  o.epochs = get_size(values_, "epochs", o.epochs);
  o.seed = seed();
  o.patience = get_size(values_, "patience", o.patience);
  o.optimizer.learning_rate = static_cast<num::Real>(get_double(values_, "learning_rate", o.optimizer.learning_rate));
  o.optimizer.l2_lambda = static_cast<num::Real>(get_double(values_, "l2_lambda", o.optimizer.l2_lambda));
  return o;
}

std::uint64_t RunConfig::seed() const { return get_size(values_, "seed", 1); }
Decoder RunConfig::decoder() const { return parse_decoder(get_string(values_, "decoder", "greedy")); }
bool RunConfig::include_punct() const { return get_bool(values_, "include_punct", true); }
std::size_t RunConfig::k(std::size_t fallback) const { return get_size(values_, "k", fallback); }
double RunConfig::dev_fraction() const { return get_double(values_, "dev_fraction", 0.5); }
std::size_t RunConfig::lm_order() const { return get_size(values_, "order", 5); }

KeyValues RunConfig::effective(ModelKind kind) const {
  const TrainOptions t = training();
  KeyValues kv{{"seed", std::to_string(t.seed)},
               {"epochs", std::to_string(t.epochs)},
               {"patience", std::to_string(t.patience)},
               {"learning_rate", format_double(t.optimizer.learning_rate)},
               {"l2_lambda", format_double(t.optimizer.l2_lambda)}};
  auto merge = [&](const KeyValues& model, const std::vector<std::string>& keys) {
    for (const auto& key : keys) kv[key] = model.at(key);
  };
  switch (kind) {
    case ModelKind::kTagger:
      merge(tagger().to_key_values(), kTaggerKeys);
      break;
    case ModelKind::kParser:
      merge(parser().to_key_values(), kParserKeys);
      kv["decoder"] = to_string(decoder());
      break;
    case ModelKind::kStackedTagger:
      merge(tagger().to_key_values(), kTaggerKeys);
      stacking().write(kv);
      break;
    case ModelKind::kStackedParser:
      merge(stacked_parser().target.to_key_values(), kParserKeys);
      stacking().write(kv);
      kv["decoder"] = to_string(decoder());
      break;
  }
  return kv;
}

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string embeddings;
  std::string base_model;
  std::string decoder;
  std::string include_punct;
  std::optional<std::size_t> k;
  std::string out;
  std::vector<std::string> inputs;
};

RunConfig load_config(const Args& a) {
  RunConfig cfg = a.config.empty() ? RunConfig() : RunConfig::from_file(a.config);
  if (a.seed) cfg.set("seed", std::to_string(*a.seed));
  if (!a.decoder.empty()) cfg.set("decoder", a.decoder);
  if (!a.include_punct.empty()) cfg.set("include_punct", a.include_punct);
  if (a.k) cfg.set("k", std::to_string(*a.k));
  return cfg;
}

std::optional<PretrainedEmbeddings> load_optional_embeddings(const Args& a) {
  if (a.embeddings.empty()) return std::nullopt;
  return load_embeddings(a.embeddings);
}

std::vector<Sentence> input_treebank(const Args& a, std::size_t i) {
  if (i >= a.inputs.size()) return {};
  return read_conllu(a.inputs[i]);
}

void require_out(const Args& a) {
  if (a.out.empty()) throw ConfigError("--out is required for this command");
}

void emit(const Args& a, std::ostream& out, const std::string& text) {
  if (a.out.empty()) {
    out << text;
  } else {
    write_text(a.out, text);
  }
}

std::string report_text(const TrainingReport& r, bool two_scores) {
  KeyValues kv{{"best_epoch", std::to_string(r.best_epoch)},
               {"best_dev_score", format_percent(r.best_dev_score)},
               {"epochs_run", std::to_string(r.epochs.size())}};
  if (two_scores) kv["best_dev_score2"] = format_percent(r.best_dev_score2);
  for (const auto& e : r.epochs) {
    char key[32];
    std::snprintf(key, sizeof(key), "epoch.%04zu", e.epoch);
    std::string v = format_double(e.train_loss) + " " + format_percent(e.dev_score);
    if (two_scores) v += " " + format_percent(e.dev_score2);
    kv[key] = v;
  }
  return format_key_values(kv);
}

TrainOptions progress_options(const RunConfig& cfg, std::ostream& err) {
  TrainOptions o = cfg.training();
  o.on_epoch = [&err](const EpochReport& e) {
    err << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " dev " << format_percent(e.dev_score)
        << '\n';
  };
  return o;
}

void finish_training(const Args& a, const RunConfig& cfg, ModelKind kind, const TrainingReport& report,
                     bool two_scores, std::ostream& out) {
  const std::filesystem::path dir(a.out);
  write_key_values(dir / "effective.cfg", cfg.effective(kind));
  write_text(dir / "training.report", report_text(report, two_scores));
  out << "best epoch " << report.best_epoch << ", dev " << format_percent(report.best_dev_score);
  if (two_scores) out << " / " << format_percent(report.best_dev_score2);
  out << '\n';
}

int cmd_train_tagger(const Args& a, std::ostream& out, std::ostream& err) {
  require_out(a);
  const RunConfig cfg = load_config(a);
  const auto train = input_treebank(a, 0);
  const auto dev = input_treebank(a, 1);
  const auto emb = load_optional_embeddings(a);
  TrainingReport report;
  const TaggerModel model =
      train_tagger(train, dev, cfg.tagger(), progress_options(cfg, err), emb ? &*emb : nullptr, &report);
  model.save(a.out);
  finish_training(a, cfg, ModelKind::kTagger, report, false, out);
  return 0;
}

int cmd_train_parser(const Args& a, std::ostream& out, std::ostream& err) {
  require_out(a);
  const RunConfig cfg = load_config(a);
  const auto train = input_treebank(a, 0);
  const auto dev = input_treebank(a, 1);
  const auto emb = load_optional_embeddings(a);
  TrainingReport report;
  const ParserModel model =
      train_parser(train, dev, cfg.parser(), progress_options(cfg, err), emb ? &*emb : nullptr, &report);
  model.save(a.out);
  finish_training(a, cfg, ModelKind::kParser, report, true, out);
  return 0;
}

void require_base(const Args& a) {
  if (a.base_model.empty()) throw ConfigError("--base-model is required for this command");
}

int cmd_train_stacked_tagger(const Args& a, std::ostream& out, std::ostream& err) {
  require_out(a);
  require_base(a);
  const RunConfig cfg = load_config(a);
  const TaggerModel base = TaggerModel::load(a.base_model);
  const auto train = input_treebank(a, 0);
  const auto dev = input_treebank(a, 1);
  const auto emb = load_optional_embeddings(a);
  TrainingReport report;
  const StackedTagger model = train_stacked_tagger(base, train, dev, cfg.stacked_tagger(),
                                                   progress_options(cfg, err), emb ? &*emb : nullptr, &report);
  model.save(a.out);
  finish_training(a, cfg, ModelKind::kStackedTagger, report, false, out);
  return 0;
}

int cmd_train_stacked_parser(const Args& a, std::ostream& out, std::ostream& err) {
  require_out(a);
  require_base(a);
  const RunConfig cfg = load_config(a);
  const ParserModel base = ParserModel::load(a.base_model);
  const auto train = input_treebank(a, 0);
  const auto dev = input_treebank(a, 1);
  const auto emb = load_optional_embeddings(a);
  TrainingReport report;
  const StackedParser model = train_stacked_parser(base, train, dev, cfg.stacked_parser(),
                                                   progress_options(cfg, err), emb ? &*emb : nullptr, &report);
  model.save(a.out);
  finish_training(a, cfg, ModelKind::kStackedParser, report, true, out);
  return 0;
}

bool is_stacked(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "stacking.cfg"); }

int cmd_tag(const Args& a, std::ostream& out, std::ostream&) {
  auto sentences = read_conllu(a.inputs.at(1));
  const std::filesystem::path dir(a.inputs.at(0));
  std::vector<std::vector<std::string>> tags;
  if (is_stacked(dir)) {
    const StackedTagger model = StackedTagger::load(dir);
    for (const auto& s : sentences) tags.push_back(model.tag(s).tags);
  } else {
    const TaggerModel model = TaggerModel::load(dir);
    for (const auto& s : sentences) tags.push_back(model.tag(s).tags);
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    for (std::size_t t = 0; t < sentences[i].size(); ++t) sentences[i].tokens[t].upos = tags[i][t];
  }
  emit(a, out, write_conllu(sentences));
  return 0;
}

int cmd_parse(const Args& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a);
  auto sentences = read_conllu(a.inputs.at(1));
  const std::filesystem::path dir(a.inputs.at(0));
  std::size_t repaired = 0;
  auto run_all = [&](const auto& model) {
    for (auto& s : sentences) {
      ParseResult r = model.parse(s, cfg.decoder());
      // CoNLL-U output needs trees.
      if (!r.is_tree) {
        r = model.parse(s, Decoder::kMst);
        ++repaired;
      }
      s = with_parse(std::move(s), r);
    }
  };
  if (is_stacked(dir)) {
    run_all(StackedParser::load(dir));
  } else {
    run_all(ParserModel::load(dir));
  }
  if (repaired > 0) err << repaired << " non-tree greedy parses re-decoded with mst\n";
  emit(a, out, write_conllu(sentences));
  return 0;
}

int cmd_eval(const Args& a, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_config(a);
  const auto gold = read_conllu(a.inputs.at(0));
  const auto pred = read_conllu(a.inputs.at(1));
  const ScoreReport r = attachment_scores(gold, pred, cfg.include_punct());
  std::string text = format_scores(r);
  const auto rows = per_category_scores(gold, pred, cfg.include_punct());
  bool categorized = false;
  for (const auto& [name, row] : rows) categorized = categorized || name != "Others";
  if (categorized) text += "\n" + format_category_table(rows);
  out << text;
  if (!a.out.empty()) write_text(a.out, format_scores(r) + (categorized ? format_category_tsv(rows) : ""));
  return 0;
}

int cmd_iaa(const Args& a, std::ostream& out, std::ostream&) {
  const auto first = read_conllu(a.inputs.at(0));
  const auto second = read_conllu(a.inputs.at(1));
  const Agreement g = inter_annotator_agreement(first, second);
  const std::string text = "POS\t" + format_percent(g.tag_accuracy) + "\nUAS\t" + format_percent(g.uas) +
                           "\nLAS\t" + format_percent(g.las) + "\n";
  emit(a, out, text);
  if (!a.out.empty()) out << text;
  return 0;
}

int cmd_jackknife(const Args& a, std::ostream& out, std::ostream& err) {
  require_out(a);
  const RunConfig cfg = load_config(a);
  const auto treebank = read_conllu(a.inputs.at(0));
  const auto emb = load_optional_embeddings(a);
  const TaggerConfig tc = cfg.tagger();
  const TrainOptions opts = cfg.training();
  std::size_t fold = 0;
  const TagTrainer trainer = [&](std::span<const Sentence> train, std::span<const Sentence> heldout) {
    err << "jackknife fold " << ++fold << '\n';
    const TaggerModel model = train_tagger(train, {}, tc, opts, emb ? &*emb : nullptr);
    std::vector<std::vector<std::string>> tags;
    for (const auto& s : heldout) tags.push_back(model.tag(s).tags);
    return tags;
  };
  const JackknifeResult r = jackknife_tags(treebank, trainer, cfg.k(10), cfg.seed());
  write_conllu(a.out, r.sentences);
  out << "jackknifed tagging accuracy " << format_percent(tagging_accuracy(treebank, r.sentences)) << '\n';
  return 0;
}

int cmd_crossfold(const Args& a, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load_config(a);
  const auto treebank = read_conllu(a.inputs.at(0));
  const auto emb = load_optional_embeddings(a);
  const TrainOptions opts = cfg.training();
  std::optional<ParserModel> base;
  if (!a.base_model.empty()) base = ParserModel::load(a.base_model);
  std::size_t fold = 0;
  const ParseTrainer trainer = [&](std::span<const Sentence> train, std::span<const Sentence> dev,
                                   std::span<const Sentence> test) {
    err << "cross-validation fold " << ++fold << '\n';
    std::vector<Sentence> parsed;
    auto run_all = [&](const auto& model) {
      for (const auto& s : test) parsed.push_back(with_parse(s, model.parse(s, cfg.decoder())));
    };
    if (base) {
      run_all(train_stacked_parser(*base, train, dev, cfg.stacked_parser(), opts, emb ? &*emb : nullptr));
    } else {
      run_all(train_parser(train, dev, cfg.parser(), opts, emb ? &*emb : nullptr));
    }
    return parsed;
  };
  const CrossFoldReport r =
      cross_fold_validate(treebank, trainer, cfg.k(5), cfg.dev_fraction(), cfg.seed(), cfg.include_punct());
  std::string text = "fold\tUAS\tLAS\n";
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    text += std::to_string(f + 1) + '\t' + format_percent(r.folds[f].uas()) + '\t' + format_percent(r.folds[f].las()) +
            '\n';
  }
  text += "mean\t" + format_percent(r.mean_uas) + '\t' + format_percent(r.mean_las) + '\n';
  emit(a, out, text);
  if (!a.out.empty()) out << text;
  return 0;
}

int cmd_lm_train(const Args& a, std::ostream& out, std::ostream&) {
  require_out(a);
  const RunConfig cfg = load_config(a);
  const auto corpus = read_token_corpus(a.inputs.at(0));
  const NgramLM lm = NgramLM::train(corpus, cfg.lm_order());
  lm.save(a.out);
  out << "trained order-" << lm.order() << " model on " << corpus.size() << " sentences\n";
  return 0;
}

int cmd_lm_rank(const Args& a, std::ostream& out, std::ostream&) {
  const RunConfig cfg = load_config(a);
  const NgramLM lm = NgramLM::load(a.inputs.at(0));
  const auto corpus = read_token_corpus(a.inputs.at(1));
  RankOptions options;
  options.min_length = get_size(cfg.values(), "min_length", options.min_length);
  options.max_length = get_size(cfg.values(), "max_length", options.max_length);
  options.count_end_token = get_bool(cfg.values(), "count_end_token", options.count_end_token);
  auto records = rank_by_divergence(lm, corpus, options);
  if (a.inputs.size() > 2) {
    const auto lexicon = read_lexicon(a.inputs[2]);
    const auto hits = match_lexicon(corpus, lexicon);
    for (auto& r : records) r.hits = hits[r.index];
  }
  emit(a, out, format_selection(records));
  return 0;
}

int cmd_lexicon_match(const Args& a, std::ostream& out, std::ostream&) {
  const auto corpus = read_token_corpus(a.inputs.at(0));
  const auto lexicon = read_lexicon(a.inputs.at(1));
  const auto hits = match_lexicon(corpus, lexicon);
  std::string text;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (hits[i].empty()) continue;
    text += std::to_string(i + 1) + '\t';
    for (std::size_t k = 0; k < hits[i].size(); ++k) text += (k ? "," : "") + hits[i][k];
    text += '\t';
    for (std::size_t k = 0; k < corpus[i].size(); ++k) text += (k ? " " : "") + corpus[i][k];
    text += '\n';
  }
  emit(a, out, text);
  return 0;
}

int cmd_validate(const Args& a, std::ostream& out, std::ostream&) {
  const auto sentences = read_conllu(a.inputs.at(0));
  const LabelInventory inventory = LabelInventory::universal();
  std::size_t errors = 0, warnings = 0;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const Violation& v : validate(sentences[s], inventory)) {
      (v.is_warning() ? warnings : errors) += 1;
      out << "sentence " << s + 1 << " token " << v.token << ' ' << to_string(v.kind) << ": " << v.message << '\n';
    }
  }
  out << sentences.size() << " sentences, " << errors << " errors, " << warnings << " warnings\n";
  return errors == 0 ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-lingual dependency parsing toolkit", "stackparse"};
  app.require_subcommand(1, 1);
  Args a;

  struct Command {
    const char* name;
    const char* help;
    std::size_t min_inputs, max_inputs;
    const char* inputs_help;
    int (*fn)(const Args&, std::ostream&, std::ostream&);
  };
  const Command commands[] = {
      {"train-tagger", "Train a bi-LSTM-CRF tagger", 1, 2, "TRAIN.conllu [DEV.conllu]", cmd_train_tagger},
      {"train-parser", "Train a biaffine parser", 1, 2, "TRAIN.conllu [DEV.conllu]", cmd_train_parser},
      {"train-stacked-tagger", "Train a tagger stacked on --base-model", 1, 2, "TRAIN.conllu [DEV.conllu]",
       cmd_train_stacked_tagger},
      {"train-stacked-parser", "Train a parser stacked on --base-model", 1, 2, "TRAIN.conllu [DEV.conllu]",
       cmd_train_stacked_parser},
      {"tag", "Replace the UPOS column using a trained tagger", 2, 2, "MODEL INPUT.conllu", cmd_tag},
      {"parse", "Replace heads and labels using a trained parser", 2, 2, "MODEL INPUT.conllu", cmd_parse},
      {"eval", "UAS/LAS/POS of a prediction against gold", 2, 2, "GOLD.conllu PRED.conllu", cmd_eval},
      {"iaa", "Agreement of two annotations of the same sentences", 2, 2, "A.conllu B.conllu", cmd_iaa},
      {"jackknife", "k-fold predicted tags for a treebank", 1, 1, "TREEBANK.conllu", cmd_jackknife},
      {"crossfold", "k-fold cross-validation of the parser", 1, 1, "TREEBANK.conllu", cmd_crossfold},
      {"lm-train", "Train a Kneser-Ney language model", 1, 1, "CORPUS.txt", cmd_lm_train},
      {"lm-rank", "Rank sentences by normalized log-likelihood", 2, 3, "LM CORPUS.txt [LEXICON.txt]", cmd_lm_rank},
      {"lexicon-match", "List lexicon terms found in each sentence", 2, 2, "CORPUS.txt LEXICON.txt",
       cmd_lexicon_match},
      {"validate", "Check a treebank against the universal inventory", 1, 1, "TREEBANK.conllu", cmd_validate},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("inputs", a.inputs, c.inputs_help)
        ->required()
        ->expected(static_cast<int>(c.min_inputs), static_cast<int>(c.max_inputs));
    sub->add_option("--config", a.config, "key = value configuration file");
    sub->add_option("--seed", a.seed, "random seed");
    sub->add_option("--embeddings", a.embeddings, "pretrained word vectors");
    sub->add_option("--base-model", a.base_model, "trained base model directory");
    sub->add_option("--decoder", a.decoder, "greedy or mst");
    sub->add_option("--include-punct", a.include_punct, "true or false");
    sub->add_option("--k", a.k, "number of folds");
    sub->add_option("--out", a.out, "output path");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    for (const Command& c : commands) {
      if (name == c.name) return c.fn(a, out, err);
    }
  } catch (const ConfigError& e) {
    err << "stackparse " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "stackparse " << name << ": " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace stackparse::cli
