#include "stackparse/tagger.h"

#include <stdexcept>

#include "stackparse/crf.h"
#include "stackparse/num/init.h"
#include "stackparse/num/ops.h"
#include "stackparse/num/serialize.h"

namespace stackparse {

using num::Expr;
using num::Graph;
using num::Real;
using num::Tensor;

KeyValues TaggerConfig::to_key_values() const {
  return {{"word_dim", std::to_string(word_dim)},
          {"char_dim", std::to_string(char_dim)},
          {"char_attention_dim", std::to_string(char_attention_dim)},
          {"window", std::to_string(window)},
          {"hidden", std::to_string(hidden)},
          {"layers", std::to_string(layers)},
          {"dropout", format_double(dropout)},
          {"extra_dim", std::to_string(extra_dim)}};
}

TaggerConfig TaggerConfig::from_key_values(const KeyValues& kv) { return from_key_values(kv, TaggerConfig{}); }

TaggerConfig TaggerConfig::from_key_values(const KeyValues& kv, const TaggerConfig& defaults) {
  TaggerConfig c = defaults;
  c.word_dim = get_size(kv, "word_dim", c.word_dim);
  c.char_dim = get_size(kv, "char_dim", c.char_dim);
  c.char_attention_dim = get_size(kv, "char_attention_dim", c.char_attention_dim);
  c.window = get_size(kv, "window", c.window);
  c.hidden = get_size(kv, "hidden", c.hidden);
  c.layers = get_size(kv, "layers", c.layers);
  c.dropout = get_double(kv, "dropout", c.dropout);
  c.extra_dim = get_size(kv, "extra_dim", c.extra_dim);
  return c;
}

TaggerModel TaggerModel::build(const TaggerConfig& config, std::vector<std::string> tagset,
                               std::span<const Sentence> train, const PretrainedEmbeddings* pretrained,
                               std::uint64_t seed) {
  if (tagset.empty()) throw std::invalid_argument("tagger needs a non-empty tagset");
  if (config.layers == 0 || config.hidden == 0) throw std::invalid_argument("tagger needs a bi-LSTM");
  TaggerModel m;
  m.config_ = config;
  m.tags_ = Vocab(std::move(tagset));
  m.words_.add("<unk>");
  m.chars_.add("<unk>");
  for (const Sentence& s : train) {
    for (const Token& t : s.tokens) {
      m.words_.add(t.form);
      for (const auto& c : utf8_chars(t.form)) m.chars_.add(c);
    }
  }
  if (pretrained != nullptr && pretrained->dim() > 0) {
    m.pretrained_dim_ = pretrained->dim();
    m.pretrained_.add("<unk>");
    for (const auto& w : pretrained->words.items()) m.pretrained_.add(w);
  }
  m.create_parameters(seed);
  if (m.pretrained_dim_ > 0) {
    Tensor& table = m.store_[m.pretrained_table_].value;
    for (std::size_t i = 0; i < pretrained->words.size(); ++i) {
      auto src = pretrained->vectors.row(i);
      auto dst = table.row(*m.pretrained_.find(pretrained->words[i]));
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return m;
}

void TaggerModel::create_parameters(std::uint64_t seed) {
  num::Rng rng(seed);
  const TaggerConfig& c = config_;
  store_ = num::ParameterStore();
  if (pretrained_dim_ > 0) {
    pretrained_table_ = store_.add("pretrained", Tensor({pretrained_.size(), pretrained_dim_}), false);
  }
  // Zero-initialized next to frozen pretrained vectors, random otherwise.
  word_table_ = store_.add("word_embed", pretrained_dim_ > 0
                                             ? Tensor({words_.size(), c.word_dim})
                                             : num::glorot_uniform(words_.size(), c.word_dim, rng));
  char_table_ = store_.add("char_embed", num::glorot_uniform(chars_.size(), c.char_dim, rng));
  att_w_ = store_.add("char_att/w", num::glorot_uniform(c.char_attention_dim, c.char_dim, rng));
  att_b_ = store_.add("char_att/b", Tensor::vector(c.char_attention_dim));
  att_query_ = store_.add("char_att/query",
                          num::glorot_uniform({c.char_attention_dim, 1}, c.char_attention_dim, 1, rng));
  empty_word_ = store_.add("empty_word", Tensor::vector(c.char_dim));
  pad_ = store_.add("pad", num::glorot_uniform({token_dim(), 1}, token_dim(), 1, rng));
  lstm_ = num::make_bilstm(store_, "lstm", num::LstmVariant::kPeephole, input_dim(), c.hidden,
                           c.layers, rng);
  emission_w_ = store_.add("emission/w", num::glorot_uniform(tags_.size(), 2 * c.hidden, rng));
  emission_b_ = store_.add("emission/b", Tensor::vector(tags_.size()));
  transitions_ = store_.add("crf/transitions", Tensor::matrix(tags_.size() + 2, tags_.size() + 2));
}

std::size_t TaggerModel::token_dim() const {
  return pretrained_dim_ + config_.word_dim + config_.char_dim + config_.extra_dim;
}

std::size_t TaggerModel::word_index(std::string_view form) const {
  if (auto i = words_.find(form)) return *i;
  if (auto i = words_.find(ascii_lower(form))) return *i;
  return 0;
}

std::size_t TaggerModel::pretrained_index(std::string_view form) const {
  if (auto i = pretrained_.find(form)) return *i;
  if (auto i = pretrained_.find(ascii_lower(form))) return *i;
  return 0;
}

Expr TaggerModel::char_attention(Graph& g, std::string_view word) {
  const auto chars = utf8_chars(word);
  if (chars.empty()) return g.param(store_[empty_word_]);
  Expr w = g.param(store_[att_w_]);
  Expr b = g.param(store_[att_b_]);
  Expr q = g.param(store_[att_query_]);
  std::vector<Expr> embeds;
  std::vector<Expr> scores;
  for (const auto& ch : chars) {
    const auto idx = chars_.find(ch).value_or(0);
    Expr e = g.lookup(store_[char_table_], idx);
    embeds.push_back(e);
    scores.push_back(num::dot(q, num::tanh(num::affine(b, w, e))));
  }
  return num::attention_pool(num::concat(scores), embeds);
}

std::vector<Expr> TaggerModel::encode_tokens(Graph& g, std::span<const std::string> forms,
                                             std::span<const Expr> extra) {
  const std::size_t n = forms.size();
  if (n == 0) throw std::invalid_argument("cannot encode an empty sentence");
  if (config_.extra_dim > 0 && extra.size() != n) {
    throw num::ShapeError("tagger expects " + std::to_string(config_.extra_dim) +
                          "-dim extra features for every token");
  }
  std::vector<Expr> tokens;
  tokens.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Expr> parts;
    if (pretrained_dim_ > 0) parts.push_back(g.lookup(store_[pretrained_table_], pretrained_index(forms[t])));
    parts.push_back(g.lookup(store_[word_table_], word_index(forms[t])));
    parts.push_back(char_attention(g, forms[t]));
    if (config_.extra_dim > 0) {
      if (extra[t].value().size() != config_.extra_dim) {
        throw num::ShapeError("extra feature dimension " + std::to_string(extra[t].value().size()) +
                              " != " + std::to_string(config_.extra_dim));
      }
      parts.push_back(extra[t]);
    }
    tokens.push_back(num::concat(parts));
  }
  const std::size_t w = config_.window;
  if (w == 0) return tokens;
  Expr pad = g.param(store_[pad_]);
  std::vector<Expr> windows;
  windows.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Expr> parts;
    for (std::ptrdiff_t k = -static_cast<std::ptrdiff_t>(w); k <= static_cast<std::ptrdiff_t>(w); ++k) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) + k;
      parts.push_back(pos < 0 || pos >= static_cast<std::ptrdiff_t>(n) ? pad : tokens[pos]);
    }
    windows.push_back(num::concat(parts));
  }
  return windows;
}

TaggerModel::Forward TaggerModel::forward(Graph& g, std::span<const std::string> forms,
                                          std::span<const Expr> extra) {
  std::vector<Expr> inputs = encode_tokens(g, forms, extra);
  for (auto& x : inputs) x = num::dropout(x, static_cast<Real>(config_.dropout));
  Forward fwd;
  fwd.hidden = num::bilstm_encode(g, store_, lstm_, inputs, static_cast<Real>(config_.dropout));
  Expr w = g.param(store_[emission_w_]);
  Expr b = g.param(store_[emission_b_]);
  for (const Expr& h : fwd.hidden) fwd.emissions.push_back(num::affine(b, w, h));
  return fwd;
}

Expr TaggerModel::loss(Graph& g, const Forward& fwd, std::span<const std::size_t> gold) {
  return crf_neg_log_likelihood(g, fwd.emissions, g.param(store_[transitions_]), gold);
}

std::vector<std::size_t> TaggerModel::gold_indices(const Sentence& sentence) const {
  std::vector<std::size_t> out;
  for (const Token& t : sentence.tokens) {
    auto idx = tags_.find(t.upos);
    if (!idx) throw std::invalid_argument("gold tag '" + t.upos + "' is not in the tagger's tagset");
    out.push_back(*idx);
  }
  return out;
}

TagResult TaggerModel::tag(std::span<const std::string> forms) const {
  // Inference graphs only read parameter values.
  auto& self = const_cast<TaggerModel&>(*this);
  Graph g(false);
  Forward fwd = self.forward(g, forms);
  const auto path = viterbi_decode(emission_matrix(fwd.emissions), store_[transitions_].value);
  TagResult r;
  for (std::size_t t = 0; t < forms.size(); ++t) {
    r.tags.push_back(tags_[path[t]]);
    auto e = fwd.emissions[t].value().data();
    r.emissions.emplace_back(e.begin(), e.end());
    auto h = fwd.hidden[t].value().data();
    r.hidden.emplace_back(h.begin(), h.end());
  }
  return r;
}

TagResult TaggerModel::tag(const Sentence& sentence) const {
  const auto forms = sentence.forms();
  return tag(forms);
}

std::vector<std::string> TaggerModel::feature_layer_names() const {
  std::vector<std::string> out;
  for (const auto& p : store_.all()) {
    if (p.name.starts_with("lstm/") || p.name.starts_with("emission/")) out.push_back(p.name);
  }
  return out;
}

std::vector<std::string> TaggerModel::input_layer_names() const {
  std::vector<std::string> out;
  for (const auto& p : store_.all()) {
    if (p.name == "word_embed" || p.name == "char_embed" || p.name.starts_with("char_att/") ||
        p.name == "empty_word" || p.name == "pad") {
      out.push_back(p.name);
    }
  }
  return out;
}

void TaggerModel::save_structure(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  KeyValues kv = config_.to_key_values();
  kv["pretrained_dim"] = std::to_string(pretrained_dim_);
  write_key_values(dir / "model.cfg", kv);
  tags_.save(dir / "tags.vocab");
  words_.save(dir / "words.vocab");
  chars_.save(dir / "chars.vocab");
  pretrained_.save(dir / "pretrained.vocab");
}

TaggerModel TaggerModel::load_structure(const std::filesystem::path& dir) {
  const KeyValues kv = read_key_values(dir / "model.cfg");
  TaggerModel m;
  m.config_ = TaggerConfig::from_key_values(kv);
  m.pretrained_dim_ = get_size(kv, "pretrained_dim", 0);
  m.tags_ = Vocab::load(dir / "tags.vocab");
  m.words_ = Vocab::load(dir / "words.vocab");
  m.chars_ = Vocab::load(dir / "chars.vocab");
  m.pretrained_ = Vocab::load(dir / "pretrained.vocab");
  m.create_parameters(0);
  return m;
}

void TaggerModel::save(const std::filesystem::path& dir) const {
  save_structure(dir);
  num::save_parameters(dir / "params", store_);
}

TaggerModel TaggerModel::load(const std::filesystem::path& dir) {
  TaggerModel m = load_structure(dir);
  num::assign_parameters(m.store_, num::read_parameters(dir / "params"));
  return m;
}

double tagging_accuracy_of(const TaggerModel& model, std::span<const Sentence> sentences) {
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

TaggerModel train_tagger(std::span<const Sentence> train, std::span<const Sentence> dev,
                         const TaggerConfig& config, const TrainOptions& options,
                         const PretrainedEmbeddings* pretrained, TrainingReport* report,
                         std::vector<std::string> tagset) {
  if (train.empty()) throw std::invalid_argument("train_tagger: empty treebank");
  TaggerModel model = TaggerModel::build(config, std::move(tagset), train, pretrained, options.seed);
  std::vector<std::vector<std::size_t>> gold;
  for (const Sentence& s : train) gold.push_back(model.gold_indices(s));

  std::vector<num::Parameter*> params;
  for (auto& p : model.params().all()) {
    if (p.trainable) params.push_back(&p);
  }
  const std::span<const Sentence> selection = dev.empty() ? train : dev;
  return run_epochs(
      model, params, train.size(),
      [&](Graph& g, std::size_t i) {
        const auto forms = train[i].forms();
        return model.loss(g, model.forward(g, forms), gold[i]);
      },
      [&] {
        const double acc = tagging_accuracy_of(model, selection);
        return std::pair{acc, 0.0};
      },
      options, false, report);
}

}  // namespace stackparse
