#include "stackparse/parser.h"

#include <limits>
#include <stdexcept>

#include "stackparse/decode.h"
#include "stackparse/num/init.h"
#include "stackparse/num/ops.h"
#include "stackparse/num/serialize.h"

namespace stackparse {

using num::Expr;
using num::Graph;
using num::Real;
using num::Tensor;

KeyValues ParserConfig::to_key_values() const {
  return {{"word_dim", std::to_string(word_dim)}, {"tag_dim", std::to_string(tag_dim)},
          {"hidden", std::to_string(hidden)},     {"layers", std::to_string(layers)},
          {"arc_dim", std::to_string(arc_dim)},   {"rel_dim", std::to_string(rel_dim)},
          {"dropout", format_double(dropout)},    {"extra_dim", std::to_string(extra_dim)}};
}

ParserConfig ParserConfig::from_key_values(const KeyValues& kv) { return from_key_values(kv, ParserConfig{}); }

ParserConfig ParserConfig::from_key_values(const KeyValues& kv, const ParserConfig& defaults) {
  ParserConfig c = defaults;
  c.word_dim = get_size(kv, "word_dim", c.word_dim);
  c.tag_dim = get_size(kv, "tag_dim", c.tag_dim);
  c.hidden = get_size(kv, "hidden", c.hidden);
  c.layers = get_size(kv, "layers", c.layers);
  c.arc_dim = get_size(kv, "arc_dim", c.arc_dim);
  c.rel_dim = get_size(kv, "rel_dim", c.rel_dim);
  c.dropout = get_double(kv, "dropout", c.dropout);
  c.extra_dim = get_size(kv, "extra_dim", c.extra_dim);
  return c;
}

Decoder parse_decoder(const std::string& name) {
  if (name == "greedy") return Decoder::kGreedy;
  if (name == "mst") return Decoder::kMst;
  throw ConfigError("unknown decoder '" + name + "' (expected greedy or mst)");
}

const char* to_string(Decoder d) { return d == Decoder::kGreedy ? "greedy" : "mst"; }

ParserModel ParserModel::build(const ParserConfig& config, std::span<const Sentence> train,
                               const PretrainedEmbeddings* pretrained, std::uint64_t seed,
                               std::vector<std::string> tagset, std::vector<std::string> deprels) {
  if (config.layers == 0 || config.hidden == 0) throw std::invalid_argument("parser needs a bi-LSTM");
  if (deprels.empty()) throw std::invalid_argument("parser needs at least one deprel");
  ParserModel m;
  m.config_ = config;
  m.words_.add("<unk>");
  m.words_.add("<root>");
  m.tags_.add("<unk>");
  m.tags_.add("<root>");
  for (auto& t : tagset) m.tags_.add(t);
  m.rels_ = Vocab(std::move(deprels));
  for (const Sentence& s : train) {
    for (const Token& t : s.tokens) {
      m.words_.add(t.form);
      if (!t.upos.empty()) m.tags_.add(t.upos);
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

void ParserModel::create_parameters(std::uint64_t seed) {
  num::Rng rng(seed);
  const ParserConfig& c = config_;
  store_ = num::ParameterStore();
  if (pretrained_dim_ > 0) {
    pretrained_table_ = store_.add("pretrained", Tensor({pretrained_.size(), pretrained_dim_}), false);
  }
  word_table_ = store_.add("word_embed", pretrained_dim_ > 0
                                             ? Tensor({words_.size(), c.word_dim})
                                             : num::glorot_uniform(words_.size(), c.word_dim, rng));
  tag_table_ = store_.add("tag_embed", num::glorot_uniform(tags_.size(), c.tag_dim, rng));
  lstm_ = num::make_bilstm(store_, "lstm", num::LstmVariant::kCoupled, input_dim(), c.hidden, c.layers, rng);
  auto mlp = [&](const std::string& name, std::size_t out) {
    Mlp m;
    m.w = store_.add("mlp/" + name + "/w", num::glorot_uniform(out, 2 * c.hidden, rng));
    m.b = store_.add("mlp/" + name + "/b", Tensor::vector(out));
    return m;
  };
  arc_dep_ = mlp("arc_dep", c.arc_dim);
  arc_head_ = mlp("arc_head", c.arc_dim);
  rel_dep_ = mlp("rel_dep", c.rel_dim);
  rel_head_ = mlp("rel_head", c.rel_dim);
  u_arc_ = store_.add("biaffine/arc", num::glorot_uniform(c.arc_dim + 1, c.arc_dim, rng));
  u_rel_ = store_.add("biaffine/rel", num::glorot_uniform({rels_.size(), c.rel_dim + 1, c.rel_dim + 1},
                                                          c.rel_dim + 1, c.rel_dim + 1, rng));
}

std::size_t ParserModel::word_index(const std::string& form) const {
  if (auto i = words_.find(form)) return *i;
  if (auto i = words_.find(ascii_lower(form))) return *i;
  return 0;
}

std::size_t ParserModel::pretrained_index(const std::string& form) const {
  if (auto i = pretrained_.find(form)) return *i;
  if (auto i = pretrained_.find(ascii_lower(form))) return *i;
  return 0;
}

std::vector<Expr> ParserModel::embed(Graph& g, std::span<const std::string> forms,
                                     std::span<const std::string> tags, std::span<const Expr> extra) {
  const std::size_t n = forms.size();
  if (n == 0) throw std::invalid_argument("cannot parse an empty sentence");
  if (tags.size() != n) throw std::invalid_argument("parser needs one tag per token");
  if (config_.extra_dim > 0 && extra.size() != n + 1) {
    throw num::ShapeError("parser expects extra features for all " + std::to_string(n + 1) + " positions");
  }
  std::vector<Expr> out;
  out.reserve(n + 1);
  for (std::size_t p = 0; p <= n; ++p) {
    std::vector<Expr> parts;
    if (pretrained_dim_ > 0) {
      parts.push_back(g.lookup(store_[pretrained_table_], p == 0 ? 0 : pretrained_index(forms[p - 1])));
    }
    parts.push_back(g.lookup(store_[word_table_], p == 0 ? 1 : word_index(forms[p - 1])));
    parts.push_back(g.lookup(store_[tag_table_], p == 0 ? 1 : tags_.find(tags[p - 1]).value_or(0)));
    if (config_.extra_dim > 0) {
      if (extra[p].value().size() != config_.extra_dim) {
        throw num::ShapeError("extra feature dimension " + std::to_string(extra[p].value().size()) +
                              " != " + std::to_string(config_.extra_dim));
      }
      parts.push_back(extra[p]);
    }
    out.push_back(num::dropout(num::concat(parts), static_cast<Real>(config_.dropout)));
  }
  return out;
}

Expr ParserModel::apply(Graph& g, const Mlp& mlp, Expr x) {
  Expr h = num::leaky_relu(num::affine(g.param(store_[mlp.b]), g.param(store_[mlp.w]), x));
  return num::dropout(h, static_cast<Real>(config_.dropout));
}

ParserModel::Forward ParserModel::forward(Graph& g, std::span<const std::string> forms,
                                          std::span<const std::string> tags, std::span<const Expr> extra,
                                          const MlpFeatures* addend) {
  Forward fwd;
  const auto inputs = embed(g, forms, tags, extra);
  fwd.states = num::bilstm_encode(g, store_, lstm_, inputs, static_cast<Real>(config_.dropout));
  MlpFeatures& f = fwd.features;
  for (std::size_t p = 0; p < fwd.states.size(); ++p) {
    const Expr r = fwd.states[p];
    f.arc_dep.push_back(apply(g, arc_dep_, r));
    f.arc_head.push_back(apply(g, arc_head_, r));
    f.rel_dep.push_back(apply(g, rel_dep_, r));
    f.rel_head.push_back(apply(g, rel_head_, r));
    if (addend != nullptr) {
      f.arc_dep[p] = f.arc_dep[p] + addend->arc_dep[p];
      f.arc_head[p] = f.arc_head[p] + addend->arc_head[p];
      f.rel_dep[p] = f.rel_dep[p] + addend->rel_dep[p];
      f.rel_head[p] = f.rel_head[p] + addend->rel_head[p];
    }
  }
  fwd.arcs = arc_matrix(g, f);
  return fwd;
}

Expr ParserModel::arc_matrix(Graph& g, const MlpFeatures& f) {
  Expr one = g.scalar(1);
  std::vector<Expr> deps;
  deps.reserve(f.arc_dep.size());
  for (const Expr& d : f.arc_dep) deps.push_back(num::concat(std::vector<Expr>{d, one}));
  Expr dep_rows = num::rows(deps);            // (n+1) x (d+1)
  Expr head_rows = num::rows(f.arc_head);     // (n+1) x d
  return num::matmul_nt(num::matmul(dep_rows, g.param(store_[u_arc_])), head_rows);
}

Expr ParserModel::label_scores(Graph& g, const MlpFeatures& f, std::size_t dep, std::size_t head) {
  Expr one = g.scalar(1);
  Expr u = num::concat(std::vector<Expr>{f.rel_dep[dep], one});
  Expr v = num::concat(std::vector<Expr>{f.rel_head[head], one});
  return num::bilinear_labels(u, g.param(store_[u_rel_]), v);
}

Expr ParserModel::loss(Graph& g, const Forward& fwd, std::span<const std::size_t> heads,
                       std::span<const std::size_t> rels) {
  const std::size_t n = heads.size();
  std::vector<Expr> terms;
  terms.reserve(2 * n);
  for (std::size_t d = 1; d <= n; ++d) {
    Expr row = num::row(fwd.arcs, d);
    terms.push_back(num::pick_neg_log_softmax(row, heads[d - 1], static_cast<std::ptrdiff_t>(d)));
    terms.push_back(num::pick_neg_log_softmax(label_scores(g, fwd.features, d, heads[d - 1]), rels[d - 1]));
  }
  return num::scale(num::sum(terms), Real(1) / static_cast<Real>(n));
}

std::vector<std::size_t> ParserModel::gold_rels(const Sentence& s) const {
  std::vector<std::size_t> out;
  for (const Token& t : s.tokens) {
    auto idx = rels_.find(t.deprel);
    if (!idx) throw std::invalid_argument("deprel '" + t.deprel + "' is not in the parser's label inventory");
    out.push_back(*idx);
  }
  return out;
}

Tensor ParserModel::arc_values(const Expr& arcs) {
  Tensor s = arcs.value();
  const Real neg_inf = -std::numeric_limits<Real>::infinity();
  for (std::size_t h = 0; h < s.cols(); ++h) s.at(0, h) = neg_inf;
  for (std::size_t d = 0; d < s.rows(); ++d) s.at(d, d) = neg_inf;
  return s;
}

ParseResult ParserModel::decode(Graph& g, const Forward& fwd, Decoder decoder) {
  ParseResult r;
  r.arc_scores = arc_values(fwd.arcs);
  if (decoder == Decoder::kGreedy) {
    GreedyDecode gd = decode_greedy(r.arc_scores);
    r.heads = std::move(gd.heads);
    r.is_tree = gd.is_tree;
  } else {
    r.heads = decode_mst(r.arc_scores);
    r.is_tree = true;
  }
  for (std::size_t d = 1; d <= r.heads.size(); ++d) {
    const Tensor& s = label_scores(g, fwd.features, d, r.heads[d - 1]).value();
    std::size_t best = 0;
    for (std::size_t l = 1; l < s.size(); ++l) {
      if (s.data()[l] > s.data()[best]) best = l;
    }
    r.deprels.push_back(rels_[best]);
  }
  return r;
}

Tensor ParserModel::score_arcs(std::span<const std::string> forms, std::span<const std::string> tags) const {
  auto& self = const_cast<ParserModel&>(*this);
  Graph g(false);
  return arc_values(self.forward(g, forms, tags).arcs);
}

ParseResult ParserModel::parse(std::span<const std::string> forms, std::span<const std::string> tags,
                               Decoder decoder) const {
  // Inference graphs only read parameter values.
  auto& self = const_cast<ParserModel&>(*this);
  Graph g(false);
  const Forward fwd = self.forward(g, forms, tags);
  return self.decode(g, fwd, decoder);
}

ParseResult ParserModel::parse(const Sentence& sentence, Decoder decoder) const {
  const auto forms = sentence.forms();
  const auto tags = sentence.tags();
  return parse(forms, tags, decoder);
}

std::vector<std::string> ParserModel::feature_layer_names() const {
  std::vector<std::string> out;
  for (const auto& p : store_.all()) {
    if (p.name.starts_with("lstm/") || p.name.starts_with("mlp/")) out.push_back(p.name);
  }
  return out;
}

std::vector<std::string> ParserModel::input_layer_names() const { return {"word_embed", "tag_embed"}; }

void ParserModel::save_structure(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  KeyValues kv = config_.to_key_values();
  kv["pretrained_dim"] = std::to_string(pretrained_dim_);
  write_key_values(dir / "model.cfg", kv);
  words_.save(dir / "words.vocab");
  tags_.save(dir / "tags.vocab");
  pretrained_.save(dir / "pretrained.vocab");
  rels_.save(dir / "deprels.vocab");
}

ParserModel ParserModel::load_structure(const std::filesystem::path& dir) {
  const KeyValues kv = read_key_values(dir / "model.cfg");
  ParserModel m;
  m.config_ = ParserConfig::from_key_values(kv);
  m.pretrained_dim_ = get_size(kv, "pretrained_dim", 0);
  m.words_ = Vocab::load(dir / "words.vocab");
  m.tags_ = Vocab::load(dir / "tags.vocab");
  m.pretrained_ = Vocab::load(dir / "pretrained.vocab");
  m.rels_ = Vocab::load(dir / "deprels.vocab");
  m.create_parameters(0);
  return m;
}

void ParserModel::save(const std::filesystem::path& dir) const {
  save_structure(dir);
  num::save_parameters(dir / "params", store_);
}

ParserModel ParserModel::load(const std::filesystem::path& dir) {
  ParserModel m = load_structure(dir);
  num::assign_parameters(m.store_, num::read_parameters(dir / "params"));
  return m;
}

std::pair<double, double> attachment_of(const ParserModel& model, std::span<const Sentence> sentences,
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

namespace {

void check_trainable(const Sentence& s, std::size_t index) {
  const auto heads = s.heads();
  if (s.size() == 0 || !is_tree(heads)) {
    throw std::invalid_argument("training sentence " + std::to_string(index + 1) +
                                " does not carry a valid dependency tree");
  }
}

}  // namespace

ParserModel train_parser(std::span<const Sentence> train, std::span<const Sentence> dev,
                         const ParserConfig& config, const TrainOptions& options,
                         const PretrainedEmbeddings* pretrained, TrainingReport* report) {
  if (train.empty()) throw std::invalid_argument("train_parser: empty treebank");
  for (std::size_t i = 0; i < train.size(); ++i) check_trainable(train[i], i);
  ParserModel model = ParserModel::build(config, train, pretrained, options.seed);
  std::vector<std::vector<std::size_t>> heads, rels;
  for (const Sentence& s : train) {
    heads.push_back(s.heads());
    rels.push_back(model.gold_rels(s));
  }
  std::vector<num::Parameter*> params;
  for (auto& p : model.params().all()) {
    if (p.trainable) params.push_back(&p);
  }
  const std::span<const Sentence> selection = dev.empty() ? train : dev;
  return run_epochs(
      model, params, train.size(),
      [&](Graph& g, std::size_t i) {
        const auto forms = train[i].forms();
        const auto tags = train[i].tags();
        return model.loss(g, model.forward(g, forms, tags), heads[i], rels[i]);
      },
      [&] { return attachment_of(model, selection); }, options, true, report);
}

Sentence with_parse(Sentence sentence, const ParseResult& result) {
  if (result.heads.size() != sentence.size()) throw std::invalid_argument("parse length mismatch");
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    sentence.tokens[i].head = result.heads[i];
    sentence.tokens[i].deprel = result.deprels[i];
  }
  return sentence;
}

}  // namespace stackparse
