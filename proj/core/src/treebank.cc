#include "stackparse/treebank.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "stackparse/num/rng.h"

namespace stackparse {
namespace {

const std::vector<std::string> kUniversalPos = {
    "ADJ", "ADP",  "ADV",   "AUX",   "CONJ",  "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

const std::vector<std::string> kUniversalDeprels = {
    "acl",        "acl:relcl",  "advcl",     "advmod",       "amod",      "appos",
    "aux",        "auxpass",    "case",      "cc",           "cc:preconj", "ccomp",
    "compound",   "compound:prt", "conj",    "cop",          "csubj",     "csubjpass",
    "dep",        "det",        "det:predet", "discourse",   "dislocated", "dobj",
    "expl",       "foreign",    "goeswith",  "iobj",         "list",      "mark",
    "mwe",        "name",       "neg",       "nmod",         "nmod:npmod", "nmod:poss",
    "nmod:tmod",  "nsubj",      "nsubjpass", "nummod",       "parataxis", "punct",
    "remnant",    "reparandum", "root",      "vocative",     "xcomp"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::vector<std::string> parse_categories(std::string_view value) {
  std::vector<std::string> out;
  for (std::string_view part : split(value, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    std::string c(part);
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
  }
  return out;
}

struct PendingSentence {
  Sentence sentence;
  std::vector<std::size_t> lines;
};

void finish(PendingSentence& pending, std::vector<Sentence>& out) {
  if (pending.sentence.tokens.empty()) {
    pending = {};
    return;
  }
  const std::size_t n = pending.sentence.tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (pending.sentence.tokens[i].head > n) {
      throw ConlluError(pending.lines[i], "head " + std::to_string(pending.sentence.tokens[i].head) +
                                              " out of range for a " + std::to_string(n) +
                                              "-token sentence");
    }
  }
  out.push_back(std::move(pending.sentence));
  pending = {};
}

std::string field(const std::string& s) { return s.empty() ? "_" : s; }

}  // namespace

std::vector<std::string> Sentence::forms() const {
  std::vector<std::string> out;
  for (const Token& t : tokens) out.push_back(t.form);
  return out;
}

std::vector<std::string> Sentence::tags() const {
  std::vector<std::string> out;
  for (const Token& t : tokens) out.push_back(t.upos);
  return out;
}

std::vector<std::size_t> Sentence::heads() const {
  std::vector<std::size_t> out;
  for (const Token& t : tokens) out.push_back(t.head);
  return out;
}

std::vector<std::string> Sentence::deprels() const {
  std::vector<std::string> out;
  for (const Token& t : tokens) out.push_back(t.deprel);
  return out;
}

LabelInventory::LabelInventory(std::vector<std::string> pos_tags, std::vector<std::string> deprels)
    : pos_tags_(std::move(pos_tags)), deprels_(std::move(deprels)) {
  if (deprels_.empty()) throw std::invalid_argument("label inventory needs at least one deprel");
}

LabelInventory LabelInventory::universal() { return LabelInventory(kUniversalPos, kUniversalDeprels); }

LabelInventory LabelInventory::from_treebank(std::span<const Sentence> sentences) {
  std::set<std::string> pos, rel;
  for (const Sentence& s : sentences) {
    for (const Token& t : s.tokens) {
      pos.insert(t.upos);
      rel.insert(t.deprel);
    }
  }
  return LabelInventory({pos.begin(), pos.end()}, {rel.begin(), rel.end()});
}

std::optional<std::size_t> LabelInventory::pos_index(std::string_view tag) const {
  for (std::size_t i = 0; i < pos_tags_.size(); ++i) {
    if (pos_tags_[i] == tag) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> LabelInventory::deprel_index(std::string_view label) const {
  for (std::size_t i = 0; i < deprels_.size(); ++i) {
    if (deprels_[i] == label) return i;
  }
  return std::nullopt;
}

ConlluError::ConlluError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), detail_(message) {}

std::vector<Sentence> parse_conllu(std::string_view text) {
  std::vector<Sentence> out;
  PendingSentence pending;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (trim(line).empty()) {
      finish(pending, out);
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      std::string_view body = trim(line.substr(1));
      constexpr std::string_view kKey = "categories";
      if (body.starts_with(kKey)) {
        std::string_view rest = trim(body.substr(kKey.size()));
        if (!rest.empty() && rest.front() == '=') {
          pending.sentence.categories = parse_categories(rest.substr(1));
        }
      }
      if (end == text.size()) break;
      continue;
    }

    auto cols = split(line, '\t');
    if (cols.size() != 10) {
      throw ConlluError(line_no, "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    }
    if (cols[0].find('-') != std::string_view::npos || cols[0].find('.') != std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    auto id = parse_index(cols[0]);
    if (!id || *id == 0) throw ConlluError(line_no, "malformed token id '" + std::string(cols[0]) + "'");
    if (*id != pending.sentence.tokens.size() + 1) {
      throw ConlluError(line_no, "token id " + std::to_string(*id) + " out of sequence");
    }
    auto head = parse_index(cols[6]);
    if (!head) throw ConlluError(line_no, "malformed head '" + std::string(cols[6]) + "'");
    if (*head == *id) throw ConlluError(line_no, "token " + std::to_string(*id) + " heads itself");
    if (cols[1].empty()) throw ConlluError(line_no, "empty form");

    Token t;
    t.index = *id;
    t.form = std::string(cols[1]);
    t.upos = std::string(cols[3]);
    t.head = *head;
    t.deprel = std::string(cols[7]);
    pending.sentence.tokens.push_back(std::move(t));
    pending.lines.push_back(line_no);
    if (end == text.size()) break;
  }
  finish(pending, out);
  return out;
}

std::vector<Sentence> read_conllu(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_conllu(buffer.str());
  } catch (const ConlluError& e) {
    throw ConlluError(e.line(), e.detail() + " in " + path.string());
  }
}

std::string write_conllu(std::span<const Sentence> sentences) {
  std::string out;
  for (const Sentence& s : sentences) {
    if (!s.categories.empty()) {
      out += "# categories = ";
      for (std::size_t i = 0; i < s.categories.size(); ++i) {
        if (i) out += ',';
        out += s.categories[i];
      }
      out += '\n';
    }
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      if (t.index != i + 1 || t.form.empty() || t.head == t.index || t.head > s.tokens.size()) {
        throw std::invalid_argument("token " + std::to_string(i + 1) + " violates token invariants");
      }
      out += std::to_string(t.index);
      out += '\t' + t.form + "\t_\t" + field(t.upos) + "\t_\t_\t" + std::to_string(t.head) + '\t' +
             field(t.deprel) + "\t_\t_\n";
    }
    out += '\n';
  }
  return out;
}

void write_conllu(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  const std::string text = write_conllu(sentences);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kUnknownPos: return "unknown-pos";
    case ViolationKind::kUnknownDeprel: return "unknown-deprel";
    case ViolationKind::kCycle: return "cycle";
    case ViolationKind::kUnreachable: return "unreachable";
    case ViolationKind::kMultiRoot: return "multi-root";
    case ViolationKind::kHeadOutOfRange: return "head-out-of-range";
  }
  return "unknown";
}

std::vector<Violation> validate(const Sentence& sentence, const LabelInventory& inventory) {
  std::vector<Violation> out;
  const std::size_t n = sentence.tokens.size();

  for (const Token& t : sentence.tokens) {
    if (!inventory.has_pos(t.upos)) {
      out.push_back({ViolationKind::kUnknownPos, t.index, "unknown POS tag '" + t.upos + "'"});
    }
    if (!inventory.has_deprel(t.deprel)) {
      out.push_back({ViolationKind::kUnknownDeprel, t.index, "unknown dependency label '" + t.deprel + "'"});
    }
    if (t.head > n) {
      out.push_back({ViolationKind::kHeadOutOfRange, t.index,
                     "head " + std::to_string(t.head) + " exceeds sentence length " + std::to_string(n)});
    }
  }

  std::size_t roots = 0;
  for (const Token& t : sentence.tokens) {
    if (t.head != 0) continue;
    if (++roots == 2) {
      out.push_back({ViolationKind::kMultiRoot, t.index, "more than one token attaches to the root"});
    }
  }

  // state: 0 unvisited, 1 on current path, 2 reaches root, 3 does not.
  std::vector<int> state(n + 1, 0);
  std::vector<bool> on_cycle(n + 1, false);
  state[0] = 2;
  for (std::size_t start = 1; start <= n; ++start) {
    if (state[start] != 0) continue;
    std::vector<std::size_t> path;
    std::size_t v = start;
    int verdict = 0;
    while (true) {
      if (v > n) {
        verdict = 3;
        break;
      }
      if (state[v] == 2 || state[v] == 3) {
        verdict = state[v];
        break;
      }
      if (state[v] == 1) {
        // Found a new cycle through v.
        std::size_t smallest = v;
        std::size_t u = v;
        std::size_t length = 0;
        do {
          on_cycle[u] = true;
          smallest = std::min(smallest, u);
          u = sentence.tokens[u - 1].head;
          ++length;
        } while (u != v);
        out.push_back({ViolationKind::kCycle, smallest,
                       "cycle of length " + std::to_string(length) + " through token " +
                           std::to_string(smallest)});
        verdict = 3;
        break;
      }
      state[v] = 1;
      path.push_back(v);
      v = sentence.tokens[v - 1].head;
    }
    for (std::size_t u : path) state[u] = verdict;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    if (state[i] == 3 && !on_cycle[i] && sentence.tokens[i - 1].head <= n) {
      out.push_back({ViolationKind::kUnreachable, i, "token " + std::to_string(i) + " is not reachable from the root"});
    }
  }
  return out;
}

bool is_tree(std::span<const std::size_t> heads) {
  const std::size_t n = heads.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (heads[i] > n || heads[i] == i + 1) return false;
  }
  std::vector<int> state(n + 1, 0);
  state[0] = 2;
  for (std::size_t start = 1; start <= n; ++start) {
    std::vector<std::size_t> path;
    std::size_t v = start;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = heads[v - 1];
    }
    if (state[v] == 1) return false;
    for (std::size_t u : path) state[u] = 2;
  }
  return true;
}

CorpusSplit split_corpus(std::span<const Sentence> sentences, std::array<double, 3> ratios,
                         std::uint64_t seed) {
  if (sentences.empty()) throw std::invalid_argument("split_corpus: empty corpus");
  double total = 0;
  for (double r : ratios) {
    if (r < 0 || r > 1) throw std::invalid_argument("split_corpus: ratio outside [0, 1]");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split_corpus: ratios must sum to 1");

  const std::size_t n = sentences.size();
  const auto n_dev = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
  if (n_dev + n_test > n) throw std::invalid_argument("split_corpus: rounding exceeds corpus size");
  const std::size_t n_train = n - n_dev - n_test;

  auto order = num::shuffled_indices(n, seed);
  std::vector<int> part(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    part[order[i]] = i < n_train ? 0 : (i < n_train + n_dev ? 1 : 2);
  }
  CorpusSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (part[i] == 0 ? split.train : part[i] == 1 ? split.dev : split.test).push_back(sentences[i]);
  }
  return split;
}

}  // namespace stackparse
