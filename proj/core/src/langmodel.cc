#include "stackparse/langmodel.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace stackparse {
namespace {

constexpr std::uint32_t kUnkId = 0;
constexpr std::uint32_t kBosId = 1;
constexpr std::uint32_t kEosId = 2;

std::array<double, 3> estimate_discounts(const std::map<std::vector<std::uint32_t>, double>& counts) {
  std::array<double, 5> t{};  // t[k] for k = 1..4
  for (const auto& [key, c] : counts) {
    const auto k = static_cast<std::size_t>(std::llround(c));
    if (k >= 1 && k <= 4) t[k] += 1;
  }
  const double y = t[1] + 2 * t[2] > 0 ? t[1] / (t[1] + 2 * t[2]) : 0.0;
  std::array<double, 3> d{};
  for (std::size_t k = 1; k <= 3; ++k) {
    const double ratio = t[k] > 0 ? t[k + 1] / t[k] : 1.0;
    const double v = static_cast<double>(k) - static_cast<double>(k + 1) * y * ratio;
    d[k - 1] = std::clamp(v, 0.0, static_cast<double>(k));
  }
  return d;
}

}  // namespace

NgramLM NgramLM::train(std::span<const TokenSeq> corpus, std::size_t order) {
  if (corpus.empty()) throw std::invalid_argument("language model needs a non-empty corpus");
  if (order == 0) throw std::invalid_argument("language model order must be >= 1");
  NgramLM lm;
  lm.order_ = order;
  lm.words_.add(kUnk);
  lm.words_.add(kBos);
  lm.words_.add(kEos);

  std::vector<std::map<Key, double>> raw(order);
  for (const TokenSeq& sentence : corpus) {
    Key ids{kBosId};
    for (const auto& w : sentence) ids.push_back(static_cast<std::uint32_t>(lm.words_.add(w)));
    ids.push_back(kEosId);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      for (std::size_t n = 1; n <= order && n <= i + 1; ++n) {
        raw[n - 1][Key(ids.begin() + static_cast<std::ptrdiff_t>(i + 1 - n), ids.begin() + static_cast<std::ptrdiff_t>(i + 1))] += 1;
      }
    }
  }

  lm.counts_.assign(order, {});
  lm.counts_[order - 1] = raw[order - 1];
  for (std::size_t n = 1; n < order; ++n) {
    auto& adjusted = lm.counts_[n - 1];
    for (const auto& [key, c] : raw[n - 1]) {
      if (key.front() == kBosId) adjusted[key] = c;
    }
    for (const auto& [key, c] : raw[n]) {
      if (c > 0) adjusted[Key(key.begin() + 1, key.end())] += 1;
    }
  }
  lm.finalize();
  return lm;
}

void NgramLM::finalize() {
  context_.assign(order_, {});
  discount_.assign(order_, {});
  for (std::size_t n = 1; n <= order_; ++n) {
    discount_[n - 1] = estimate_discounts(counts_[n - 1]);
    for (const auto& [key, c] : counts_[n - 1]) {
      ContextStats& s = context_[n - 1][Key(key.begin(), key.end() - 1)];
      s.total += c;
      const auto k = static_cast<std::size_t>(std::llround(c));
      ++s.n[std::min<std::size_t>(k, 3) - 1];
    }
  }
}

std::uint32_t NgramLM::id(const std::string& word) const {
  return static_cast<std::uint32_t>(words_.find(word).value_or(kUnkId));
}

std::vector<std::string> NgramLM::vocabulary() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (i != kBosId) out.push_back(words_[i]);
  }
  return out;
}

double NgramLM::prob_ids(std::span<const std::uint32_t> context, std::uint32_t word) const {
  const double uniform = 1.0 / static_cast<double>(words_.size() - 1);
  double p = uniform;
  // Interpolate upward from the unigram level.
  for (std::size_t n = 1; n <= order_ && n <= context.size() + 1; ++n) {
    Key h(context.end() - static_cast<std::ptrdiff_t>(n - 1), context.end());
    auto ctx = context_[n - 1].find(h);
    if (ctx == context_[n - 1].end()) break;
    const ContextStats& s = ctx->second;
    const auto& d = discount_[n - 1];
    h.push_back(word);
    double c = 0;
    if (auto it = counts_[n - 1].find(h); it != counts_[n - 1].end()) c = it->second;
    double discounted = 0;
    if (c > 0) {
      const auto k = static_cast<std::size_t>(std::llround(c));
      discounted = std::max(c - d[std::min<std::size_t>(k, 3) - 1], 0.0);
    }
    const double gamma = (d[0] * static_cast<double>(s.n[0]) + d[1] * static_cast<double>(s.n[1]) +
                          d[2] * static_cast<double>(s.n[2])) /
                         s.total;
    p = discounted / s.total + gamma * p;
  }
  return p;
}

double NgramLM::prob(std::span<const std::string> context, const std::string& word) const {
  if (word == kBos) throw std::invalid_argument("<s> is never predicted");
  std::vector<std::uint32_t> ids;
  const std::size_t keep = std::min(context.size(), order_ == 0 ? 0 : order_ - 1);
  for (std::size_t i = context.size() - keep; i < context.size(); ++i) ids.push_back(id(context[i]));
  return prob_ids(ids, id(word));
}

std::vector<TokenSeq> NgramLM::contexts() const {
  std::vector<TokenSeq> out;
  for (std::size_t n = 1; n <= order_; ++n) {
    for (const auto& [key, stats] : context_[n - 1]) {
      TokenSeq words;
      for (auto i : key) words.push_back(words_[i]);
      out.push_back(std::move(words));
    }
  }
  return out;
}

void NgramLM::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << "order\t" << order_ << '\n';
    out << std::setprecision(17);
    for (std::size_t n = 1; n <= order_; ++n) {
      for (const auto& [key, c] : counts_[n - 1]) {
        out << n << '\t' << c << '\t';
        for (std::size_t i = 0; i < key.size(); ++i) out << (i ? " " : "") << words_[key[i]];
        out << '\n';
      }
    }
  }
  std::filesystem::rename(tmp, path);
}

NgramLM NgramLM::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open language model " + path.string());
  NgramLM lm;
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("order\t")) {
    throw std::runtime_error(path.string() + ": missing order header");
  }
  lm.order_ = std::stoul(line.substr(6));
  if (lm.order_ == 0) throw std::runtime_error(path.string() + ": order must be >= 1");
  lm.words_.add(kUnk);
  lm.words_.add(kBos);
  lm.words_.add(kEos);
  lm.counts_.assign(lm.order_, {});
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::size_t n = 0;
    double c = 0;
    if (!(fields >> n >> c) || n == 0 || n > lm.order_) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed n-gram line");
    }
    const auto second_tab = line.find('\t', line.find('\t') + 1);
    const TokenSeq words = split_tokens(std::string_view(line).substr(second_tab + 1));
    if (words.size() != n) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": n-gram length mismatch");
    }
    Key key;
    for (const auto& w : words) key.push_back(static_cast<std::uint32_t>(lm.words_.add(w)));
    lm.counts_[n - 1][key] = c;
  }
  lm.finalize();
  return lm;
}

double sentence_logprob(const NgramLM& lm, std::span<const std::string> tokens) {
  std::vector<std::string> history{NgramLM::kBos};
  double total = 0;
  for (const auto& w : tokens) {
    total += std::log10(lm.prob(history, w));
    history.push_back(w);
  }
  total += std::log10(lm.prob(history, NgramLM::kEos));
  return total;
}

double perplexity(const NgramLM& lm, std::span<const TokenSeq> sentences) {
  double total = 0;
  double events = 0;
  for (const auto& s : sentences) {
    total += sentence_logprob(lm, s);
    events += static_cast<double>(s.size() + 1);
  }
  return events == 0 ? 1.0 : std::pow(10.0, -total / events);
}

std::vector<SelectionRecord> rank_by_divergence(const NgramLM& lm, std::span<const TokenSeq> sentences,
                                                const RankOptions& options) {
  std::vector<SelectionRecord> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const TokenSeq& s = sentences[i];
    if (s.size() < options.min_length || s.size() > options.max_length) continue;
    SelectionRecord r;
    r.index = i;
    for (std::size_t k = 0; k < s.size(); ++k) r.text += (k ? " " : "") + s[k];
    r.length = s.size();
    r.total = sentence_logprob(lm, s);
    const double divisor = static_cast<double>(s.size() + (options.count_end_token ? 1 : 0));
    r.normalized = divisor > 0 ? r.total / divisor : r.total;
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SelectionRecord& a, const SelectionRecord& b) { return a.normalized < b.normalized; });
  return out;
}

std::vector<std::vector<std::string>> match_lexicon(std::span<const TokenSeq> sentences,
                                                    std::span<const std::string> lexicon) {
  std::vector<TokenSeq> terms;
  for (const auto& t : lexicon) terms.push_back(split_tokens(ascii_lower(t)));
  std::vector<std::vector<std::string>> out;
  for (const TokenSeq& s : sentences) {
    TokenSeq lower;
    for (const auto& w : s) lower.push_back(ascii_lower(w));
    std::vector<std::string> hits;
    for (std::size_t start = 0; start < lower.size(); ++start) {
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const TokenSeq& term = terms[t];
        if (term.empty() || start + term.size() > lower.size()) continue;
        if (!std::equal(term.begin(), term.end(), lower.begin() + static_cast<std::ptrdiff_t>(start))) continue;
        std::string joined;
        for (std::size_t k = 0; k < term.size(); ++k) joined += (k ? " " : "") + term[k];
        if (std::find(hits.begin(), hits.end(), joined) == hits.end()) hits.push_back(joined);
      }
    }
    out.push_back(std::move(hits));
  }
  return out;
}

TokenSeq split_tokens(std::string_view line) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<TokenSeq> read_token_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<TokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    TokenSeq s = split_tokens(line);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> read_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open lexicon " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const TokenSeq words = split_tokens(line);
    if (words.empty()) continue;
    std::string term;
    for (std::size_t k = 0; k < words.size(); ++k) term += (k ? " " : "") + words[k];
    out.push_back(ascii_lower(term));
  }
  return out;
}

std::string format_selection(std::span<const SelectionRecord> records) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << i + 1 << '\t' << r.normalized << '\t' << r.total << '\t' << r.length << '\t';
    for (std::size_t k = 0; k < r.hits.size(); ++k) out << (k ? "," : "") << r.hits[k];
    out << '\t' << r.text << '\n';
  }
  return out.str();
}

}  // namespace stackparse
