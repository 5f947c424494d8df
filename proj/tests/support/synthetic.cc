#include "synthetic.h"

#include <string>

namespace stackparse::fixtures {
namespace {

const std::vector<std::string> kDet = {"the", "a", "this", "every"};
const std::vector<std::string> kAdj = {"big", "small", "red", "old", "happy", "quiet"};
const std::vector<std::string> kNoun = {"dog", "cat", "man", "woman", "house", "car",
                                        "bird", "tree", "child", "book", "river", "song"};
const std::vector<std::string> kPropn = {"john", "mary", "lim", "ahmad"};
const std::vector<std::string> kVerb = {"sees", "likes", "eats", "finds", "takes", "reads", "carries"};
const std::vector<std::string> kAdp = {"in", "on", "near", "under"};
const std::vector<std::string> kAdv = {"quickly", "often", "today"};
const std::vector<std::string> kParticle = {"lah", "leh", "lor"};

class Builder {
 public:
  std::size_t add(const std::string& form, const char* upos, const char* deprel) {
    Token t;
    t.index = s_.tokens.size() + 1;
    t.form = form;
    t.upos = upos;
    t.deprel = deprel;
    s_.tokens.push_back(std::move(t));
    return s_.tokens.size();
  }
  void attach(std::size_t dep, std::size_t head) { s_.tokens[dep - 1].head = head; }
  Sentence take() { return std::move(s_); }

 private:
  Sentence s_;
};

const std::string& pick(num::Rng& rng, const std::vector<std::string>& words) {
  return words[rng.below(words.size())];
}

// Noun phrase; returns the head index. Dependents are attached to the head.
std::size_t noun_phrase(Builder& b, num::Rng& rng, const char* deprel) {
  if (rng.uniform() < 0.2) return b.add(pick(rng, kPropn), "PROPN", deprel);
  std::vector<std::size_t> deps;
  deps.push_back(b.add(pick(rng, kDet), "DET", "det"));
  if (rng.uniform() < 0.4) deps.push_back(b.add(pick(rng, kAdj), "ADJ", "amod"));
  const std::size_t head = b.add(pick(rng, kNoun), "NOUN", deprel);
  for (std::size_t d : deps) b.attach(d, head);
  if (rng.uniform() < 0.15) {
    const std::size_t cc = b.add("and", "CONJ", "cc");
    const std::size_t conj = b.add(pick(rng, kNoun), "NOUN", "conj");
    b.attach(cc, conj);
    b.attach(conj, head);
  }
  return head;
}

Sentence make_sentence(Grammar grammar, num::Rng& rng) {
  Builder b;
  std::vector<std::size_t> verb_deps;
  std::size_t verb = 0;
  verb_deps.push_back(noun_phrase(b, rng, "nsubj"));
  if (grammar == Grammar::kSource) {
    if (rng.uniform() < 0.2) verb_deps.push_back(b.add(pick(rng, kAdv), "ADV", "advmod"));
    verb = b.add(pick(rng, kVerb), "VERB", "root");
    verb_deps.push_back(noun_phrase(b, rng, "dobj"));
  } else {
    verb_deps.push_back(noun_phrase(b, rng, "dobj"));
    if (rng.uniform() < 0.2) verb_deps.push_back(b.add(pick(rng, kAdv), "ADV", "advmod"));
    verb = b.add(pick(rng, kVerb), "VERB", "root");
  }
  if (rng.uniform() < 0.35) {
    const std::size_t adp = b.add(pick(rng, kAdp), "ADP", "case");
    const std::size_t nmod = noun_phrase(b, rng, "nmod");
    b.attach(adp, nmod);
    verb_deps.push_back(nmod);
  }
  if (grammar == Grammar::kTarget && rng.uniform() < 0.4) {
    verb_deps.push_back(b.add(pick(rng, kParticle), "PART", "discourse"));
  }
  verb_deps.push_back(b.add(".", "PUNCT", "punct"));
  for (std::size_t d : verb_deps) b.attach(d, verb);
  b.attach(verb, 0);
  return b.take();
}

}  // namespace

std::vector<Sentence> generate_treebank(Grammar grammar, std::size_t count, std::uint64_t seed) {
  num::Rng rng(seed);
  std::vector<Sentence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_sentence(grammar, rng));
  return out;
}

Sentence random_tree(num::Rng& rng, std::size_t length, const LabelInventory& inventory) {
  static const std::vector<std::string> pieces = {"a", "b", "xy", "é", "ß", "中", "文", "z9", "-", "q"};
  Sentence s;
  // A random recursive tree: node i attaches to a random earlier node, then
  // positions are permuted.
  std::vector<std::size_t> parent(length + 1, 0);
  for (std::size_t i = 2; i <= length; ++i) parent[i] = rng.below(i - 1) + 1;
  std::vector<std::size_t> perm(length);
  for (std::size_t i = 0; i < length; ++i) perm[i] = i + 1;
  rng.shuffle(perm);
  std::vector<std::size_t> position(length + 1, 0);
  for (std::size_t i = 0; i < length; ++i) position[perm[i]] = i + 1;
  s.tokens.resize(length);
  for (std::size_t node = 1; node <= length; ++node) {
    Token& t = s.tokens[position[node] - 1];
    t.index = position[node];
    t.head = node == 1 ? 0 : position[parent[node]];
    const std::size_t len = 1 + rng.below(3);
    for (std::size_t k = 0; k < len; ++k) t.form += pieces[rng.below(pieces.size())];
    t.upos = inventory.pos_tags()[rng.below(inventory.pos_tags().size())];
    t.deprel = node == 1 ? "root" : inventory.deprels()[rng.below(inventory.deprels().size())];
  }
  if (rng.uniform() < 0.3) s.categories = {"topic-prominence"};
  if (rng.uniform() < 0.1) s.categories.push_back("copula-deletion");
  return s;
}

std::vector<Sentence> overfit_treebank() { return generate_treebank(Grammar::kTarget, 10, 4242); }

}  // namespace stackparse::fixtures
