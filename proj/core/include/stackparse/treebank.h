#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stackparse {

// One basic-layer CoNLL-U token. `head` is 0 for the artificial root.
struct Token {
  std::size_t index = 0;
  std::string form;
  std::string upos;
  std::size_t head = 0;
  std::string deprel;

  friend bool operator==(const Token&, const Token&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  // Grammar-category tags, carried in a "# categories = a,b" comment.
  std::vector<std::string> categories;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  std::vector<std::string> forms() const;
  std::vector<std::string> tags() const;
  std::vector<std::size_t> heads() const;
  std::vector<std::string> deprels() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

class LabelInventory {
 public:
  LabelInventory() = default;
  LabelInventory(std::vector<std::string> pos_tags, std::vector<std::string> deprels);

  // The 17 universal POS tags and the 47 English dependency labels of UD v1.
  static LabelInventory universal();
  // Every tag and label observed in `sentences`, sorted.
  static LabelInventory from_treebank(std::span<const Sentence> sentences);

  const std::vector<std::string>& pos_tags() const { return pos_tags_; }
  const std::vector<std::string>& deprels() const { return deprels_; }

  std::optional<std::size_t> pos_index(std::string_view tag) const;
  std::optional<std::size_t> deprel_index(std::string_view label) const;
  bool has_pos(std::string_view tag) const { return pos_index(tag).has_value(); }
  bool has_deprel(std::string_view label) const { return deprel_index(label).has_value(); }

 private:
  std::vector<std::string> pos_tags_;
  std::vector<std::string> deprels_;
};

class ConlluError : public std::runtime_error {
 public:
  ConlluError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

// Parses CoNLL-U text. Multiword-token ranges ("3-4") and empty nodes
// ("5.1") are skipped. Throws ConlluError naming the offending line.
std::vector<Sentence> parse_conllu(std::string_view text);
std::vector<Sentence> read_conllu(const std::filesystem::path& path);

// Serializes sentences; columns that are not modelled are written as '_'.
// Throws std::invalid_argument when a token breaks the Token invariants.
std::string write_conllu(std::span<const Sentence> sentences);
void write_conllu(const std::filesystem::path& path, std::span<const Sentence> sentences);

enum class ViolationKind {
  kUnknownPos,
  kUnknownDeprel,
  kCycle,
  kUnreachable,
  kMultiRoot,
  kHeadOutOfRange,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t token;  // 1-based token index
  std::string message;

  bool is_warning() const { return kind == ViolationKind::kMultiRoot; }
};

std::vector<Violation> validate(const Sentence& sentence, const LabelInventory& inventory);

// True when the heads form a tree rooted at node 0 (multiple root children
// allowed).
bool is_tree(std::span<const std::size_t> heads);

struct CorpusSplit {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
};

// Seeded random partition. dev and test receive round(N * ratio) sentences,
// train the remainder; each part keeps corpus order.
CorpusSplit split_corpus(std::span<const Sentence> sentences, std::array<double, 3> ratios,
                         std::uint64_t seed);

}  // namespace stackparse
