#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stackparse/num/tensor.h"

namespace stackparse {

// String <-> index map. Index = insertion order; files hold one entry per line.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> items);

  std::size_t add(const std::string& item);
  std::optional<std::size_t> find(std::string_view item) const;
  const std::string& operator[](std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.items_ == b.items_; }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Pretrained word vectors: one token per line followed by D decimal values.
struct PretrainedEmbeddings {
  Vocab words;
  num::Tensor vectors;  // (words.size() x dim)

  std::size_t dim() const { return words.size() == 0 ? 0 : vectors.cols(); }
};

PretrainedEmbeddings load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const PretrainedEmbeddings& emb);

// Splits UTF-8 text into code-point substrings; invalid bytes become
// single-byte items.
std::vector<std::string> utf8_chars(std::string_view text);
std::string ascii_lower(std::string_view text);

}  // namespace stackparse
