#include "stackparse/vocab.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stackparse {

Vocab::Vocab(std::vector<std::string> items) {
  for (auto& s : items) add(s);
}

std::size_t Vocab::add(const std::string& item) {
  auto [it, inserted] = index_.try_emplace(item, items_.size());
  if (inserted) items_.push_back(item);
  return it->second;
}

std::optional<std::size_t> Vocab::find(std::string_view item) const {
  auto it = index_.find(std::string(item));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : items_) out << s << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (v.find(line)) throw std::runtime_error(path.string() + ": duplicate entry '" + line + "'");
    v.add(line);
  }
  return v;
}

PretrainedEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  PretrainedEmbeddings emb;
  std::vector<num::Real> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<num::Real> row;
    std::string tok;
    while (ls >> tok) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
      row.push_back(static_cast<num::Real>(v));
    }
    if (dim == 0) dim = row.size();
    if (row.size() != dim || dim == 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values");
    }
    if (emb.words.find(word)) continue;
    emb.words.add(word);
    values.insert(values.end(), row.begin(), row.end());
  }
  emb.vectors = num::Tensor({emb.words.size(), dim}, std::move(values));
  return emb;
}

void save_embeddings(const std::filesystem::path& path, const PretrainedEmbeddings& emb) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < emb.words.size(); ++i) {
    out << emb.words[i];
    for (num::Real v : emb.vectors.row(i)) out << ' ' << v;
    out << '\n';
  }
}

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xf0 && c < 0xf8) len = 4;
    else if (c >= 0xe0) len = c < 0xf0 ? 3 : 1;
    else if (c >= 0xc0) len = 2;
    if (i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xc0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace stackparse
