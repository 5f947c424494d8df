#include "stackparse/num/serialize.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace stackparse::num {
namespace {

constexpr const char* kDtype = sizeof(Real) == 8 ? "f64" : "f32";

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

void put_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

[[maybe_unused]] void put_le(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<float>(bits);
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) shape.push_back(std::stoul(part));
  return shape;
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = with_suffix(path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void save_parameters(const std::filesystem::path& stem, std::span<const ParamSection> sections) {
  std::string manifest;
  std::string blob;
  for (const ParamSection& section : sections) {
    for (const Parameter& p : section.store->all()) {
      manifest += section.prefix + p.name + " " + p.value.shape_string() + " " + kDtype + " " +
                  std::to_string(blob.size()) + "\n";
      for (Real v : p.value.data()) put_le(blob, v);
    }
  }
  write_atomically(with_suffix(stem, ".bin"), blob);
  write_atomically(with_suffix(stem, ".manifest"), manifest);
}

void save_parameters(const std::filesystem::path& stem, const ParameterStore& store) {
  const ParamSection section{"", &store};
  save_parameters(stem, std::span<const ParamSection>(&section, 1));
}

std::map<std::string, Tensor> read_parameters(const std::filesystem::path& stem) {
  const auto manifest_path = with_suffix(stem, ".manifest");
  const auto blob_path = with_suffix(stem, ".bin");
  std::ifstream manifest(manifest_path);
  if (!manifest) throw FormatError("cannot open " + manifest_path.string());
  std::ifstream blob_in(blob_path, std::ios::binary);
  if (!blob_in) throw FormatError("cannot open " + blob_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(blob_in)),
                                  std::istreambuf_iterator<char>());

  std::map<std::string, Tensor> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, shape_s, dtype;
    std::size_t offset = 0;
    if (!(ls >> name >> shape_s >> dtype >> offset)) {
      throw FormatError(manifest_path.string() + ":" + std::to_string(line_no) + ": malformed entry");
    }
    const auto shape = parse_shape(shape_s);
    const std::size_t n = shape_product(shape);
    const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
    if (width == 0) throw FormatError("unknown dtype " + dtype + " for " + name);
    if (offset + n * width > blob.size()) throw FormatError("blob too short for " + name);
    std::vector<Real> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* p = blob.data() + offset + i * width;
      values[i] = width == 8 ? static_cast<Real>(get_f64(p)) : static_cast<Real>(get_f32(p));
    }
    out.emplace(name, Tensor(shape, std::move(values)));
  }
  return out;
}

void assign_parameters(ParameterStore& store, const std::map<std::string, Tensor>& tensors,
                       const std::string& prefix) {
  for (Parameter& p : store.all()) {
    auto it = tensors.find(prefix + p.name);
    if (it == tensors.end()) throw FormatError("missing parameter " + prefix + p.name);
    if (it->second.shape() != p.value.shape()) {
      throw FormatError("shape mismatch for " + prefix + p.name + ": stored " +
                        it->second.shape_string() + ", model " + p.value.shape_string());
    }
    p.value = it->second;
  }
}

}  // namespace stackparse::num
