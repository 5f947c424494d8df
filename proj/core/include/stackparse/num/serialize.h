#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>

#include "stackparse/num/parameter.h"

namespace stackparse::num {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter store written under a name prefix ("base/", "target/", ...).
struct ParamSection {
  std::string prefix;
  const ParameterStore* store;
};

// Writes `<stem>.manifest` (lines "name shape dtype offset", offset in bytes)
// and `<stem>.bin` (little-endian row-major values).
void save_parameters(const std::filesystem::path& stem, std::span<const ParamSection> sections);
void save_parameters(const std::filesystem::path& stem, const ParameterStore& store);

std::map<std::string, Tensor> read_parameters(const std::filesystem::path& stem);

// Copies every parameter of `store` from `tensors[prefix + name]`; missing
// names or shape mismatches are errors.
void assign_parameters(ParameterStore& store, const std::map<std::string, Tensor>& tensors,
                       const std::string& prefix = "");

}  // namespace stackparse::num
