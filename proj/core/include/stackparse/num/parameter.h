#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "stackparse/num/tensor.h"

namespace stackparse::num {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.fill(Real(0)); }
};

using ParamId = std::size_t;

// Owns a model's parameters. Models refer to entries by ParamId so that a
// model (and its store) can be copied as a plain value.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor value, bool trainable = true);

  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }

  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }

  void zero_grad();
  std::size_t total_values() const;

 private:
  std::deque<Parameter> params_;
};

}  // namespace stackparse::num
