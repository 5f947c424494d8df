#include "stackparse/num/graph.h"

#include <string>

namespace stackparse::num {

Expr Graph::push(Node node, const char* op) {
  if (!node.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  nodes_.push_back(std::move(node));
  return Expr{this, static_cast<int>(nodes_.size() - 1)};
}

Expr Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Expr Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Expr{this, it->second};
  }
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = p.trainable;
  Expr e = push(std::move(n), "param");
  param_nodes_.emplace(&p, e.id);
  return e;
}

Expr Graph::lookup(Parameter& p, std::size_t row) {
  if (row >= p.value.rows()) {
    throw ShapeError("lookup row " + std::to_string(row) + " out of range for " + p.name);
  }
  Node n;
  auto r = p.value.row(row);
  n.value = Tensor({r.size(), 1}, std::vector<Real>(r.begin(), r.end()));
  n.param = &p;
  n.lookup_row = static_cast<std::ptrdiff_t>(row);
  n.requires_grad = p.trainable;
  return push(std::move(n), "lookup");
}

Expr Graph::add(Tensor value, std::initializer_list<Expr> inputs, Backward backward,
                const char* op) {
  return add(std::move(value), std::span<const Expr>(inputs.begin(), inputs.size()),
             std::move(backward), op);
}

Expr Graph::add(Tensor value, std::span<const Expr> inputs, Backward backward, const char* op) {
  Node n;
  n.value = std::move(value);
  for (const Expr& in : inputs) {
    if (nodes_[in.id].requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n), op);
}

Tensor& Graph::grad(int id) {
  auto& g = nodes_[id].grad;
  if (!g.allocated) {
    g.t = Tensor(nodes_[id].value.shape());
    g.allocated = true;
  }
  return g.t;
}

void Graph::backward(Expr loss) {
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss");
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] = Real(1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.grad.allocated) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr && n.param->trainable) {
      const Tensor& g = n.grad.t;
      if (n.lookup_row >= 0) {
        auto dst = n.param->grad.row(static_cast<std::size_t>(n.lookup_row));
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
      } else {
        auto dst = n.param->grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
      }
    }
  }
}

}  // namespace stackparse::num
