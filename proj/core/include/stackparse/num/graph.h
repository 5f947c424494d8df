#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "stackparse/num/parameter.h"
#include "stackparse/num/rng.h"
#include "stackparse/num/tensor.h"

namespace stackparse::num {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Expr {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t size() const { return value().size(); }
};

// Reverse-mode autodiff tape. One graph is built per training example (or
// per inference call) and discarded afterwards. Single-threaded.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int self)>;

  explicit Graph(bool training = false, Rng* rng = nullptr) : training_(training), rng_(rng) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return training_; }
  Rng* rng() const { return rng_; }

  Expr constant(Tensor value);
  Expr scalar(Real v) { return constant(Tensor({1, 1}, v)); }

  // Whole parameter as a node; one node per parameter per graph.
  Expr param(Parameter& p);
  // One row of a parameter matrix as an (cols, 1) vector.
  Expr lookup(Parameter& p, std::size_t row);

  // Adds a computed node. `inputs` decide whether the node needs a gradient;
  // `backward` reads grad(self) and calls accumulate() on its inputs.
  Expr add(Tensor value, std::initializer_list<Expr> inputs, Backward backward, const char* op);
  Expr add(Tensor value, std::span<const Expr> inputs, Backward backward, const char* op);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& value(Expr e) const { return nodes_[e.id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node (allocated on first use).
  Tensor& grad(int id);
  bool has_grad(int id) const { return nodes_[id].grad.allocated; }

  // Runs backpropagation from a scalar node, accumulating into
  // Parameter::grad of every trainable parameter reached.
  void backward(Expr loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    struct {
      Tensor t;
      bool allocated = false;
    } grad;
    Backward backward;
    Parameter* param = nullptr;
    std::ptrdiff_t lookup_row = -1;
    bool requires_grad = false;
  };

  Expr push(Node node, const char* op);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool training_;
  Rng* rng_;
};

inline const Tensor& Expr::value() const { return graph->value(id); }

}  // namespace stackparse::num
