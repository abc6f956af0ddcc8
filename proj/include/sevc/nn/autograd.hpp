#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sevc/nn/tensor.hpp"

namespace sevc::nn {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the dynamic reverse-mode graph.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  // Adds g into grad, allocating on first use.
  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

// Handle to a graph node. Cheap to copy.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  bool defined() const { return static_cast<bool>(node_); }

  Node* node() const { return node_.get(); }
  const NodePtr& ptr() const { return node_; }

  // Returns a graph-detached copy holding the same value.
  Var detach() const { return Var(node_->value, false); }

  // Runs reverse accumulation from this scalar-valued node.
  void backward() const;

 private:
  NodePtr node_;
};

// Thread-local switch used by inference paths to skip graph recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds the result node of an op. The backward closure is kept only when
// grad mode is on and at least one input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// A named trainable tensor.
struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
  std::string group;
  double lr_scale = 1.0;  // multiplies the optimizer step size
};

}  // namespace sevc::nn
