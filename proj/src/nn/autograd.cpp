#include "sevc/nn/autograd.hpp"

#include <unordered_set>

namespace sevc::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (grad.empty()) {
    grad = g;
    if (!grad.same_shape(value)) grad = grad.reshaped(value.shape());
    return;
  }
  grad.add_(g);
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(node);
  bool any = false;
  for (const Var& in : inputs) any = any || in.requires_grad();
  if (!any) return Var(node);
  node->requires_grad = true;
  node->parents.reserve(inputs.size());
  for (Var& in : inputs) node->parents.push_back(in.ptr());
  node->backward_fn = std::move(backward_fn);
  return Var(node);
}

void Var::backward() const {
  if (node_->value.size() != 1) throw ShapeError("backward() needs a scalar root");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad = Tensor(node_->value.shape(), 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // Free the graph; leaves keep their gradients.
  for (Node* n : order) {
    if (!n->parents.empty()) {
      n->backward_fn = nullptr;
      n->parents.clear();
      n->grad = Tensor();
    }
  }
}

}  // namespace sevc::nn
