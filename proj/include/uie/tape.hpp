#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "uie/params.hpp"
#include "uie/tensor.hpp"

namespace uie {

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. One tape per training step / inference call; nodes are
// created in topological order by construction, backward walks them in
// reverse. With grad disabled, ops skip backward closures and their caches.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Value constant(Tensor v) { return make(std::move(v), false); }

  Value leaf(Tensor v, bool requires_grad) {
    return make(std::move(v), requires_grad && grad_enabled_);
  }

  // Leaf for a named parameter; memoized so repeated uses (weight sharing,
  // recursive invocation) accumulate into a single gradient.
  Value param(const Param& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Value{it->second};
    Value v = make(p.value, grad_enabled_ && p.trainable);
    param_ids_.emplace(&p, v.id);
    return v;
  }

  const Tensor& val(Value v) const { return nodes_[v.id].val; }
  Tensor& val_mut(Value v) { return nodes_[v.id].val; }

  bool requires_grad(Value v) const { return nodes_[v.id].requires_grad; }

  // Gradient buffer, allocated on first touch.
  Tensor& grad_of(Value v) {
    Node& n = nodes_[v.id];
    if (n.grad.data.empty()) n.grad = Tensor(n.val.shape);
    return n.grad;
  }
  bool has_grad(Value v) const { return !nodes_[v.id].grad.data.empty(); }
  const Tensor& grad(Value v) const { return nodes_[v.id].grad; }

  const Tensor* param_grad(const Param& p) const {
    auto it = param_ids_.find(&p);
    if (it == param_ids_.end()) return nullptr;
    const Node& n = nodes_[it->second];
    return n.grad.data.empty() ? nullptr : &n.grad;
  }

  // Creates a node computed by an op. `backprop` receives this node's
  // gradient and accumulates into the parents'; empty when no gradient is
  // needed.
  Value make(Tensor v, bool requires_grad,
             std::function<void(Tape&, const Tensor&)> backprop = {}) {
    nodes_.push_back(Node{std::move(v), Tensor{}, requires_grad, std::move(backprop)});
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  // For closures that need the node's own handle (e.g. to read its value).
  void set_backprop(Value v, std::function<void(Tape&, const Tensor&)> backprop) {
    nodes_[v.id].backprop = std::move(backprop);
  }

  void backward(Value loss) {
    if (!grad_enabled_)
      throw std::logic_error("tape: backward on a grad-disabled tape");
    if (val(loss).numel() != 1)
      throw std::invalid_argument("tape: backward requires a scalar loss");
    grad_of(loss)[0] += 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backprop && !n.grad.data.empty())
        n.backprop(*this, n.grad);
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Tensor&)> backprop;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_ids_;
  bool grad_enabled_;
};

}  // namespace uie
