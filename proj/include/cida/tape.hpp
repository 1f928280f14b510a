#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "cida/tensor.hpp"

namespace cida {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& val() const;
  const Shape& shape() const;
  double scalar() const;
  bool needs_grad() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so every node's
// inputs precede it and one reverse sweep visits each node exactly once.
// Leaves may be bound to external parameter tensors; backward() accumulates
// into their grad buffers. Single-threaded: one tape per training step.
class Tape {
 public:
  struct Node;
  using BackFn = std::function<void(Tape&, const Node&)>;

  struct Node {
    Tensor value;
    std::vector<double> adj;  // adjoint buffer, allocated on demand
    BackFn back;              // empty for leaves/constants
    Tensor* bound = nullptr;  // external tensor to receive leaf gradients
    bool needs_grad = false;
    const char* op = "";
  };

  // Binds an external tensor; gradients flow back into t.grad if it requires
  // grad. The tensor must outlive the tape.
  Var leaf(Tensor& t) {
    t.check_finite("leaf");
    if (t.requires_grad && t.grad.size() != t.data.size())
      t.grad.assign(t.data.size(), 0.0);
    nodes_.push_back(Node{t, {}, {}, &t, t.requires_grad, "leaf"});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  // Constant input; never receives gradients.
  Var input(Tensor t) {
    t.check_finite("input");
    t.requires_grad = false;
    t.grad.clear();
    nodes_.push_back(Node{std::move(t), {}, {}, nullptr, false, "input"});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var input_scalar(double v) { return input(Tensor::scalar(v)); }

  // Records an op result. `back` may be empty when needs_grad is false.
  Var make(Tensor value, bool needs_grad, const char* op, BackFn back) {
    value.check_finite(op);
    nodes_.push_back(Node{std::move(value), {}, std::move(back), nullptr, needs_grad, op});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes_.size(); }

  // Adjoint buffer of a node, allocated to the node's value size on first use.
  std::vector<double>& adj(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adj.empty()) n.adj.assign(n.value.data.size(), 0.0);
    return n.adj;
  }

  // Reverse sweep from a scalar output. Gradients accumulate additively into
  // bound tensors' grad buffers; a tape holding no grad-requiring leaves is a
  // no-op. Adjoints are cleared afterwards so repeated calls start fresh.
  void backward(Var out) {
    if (out.tape != this || out.id < 0 || out.id >= static_cast<int>(nodes_.size()))
      throw Error("backward: output is detached from this tape");
    const Node& top = nodes_[static_cast<std::size_t>(out.id)];
    if (top.value.size() != 1)
      throw ShapeError("backward: output must be scalar, got shape " +
                       shape_str(top.value.shape));
    if (!top.needs_grad) return;

    auto& seed = adj(out.id);
    seed[0] += 1.0;
    for (int id = out.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.adj.empty()) continue;
      if (n.back) {
        n.back(*this, n);
      } else if (n.bound != nullptr && n.bound->requires_grad) {
        auto& g = n.bound->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.adj[i];
      }
    }
    for (Node& n : nodes_) n.adj.clear();
  }

 private:
  std::vector<Node> nodes_;
};

inline const Tensor& Var::val() const { return tape->val(id); }
inline const Shape& Var::shape() const { return tape->val(id).shape; }
inline double Var::scalar() const {
  const Tensor& t = tape->val(id);
  if (t.size() != 1) throw ShapeError("scalar() on tensor of shape " + shape_str(t.shape));
  return t.data[0];
}
inline bool Var::needs_grad() const { return tape->node(id).needs_grad; }

}  // namespace cida
