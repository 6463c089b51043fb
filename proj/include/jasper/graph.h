/* Copyright 2026 The JasperCpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef JASPER_GRAPH_H_
#define JASPER_GRAPH_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "jasper/tensor.h"

namespace jasper {

// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over the fixed operator set the acoustic model needs.
// Nodes are appended in execution order (already topological); backward()
// walks the tape once in reverse.  One graph serves one forward/backward
// pass and is consumed by backward().
template <typename Scalar>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, Var self)>;

  // Differentiable leaf (parameter or input we want gradients for).
  Var leaf(Tensor<Scalar> value, std::string label) {
    return push(std::move(value), {}, nullptr, std::move(label), true);
  }

  // Non-differentiable constant.
  Var constant(Tensor<Scalar> value, std::string label = "const") {
    return push(std::move(value), {}, nullptr, std::move(label), false);
  }

  // Records an op node.  The value must be finite; the backward function
  // accumulates into the gradients of `inputs`.
  Var apply(std::string label, std::vector<Var> inputs, Tensor<Scalar> value,
            BackwardFn backward) {
    if (!value.all_finite()) {
      throw NumericError("non-finite output produced by op '" + label + "'");
    }
    bool needs_grad = false;
    for (Var v : inputs) needs_grad = needs_grad || node(v).requires_grad;
    return push(std::move(value), std::move(inputs), needs_grad ? std::move(backward) : nullptr,
                std::move(label), needs_grad);
  }

  const Tensor<Scalar>& value(Var v) const { return node(v).value; }
  const std::string& label(Var v) const { return node(v).label; }

  // Gradient of the loss w.r.t. node v; valid after backward().
  const Tensor<Scalar>& grad(Var v) const {
    const NodeRec& n = node(v);
    if (!ran_backward_) throw Error("gradient requested before backward()");
    return n.grad;
  }

  bool consumed() const { return ran_backward_; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse pass from a scalar loss.  Gradients for every differentiable
  // node reachable from the loss; unreachable nodes keep zero gradients.
  void backward(Var loss) {
    if (ran_backward_) throw Error("graph already consumed by backward()");
    NodeRec& ln = node(loss);
    if (!ln.value.is_scalar()) {
      throw ShapeError("backward() requires a scalar loss, got " + shape_str(ln.value.shape()));
    }
    // Mark nodes reachable from the loss.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{loss.id};
    reach[static_cast<std::size_t>(loss.id)] = 1;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      for (Var in : nodes_[static_cast<std::size_t>(id)].inputs) {
        if (!reach[static_cast<std::size_t>(in.id)] && nodes_[static_cast<std::size_t>(in.id)].requires_grad) {
          reach[static_cast<std::size_t>(in.id)] = 1;
          stack.push_back(in.id);
        }
      }
    }
    for (NodeRec& n : nodes_) {
      if (n.requires_grad) n.grad = Tensor<Scalar>::zeros(n.value.shape());
    }
    ran_backward_ = true;  // set before running so grad() works inside backward fns
    ln.grad = Tensor<Scalar>::scalar(Scalar(1));
    for (int id = loss.id; id >= 0; --id) {
      NodeRec& n = nodes_[static_cast<std::size_t>(id)];
      if (!reach[static_cast<std::size_t>(id)] || !n.backward) continue;
      n.backward(*this, Var{id});
      for (Var in : n.inputs) {
        const NodeRec& inn = node(in);
        if (inn.requires_grad && !inn.grad.all_finite()) {
          throw NumericError("non-finite gradient produced by backward of op '" + n.label + "'");
        }
      }
    }
  }

  // Accumulates g into the gradient of v (used by backward functions).
  void accumulate(Var v, const Tensor<Scalar>& g) {
    NodeRec& n = node(v);
    if (!n.requires_grad) return;
    if (!n.grad.same_shape(g)) {
      throw ShapeError("gradient shape mismatch at '" + n.label + "'");
    }
    n.grad.array() += g.array();
  }

  Tensor<Scalar>& grad_buffer(Var v) { return node(v).grad; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

 private:
  struct NodeRec {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    std::vector<Var> inputs;
    BackwardFn backward;
    std::string label;
    bool requires_grad = false;
  };

  Var push(Tensor<Scalar> value, std::vector<Var> inputs, BackwardFn backward,
           std::string label, bool requires_grad) {
    if (ran_backward_) throw Error("graph already consumed by backward()");
    NodeRec n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    n.label = std::move(label);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  NodeRec& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  const NodeRec& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

  std::vector<NodeRec> nodes_;
  bool ran_backward_ = false;
};

}  // namespace jasper

#endif  // JASPER_GRAPH_H_
