// Copyright 2026 The nqst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nqst/error.hpp"
#include "nqst/nn/tensor.hpp"

namespace nqst::nn {

/// Handle to a node of a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Named collection of parameter tensors.
using ModelParams = std::map<std::string, Tensor>;

/// Tape for one forward pass. Nodes are appended in evaluation order, so a reverse sweep
/// visits every node after all of its consumers.
class Graph {
 public:
  using Backward = std::function<void(Graph&, Var self, const Tensor& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var constant(Tensor v) { return push(std::move(v), false, nullptr, "constant"); }

  Var parameter(std::string name, Tensor v) {
    Var p = push(std::move(v), record_, nullptr, "parameter");
    nodes_[p.id].name = std::move(name);
    return p;
  }

  std::map<std::string, Var> bind(const ModelParams& params) {
    std::map<std::string, Var> out;
    for (const auto& [name, t] : params) out.emplace(name, parameter(name, t));
    return out;
  }

  /// Appends an op result. `bw` receives the gradient of this node and must accumulate into the
  /// inputs' gradient slots; a null `bw` marks an op without a derivative.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward bw, std::string_view op) {
    bool needs = false;
    if (record_)
      for (Var v : inputs) needs = needs || nodes_.at(v.id).requires_grad;
    return push(std::move(value), needs, needs ? std::move(bw) : Backward{}, op);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient slot of `v`, allocated as zeros on first use.
  Tensor& grad_slot(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  /// Gradient of the last backward() root with respect to `v` (zeros if unreached).
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) return Tensor(n.value.shape());
    return n.grad;
  }

  ModelParams grads(const std::map<std::string, Var>& bound) const {
    ModelParams out;
    for (const auto& [name, v] : bound) out.emplace(name, grad(v));
    return out;
  }

  void backward(Var root) {
    if (!record_) throw ConfigError("backward on a graph recorded without gradients");
    if (value(root).size() != 1)
      throw ConfigError("backward needs a scalar root, got shape " + shape_string(value(root).shape()));
    for (auto& n : nodes_) n.grad = Tensor();
    if (!nodes_[root.id].requires_grad) return;
    grad_slot(root)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() != n.value.size() || n.op == "parameter") continue;
      if (!n.backward) throw ConfigError("unsupported op in graph: " + n.op);
      n.backward(*this, Var{i}, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
    std::string op;
    std::string name;
  };

  Var push(Tensor v, bool needs, Backward bw, std::string_view op) {
    nodes_.push_back(Node{std::move(v), Tensor(), needs, std::move(bw), std::string(op), {}});
    return Var{nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace nqst::nn
