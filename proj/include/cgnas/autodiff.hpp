// Copyright 2026 The cgnas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reverse-mode automatic differentiation on an append-only tape.
//
// A Tape is rebuilt for every step. Parameters enter through Tape::param and
// receive their gradients in the owning ParamStore when backward runs.

#include <functional>
#include <string>
#include <vector>

#include "cgnas/tensor.hpp"

namespace cgnas {

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  /// Gradient after backward; zeros when the node was not reached.
  Tensor grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is wanted but that is not owned by a ParamStore.
  Var variable(Tensor value);
  /// Leaf bound to `store[name]`; backward adds into its grad slot.
  Var param(ParamStore& store, const std::string& name);
  /// Parameter leaf without a gradient path; the store must outlive the tape.
  Var frozen(const ParamStore& store, const std::string& name);

  /// Seeds d(loss)/d(loss) = 1 and propagates; loss must be 1x1.
  void backward(Var loss);
  /// Propagates an explicit output gradient of the same shape as `out`.
  void backward(Var out, const Tensor& seed);

  std::size_t size() const { return nodes_.size(); }

  // Used by the primitive implementations.
  using Backward = std::function<void(Tape&, int self)>;
  Var record(Tensor value, std::vector<int> inputs, Backward backward);
  const Tensor& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external != nullptr ? *n.external : n.value;
  }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient of `id` as a fresh tensor (zeros when never reached).
  Tensor grad(int id) const;
  /// Incoming gradient of `id` inside its backward closure.
  const Tensor& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  /// Gradient slot of `id`, zero-initialized on first use.
  Tensor& grad_slot(int id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
    const Tensor* external = nullptr;  // parameter leaves read the store in place
  };

  Var push(Node node);
  void propagate();

  std::vector<Node> nodes_;
};

// Primitives. Shape errors throw DimensionError naming the primitive.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
/// a (n x m) plus a 1 x m row broadcast over every row.
Var add_row(Var a, Var row);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_rows(Var a);
/// Row-wise log-softmax restricted to entries with mask != 0; masked entries
/// are excluded from the normalizer and produce 0.
Var log_softmax_rows_masked(Var a, const Tensor& mask);
/// Mean over rows: n x m -> 1 x m.
Var mean_rows(Var a);
/// Sum of all entries: -> 1 x 1.
Var sum(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var l2_normalize_rows(Var a);
/// out[i] = a[index[i]].
Var gather_rows(Var a, const std::vector<int>& index);
/// out[k] = mean of a[i] over i with index[i] == k; empty groups give zero rows.
Var scatter_mean_rows(Var a, const std::vector<int>& index, std::size_t n);

}  // namespace cgnas
