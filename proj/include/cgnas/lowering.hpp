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

// Macro-expansion of grouped operators and cells into primitive-operator
// computational graphs, with shape propagation.

#include <string_view>
#include <vector>

#include "cgnas/cell.hpp"
#include "cgnas/graph.hpp"

namespace cgnas {

/// Ordered chain of primitive nodes (local ids 0..k-1) for one grouped op.
struct OperatorExpansion {
  std::vector<CGNode> nodes;
  std::vector<Edge> edges;
};

OperatorExpansion expand_operator(const Dialect& dialect, std::string_view label,
                                  const Shape& in_shape, std::int64_t out_channels);

/// Lowered cell. Node ids are local and topologically ordered; `kEntry`
/// stands for the tensor entering the cell.
struct CellFragment {
  static constexpr int kEntry = -1;
  std::vector<CGNode> nodes;
  std::vector<Edge> edges;
  int entry = kEntry;
  int exit = kEntry;  // kEntry for an identity cell

  /// Nodes coming from grouped operators (excludes Add/Concat joins and
  /// projection/preprocessing plumbing).
  std::size_t grouped_node_count = 0;
  std::size_t plumbing_node_count() const { return nodes.size() - grouped_node_count; }
};

CellFragment lower_cell(const CellSpec& spec, const Shape& in_shape, std::int64_t channels);

struct MacroConfig {
  Shape input_shape{32, 32, 3};
  std::int64_t stem_channels = 16;
  int stages = 3;
  int cells_per_stage = 1;
  std::int64_t channel_growth = 2;  // channel multiplier at each reduction
  bool classifier_head = true;
  std::int64_t num_classes = 10;
};

/// Input -> stem -> stages of cells with reductions -> GlobalAvgPool ->
/// Linear -> Output. The result always validates.
ComputationGraph build_network(const CellSpec& spec, const MacroConfig& macro = {});

}  // namespace cgnas
