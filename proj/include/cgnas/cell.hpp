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

// Symbolic cell descriptions for the three search-space dialects.
//
//   NB101Style  ops on vertices of a DAG (adjacency matrix + op list)
//   NB201Style  ops on the 6 edges of the complete DAG over 4 nodes
//   NB301Style  intermediate nodes each picking two (input, op) pairs

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cgnas/common.hpp"
#include "cgnas/graph.hpp"

namespace cgnas {

inline constexpr std::string_view kZeroize = "zeroize";
inline constexpr std::string_view kSkip = "skip";

struct Dialect {
  Family family = Family::NB201Style;
  std::vector<std::string> vocabulary;

  static Dialect nb101();
  static Dialect nb201();
  static Dialect nb301();
  /// NB201Style without zeroize: 4^6 = 4096 cells, small enough to enumerate.
  static Dialect nb201_reduced();
  static Dialect standard(Family family);

  bool has(std::string_view label) const;
  bool operator==(const Dialect&) const = default;
};

/// One row of the operator grouping table.
struct Grouping {
  std::string label;
  std::vector<OpKind> sequence;  // empty for zeroize and skip
};

/// Grouping table for a family, in table order.
const std::vector<Grouping>& grouping_table(Family family);

/// Throws LoweringError when `label` is not part of the family.
const Grouping& grouping(Family family, std::string_view label);

struct Nb101Cell {
  static constexpr std::size_t kMaxVertices = 7;
  static constexpr std::size_t kMaxEdges = 9;

  /// adjacency[u][v] == 1 iff edge u -> v; strictly upper triangular.
  std::vector<std::vector<int>> adjacency;
  /// ops.front() == "input", ops.back() == "output".
  std::vector<std::string> ops;

  std::size_t vertex_count() const { return ops.size(); }
  std::size_t edge_count() const;
  bool operator==(const Nb101Cell&) const = default;
};

struct Nb201Cell {
  /// Edge order follows the conventional string: 0->1, 0->2, 1->2, 0->3, 1->3, 2->3.
  static constexpr std::array<std::pair<int, int>, 6> kEdges = {
      std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2},
      std::pair{0, 3}, std::pair{1, 3}, std::pair{2, 3}};
  std::array<std::string, 6> edges;
  bool operator==(const Nb201Cell&) const = default;
};

struct Nb301Node {
  int input_a = 0;
  int input_b = 1;
  std::string op_a;
  std::string op_b;
  bool operator==(const Nb301Node&) const = default;
};

struct Nb301Cell {
  static constexpr std::size_t kDefaultNodes = 4;
  /// Node k has index k + 2; indices 0 and 1 are the two cell inputs.
  std::vector<Nb301Node> nodes;
  bool operator==(const Nb301Cell&) const = default;
};

struct CellSpec {
  Dialect dialect;
  std::variant<Nb101Cell, Nb201Cell, Nb301Cell> cell;

  Family family() const { return dialect.family; }
  bool operator==(const CellSpec&) const = default;
};

/// First violated dialect constraint, or nullopt.
std::optional<std::string> check_constraints(const CellSpec& spec);

/// Drops NB101Style vertices that lie on no IN -> OUT path.
Nb101Cell prune(const Nb101Cell& cell);

/// Operator labels in position order (NB101: internal vertices; NB201: edges;
/// NB301: op_a, op_b of each node).
std::vector<std::string> operator_labels(const CellSpec& spec);

/// Copy of `spec` with operator `position` replaced by `label`.
CellSpec with_operator(const CellSpec& spec, std::size_t position, const std::string& label);

/// Conventional text encoding of the cell body (no dialect tag).
std::string format_cell(const CellSpec& spec);
CellSpec parse_cell(const Dialect& dialect, std::string_view text);

/// "<Family>:<body>", parsed back with the family's standard dialect.
std::string format_tagged(const CellSpec& spec);
CellSpec parse_tagged(std::string_view text);

/// Uniform over the dialect's lowerable cells; deterministic per rng state.
CellSpec random_cell(const Dialect& dialect, Rng& rng);

/// Every NB201Style cell over the dialect vocabulary, in lexicographic label
/// order. Degenerate cells are included.
std::vector<CellSpec> enumerate_nb201(const Dialect& dialect);

}  // namespace cgnas
