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

// Computational graphs of primitive operators: the data model shared by every
// search space, plus validation, Weisfeiler-Lehman hashing and the JSON file
// format.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cgnas {

enum class OpKind : std::uint8_t {
  Input,
  Output,
  Conv2D,
  BatchNorm,
  ReLU,
  Sigmoid,
  MaxPool,
  AvgPool,
  GlobalAvgPool,
  Linear,
  Add,
  Concat,
  Multiply,
  Zero,
};

inline constexpr std::size_t kNumOpKinds = 14;

std::string_view to_string(OpKind kind);
std::optional<OpKind> parse_op_kind(std::string_view name);

/// Conv2D, Linear and BatchNorm own trainable weights.
bool is_weighted(OpKind kind);

/// Attribute keys a kind must carry; no other keys are allowed.
const std::vector<std::string>& required_attributes(OpKind kind);

enum class Family : std::uint8_t { NB101Style, NB201Style, NB301Style };

inline constexpr std::array<Family, 3> kAllFamilies = {
    Family::NB101Style, Family::NB201Style, Family::NB301Style};

std::string_view to_string(Family family);
std::optional<Family> parse_family(std::string_view name);

struct Shape {
  std::int64_t h = 1;
  std::int64_t w = 1;
  std::int64_t c = 1;
  auto operator<=>(const Shape&) const = default;
};

struct WeightShape {
  std::int64_t kh = 1;
  std::int64_t kw = 1;
  std::int64_t cin = 1;
  std::int64_t cout = 1;
  auto operator<=>(const WeightShape&) const = default;
};

using Attributes = std::map<std::string, std::int64_t>;

struct PrimitiveOp {
  OpKind kind = OpKind::ReLU;
  Attributes attributes;

  std::int64_t attr(const std::string& key, std::int64_t fallback = 0) const;
  bool operator==(const PrimitiveOp&) const = default;
};

struct CGNode {
  int id = 0;
  PrimitiveOp op;
  Shape in_shape;
  Shape out_shape;
  std::optional<WeightShape> weight_shape;
  bool operator==(const CGNode&) const = default;
};

struct Edge {
  int src = 0;
  int dst = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Immutable DAG of primitive operators. Node `i` must have id `i`; edges may
/// repeat (an Add fed twice by one producer), the undirected skeleton merges
/// them.
class ComputationGraph {
 public:
  ComputationGraph() = default;
  ComputationGraph(std::vector<CGNode> nodes, std::vector<Edge> edges,
                   std::optional<Family> family = std::nullopt);

  const std::vector<CGNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::optional<Family>& family() const { return family_; }
  std::size_t size() const { return nodes_.size(); }
  const CGNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  /// Sorted, de-duplicated neighbor lists of the undirected simple graph.
  /// Self loops are dropped. Out-of-range edge endpoints are ignored.
  std::vector<std::vector<int>> undirected_adjacency() const;

  /// Number of distinct undirected edges in the skeleton.
  std::size_t skeleton_edge_count() const;

  /// Longest-path distance from any source, per node. Requires a DAG.
  std::vector<int> topological_depth() const;

  /// Copy with node `i` renamed to `perm[i]`; edges follow their endpoints.
  ComputationGraph relabeled(const std::vector<int>& perm) const;

  bool operator==(const ComputationGraph&) const = default;

 private:
  std::vector<CGNode> nodes_;
  std::vector<Edge> edges_;
  std::optional<Family> family_;
};

struct Violation {
  std::string kind;  // e.g. "cycle", "fan-in shape mismatch"
  std::string message;
  std::vector<int> node_ids;
  std::vector<Edge> edges;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view kind) const;
  std::string summary() const;
};

ValidationReport validate(const ComputationGraph& g);

/// Throws ValidationError carrying the report summary when `g` is invalid.
void require_valid(const ComputationGraph& g);

inline constexpr int kDefaultWlIterations = 3;

/// Weisfeiler-Lehman color refinement over the undirected skeleton, starting
/// from node features (kind, attributes, shapes). The digest is stable across
/// platforms and runs.
std::uint64_t wl_hash(const ComputationGraph& g, int iterations = kDefaultWlIterations);

inline constexpr std::string_view kGraphFormatVersion = "1";

std::string serialize(const ComputationGraph& g);

/// Throws ParseError for malformed text, SchemaError for structurally wrong
/// content and ValidationError for graphs that break the invariants.
ComputationGraph deserialize(std::string_view text);

}  // namespace cgnas
