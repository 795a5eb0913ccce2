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

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cgnas/cell.hpp"
#include "cgnas/graph.hpp"
#include "cgnas/lowering.hpp"

namespace cgnas::testing {

inline CGNode make(int id, OpKind kind, Shape in, Shape out, Attributes attrs = {},
                   std::optional<WeightShape> ws = std::nullopt) {
  CGNode n;
  n.id = id;
  n.op = {kind, std::move(attrs)};
  n.in_shape = in;
  n.out_shape = out;
  n.weight_shape = ws;
  return n;
}

inline CGNode simple(int id, OpKind kind, Shape s) { return make(id, kind, s, s); }

inline CGNode conv_node(int id, Shape in, std::int64_t out_c, std::int64_t k, bool bias = false) {
  return make(id, OpKind::Conv2D, in, {in.h, in.w, out_c},
              {{"kernel_h", k}, {"kernel_w", k}, {"stride", 1}, {"groups", 1}, {"dilation", 1},
               {"has_bias", bias ? 1 : 0}},
              WeightShape{k, k, in.c, out_c});
}

inline CGNode bn_node(int id, Shape s) {
  return make(id, OpKind::BatchNorm, s, s, {}, WeightShape{1, 1, 1, s.c});
}

/// Input -> middle... -> Output, each node consuming the previous one.
inline ComputationGraph chain(std::vector<CGNode> middle, Shape in, Shape out) {
  std::vector<CGNode> nodes;
  nodes.push_back(simple(0, OpKind::Input, in));
  for (auto& n : middle) {
    n.id = static_cast<int>(nodes.size());
    nodes.push_back(std::move(n));
  }
  nodes.push_back(simple(static_cast<int>(nodes.size()), OpKind::Output, out));
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < static_cast<int>(nodes.size()); ++i) edges.push_back({i, i + 1});
  return ComputationGraph(std::move(nodes), std::move(edges));
}

inline ComputationGraph random_network(Rng& rng) {
  const Family family = kAllFamilies[uniform_index(rng, kAllFamilies.size())];
  return build_network(random_cell(Dialect::standard(family), rng));
}

inline std::vector<int> random_permutation(std::size_t n, Rng& rng) {
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  shuffle(perm, rng);
  return perm;
}

}  // namespace cgnas::testing
