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

#include "cgnas/lowering.hpp"

#include <algorithm>

namespace cgnas {

namespace {

std::int64_t strided(std::int64_t extent, std::int64_t stride) { return (extent + stride - 1) / stride; }

CGNode make_node(OpKind kind, Attributes attrs, Shape in, Shape out,
                 std::optional<WeightShape> weights = std::nullopt) {
  CGNode node;
  node.op = {kind, std::move(attrs)};
  node.in_shape = in;
  node.out_shape = out;
  node.weight_shape = weights;
  return node;
}

CGNode conv(const Shape& in, std::int64_t out_c, std::int64_t kernel, std::int64_t stride = 1,
            std::int64_t groups = 1, std::int64_t dilation = 1, bool bias = false) {
  const Shape out{strided(in.h, stride), strided(in.w, stride), out_c};
  return make_node(OpKind::Conv2D,
                   {{"kernel_h", kernel}, {"kernel_w", kernel}, {"stride", stride},
                    {"groups", groups}, {"dilation", dilation}, {"has_bias", bias ? 1 : 0}},
                   in, out, WeightShape{kernel, kernel, in.c / groups, out_c});
}

CGNode batch_norm(const Shape& s) {
  return make_node(OpKind::BatchNorm, {}, s, s, WeightShape{1, 1, 1, s.c});
}

CGNode unary(OpKind kind, const Shape& s) { return make_node(kind, {}, s, s); }

CGNode pool(OpKind kind, const Shape& in, std::int64_t kernel, std::int64_t stride) {
  return make_node(kind, {{"kernel_h", kernel}, {"kernel_w", kernel}, {"stride", stride}}, in,
                   {strided(in.h, stride), strided(in.w, stride), in.c});
}

// Accumulates nodes in creation order; every node is created after its
// producers, so creation order is a topological order.
class FragmentBuilder {
 public:
  explicit FragmentBuilder(Shape entry_shape) : entry_shape_(entry_shape) {}

  const Shape& shape_of(int value) const {
    return value == CellFragment::kEntry ? entry_shape_ : nodes_[static_cast<std::size_t>(value)].out_shape;
  }

  int add(CGNode node, bool grouped = false) {
    node.id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(node));
    grouped_.push_back(grouped);
    return nodes_.back().id;
  }

  void connect(int src, int dst) { edges_.push_back({src, dst}); }

  int chain(int src, const OperatorExpansion& exp) {
    int last = src;
    for (const CGNode& node : exp.nodes) {
      const int id = add(node, true);
      connect(last, id);
      last = id;
    }
    return last;
  }

  // Sums equal-shaped values; a single value passes through unchanged.
  int add_join(const std::vector<int>& inputs) {
    if (inputs.size() == 1) return inputs[0];
    const Shape s = shape_of(inputs[0]);
    const int id = add(unary(OpKind::Add, s));
    for (int v : inputs) connect(v, id);
    return id;
  }

  // Concat along channels followed by a 1x1 projection back to `channels`.
  int concat_project(const std::vector<int>& inputs, std::int64_t channels) {
    if (inputs.size() == 1) return inputs[0];
    Shape s = shape_of(inputs[0]);
    s.c = 0;
    for (int v : inputs) s.c += shape_of(v).c;
    const int cat = add(unary(OpKind::Concat, s));
    for (int v : inputs) connect(v, cat);
    const int proj = add(conv(s, channels, 1, 1, 1, 1, true));
    connect(cat, proj);
    return proj;
  }

  // Drops nodes that cannot reach `exit` and compacts ids.
  CellFragment finish(int exit) && {
    CellFragment frag;
    if (exit == CellFragment::kEntry) return frag;
    const std::size_t n = nodes_.size();
    std::vector<char> useful(n, 0);
    useful[static_cast<std::size_t>(exit)] = 1;
    for (std::size_t i = n; i-- > 0;) {
      if (!useful[i]) continue;
      for (const Edge& e : edges_) {
        if (e.dst == static_cast<int>(i) && e.src != CellFragment::kEntry) {
          useful[static_cast<std::size_t>(e.src)] = 1;
        }
      }
    }
    std::vector<int> remap(n, -2);
    for (std::size_t i = 0; i < n; ++i) {
      if (!useful[i]) continue;
      remap[i] = static_cast<int>(frag.nodes.size());
      CGNode node = nodes_[i];
      node.id = remap[i];
      frag.nodes.push_back(std::move(node));
      if (grouped_[i]) ++frag.grouped_node_count;
    }
    for (const Edge& e : edges_) {
      if (!useful[static_cast<std::size_t>(e.dst)]) continue;
      const int src = e.src == CellFragment::kEntry ? CellFragment::kEntry : remap[static_cast<std::size_t>(e.src)];
      frag.edges.push_back({src, remap[static_cast<std::size_t>(e.dst)]});
    }
    frag.exit = remap[static_cast<std::size_t>(exit)];
    return frag;
  }

 private:
  Shape entry_shape_;
  std::vector<CGNode> nodes_;
  std::vector<char> grouped_;
  std::vector<Edge> edges_;
};

constexpr int kDead = -2;

CellFragment lower_nb101(const CellSpec& spec, const Nb101Cell& cell, const Shape& in, std::int64_t channels) {
  FragmentBuilder b(in);
  const std::size_t v = cell.vertex_count();
  std::vector<int> value(v, kDead);
  value[0] = CellFragment::kEntry;
  for (std::size_t j = 1; j + 1 < v; ++j) {
    std::vector<int> inputs;
    for (std::size_t i = 0; i < j; ++i) {
      if (cell.adjacency[i][j] && value[i] != kDead) inputs.push_back(value[i]);
    }
    if (inputs.empty()) continue;
    const int joined = b.add_join(inputs);
    value[j] = b.chain(joined, expand_operator(spec.dialect, cell.ops[j], b.shape_of(joined), channels));
  }
  std::vector<int> outputs;
  for (std::size_t i = 0; i + 1 < v; ++i) {
    if (cell.adjacency[i][v - 1] && value[i] != kDead) outputs.push_back(value[i]);
  }
  if (outputs.empty()) throw LoweringError("degenerate cell: OUT is unreachable");
  const int exit = b.concat_project(outputs, channels);
  return std::move(b).finish(exit);
}

CellFragment lower_nb201(const CellSpec& spec, const Nb201Cell& cell, const Shape& in, std::int64_t channels) {
  FragmentBuilder b(in);
  std::array<std::vector<int>, 4> incoming;
  std::array<int, 4> value = {CellFragment::kEntry, kDead, kDead, kDead};
  for (int j = 1; j < 4; ++j) {
    for (std::size_t k = 0; k < 6; ++k) {
      const auto [u, v] = Nb201Cell::kEdges[k];
      if (v != j || value[static_cast<std::size_t>(u)] == kDead || cell.edges[k] == kZeroize) continue;
      const int src = value[static_cast<std::size_t>(u)];
      incoming[static_cast<std::size_t>(j)].push_back(
          b.chain(src, expand_operator(spec.dialect, cell.edges[k], b.shape_of(src), channels)));
    }
    if (!incoming[static_cast<std::size_t>(j)].empty()) {
      value[static_cast<std::size_t>(j)] = b.add_join(incoming[static_cast<std::size_t>(j)]);
    }
  }
  if (value[3] == kDead) throw LoweringError("degenerate cell: node 3 is unreachable");
  return std::move(b).finish(value[3]);
}

CellFragment lower_nb301(const CellSpec& spec, const Nb301Cell& cell, const Shape& in, std::int64_t channels) {
  FragmentBuilder b(in);
  std::vector<int> value(cell.nodes.size() + 2, kDead);
  // Each cell input gets its own ReLU-Conv1x1-BN preprocessing, built on first use.
  auto input_value = [&](int idx) {
    auto& slot = value[static_cast<std::size_t>(idx)];
    if (slot == kDead) {
      int x = b.add(unary(OpKind::ReLU, in));
      b.connect(CellFragment::kEntry, x);
      const int c = b.add(conv(in, channels, 1));
      b.connect(x, c);
      slot = b.add(batch_norm(b.shape_of(c)));
      b.connect(c, slot);
    }
    return slot;
  };
  std::vector<bool> alive(value.size(), false);
  alive[0] = alive[1] = true;
  std::vector<int> outputs;
  for (std::size_t k = 0; k < cell.nodes.size(); ++k) {
    const auto& node = cell.nodes[k];
    std::vector<int> inputs;
    for (const auto& [src_idx, op] : {std::pair{node.input_a, node.op_a}, std::pair{node.input_b, node.op_b}}) {
      if (op == kZeroize || !alive[static_cast<std::size_t>(src_idx)]) continue;
      const int src = src_idx < 2 ? input_value(src_idx) : value[static_cast<std::size_t>(src_idx)];
      inputs.push_back(b.chain(src, expand_operator(spec.dialect, op, b.shape_of(src), channels)));
    }
    if (inputs.empty()) continue;
    alive[k + 2] = true;
    value[k + 2] = b.add_join(inputs);
    outputs.push_back(value[k + 2]);
  }
  if (outputs.empty()) throw LoweringError("degenerate cell: every intermediate node is dead");
  const int exit = b.concat_project(outputs, channels);
  return std::move(b).finish(exit);
}

}  // namespace

OperatorExpansion expand_operator(const Dialect& dialect, std::string_view label, const Shape& in,
                                  std::int64_t out_channels) {
  if (!dialect.has(label)) {
    throw LoweringError("unknown operator '" + std::string(label) + "' for " +
                        std::string(to_string(dialect.family)));
  }
  if (label == kZeroize) throw LoweringError("zeroize has no expansion; lower_cell drops the connection");
  if (out_channels < 1) throw LoweringError("expand_operator: out_channels must be positive");

  const Family family = dialect.family;
  OperatorExpansion exp;
  auto push = [&](CGNode node) {
    node.id = static_cast<int>(exp.nodes.size());
    if (node.id > 0) exp.edges.push_back({node.id - 1, node.id});
    exp.nodes.push_back(std::move(node));
  };
  auto require_same_channels = [&] {
    if (in.c != out_channels) {
      throw LoweringError("'" + std::string(label) + "' cannot change the channel count");
    }
  };

  if (label == kSkip) {
    require_same_channels();
    return exp;
  }
  if (label == "maxpool3x3" || label == "avgpool3x3") {
    require_same_channels();
    push(pool(label == "maxpool3x3" ? OpKind::MaxPool : OpKind::AvgPool, in, 3, 1));
    return exp;
  }
  if (label == "conv1x1" || label == "conv3x3") {
    const std::int64_t k = label == "conv1x1" ? 1 : 3;
    const Shape out{in.h, in.w, out_channels};
    if (family == Family::NB101Style) {
      push(conv(in, out_channels, k));
      push(batch_norm(out));
      push(unary(OpKind::ReLU, out));
    } else {
      push(unary(OpKind::ReLU, in));
      push(conv(in, out_channels, k));
      push(batch_norm(out));
    }
    return exp;
  }
  if (label == "sep3x3" || label == "sep5x5") {
    const std::int64_t k = label == "sep3x3" ? 3 : 5;
    const Shape mid{in.h, in.w, in.c};
    const Shape out{in.h, in.w, out_channels};
    push(unary(OpKind::ReLU, in));
    push(conv(in, in.c, k, 1, in.c));
    push(conv(mid, in.c, 1));
    push(batch_norm(mid));
    push(unary(OpKind::ReLU, mid));
    push(conv(mid, in.c, k, 1, in.c));
    push(conv(mid, out_channels, 1));
    push(batch_norm(out));
    return exp;
  }
  if (label == "dil3x3" || label == "dil5x5") {
    const std::int64_t k = label == "dil3x3" ? 3 : 5;
    const Shape out{in.h, in.w, out_channels};
    push(unary(OpKind::ReLU, in));
    push(conv(in, in.c, k, 1, in.c, 2));
    push(conv(in, out_channels, 1));
    push(batch_norm(out));
    return exp;
  }
  throw LoweringError("no expansion rule for '" + std::string(label) + "'");
}

CellFragment lower_cell(const CellSpec& spec, const Shape& in_shape, std::int64_t channels) {
  if (auto problem = check_constraints(spec)) throw LoweringError("invalid cell: " + *problem);
  if (spec.family() != Family::NB301Style && in_shape.c != channels) {
    throw LoweringError("cell input has " + std::to_string(in_shape.c) + " channels, expected " +
                        std::to_string(channels));
  }
  if (const auto* c = std::get_if<Nb101Cell>(&spec.cell)) return lower_nb101(spec, *c, in_shape, channels);
  if (const auto* c = std::get_if<Nb201Cell>(&spec.cell)) return lower_nb201(spec, *c, in_shape, channels);
  return lower_nb301(spec, std::get<Nb301Cell>(spec.cell), in_shape, channels);
}

ComputationGraph build_network(const CellSpec& spec, const MacroConfig& macro) {
  if (macro.stages < 1 || macro.cells_per_stage < 1 || macro.stem_channels < 1 ||
      macro.channel_growth < 1 || macro.num_classes < 1) {
    throw LoweringError("macro config counts must be positive");
  }
  std::vector<CGNode> nodes;
  std::vector<Edge> edges;
  auto add = [&](CGNode node, int src) {
    node.id = static_cast<int>(nodes.size());
    nodes.push_back(std::move(node));
    if (src >= 0) edges.push_back({src, nodes.back().id});
    return nodes.back().id;
  };

  const Shape input = macro.input_shape;
  int tail = add(unary(OpKind::Input, input), -1);
  tail = add(conv(input, macro.stem_channels, 3), tail);
  Shape shape = nodes.back().out_shape;
  tail = add(batch_norm(shape), tail);
  tail = add(unary(OpKind::ReLU, shape), tail);

  std::int64_t channels = macro.stem_channels;
  for (int stage = 0; stage < macro.stages; ++stage) {
    for (int cell = 0; cell < macro.cells_per_stage; ++cell) {
      const CellFragment frag = lower_cell(spec, shape, channels);
      const int offset = static_cast<int>(nodes.size());
      for (CGNode node : frag.nodes) {
        node.id += offset;
        nodes.push_back(std::move(node));
      }
      for (const Edge& e : frag.edges) {
        edges.push_back({e.src == CellFragment::kEntry ? tail : e.src + offset, e.dst + offset});
      }
      if (frag.exit != CellFragment::kEntry) tail = frag.exit + offset;
      shape = nodes[static_cast<std::size_t>(tail)].out_shape;
    }
    if (stage + 1 < macro.stages) {
      tail = add(pool(OpKind::MaxPool, shape, 2, 2), tail);
      shape = nodes.back().out_shape;
      channels *= macro.channel_growth;
      tail = add(conv(shape, channels, 1, 1, 1, 1, true), tail);
      shape = nodes.back().out_shape;
    }
  }
  tail = add(make_node(OpKind::GlobalAvgPool, {}, shape, {1, 1, shape.c}), tail);
  shape = nodes.back().out_shape;
  if (macro.classifier_head) {
    const Shape out{1, 1, macro.num_classes};
    tail = add(make_node(OpKind::Linear, {{"has_bias", 1}}, shape, out,
                         WeightShape{1, 1, shape.c, macro.num_classes}),
               tail);
    shape = out;
  }
  add(unary(OpKind::Output, shape), tail);

  ComputationGraph g(std::move(nodes), std::move(edges), spec.family());
  require_valid(g);
  return g;
}

}  // namespace cgnas
