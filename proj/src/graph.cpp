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

#include "cgnas/graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>
#include <sstream>

#include "cgnas/common.hpp"

namespace cgnas {

namespace {

constexpr std::array<std::string_view, kNumOpKinds> kOpNames = {
    "Input",   "Output",        "Conv2D", "BatchNorm", "ReLU",   "Sigmoid",  "MaxPool",
    "AvgPool", "GlobalAvgPool", "Linear", "Add",       "Concat", "Multiply", "Zero"};

constexpr std::array<std::string_view, 3> kFamilyNames = {"NB101Style", "NB201Style",
                                                          "NB301Style"};

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(" << s.h << "," << s.w << "," << s.c << ")";
  return os.str();
}

bool is_elementwise_join(OpKind k) { return k == OpKind::Add || k == OpKind::Multiply; }

std::int64_t strided(std::int64_t extent, std::int64_t stride) {
  return (extent + stride - 1) / stride;
}

}  // namespace

std::string hex_digest(std::uint64_t digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[digest & 0xf];
    digest >>= 4;
  }
  return out;
}

std::uint64_t parse_hex_digest(std::string_view text) {
  if (text.size() != 16) throw std::invalid_argument("digest must have 16 hex digits");
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw std::invalid_argument("bad hex digit in digest");
    }
  }
  return v;
}

std::string_view to_string(OpKind kind) { return kOpNames[static_cast<std::size_t>(kind)]; }

std::optional<OpKind> parse_op_kind(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  return std::nullopt;
}

bool is_weighted(OpKind kind) {
  return kind == OpKind::Conv2D || kind == OpKind::Linear || kind == OpKind::BatchNorm;
}

const std::vector<std::string>& required_attributes(OpKind kind) {
  static const std::vector<std::string> kConv = {"dilation", "groups",   "has_bias",
                                                 "kernel_h", "kernel_w", "stride"};
  static const std::vector<std::string> kPool = {"kernel_h", "kernel_w", "stride"};
  static const std::vector<std::string> kLinear = {"has_bias"};
  static const std::vector<std::string> kNone = {};
  switch (kind) {
    case OpKind::Conv2D:
      return kConv;
    case OpKind::MaxPool:
    case OpKind::AvgPool:
      return kPool;
    case OpKind::Linear:
      return kLinear;
    default:
      return kNone;
  }
}

std::string_view to_string(Family family) {
  return kFamilyNames[static_cast<std::size_t>(family)];
}

std::optional<Family> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
    if (kFamilyNames[i] == name) return static_cast<Family>(i);
  }
  return std::nullopt;
}

std::int64_t PrimitiveOp::attr(const std::string& key, std::int64_t fallback) const {
  auto it = attributes.find(key);
  return it == attributes.end() ? fallback : it->second;
}

ComputationGraph::ComputationGraph(std::vector<CGNode> nodes, std::vector<Edge> edges,
                                   std::optional<Family> family)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), family_(family) {}

std::vector<std::vector<int>> ComputationGraph::undirected_adjacency() const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<std::vector<int>> adj(nodes_.size());
  for (const Edge& e : edges_) {
    if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n || e.src == e.dst) continue;
    adj[static_cast<std::size_t>(e.src)].push_back(e.dst);
    adj[static_cast<std::size_t>(e.dst)].push_back(e.src);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

std::size_t ComputationGraph::skeleton_edge_count() const {
  std::size_t total = 0;
  for (const auto& list : undirected_adjacency()) total += list.size();
  return total / 2;
}

std::vector<int> ComputationGraph::topological_depth() const {
  const std::size_t n = nodes_.size();
  std::vector<std::vector<int>> out(n);
  std::vector<int> indeg(n, 0);
  for (const Edge& e : edges_) {
    out[static_cast<std::size_t>(e.src)].push_back(e.dst);
    ++indeg[static_cast<std::size_t>(e.dst)];
  }
  std::vector<int> depth(n, 0);
  std::deque<int> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const int u = ready.front();
    ready.pop_front();
    ++seen;
    for (int v : out[static_cast<std::size_t>(u)]) {
      auto& d = depth[static_cast<std::size_t>(v)];
      d = std::max(d, depth[static_cast<std::size_t>(u)] + 1);
      if (--indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
    }
  }
  if (seen != n) throw ValidationError("topological_depth: graph has a cycle");
  return depth;
}

ComputationGraph ComputationGraph::relabeled(const std::vector<int>& perm) const {
  if (perm.size() != nodes_.size()) throw std::invalid_argument("relabeled: bad permutation");
  std::vector<CGNode> nodes(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    CGNode node = nodes_[i];
    node.id = perm[i];
    nodes.at(static_cast<std::size_t>(perm[i])) = std::move(node);
  }
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const Edge& e : edges_) {
    edges.push_back({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)]});
  }
  std::sort(edges.begin(), edges.end());
  return ComputationGraph(std::move(nodes), std::move(edges), family_);
}

bool ValidationReport::has(std::string_view kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].kind << ": " << violations[i].message;
  }
  return os.str();
}

namespace {

class Validator {
 public:
  explicit Validator(const ComputationGraph& g) : g_(g), n_(static_cast<int>(g.size())) {}

  ValidationReport run() {
    if (n_ == 0) {
      add("empty", "graph has no nodes", {});
      return std::move(report_);
    }
    check_ids();
    if (!edges_in_range()) return std::move(report_);
    build_adjacency();
    for (const CGNode& node : g_.nodes()) check_node(node);
    const bool acyclic = check_acyclic();
    check_terminals();
    if (acyclic) check_paths();
    for (const CGNode& node : g_.nodes()) check_fan_in(node);
    return std::move(report_);
  }

 private:
  void add(std::string kind, std::string message, std::vector<int> nodes,
           std::vector<Edge> edges = {}) {
    report_.violations.push_back(
        {std::move(kind), std::move(message), std::move(nodes), std::move(edges)});
  }

  void check_ids() {
    for (int i = 0; i < n_; ++i) {
      if (g_.nodes()[static_cast<std::size_t>(i)].id != i) {
        add("node id", "node at position " + std::to_string(i) + " has id " +
                           std::to_string(g_.nodes()[static_cast<std::size_t>(i)].id),
            {i});
      }
    }
  }

  bool edges_in_range() {
    bool ok = true;
    for (const Edge& e : g_.edges()) {
      if (e.src < 0 || e.src >= n_ || e.dst < 0 || e.dst >= n_) {
        add("edge range",
            "edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ") is out of range",
            {}, {e});
        ok = false;
      } else if (e.src == e.dst) {
        add("cycle", "self loop on node " + std::to_string(e.src), {e.src}, {e});
      }
    }
    return ok;
  }

  void build_adjacency() {
    in_.assign(static_cast<std::size_t>(n_), {});
    out_.assign(static_cast<std::size_t>(n_), {});
    for (const Edge& e : g_.edges()) {
      in_[static_cast<std::size_t>(e.dst)].push_back(e.src);
      out_[static_cast<std::size_t>(e.src)].push_back(e.dst);
    }
  }

  void check_node(const CGNode& node) {
    const PrimitiveOp& op = node.op;
    const int id = node.id;
    const std::string where = "node " + std::to_string(id) + " (" + std::string(to_string(op.kind)) + ")";
    for (const Shape& s : {node.in_shape, node.out_shape}) {
      if (s.h < 1 || s.w < 1 || s.c < 1) {
        add("shape", where + " has a non-positive shape component", {id});
        break;
      }
    }
    if (op.kind == OpKind::Zero) {
      add("zero op", where + ": Zero never appears in a lowered graph", {id});
    }

    const auto& required = required_attributes(op.kind);
    std::set<std::string> have;
    for (const auto& [key, value] : op.attributes) {
      have.insert(key);
      if (std::find(required.begin(), required.end(), key) == required.end()) {
        add("attribute", where + " carries unexpected attribute '" + key + "'", {id});
      } else if (key == "has_bias" ? (value != 0 && value != 1) : value < 1) {
        add("attribute", where + " has invalid value for '" + key + "'", {id});
      }
    }
    for (const auto& key : required) {
      if (!have.count(key)) add("attribute", where + " is missing attribute '" + key + "'", {id});
    }

    if (is_weighted(op.kind) != node.weight_shape.has_value()) {
      add("weight shape",
          where + (node.weight_shape ? " must not carry" : " must carry") + " a weight shape",
          {id});
    }

    const Shape& in = node.in_shape;
    const Shape& out = node.out_shape;
    bool shape_ok = true;
    switch (op.kind) {
      case OpKind::Conv2D: {
        const std::int64_t stride = op.attr("stride", 1);
        const std::int64_t groups = op.attr("groups", 1);
        shape_ok = stride >= 1 && out.h == strided(in.h, stride) && out.w == strided(in.w, stride);
        if (groups >= 1 && (in.c % groups != 0 || out.c % groups != 0)) shape_ok = false;
        if (node.weight_shape && groups >= 1) {
          const WeightShape& ws = *node.weight_shape;
          if (ws.kh != op.attr("kernel_h") || ws.kw != op.attr("kernel_w") ||
              ws.cin * groups != in.c || ws.cout != out.c) {
            add("weight shape", where + " weight shape disagrees with its tensors", {id});
          }
        }
        break;
      }
      case OpKind::MaxPool:
      case OpKind::AvgPool: {
        const std::int64_t stride = op.attr("stride", 1);
        shape_ok = stride >= 1 && out.c == in.c && out.h == strided(in.h, stride) &&
                   out.w == strided(in.w, stride);
        break;
      }
      case OpKind::GlobalAvgPool:
        shape_ok = out == Shape{1, 1, in.c};
        break;
      case OpKind::Linear:
        shape_ok = out.h == in.h && out.w == in.w;
        if (node.weight_shape) {
          const WeightShape& ws = *node.weight_shape;
          if (ws.kh != 1 || ws.kw != 1 || ws.cin != in.c || ws.cout != out.c) {
            add("weight shape", where + " weight shape disagrees with its tensors", {id});
          }
        }
        break;
      case OpKind::BatchNorm:
        shape_ok = out == in;
        if (node.weight_shape) {
          const WeightShape& ws = *node.weight_shape;
          if (ws.kh != 1 || ws.kw != 1 || ws.cin != 1 || ws.cout != in.c) {
            add("weight shape", where + " weight shape disagrees with its tensors", {id});
          }
        }
        break;
      default:
        shape_ok = out == in;
        break;
    }
    if (!shape_ok) {
      add("node shape", where + " maps " + shape_str(in) + " to " + shape_str(out), {id});
    }
  }

  bool check_acyclic() {
    std::vector<int> indeg(static_cast<std::size_t>(n_), 0);
    for (const Edge& e : g_.edges()) {
      if (e.src != e.dst) ++indeg[static_cast<std::size_t>(e.dst)];
    }
    std::deque<int> ready;
    for (int i = 0; i < n_; ++i) {
      if (indeg[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
    }
    int seen = 0;
    while (!ready.empty()) {
      const int u = ready.front();
      ready.pop_front();
      ++seen;
      for (int v : out_[static_cast<std::size_t>(u)]) {
        if (v != u && --indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
      }
    }
    if (seen == n_) return !report_.has("cycle");
    std::vector<int> stuck;
    for (int i = 0; i < n_; ++i) {
      if (indeg[static_cast<std::size_t>(i)] > 0) stuck.push_back(i);
    }
    add("cycle", "graph is not acyclic; " + std::to_string(stuck.size()) + " nodes on cycles",
        stuck);
    return false;
  }

  void check_terminals() {
    std::vector<int> inputs, outputs;
    for (const CGNode& node : g_.nodes()) {
      const auto idx = static_cast<std::size_t>(node.id);
      if (node.op.kind == OpKind::Input) {
        inputs.push_back(node.id);
        if (node.id >= 0 && node.id < n_ && !in_[idx].empty()) {
          add("input", "Input node " + std::to_string(node.id) + " has incoming edges", {node.id});
        }
      } else if (node.op.kind == OpKind::Output) {
        outputs.push_back(node.id);
        if (node.id >= 0 && node.id < n_ && !out_[idx].empty()) {
          add("output", "Output node " + std::to_string(node.id) + " has outgoing edges",
              {node.id});
        }
      }
    }
    if (inputs.size() != 1) {
      add("input", "expected exactly one Input node, found " + std::to_string(inputs.size()),
          inputs);
    }
    if (outputs.size() != 1) {
      add("output", "expected exactly one Output node, found " + std::to_string(outputs.size()),
          outputs);
    }
    for (int i = 0; i < n_; ++i) {
      const auto kind = g_.nodes()[static_cast<std::size_t>(i)].op.kind;
      if (kind != OpKind::Input && in_[static_cast<std::size_t>(i)].empty()) {
        add("source", "node " + std::to_string(i) + " has no inputs but is not Input", {i});
      }
      if (kind != OpKind::Output && out_[static_cast<std::size_t>(i)].empty()) {
        add("sink", "node " + std::to_string(i) + " has no consumers but is not Output", {i});
      }
    }
    if (inputs.size() == 1) input_ = inputs[0];
    if (outputs.size() == 1) output_ = outputs[0];
  }

  void check_paths() {
    if (input_ < 0 || output_ < 0) return;
    auto reach = [&](int start, const std::vector<std::vector<int>>& adj) {
      std::vector<char> seen(static_cast<std::size_t>(n_), 0);
      std::vector<int> stack = {start};
      seen[static_cast<std::size_t>(start)] = 1;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[static_cast<std::size_t>(u)]) {
          if (!seen[static_cast<std::size_t>(v)]) {
            seen[static_cast<std::size_t>(v)] = 1;
            stack.push_back(v);
          }
        }
      }
      return seen;
    };
    const auto fwd = reach(input_, out_);
    const auto bwd = reach(output_, in_);
    std::vector<int> off_path;
    for (int i = 0; i < n_; ++i) {
      if (!fwd[static_cast<std::size_t>(i)] || !bwd[static_cast<std::size_t>(i)]) {
        off_path.push_back(i);
      }
    }
    if (!off_path.empty()) {
      add("path", std::to_string(off_path.size()) + " nodes lie on no Input->Output path",
          off_path);
    }
  }

  void check_fan_in(const CGNode& node) {
    const auto& preds = in_[static_cast<std::size_t>(node.id)];
    const OpKind kind = node.op.kind;
    if (kind == OpKind::Input || preds.empty()) return;
    std::vector<Edge> edges;
    for (int p : preds) edges.push_back({p, node.id});
    const std::string where = "node " + std::to_string(node.id) + " (" + std::string(to_string(kind)) + ")";

    if (is_elementwise_join(kind)) {
      if (preds.size() < 2) {
        add("fan-in count", where + " joins fewer than two inputs", {node.id}, edges);
        return;
      }
      for (int p : preds) {
        if (g_.node(p).out_shape != node.in_shape) {
          add("fan-in shape mismatch",
              where + " receives " + shape_str(g_.node(p).out_shape) + " from node " +
                  std::to_string(p) + ", expected " + shape_str(node.in_shape),
              {node.id, p}, edges);
          return;
        }
      }
    } else if (kind == OpKind::Concat) {
      if (preds.size() < 2) {
        add("fan-in count", where + " concatenates fewer than two inputs", {node.id}, edges);
        return;
      }
      std::int64_t channels = 0;
      for (int p : preds) {
        const Shape& s = g_.node(p).out_shape;
        if (s.h != node.in_shape.h || s.w != node.in_shape.w) {
          add("fan-in shape mismatch",
              where + " receives spatial extent " + shape_str(s) + " from node " +
                  std::to_string(p),
              {node.id, p}, edges);
          return;
        }
        channels += s.c;
      }
      if (channels != node.in_shape.c) {
        add("fan-in shape mismatch",
            where + " input channels sum to " + std::to_string(channels) + ", expected " +
                std::to_string(node.in_shape.c),
            {node.id}, edges);
      }
    } else {
      if (preds.size() != 1) {
        add("fan-in count", where + " must have exactly one input, has " +
                                std::to_string(preds.size()),
            {node.id}, edges);
        return;
      }
      if (g_.node(preds[0]).out_shape != node.in_shape) {
        add("fan-in shape mismatch",
            where + " receives " + shape_str(g_.node(preds[0]).out_shape) + " from node " +
                std::to_string(preds[0]) + ", expected " + shape_str(node.in_shape),
            {node.id, preds[0]}, edges);
      }
    }
  }

  const ComputationGraph& g_;
  const int n_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
  int input_ = -1;
  int output_ = -1;
  ValidationReport report_;
};

std::uint64_t initial_color(const CGNode& node) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(node.op.kind) + 1);
  for (const auto& [key, value] : node.op.attributes) {
    h = hash_combine(h, fnv1a64(key));
    h = hash_combine(h, static_cast<std::uint64_t>(value));
  }
  for (const Shape& s : {node.in_shape, node.out_shape}) {
    h = hash_combine(h, static_cast<std::uint64_t>(s.h));
    h = hash_combine(h, static_cast<std::uint64_t>(s.w));
    h = hash_combine(h, static_cast<std::uint64_t>(s.c));
  }
  if (node.weight_shape) {
    const WeightShape& ws = *node.weight_shape;
    for (auto v : {ws.kh, ws.kw, ws.cin, ws.cout}) h = hash_combine(h, static_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace

ValidationReport validate(const ComputationGraph& g) { return Validator(g).run(); }

void require_valid(const ComputationGraph& g) {
  auto report = validate(g);
  if (!report.ok()) throw ValidationError("invalid computation graph: " + report.summary());
}

std::uint64_t wl_hash(const ComputationGraph& g, int iterations) {
  require_valid(g);
  if (iterations < 0) throw std::invalid_argument("wl_hash: negative iteration count");
  const auto adj = g.undirected_adjacency();
  std::vector<std::uint64_t> colors(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) colors[i] = initial_color(g.nodes()[i]);

  std::vector<std::uint64_t> next(g.size());
  std::vector<std::uint64_t> neighborhood;
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      neighborhood.clear();
      for (int v : adj[i]) neighborhood.push_back(colors[static_cast<std::size_t>(v)]);
      std::sort(neighborhood.begin(), neighborhood.end());
      std::uint64_t h = hash_combine(colors[i], neighborhood.size());
      for (auto c : neighborhood) h = hash_combine(h, c);
      next[i] = h;
    }
    colors.swap(next);
  }
  std::sort(colors.begin(), colors.end());
  std::uint64_t digest = hash_combine(kFnvOffset, static_cast<std::uint64_t>(iterations));
  digest = hash_combine(digest, colors.size());
  for (auto c : colors) digest = hash_combine(digest, c);
  return digest;
}

}  // namespace cgnas
