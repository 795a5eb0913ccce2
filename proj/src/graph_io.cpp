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

#include <algorithm>

#include <json.hpp>

#include "cgnas/common.hpp"
#include "cgnas/graph.hpp"

namespace cgnas {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json shape_json(const Shape& s) { return ordered_json::array({s.h, s.w, s.c}); }

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + " must be an object", path);
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError("missing field " + path + "." + key, path + "." + key);
  return *it;
}

std::int64_t as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw SchemaError(path + " must be an integer", path);
  return v.get<std::int64_t>();
}

Shape parse_shape(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(path + " must be [H, W, C]", path);
  return {as_int(v[0], path + "[0]"), as_int(v[1], path + "[1]"), as_int(v[2], path + "[2]")};
}

}  // namespace

std::string serialize(const ComputationGraph& g) {
  require_valid(g);
  ordered_json doc;
  doc["version"] = std::string(kGraphFormatVersion);
  doc["family"] = g.family() ? ordered_json(std::string(to_string(*g.family()))) : ordered_json(nullptr);
  ordered_json nodes = ordered_json::array();
  for (const CGNode& node : g.nodes()) {
    ordered_json n;
    n["id"] = node.id;
    n["kind"] = std::string(to_string(node.op.kind));
    ordered_json attrs = ordered_json::object();
    for (const auto& [key, value] : node.op.attributes) attrs[key] = value;
    n["attributes"] = std::move(attrs);
    n["in_shape"] = shape_json(node.in_shape);
    n["out_shape"] = shape_json(node.out_shape);
    if (node.weight_shape) {
      const WeightShape& ws = *node.weight_shape;
      n["weight_shape"] = ordered_json::array({ws.kh, ws.kw, ws.cin, ws.cout});
    } else {
      n["weight_shape"] = nullptr;
    }
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const Edge& e : g.edges()) edges.push_back(ordered_json::array({e.src, e.dst}));
  doc["edges"] = std::move(edges);
  return doc.dump(1) + "\n";
}

ComputationGraph deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("graph document: ") + e.what(), line_of(text, e.byte));
  }
  if (!doc.is_object()) throw SchemaError("graph document must be an object", "$");

  const json& version = field(doc, "version", "$");
  if (!version.is_string()) throw SchemaError("$.version must be a string", "$.version");
  if (version.get<std::string>() != kGraphFormatVersion) {
    throw SchemaError("unsupported graph format version '" + version.get<std::string>() + "'",
                      "$.version");
  }

  std::optional<Family> family;
  if (auto it = doc.find("family"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("$.family must be a string or null", "$.family");
    family = parse_family(it->get<std::string>());
    if (!family) throw SchemaError("unknown family '" + it->get<std::string>() + "'", "$.family");
  }

  const json& jnodes = field(doc, "nodes", "$");
  if (!jnodes.is_array()) throw SchemaError("$.nodes must be an array", "$.nodes");
  std::vector<CGNode> nodes;
  nodes.reserve(jnodes.size());
  for (std::size_t i = 0; i < jnodes.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    const json& jn = jnodes[i];
    CGNode node;
    node.id = static_cast<int>(as_int(field(jn, "id", path), path + ".id"));
    const json& kind = field(jn, "kind", path);
    if (!kind.is_string()) throw SchemaError(path + ".kind must be a string", path + ".kind");
    auto op_kind = parse_op_kind(kind.get<std::string>());
    if (!op_kind) {
      throw SchemaError("unknown op kind '" + kind.get<std::string>() + "' at " + path + ".kind",
                        path + ".kind");
    }
    node.op.kind = *op_kind;
    if (auto it = jn.find("attributes"); it != jn.end() && !it->is_null()) {
      if (!it->is_object()) {
        throw SchemaError(path + ".attributes must be an object", path + ".attributes");
      }
      for (const auto& [key, value] : it->items()) {
        node.op.attributes[key] = as_int(value, path + ".attributes." + key);
      }
    }
    node.in_shape = parse_shape(field(jn, "in_shape", path), path + ".in_shape");
    node.out_shape = parse_shape(field(jn, "out_shape", path), path + ".out_shape");
    if (auto it = jn.find("weight_shape"); it != jn.end() && !it->is_null()) {
      const std::string wpath = path + ".weight_shape";
      if (!it->is_array() || it->size() != 4) {
        throw SchemaError(wpath + " must be [kh, kw, cin, cout] or null", wpath);
      }
      node.weight_shape = WeightShape{as_int((*it)[0], wpath), as_int((*it)[1], wpath),
                                      as_int((*it)[2], wpath), as_int((*it)[3], wpath)};
    }
    nodes.push_back(std::move(node));
  }

  const json& jedges = field(doc, "edges", "$");
  if (!jedges.is_array()) throw SchemaError("$.edges must be an array", "$.edges");
  std::vector<Edge> edges;
  edges.reserve(jedges.size());
  for (std::size_t i = 0; i < jedges.size(); ++i) {
    const std::string path = "$.edges[" + std::to_string(i) + "]";
    const json& je = jedges[i];
    if (!je.is_array() || je.size() != 2) throw SchemaError(path + " must be [src, dst]", path);
    edges.push_back({static_cast<int>(as_int(je[0], path + "[0]")),
                     static_cast<int>(as_int(je[1], path + "[1]"))});
  }

  ComputationGraph g(std::move(nodes), std::move(edges), family);
  require_valid(g);
  return g;
}

}  // namespace cgnas
