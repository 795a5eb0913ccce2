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

#include "cgnas/cell.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace cgnas {

namespace {

using K = OpKind;

std::vector<std::string> labels_of(const std::vector<Grouping>& table) {
  std::vector<std::string> out;
  for (const auto& row : table) out.push_back(row.label);
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("bad integer '" + std::string(s) + "' in " + std::string(what), 1,
                     std::string(what));
  }
  return v;
}

bool reaches(const std::vector<std::vector<int>>& adj, std::size_t from, std::size_t to) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::size_t> stack = {from};
  seen[from] = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    if (u == to) return true;
    for (std::size_t v = 0; v < adj.size(); ++v) {
      if (adj[u][v] && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return false;
}

// NB201Style: does any zeroize-free path connect node 0 to node 3?
bool nb201_connected(const Nb201Cell& cell) {
  std::array<bool, 4> alive = {true, false, false, false};
  for (std::size_t k = 0; k < 6; ++k) {
    // Edge order is sorted by destination, so one pass suffices.
    const auto [u, v] = Nb201Cell::kEdges[k];
    if (alive[static_cast<std::size_t>(u)] && cell.edges[k] != kZeroize) {
      alive[static_cast<std::size_t>(v)] = true;
    }
  }
  return alive[3];
}

bool nb301_connected(const Nb301Cell& cell) {
  std::vector<bool> alive(cell.nodes.size() + 2, false);
  alive[0] = alive[1] = true;
  bool any = false;
  for (std::size_t k = 0; k < cell.nodes.size(); ++k) {
    const auto& n = cell.nodes[k];
    const bool a = n.op_a != kZeroize && alive[static_cast<std::size_t>(n.input_a)];
    const bool b = n.op_b != kZeroize && alive[static_cast<std::size_t>(n.input_b)];
    alive[k + 2] = a || b;
    any = any || alive[k + 2];
  }
  return any;
}

}  // namespace

Dialect Dialect::nb101() { return {Family::NB101Style, labels_of(grouping_table(Family::NB101Style))}; }
Dialect Dialect::nb201() { return {Family::NB201Style, labels_of(grouping_table(Family::NB201Style))}; }
Dialect Dialect::nb301() { return {Family::NB301Style, labels_of(grouping_table(Family::NB301Style))}; }

Dialect Dialect::nb201_reduced() {
  Dialect d = nb201();
  d.vocabulary.erase(std::remove(d.vocabulary.begin(), d.vocabulary.end(), kZeroize),
                     d.vocabulary.end());
  return d;
}

Dialect Dialect::standard(Family family) {
  switch (family) {
    case Family::NB101Style:
      return nb101();
    case Family::NB201Style:
      return nb201();
    case Family::NB301Style:
      return nb301();
  }
  throw std::invalid_argument("unknown family");
}

bool Dialect::has(std::string_view label) const {
  return std::find(vocabulary.begin(), vocabulary.end(), label) != vocabulary.end();
}

const std::vector<Grouping>& grouping_table(Family family) {
  static const std::vector<Grouping> kNb101 = {
      {"conv1x1", {K::Conv2D, K::BatchNorm, K::ReLU}},
      {"conv3x3", {K::Conv2D, K::BatchNorm, K::ReLU}},
      {"maxpool3x3", {K::MaxPool}},
  };
  static const std::vector<Grouping> kNb201 = {
      {"zeroize", {}},
      {"skip", {}},
      {"conv1x1", {K::ReLU, K::Conv2D, K::BatchNorm}},
      {"conv3x3", {K::ReLU, K::Conv2D, K::BatchNorm}},
      {"avgpool3x3", {K::AvgPool}},
  };
  static const std::vector<Grouping> kNb301 = {
      {"zeroize", {}},
      {"skip", {}},
      {"sep3x3", {K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm, K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm}},
      {"sep5x5", {K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm, K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm}},
      {"dil3x3", {K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm}},
      {"dil5x5", {K::ReLU, K::Conv2D, K::Conv2D, K::BatchNorm}},
      {"avgpool3x3", {K::AvgPool}},
      {"maxpool3x3", {K::MaxPool}},
  };
  switch (family) {
    case Family::NB101Style:
      return kNb101;
    case Family::NB201Style:
      return kNb201;
    case Family::NB301Style:
      return kNb301;
  }
  throw std::invalid_argument("unknown family");
}

const Grouping& grouping(Family family, std::string_view label) {
  for (const auto& row : grouping_table(family)) {
    if (row.label == label) return row;
  }
  throw LoweringError("unknown operator '" + std::string(label) + "' for " +
                      std::string(to_string(family)));
}

std::size_t Nb101Cell::edge_count() const {
  std::size_t total = 0;
  for (const auto& row : adjacency) total += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
  return total;
}

std::optional<std::string> check_constraints(const CellSpec& spec) {
  const Dialect& d = spec.dialect;
  if (const auto* c = std::get_if<Nb101Cell>(&spec.cell)) {
    if (d.family != Family::NB101Style) return "cell body does not match dialect";
    const std::size_t v = c->vertex_count();
    if (v < 3) return "NB101Style cell needs at least one internal vertex";
    if (v > Nb101Cell::kMaxVertices) return "NB101Style cell has more than 7 vertices";
    if (c->adjacency.size() != v) return "adjacency size does not match op list";
    for (std::size_t i = 0; i < v; ++i) {
      if (c->adjacency[i].size() != v) return "adjacency is not square";
      for (std::size_t j = 0; j < v; ++j) {
        const int a = c->adjacency[i][j];
        if (a != 0 && a != 1) return "adjacency entries must be 0 or 1";
        if (a && j <= i) return "adjacency must be strictly upper triangular";
      }
    }
    if (c->ops.front() != "input" || c->ops.back() != "output") {
      return "NB101Style op list must start with input and end with output";
    }
    for (std::size_t i = 1; i + 1 < v; ++i) {
      if (!d.has(c->ops[i])) return "unknown NB101Style op '" + c->ops[i] + "'";
    }
    if (c->edge_count() > Nb101Cell::kMaxEdges) return "NB101Style cell has more than 9 edges";
    if (!reaches(c->adjacency, 0, v - 1)) return "OUT is not reachable from IN";
    return std::nullopt;
  }
  if (const auto* c = std::get_if<Nb201Cell>(&spec.cell)) {
    if (d.family != Family::NB201Style) return "cell body does not match dialect";
    for (const auto& label : c->edges) {
      if (!d.has(label)) return "unknown NB201Style op '" + label + "'";
    }
    return std::nullopt;
  }
  const auto& c = std::get<Nb301Cell>(spec.cell);
  if (d.family != Family::NB301Style) return "cell body does not match dialect";
  if (c.nodes.empty()) return "NB301Style cell has no intermediate nodes";
  for (std::size_t k = 0; k < c.nodes.size(); ++k) {
    const auto& n = c.nodes[k];
    const int self = static_cast<int>(k) + 2;
    if (n.input_a < 0 || n.input_a >= self || n.input_b < 0 || n.input_b >= self) {
      return "NB301Style node " + std::to_string(self) + " reads a later node";
    }
    if (n.input_a == n.input_b) {
      return "NB301Style node " + std::to_string(self) + " reads the same input twice";
    }
    if (!d.has(n.op_a) || !d.has(n.op_b)) return "unknown NB301Style op";
  }
  return std::nullopt;
}

Nb101Cell prune(const Nb101Cell& cell) {
  const std::size_t v = cell.vertex_count();
  std::vector<char> keep(v, 0);
  for (std::size_t i = 0; i < v; ++i) {
    keep[i] = reaches(cell.adjacency, 0, i) && reaches(cell.adjacency, i, v - 1);
  }
  if (!keep[0] || !keep[v - 1]) return cell;
  Nb101Cell out;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < v; ++i) {
    if (keep[i]) kept.push_back(i);
  }
  out.adjacency.assign(kept.size(), std::vector<int>(kept.size(), 0));
  for (std::size_t a = 0; a < kept.size(); ++a) {
    out.ops.push_back(cell.ops[kept[a]]);
    for (std::size_t b = 0; b < kept.size(); ++b) {
      out.adjacency[a][b] = cell.adjacency[kept[a]][kept[b]];
    }
  }
  return out;
}

std::vector<std::string> operator_labels(const CellSpec& spec) {
  if (const auto* c = std::get_if<Nb101Cell>(&spec.cell)) {
    return {c->ops.begin() + 1, c->ops.end() - 1};
  }
  if (const auto* c = std::get_if<Nb201Cell>(&spec.cell)) {
    return {c->edges.begin(), c->edges.end()};
  }
  std::vector<std::string> out;
  for (const auto& n : std::get<Nb301Cell>(spec.cell).nodes) {
    out.push_back(n.op_a);
    out.push_back(n.op_b);
  }
  return out;
}

CellSpec with_operator(const CellSpec& spec, std::size_t position, const std::string& label) {
  CellSpec out = spec;
  if (auto* c = std::get_if<Nb101Cell>(&out.cell)) {
    c->ops.at(position + 1) = label;
  } else if (auto* c = std::get_if<Nb201Cell>(&out.cell)) {
    c->edges.at(position) = label;
  } else {
    auto& node = std::get<Nb301Cell>(out.cell).nodes.at(position / 2);
    (position % 2 == 0 ? node.op_a : node.op_b) = label;
  }
  return out;
}

std::string format_cell(const CellSpec& spec) {
  std::ostringstream os;
  if (const auto* c = std::get_if<Nb101Cell>(&spec.cell)) {
    for (std::size_t i = 0; i < c->adjacency.size(); ++i) {
      if (i) os << '/';
      for (int a : c->adjacency[i]) os << a;
    }
    os << ';';
    for (std::size_t i = 0; i < c->ops.size(); ++i) os << (i ? "," : "") << c->ops[i];
  } else if (const auto* c = std::get_if<Nb201Cell>(&spec.cell)) {
    os << '|' << c->edges[0] << "~0|+|" << c->edges[1] << "~0|" << c->edges[2] << "~1|+|"
       << c->edges[3] << "~0|" << c->edges[4] << "~1|" << c->edges[5] << "~2|";
  } else {
    const auto& nodes = std::get<Nb301Cell>(spec.cell).nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto& n = nodes[k];
      os << (k ? ";" : "") << '(' << n.input_a << ',' << n.input_b << ',' << n.op_a << ','
         << n.op_b << ')';
    }
  }
  return os.str();
}

CellSpec parse_cell(const Dialect& dialect, std::string_view text) {
  CellSpec spec{dialect, Nb201Cell{}};
  switch (dialect.family) {
    case Family::NB101Style: {
      const auto halves = split(text, ';');
      if (halves.size() != 2) throw ParseError("NB101Style cell needs '<adjacency>;<ops>'", 1, "cell");
      Nb101Cell cell;
      for (const auto& row : split(halves[0], '/')) {
        std::vector<int> bits;
        for (char ch : row) {
          if (ch != '0' && ch != '1') throw ParseError("adjacency rows must be 0/1 digits", 1, "adjacency");
          bits.push_back(ch - '0');
        }
        cell.adjacency.push_back(std::move(bits));
      }
      cell.ops = split(halves[1], ',');
      spec.cell = std::move(cell);
      break;
    }
    case Family::NB201Style: {
      // |a~0|+|b~0|c~1|+|d~0|e~1|f~2|
      Nb201Cell cell;
      const auto groups = split(text, '+');
      if (groups.size() != 3) throw ParseError("NB201Style cell needs three '+'-separated groups", 1, "cell");
      std::size_t k = 0;
      for (std::size_t g = 0; g < 3; ++g) {
        const auto& grp = groups[g];
        if (grp.size() < 2 || grp.front() != '|' || grp.back() != '|') {
          throw ParseError("NB201Style group must be wrapped in '|'", 1, "cell");
        }
        const auto items = split(std::string_view(grp).substr(1, grp.size() - 2), '|');
        if (items.size() != g + 1) throw ParseError("NB201Style group has wrong arity", 1, "cell");
        for (std::size_t i = 0; i < items.size(); ++i) {
          const auto tilde = items[i].find('~');
          if (tilde == std::string::npos) throw ParseError("NB201Style edge needs 'op~src'", 1, "cell");
          if (parse_int(std::string_view(items[i]).substr(tilde + 1), "edge source") != static_cast<int>(i)) {
            throw ParseError("NB201Style edge source out of order", 1, "cell");
          }
          cell.edges[k++] = items[i].substr(0, tilde);
        }
      }
      spec.cell = std::move(cell);
      break;
    }
    case Family::NB301Style: {
      Nb301Cell cell;
      for (const auto& tuple : split(text, ';')) {
        if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')') {
          throw ParseError("NB301Style node must be '(in,in,op,op)'", 1, "cell");
        }
        const auto parts = split(std::string_view(tuple).substr(1, tuple.size() - 2), ',');
        if (parts.size() != 4) throw ParseError("NB301Style node must have 4 fields", 1, "cell");
        cell.nodes.push_back({parse_int(parts[0], "input"), parse_int(parts[1], "input"), parts[2], parts[3]});
      }
      spec.cell = std::move(cell);
      break;
    }
  }
  if (auto problem = check_constraints(spec)) throw SchemaError(*problem, "cell");
  return spec;
}

std::string format_tagged(const CellSpec& spec) {
  return std::string(to_string(spec.family())) + ":" + format_cell(spec);
}

CellSpec parse_tagged(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ParseError("tagged cell needs '<Family>:<cell>'", 1, "cell");
  auto family = parse_family(text.substr(0, colon));
  if (!family) throw SchemaError("unknown family '" + std::string(text.substr(0, colon)) + "'", "family");
  return parse_cell(Dialect::standard(*family), text.substr(colon + 1));
}

namespace {

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

}  // namespace

CellSpec random_cell(const Dialect& dialect, Rng& rng) {
  switch (dialect.family) {
    case Family::NB101Style: {
      std::vector<std::string> ops;
      for (const auto& label : dialect.vocabulary) ops.push_back(label);
      while (true) {
        Nb101Cell cell;
        const std::size_t v = Nb101Cell::kMaxVertices;
        cell.adjacency.assign(v, std::vector<int>(v, 0));
        for (std::size_t i = 0; i < v; ++i) {
          for (std::size_t j = i + 1; j < v; ++j) cell.adjacency[i][j] = static_cast<int>(uniform_index(rng, 2));
        }
        cell.ops.push_back("input");
        for (std::size_t i = 1; i + 1 < v; ++i) cell.ops.push_back(pick(ops, rng));
        cell.ops.push_back("output");
        if (cell.edge_count() > Nb101Cell::kMaxEdges) continue;
        if (!reaches(cell.adjacency, 0, v - 1)) continue;
        CellSpec spec{dialect, prune(cell)};
        if (!check_constraints(spec)) return spec;
      }
    }
    case Family::NB201Style: {
      while (true) {
        Nb201Cell cell;
        for (auto& e : cell.edges) e = pick(dialect.vocabulary, rng);
        if (nb201_connected(cell)) return {dialect, cell};
      }
    }
    case Family::NB301Style: {
      while (true) {
        Nb301Cell cell;
        for (std::size_t k = 0; k < Nb301Cell::kDefaultNodes; ++k) {
          const auto avail = k + 2;
          // Unordered pair of distinct inputs, uniform.
          const auto a = static_cast<int>(uniform_index(rng, avail));
          auto b = static_cast<int>(uniform_index(rng, avail - 1));
          if (b >= a) ++b;
          cell.nodes.push_back({std::min(a, b), std::max(a, b), pick(dialect.vocabulary, rng),
                                pick(dialect.vocabulary, rng)});
        }
        if (nb301_connected(cell)) return {dialect, cell};
      }
    }
  }
  throw std::invalid_argument("unknown family");
}

std::vector<CellSpec> enumerate_nb201(const Dialect& dialect) {
  if (dialect.family != Family::NB201Style) throw std::invalid_argument("enumerate_nb201 needs NB201Style");
  const std::size_t m = dialect.vocabulary.size();
  std::size_t total = 1;
  for (int i = 0; i < 6; ++i) total *= m;
  std::vector<CellSpec> out;
  out.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    Nb201Cell cell;
    std::size_t rest = code;
    for (int k = 5; k >= 0; --k) {
      cell.edges[static_cast<std::size_t>(k)] = dialect.vocabulary[rest % m];
      rest /= m;
    }
    out.push_back({dialect, std::move(cell)});
  }
  return out;
}

}  // namespace cgnas
