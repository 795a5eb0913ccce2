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

#include "cgnas/evolution.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "cgnas/lowering.hpp"

namespace cgnas {
namespace {

constexpr std::size_t kMaxEditAttempts = 20;

void warn(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

std::string other_label(const Dialect& d, const std::string& current, Rng& rng) {
  std::vector<std::string> options;
  for (const auto& l : d.vocabulary) {
    if (l != current) options.push_back(l);
  }
  return options.empty() ? current : pick(options, rng);
}

CellSpec edit_nb101(const CellSpec& spec, Rng& rng) {
  Nb101Cell c = std::get<Nb101Cell>(spec.cell);
  const std::size_t v = c.vertex_count();
  const std::size_t internal = v - 2;
  const std::size_t edges = c.edge_count();
  std::vector<std::pair<std::size_t, std::size_t>> present, absent;
  for (std::size_t i = 0; i < v; ++i) {
    for (std::size_t j = i + 1; j < v; ++j) (c.adjacency[i][j] ? present : absent).emplace_back(i, j);
  }

  enum Kind { Swap, AddOp, RemoveOp, AddEdge, RemoveEdge };
  std::vector<Kind> kinds = {Swap};
  if (v < Nb101Cell::kMaxVertices && edges + 2 <= Nb101Cell::kMaxEdges) kinds.push_back(AddOp);
  if (internal >= 2) kinds.push_back(RemoveOp);
  if (edges < Nb101Cell::kMaxEdges && !absent.empty()) kinds.push_back(AddEdge);
  if (edges >= 2) kinds.push_back(RemoveEdge);

  switch (pick(kinds, rng)) {
    case Swap: {
      const std::size_t x = 1 + uniform_index(rng, internal);
      c.ops[x] = other_label(spec.dialect, c.ops[x], rng);
      break;
    }
    case AddOp: {
      const std::size_t p = 1 + uniform_index(rng, v - 1);
      auto shift = [p](std::size_t i) { return i < p ? i : i + 1; };
      std::vector<std::vector<int>> adj(v + 1, std::vector<int>(v + 1, 0));
      for (std::size_t i = 0; i < v; ++i) {
        for (std::size_t j = 0; j < v; ++j) adj[shift(i)][shift(j)] = c.adjacency[i][j];
      }
      adj[uniform_index(rng, p)][p] = 1;
      adj[p][p + 1 + uniform_index(rng, v - p)] = 1;
      c.adjacency = std::move(adj);
      c.ops.insert(c.ops.begin() + static_cast<std::ptrdiff_t>(p), pick(spec.dialect.vocabulary, rng));
      break;
    }
    case RemoveOp: {
      const auto x = static_cast<std::ptrdiff_t>(1 + uniform_index(rng, internal));
      c.adjacency.erase(c.adjacency.begin() + x);
      for (auto& row : c.adjacency) row.erase(row.begin() + x);
      c.ops.erase(c.ops.begin() + x);
      break;
    }
    case AddEdge: {
      const auto [i, j] = pick(absent, rng);
      c.adjacency[i][j] = 1;
      break;
    }
    case RemoveEdge: {
      const auto [i, j] = pick(present, rng);
      c.adjacency[i][j] = 0;
      break;
    }
  }
  return {spec.dialect, prune(c)};
}

CellSpec edit_nb201(const CellSpec& spec, Rng& rng) {
  const std::size_t pos = uniform_index(rng, 6);
  return with_operator(spec, pos, other_label(spec.dialect, operator_labels(spec)[pos], rng));
}

CellSpec edit_nb301(const CellSpec& spec, Rng& rng) {
  Nb301Cell c = std::get<Nb301Cell>(spec.cell);
  if (c.nodes.size() < 2 || uniform_index(rng, 2) == 0) {
    const std::size_t slot = uniform_index(rng, 2 * c.nodes.size());
    return with_operator(spec, slot, other_label(spec.dialect, operator_labels(spec)[slot], rng));
  }
  // Rewire one input of a node that has a third predecessor to choose from.
  const std::size_t k = 1 + uniform_index(rng, c.nodes.size() - 1);
  Nb301Node& n = c.nodes[k];
  std::vector<int> options;
  for (int src = 0; src < static_cast<int>(k) + 2; ++src) {
    if (src != n.input_a && src != n.input_b) options.push_back(src);
  }
  (uniform_index(rng, 2) == 0 ? n.input_a : n.input_b) = pick(options, rng);
  return {spec.dialect, c};
}

CellSpec single_edit(const CellSpec& spec, Rng& rng) {
  switch (spec.family()) {
    case Family::NB101Style: return edit_nb101(spec, rng);
    case Family::NB201Style: return edit_nb201(spec, rng);
    case Family::NB301Style: return edit_nb301(spec, rng);
  }
  throw std::invalid_argument("unknown family");
}

std::vector<std::size_t> top_k(const std::vector<ArchRecord>& population, std::size_t k) {
  std::vector<double> acc;
  for (const auto& r : population) acc.push_back(*r.accuracy);
  auto order = rank(population, acc);
  order.resize(std::min(k, order.size()));
  return order;
}

IterationStats stats(const SearchState& s, std::size_t iteration, std::size_t queried) {
  const ArchRecord& b = s.best();
  return {iteration, *b.accuracy, b.digest, queried, s.ledger.count()};
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class RandomEstimator final : public Estimator {
 public:
  explicit RandomEstimator(std::uint64_t seed) : rng_(seed) {}
  EstimatorKind kind() const override { return EstimatorKind::Random; }
  std::vector<double> score(const std::vector<ArchRecord>& c) override {
    std::vector<double> out(c.size());
    for (double& s : out) s = uniform01(rng_);
    return out;
  }

 private:
  Rng rng_;
};

class OracleEstimator final : public Estimator {
 public:
  explicit OracleEstimator(OracleConfig oracle) : oracle_(std::move(oracle)) {}
  EstimatorKind kind() const override { return EstimatorKind::OracleDirect; }
  std::vector<double> score(const std::vector<ArchRecord>& c) override {
    std::vector<double> out;
    for (const auto& r : c) out.push_back(oracle_accuracy(r.cg, oracle_));
    return out;
  }

 private:
  OracleConfig oracle_;
};

class ClEstimator final : public Estimator {
 public:
  ClEstimator(ParamStore encoder, ParamStore head, EncoderConfig config)
      : encoder_(std::move(encoder)), head_(std::move(head)), config_(config) {}
  EstimatorKind kind() const override { return EstimatorKind::ClPredictor; }
  std::vector<double> score(const std::vector<ArchRecord>& c) override {
    std::vector<double> out;
    for (const auto& r : c) out.push_back(predict_value(head_, config_, representation(encoder_, config_, prepare(r.cg))));
    return out;
  }

 private:
  ParamStore encoder_;
  ParamStore head_;
  EncoderConfig config_;
};

}  // namespace

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Random: return "random";
    case EstimatorKind::ClPredictor: return "cl_predictor";
    case EstimatorKind::OracleDirect: return "oracle_direct";
  }
  return "?";
}

std::optional<Preset> parse_preset(std::string_view name) {
  if (name == "random") return Preset::Random;
  if (name == "cl") return Preset::CL;
  return std::nullopt;
}

EAConfig ea_preset(Family family, Preset preset) {
  const bool cl = preset == Preset::CL;
  switch (family) {
    case Family::NB101Style: return cl ? EAConfig{20, 100, 50, 6} : EAConfig{20, 100, 100, 6};
    case Family::NB201Style: return cl ? EAConfig{10, 10, 10, 5} : EAConfig{10, 20, 10, 4};
    case Family::NB301Style: return cl ? EAConfig{20, 100, 50, 7} : EAConfig{20, 100, 100, 7};
  }
  throw std::invalid_argument("unknown family");
}

std::unique_ptr<Estimator> random_estimator(std::uint64_t seed) { return std::make_unique<RandomEstimator>(seed); }

std::unique_ptr<Estimator> oracle_estimator(const OracleConfig& oracle) {
  return std::make_unique<OracleEstimator>(oracle);
}

std::unique_ptr<Estimator> cl_estimator(const ParamStore& encoder, const ParamStore& head,
                                        const EncoderConfig& config) {
  return std::make_unique<ClEstimator>(encoder, head, config);
}

std::optional<ArchRecord> try_record(const CellSpec& spec) {
  if (check_constraints(spec)) return std::nullopt;
  try {
    return make_record(spec);
  } catch (const LoweringError&) {
    return std::nullopt;
  }
}

CellSpec crossover(const CellSpec& p1, const CellSpec& p2, Rng& rng, const LogFn& log) {
  if (!(p1.dialect == p2.dialect)) throw SearchError("crossover needs parents of one dialect");
  const auto a = operator_labels(p1);
  const auto b = operator_labels(p2);
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::any_of(b.begin(), b.end(), [&](const std::string& l) { return l != a[i]; })) positions.push_back(i);
  }
  for (std::size_t attempt = 0; !positions.empty() && attempt < kMaxEditAttempts; ++attempt) {
    const std::size_t i = pick(positions, rng);
    std::vector<std::size_t> donors;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b[j] != a[i]) donors.push_back(j);
    }
    CellSpec child = with_operator(p1, i, b[pick(donors, rng)]);
    if (try_record(child)) return child;
  }
  warn(log, "warning: crossover found no admissible replacement; mutating the first parent instead");
  return mutate(p1, 1, rng);
}

CellSpec mutate(const CellSpec& spec, std::size_t edits, Rng& rng) {
  if (edits == 0) throw std::invalid_argument("mutate: edits must be at least 1");
  CellSpec current = spec;
  for (std::size_t e = 0; e < edits; ++e) {
    bool done = false;
    for (std::size_t attempt = 0; attempt < kMaxEditAttempts && !done; ++attempt) {
      CellSpec next = single_edit(current, rng);
      if (!(next == current) && try_record(next)) {
        current = std::move(next);
        done = true;
      }
    }
    if (!done) throw SearchError("mutation exhausted");
  }
  return current;
}

std::vector<std::size_t> rank(const std::vector<ArchRecord>& candidates, const std::vector<double>& scores) {
  if (scores.size() != candidates.size()) throw DimensionError("rank: one score per candidate");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (scores[x] != scores[y]) return scores[x] > scores[y];
    return candidates[x].digest < candidates[y].digest;
  });
  return order;
}

const ArchRecord& SearchState::best() const {
  if (population.empty()) throw SearchError("empty population");
  const ArchRecord* b = &population.front();
  for (const auto& r : population) {
    if (*r.accuracy > *b->accuracy || (*r.accuracy == *b->accuracy && r.digest < b->digest)) b = &r;
  }
  return *b;
}

void precharge(SearchState& state, std::vector<ArchRecord>& fine_tune_set, const OracleConfig& oracle) {
  for (ArchRecord& r : fine_tune_set) {
    const std::size_t before = state.ledger.count();
    query(r, state.ledger, oracle);
    state.fine_tune_charge += state.ledger.count() - before;
  }
}

SearchState ea_search(const EAConfig& config, const Dialect& dialect, Estimator& estimator,
                      const OracleConfig& oracle, Rng& rng, SearchState state, const LogFn& log) {
  if (config.k == 0 || config.B == 0 || config.p_init == 0) throw SearchError("k, B and P_init must be positive");

  std::size_t drawn = 0;
  const std::size_t max_draws = 1000 * config.p_init;
  std::size_t added = 0;
  while (added < config.p_init) {
    if (drawn++ == max_draws) throw SearchError("space exhausted");
    auto rec = try_record(random_cell(dialect, rng));
    if (!rec || state.ledger.contains(rec->digest)) continue;
    query(*rec, state.ledger, oracle);
    state.log.push_back({0, rec->digest, std::nullopt, *rec->accuracy, state.ledger.count()});
    state.population.push_back(std::move(*rec));
    ++added;
  }
  state.history.push_back(stats(state, 0, added));

  for (std::size_t t = 1; t <= config.T; ++t) {
    const auto parents = top_k(state.population, config.k);
    const std::size_t target = config.offspring_factor * config.B;
    std::vector<ArchRecord> candidates;
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t attempt = 0; attempt < 20 * target && candidates.size() < target; ++attempt) {
      try {
        const ArchRecord& pa = state.population[pick(parents, rng)];
        CellSpec child;
        if (parents.size() >= 2) {
          std::size_t other = pick(parents, rng);
          while (&state.population[other] == &pa) other = pick(parents, rng);
          child = crossover(pa.spec, state.population[other].spec, rng, log);
        } else {
          child = mutate(pa.spec, 1, rng);
        }
        child = mutate(child, 1 + uniform_index(rng, 2), rng);
        auto rec = try_record(child);
        if (!rec || state.ledger.contains(rec->digest) || !seen.insert(rec->digest).second) continue;
        candidates.push_back(std::move(*rec));
      } catch (const SearchError&) {
        continue;
      }
    }
    if (candidates.size() < config.B) {
      warn(log, "iteration " + std::to_string(t) + ": only " + std::to_string(candidates.size()) +
                    " unqueried candidates");
    }
    const auto scores = estimator.score(candidates);
    const auto order = rank(candidates, scores);
    const std::size_t take = std::min(config.B, order.size());
    for (std::size_t n = 0; n < take; ++n) {
      ArchRecord& rec = candidates[order[n]];
      query(rec, state.ledger, oracle);
      state.log.push_back({t, rec.digest, scores[order[n]], *rec.accuracy, state.ledger.count()});
      state.population.push_back(std::move(rec));
    }
    state.history.push_back(stats(state, t, take));
    warn(log, "iteration " + std::to_string(t) + ": best " + fmt(state.history.back().best_accuracy) +
                  " queries " + std::to_string(state.ledger.count()));
  }
  return state;
}

void write_search_log(const std::string& path, const SearchState& state, std::uint64_t config_digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "# config_digest=" << hex_digest(config_digest) << "\n";
  out << "iteration,digest,estimated,accuracy,cumulative\n";
  for (const auto& row : state.log) {
    out << row.iteration << ',' << hex_digest(row.digest) << ',' << (row.estimated ? fmt(*row.estimated) : "")
        << ',' << fmt(row.accuracy) << ',' << row.cumulative << '\n';
  }
}

std::string search_report(const SearchState& state, const EAConfig& config, std::string_view estimator) {
  std::ostringstream os;
  const ArchRecord& best = state.best();
  os << "estimator  " << estimator << "\n";
  os << "preset     k=" << config.k << " B=" << config.B << " P_init=" << config.p_init << " T=" << config.T << "\n";
  os << "queries    " << state.ledger.count() << " (" << config.p_init << " + " << config.T << "*" << config.B
     << " + fine-tune " << state.fine_tune_charge << ")\n";
  os << "best       " << format_tagged(best.spec) << "\n";
  os << "accuracy   " << fmt(*best.accuracy) << "\n\n";
  os << "iter  best_accuracy        queried  ledger\n";
  for (const auto& h : state.history) {
    char line[96];
    std::snprintf(line, sizeof line, "%4zu  %.17f  %7zu  %6zu\n", h.iteration, h.best_accuracy, h.queried, h.ledger);
    os << line;
  }
  return os.str();
}

}  // namespace cgnas
