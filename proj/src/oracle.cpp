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

#include "cgnas/oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cgnas/lowering.hpp"
#include "cgnas/spectral.hpp"

namespace cgnas {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<Family, 3> kFamilies = {Family::NB101Style, Family::NB201Style, Family::NB301Style};

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

json parse_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what(), line_of(text, e.byte));
  }
}

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) throw SchemaError("expected an object", key);
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string("missing field ") + key, key);
  return *it;
}

template <typename T>
T read_array(const json& j, const char* key) {
  const json& a = field(j, key);
  T out{};
  if (!a.is_array() || a.size() != out.size()) throw SchemaError(std::string(key) + " has the wrong length", key);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!a[i].is_number()) throw SchemaError(std::string(key) + " must hold numbers", key);
    out[i] = a[i].get<double>();
  }
  return out;
}

double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

OracleFeatures oracle_features(const ComputationGraph& g) {
  OracleFeatures phi{};
  const double v = static_cast<double>(g.size());
  const double e = static_cast<double>(g.edges().size());
  if (g.size() > 0) {
    for (const CGNode& n : g.nodes()) phi[static_cast<std::size_t>(n.op.kind)] += 1.0 / v;
  }
  phi[kNumOpKinds] = std::log1p(v);
  phi[kNumOpKinds + 1] = std::log1p(e);
  phi[kNumOpKinds + 2] = v > 0 ? 2.0 * e / v : 0.0;
  const SpectralSignature sig = signature(g);
  std::copy(sig.values.begin(), sig.values.end(), phi.begin() + kNumOpKinds + 3);
  return phi;
}

OracleConfig OracleConfig::from_seed(std::uint64_t seed, std::size_t reference_per_family) {
  OracleConfig c;
  c.seed = seed;

  Rng sample_rng(hash_combine(seed, 1));
  std::vector<OracleFeatures> reference;
  for (Family f : kFamilies) {
    const Dialect d = Dialect::standard(f);
    for (std::size_t i = 0; i < reference_per_family; ++i) {
      reference.push_back(oracle_features(build_network(random_cell(d, sample_rng))));
    }
  }
  std::size_t active = 0;
  for (std::size_t k = 0; k < kOracleFeatureDim; ++k) {
    double mean = 0.0;
    for (const auto& phi : reference) mean += phi[k];
    mean /= static_cast<double>(reference.size());
    double var = 0.0;
    for (const auto& phi : reference) var += (phi[k] - mean) * (phi[k] - mean);
    var /= static_cast<double>(reference.size());
    c.center[k] = mean;
    c.scale[k] = var > 1e-24 ? std::sqrt(var) : 0.0;
    if (c.scale[k] > 0) ++active;
  }

  Rng weight_rng(hash_combine(seed, 2));
  const double gain = active ? 1.0 / std::sqrt(static_cast<double>(active)) : 0.0;
  for (std::size_t k = 0; k < kOracleFeatureDim; ++k) {
    const double w = standard_normal(weight_rng) * gain;
    c.weights[k] = c.scale[k] > 0 ? w : 0.0;
  }
  for (double& o : c.family_offset) o = uniform_real(weight_rng, -0.8, 0.8);
  return c;
}

std::string OracleConfig::to_json() const {
  ordered_json j;
  j["format"] = "cgnas-oracle v1";
  j["seed"] = seed;
  j["lo"] = lo;
  j["hi"] = hi;
  j["noise"] = noise;
  j["family_offset"] = family_offset;
  j["weights"] = weights;
  j["center"] = center;
  j["scale"] = scale;
  return j.dump(1);
}

OracleConfig OracleConfig::from_json(const std::string& text) {
  const json j = parse_document(text, "oracle config");
  if (field(j, "format") != "cgnas-oracle v1") throw SchemaError("unsupported oracle format", "format");
  OracleConfig c;
  c.seed = field(j, "seed").get<std::uint64_t>();
  c.lo = field(j, "lo").get<double>();
  c.hi = field(j, "hi").get<double>();
  c.noise = field(j, "noise").get<double>();
  c.family_offset = read_array<std::array<double, 3>>(j, "family_offset");
  c.weights = read_array<OracleFeatures>(j, "weights");
  c.center = read_array<OracleFeatures>(j, "center");
  c.scale = read_array<OracleFeatures>(j, "scale");
  if (!(c.lo < c.hi)) throw SchemaError("lo must be below hi", "lo");
  return c;
}

std::uint64_t OracleConfig::digest() const { return fnv1a64(to_json()); }

double oracle_accuracy(const ComputationGraph& g, const OracleConfig& config) {
  require_valid(g);
  const OracleFeatures phi = oracle_features(g);
  double logit = 0.0;
  for (std::size_t k = 0; k < kOracleFeatureDim; ++k) {
    if (config.scale[k] > 0) logit += config.weights[k] * (phi[k] - config.center[k]) / config.scale[k];
  }
  if (g.family()) logit += config.family_offset[static_cast<std::size_t>(*g.family())];
  if (config.noise > 0) {
    Rng rng(hash_combine(config.seed, wl_hash(g)));
    logit += config.noise * standard_normal(rng);
  }
  return config.lo + (config.hi - config.lo) * logistic(logit);
}

ArchRecord make_record(const CellSpec& spec) {
  ArchRecord r;
  r.spec = spec;
  r.cg = build_network(spec);
  r.digest = wl_hash(r.cg);
  return r;
}

std::vector<ArchRecord> enumerate_space(const Dialect& dialect, const OracleConfig& oracle) {
  if (dialect.family != Family::NB201Style) throw SearchError("only NB201Style spaces are enumerable");
  std::vector<ArchRecord> out;
  std::unordered_set<std::uint64_t> seen;
  for (const CellSpec& spec : enumerate_nb201(dialect)) {
    if (check_constraints(spec)) continue;
    ArchRecord r = make_record(spec);
    if (!seen.insert(r.digest).second) continue;
    r.accuracy = oracle_accuracy(r.cg, oracle);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ArchRecord> generate_dataset(const Dialect& dialect, std::size_t n, std::uint64_t seed,
                                         const OracleConfig& oracle) {
  Rng rng(seed);
  if (dialect.family == Family::NB201Style) {
    std::size_t cells = 1;
    for (int i = 0; i < 6; ++i) cells *= dialect.vocabulary.size();
    if (n > cells) throw SearchError("space exhausted");
    if (4 * n > cells) {
      std::vector<ArchRecord> all = enumerate_space(dialect, oracle);
      if (all.size() < n) throw SearchError("space exhausted");
      shuffle(all, rng);
      all.resize(n);
      return all;
    }
  }
  std::vector<ArchRecord> out;
  std::unordered_set<std::uint64_t> seen;
  const std::size_t max_draws = 100 * n + 10000;
  for (std::size_t draws = 0; out.size() < n; ++draws) {
    if (draws == max_draws) throw SearchError("space exhausted");
    ArchRecord r = make_record(random_cell(dialect, rng));
    if (!seen.insert(r.digest).second) continue;
    r.accuracy = oracle_accuracy(r.cg, oracle);
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::string& path, const Dialect& dialect, const std::vector<ArchRecord>& records,
                    const OracleConfig& oracle, std::uint64_t config_digest) {
  ordered_json j;
  j["format"] = "cgnas-dataset v1";
  j["config_digest"] = hex_digest(config_digest);
  j["oracle_seed"] = oracle.seed;
  j["oracle_digest"] = hex_digest(oracle.digest());
  j["family"] = std::string(to_string(dialect.family));
  j["vocabulary"] = dialect.vocabulary;
  ordered_json rows = ordered_json::array();
  for (const ArchRecord& r : records) {
    ordered_json row;
    row["spec"] = format_cell(r.spec);
    row["digest"] = hex_digest(r.digest);
    row["accuracy"] = r.accuracy ? ordered_json(*r.accuracy) : ordered_json(nullptr);
    rows.push_back(std::move(row));
  }
  j["records"] = std::move(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(1) << '\n';
}

Manifest read_manifest(const std::string& path) {
  const json j = parse_document(slurp(path), path);
  if (field(j, "format") != "cgnas-dataset v1") throw SchemaError("unsupported dataset format", "format");
  Manifest m;
  try {
    m.config_digest = parse_hex_digest(field(j, "config_digest").get<std::string>());
  } catch (const std::invalid_argument&) {
    throw SchemaError("config_digest is not a hex digest", "config_digest");
  }
  m.oracle_seed = field(j, "oracle_seed").get<std::uint64_t>();
  const auto family = parse_family(field(j, "family").get<std::string>());
  if (!family) throw SchemaError("unknown family", "family");
  m.dialect.family = *family;
  m.dialect.vocabulary = field(j, "vocabulary").get<std::vector<std::string>>();
  const json& rows = field(j, "records");
  if (!rows.is_array()) throw SchemaError("records must be an array", "records");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "records[" + std::to_string(i) + "]";
    ArchRecord r = make_record(parse_cell(m.dialect, field(rows[i], "spec").get<std::string>()));
    if (hex_digest(r.digest) != field(rows[i], "digest").get<std::string>()) {
      throw SchemaError(where + ": digest does not match the lowered spec", where + ".digest");
    }
    const json& acc = field(rows[i], "accuracy");
    if (!acc.is_null()) r.accuracy = acc.get<double>();
    m.records.push_back(std::move(r));
  }
  return m;
}

std::optional<double> QueryLedger::label(std::uint64_t digest) const {
  auto it = labels_.find(digest);
  if (it == labels_.end()) return std::nullopt;
  return it->second;
}

bool QueryLedger::charge(std::uint64_t digest, double accuracy) {
  if (!labels_.emplace(digest, accuracy).second) return false;
  order_.push_back(digest);
  return true;
}

double query(ArchRecord& record, QueryLedger& ledger, const OracleConfig& config) {
  if (auto known = ledger.label(record.digest)) {
    record.accuracy = *known;
    return *known;
  }
  const double acc = oracle_accuracy(record.cg, config);
  ledger.charge(record.digest, acc);
  record.accuracy = acc;
  return acc;
}

}  // namespace cgnas
