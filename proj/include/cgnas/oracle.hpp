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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgnas/cell.hpp"
#include "cgnas/common.hpp"
#include "cgnas/graph.hpp"

namespace cgnas {

/// [histogram(14), log(1+|V|), log(1+|E|), mean degree, signature(11)]
inline constexpr std::size_t kOracleFeatureDim = kNumOpKinds + 3 + 11;

using OracleFeatures = std::array<double, kOracleFeatureDim>;

OracleFeatures oracle_features(const ComputationGraph& g);

/// Synthetic ground truth. Features are standardized with statistics of a
/// reference sample drawn from the same seed, so every field follows from
/// `seed` alone.
struct OracleConfig {
  std::uint64_t seed = 7;
  double lo = 0.85;
  double hi = 0.95;
  OracleFeatures weights{};
  OracleFeatures center{};
  OracleFeatures scale{};
  /// Logit offsets indexed by Family.
  std::array<double, 3> family_offset{};
  /// Standard deviation of logit noise; 0 disables it. Noise is keyed on the
  /// graph hash, so scores stay a pure function of (config, graph).
  double noise = 0.0;

  static OracleConfig from_seed(std::uint64_t seed, std::size_t reference_per_family = 100);

  std::string to_json() const;
  static OracleConfig from_json(const std::string& text);
  std::uint64_t digest() const;
};

/// Throws ValidationError if `g` is not valid. The family offset is taken
/// from g.family(); graphs without a family get none.
double oracle_accuracy(const ComputationGraph& g, const OracleConfig& config);

struct ArchRecord {
  CellSpec spec;
  ComputationGraph cg;
  std::uint64_t digest = 0;  // wl_hash(cg)
  std::optional<double> accuracy;

  Family family() const { return spec.family(); }
};

ArchRecord make_record(const CellSpec& spec);

/// Labeled records with distinct graph hashes. Throws SearchError
/// "space exhausted" when fewer than `n` distinct graphs exist.
std::vector<ArchRecord> generate_dataset(const Dialect& dialect, std::size_t n, std::uint64_t seed,
                                         const OracleConfig& oracle);

/// Every distinct graph of an enumerable dialect, in enumeration order.
std::vector<ArchRecord> enumerate_space(const Dialect& dialect, const OracleConfig& oracle);

void write_manifest(const std::string& path, const Dialect& dialect, const std::vector<ArchRecord>& records,
                    const OracleConfig& oracle, std::uint64_t config_digest);

struct Manifest {
  std::uint64_t oracle_seed = 0;
  std::uint64_t config_digest = 0;
  Dialect dialect;
  std::vector<ArchRecord> records;
};

/// Re-lowers each spec and checks it against the stored digest.
Manifest read_manifest(const std::string& path);

/// Unique-architecture query accounting.
class QueryLedger {
 public:
  bool contains(std::uint64_t digest) const { return labels_.count(digest) != 0; }
  std::size_t count() const { return order_.size(); }
  const std::vector<std::uint64_t>& order() const { return order_; }
  std::optional<double> label(std::uint64_t digest) const;

  /// Records the label; returns false if the digest was already charged.
  bool charge(std::uint64_t digest, double accuracy);

 private:
  std::unordered_map<std::uint64_t, double> labels_;
  std::vector<std::uint64_t> order_;
};

/// Labels `record` and charges the ledger if its digest is unseen.
double query(ArchRecord& record, QueryLedger& ledger, const OracleConfig& config);

}  // namespace cgnas
