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
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgnas/cell.hpp"
#include "cgnas/contrastive.hpp"
#include "cgnas/encoder.hpp"
#include "cgnas/oracle.hpp"

namespace cgnas {

enum class EstimatorKind { Random, ClPredictor, OracleDirect };
enum class Preset { Random, CL };

std::string_view to_string(EstimatorKind kind);
std::optional<Preset> parse_preset(std::string_view name);

struct EAConfig {
  std::size_t k = 10;       // parents kept per iteration
  std::size_t B = 20;       // oracle queries per iteration
  std::size_t p_init = 10;  // initial random population
  std::size_t T = 4;        // iterations
  std::size_t offspring_factor = 10;

  std::size_t budget() const { return p_init + T * B; }
};

EAConfig ea_preset(Family family, Preset preset);

/// Scores candidates; higher means better. Must not query the oracle ledger.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual EstimatorKind kind() const = 0;
  virtual std::vector<double> score(const std::vector<ArchRecord>& candidates) = 0;
};

std::unique_ptr<Estimator> random_estimator(std::uint64_t seed);
std::unique_ptr<Estimator> oracle_estimator(const OracleConfig& oracle);
/// Frozen encoder plus fine-tuned head.
std::unique_ptr<Estimator> cl_estimator(const ParamStore& encoder, const ParamStore& head,
                                        const EncoderConfig& config);

/// Lowers `spec`; nullopt if it violates the dialect or does not lower.
std::optional<ArchRecord> try_record(const CellSpec& spec);

/// One operator of `p2` replaces a different operator of `p1`. Falls back to
/// a single mutation (with a warning) when no such replacement exists.
CellSpec crossover(const CellSpec& p1, const CellSpec& p2, Rng& rng, const LogFn& log = nullptr);

/// `edits` successive single edits. Throws SearchError "mutation exhausted"
/// when 20 draws in a row fail to give an admissible cell.
CellSpec mutate(const CellSpec& spec, std::size_t edits, Rng& rng);

/// Indices sorted by score descending, ties by digest ascending.
std::vector<std::size_t> rank(const std::vector<ArchRecord>& candidates, const std::vector<double>& scores);

struct IterationStats {
  std::size_t iteration = 0;
  double best_accuracy = 0.0;
  std::uint64_t best_digest = 0;
  std::size_t queried = 0;  // new queries this iteration
  std::size_t ledger = 0;   // cumulative unique queries
};

struct SearchLogRow {
  std::size_t iteration = 0;
  std::uint64_t digest = 0;
  std::optional<double> estimated;  // empty for the initial population
  double accuracy = 0.0;
  std::size_t cumulative = 0;
};

struct SearchState {
  std::vector<ArchRecord> population;
  QueryLedger ledger;
  std::size_t fine_tune_charge = 0;
  std::vector<IterationStats> history;
  std::vector<SearchLogRow> log;

  const ArchRecord& best() const;
};

/// Charges the fine-tuning set of a learned estimator to the ledger.
void precharge(SearchState& state, std::vector<ArchRecord>& fine_tune_set, const OracleConfig& oracle);

SearchState ea_search(const EAConfig& config, const Dialect& dialect, Estimator& estimator,
                      const OracleConfig& oracle, Rng& rng, SearchState state = {}, const LogFn& log = nullptr);

void write_search_log(const std::string& path, const SearchState& state, std::uint64_t config_digest);
std::string search_report(const SearchState& state, const EAConfig& config, std::string_view estimator);

}  // namespace cgnas
