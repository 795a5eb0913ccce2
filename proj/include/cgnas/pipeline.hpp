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
#include <string>
#include <vector>

#include "cgnas/contrastive.hpp"
#include "cgnas/evolution.hpp"
#include "cgnas/oracle.hpp"

namespace cgnas {

/// Flat key=value run configuration. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t oracle_seed = 7;
  std::size_t n_nb101 = 2000;
  std::size_t n_nb201 = 2000;
  std::size_t n_nb301 = 1000;
  Family target = Family::NB301Style;
  std::size_t finetune_n = 50;
  std::size_t test_n = 500;
  bool pretrain_target_only = false;
  std::size_t pretrain_epochs = 3;
  std::size_t pretrain_batch = 256;
  double pretrain_lr = 1e-3;
  std::size_t pool_size = 5;
  std::size_t regressor_epochs = 20;
  std::size_t regressor_batch = 64;
  double regressor_lr = 1e-3;
  std::size_t finetune_epochs = 100;
  std::size_t baseline_epochs = 5;
  bool run_search = true;

  /// Throws ParseError (with line) on malformed lines, SchemaError on unknown keys.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Canonical text: every key, fixed order.
  std::string to_text() const;
  /// Digest of the canonical text and the run seed.
  std::uint64_t digest(std::uint64_t seed) const;

  std::size_t count(Family f) const;
};

struct Labeled {
  Family family;
  std::vector<ArchRecord> records;
};

/// One labeled dataset per family, seeded from `seed`.
std::vector<Labeled> make_datasets(const RunConfig& config, const OracleConfig& oracle, std::uint64_t seed);

struct TransferResult {
  EncoderConfig encoder_config;
  ParamStore encoder;
  ParamStore head;  // fine-tuned on the target
  std::vector<EpochMetrics> pretrain_curve;
  std::vector<EpochMetrics> regressor_curve;
  std::vector<EpochMetrics> finetune_curve;
  std::vector<double> test_truth;
  std::vector<double> cl_predictions;
  std::vector<double> gnn_predictions;
  std::vector<double> random_predictions;
  double cl_zero_shot = 0.0;
  double cl_srcc = 0.0;
  double gnn_zero_shot = 0.0;
  double gnn_srcc = 0.0;
  double random_srcc = 0.0;
  std::vector<ArchRecord> finetune_set;
  bool baseline_run = false;
};

/// Pretrain on the unlabeled union, regress on source labels, fine-tune on
/// `finetune_n` target records, evaluate on the next `test_n`.
TransferResult run_transfer(const RunConfig& config, const std::vector<Labeled>& data, std::uint64_t seed,
                            const LogFn& log = nullptr);

/// Throws Error if `dir` holds artifacts from a different config digest,
/// unless `force`.
void guard_output(const std::string& dir, std::uint64_t digest, bool force);

/// Full pipeline into `dir`: datasets, checkpoints, metric CSVs, search log
/// and a summary report.
void repro(const RunConfig& config, std::uint64_t seed, const std::string& dir, bool force, const LogFn& log = nullptr);

void write_predictions_csv(const std::string& path, const std::vector<double>& predictions,
                           const std::vector<double>& truths, std::uint64_t config_digest);

}  // namespace cgnas
