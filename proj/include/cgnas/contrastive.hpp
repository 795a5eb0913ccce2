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

// Contrastive objectives over unit embeddings, spectrally weighted positive
// sets, and the pretrain -> regress -> fine-tune pipeline with Spearman
// evaluation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cgnas/autodiff.hpp"
#include "cgnas/common.hpp"
#include "cgnas/encoder.hpp"
#include "cgnas/spectral.hpp"
#include "cgnas/tensor.hpp"

namespace cgnas {

inline constexpr double kTemperature = 0.1;
inline constexpr double kAlphaTemperature = 0.05;

/// chi(i, j) = log(exp(z_i.z_j / tau) / sum_{r != i} exp(z_i.z_r / tau)) over
/// the rows of `z`.
double agreement(const Tensor& z, std::size_t i, std::size_t j, double tau = kTemperature);

/// -sum_i chi(i, partner[i]); rows with partner -1 are skipped.
double simclr_loss(const Tensor& z, const std::vector<int>& partner, double tau = kTemperature);

/// sum_i -1/|P(i)| sum_{s in P(i)} chi(i, s), P(i) = other rows with the same
/// label. Anchors with empty P(i) contribute 0.
double supcon_loss(const Tensor& z, const std::vector<int>& labels, double tau = kTemperature);

/// Softmax of -distance / tau_alpha. Empty input gives an empty vector.
std::vector<double> alpha_weights(const std::vector<double>& distances, double tau_alpha = kAlphaTemperature);

struct CLBatch {
  Tensor z;                 // unit rows
  std::vector<int> labels;  // family per row
  Tensor sigma;             // pairwise spectral distances
};

/// Positive set of every anchor and its convex weights.
struct PositiveSets {
  std::vector<std::vector<int>> members;
  std::vector<std::vector<double>> alpha;
  std::size_t skipped = 0;  // anchors with empty P(i)
};

PositiveSets positive_sets(const std::vector<int>& labels, const Tensor& sigma,
                           double tau_alpha = kAlphaTemperature);

/// -sum_i sum_{s in P(i)} alpha_s chi(i, s).
double cl_loss(const CLBatch& batch, double tau = kTemperature, double tau_alpha = kAlphaTemperature,
               std::size_t* skipped = nullptr);

/// Differentiable cl_loss over the rows of `z` with precomputed positive sets.
Var cl_loss(Var z, const PositiveSets& sets, double tau = kTemperature);

/// Uniform pick among the `pool_size` nearest members of `candidates`
/// (excluding `anchor`) under `cache`; ties go to the lower index.
std::size_t select_positive(std::size_t anchor, const std::vector<std::size_t>& candidates,
                            const DistanceCache& cache, std::size_t pool_size, Rng& rng);

/// The nearest-neighbor pool select_positive draws from.
std::vector<std::size_t> positive_pool(std::size_t anchor, const std::vector<std::size_t>& candidates,
                                       const DistanceCache& cache, std::size_t pool_size);

using LogFn = std::function<void(const std::string&)>;

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double srcc = 0.0;  // NaN when not evaluated
};

struct PretrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 5;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t pool_size = 5;
  double tau = kTemperature;
  double tau_alpha = kAlphaTemperature;
  LogFn log;
};

struct PretrainResult {
  ParamStore encoder;
  std::vector<EpochMetrics> curve;
  std::size_t skipped_anchors = 0;
  std::vector<int> excluded_labels;
};

/// Minimizes the mean weighted contrastive loss over batches of anchors and
/// their selected positives. `labels[i]` is the family of graph i and
/// `cache` indexes the same graphs. Embedding statistics are taken over all
/// of `graphs` once training ends.
PretrainResult pretrain(const std::vector<GraphInput>& graphs, const std::vector<int>& labels,
                        const DistanceCache& cache, const EncoderConfig& config, const PretrainConfig& train);

/// Per-dimension mean and population sd of the raw embeddings of `graphs`,
/// stored in the encoder.
void set_embedding_stats(ParamStore& encoder, const EncoderConfig& config, const std::vector<GraphInput>& graphs);

struct RegressorConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LogFn log;
};

/// Stacks 1 x d embeddings into an n x d matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);

/// Mean squared error training of a fresh prediction head on frozen
/// embeddings. Labels are z-scored with their own mean and sd, which the
/// head keeps for mapping predictions back.
ParamStore train_regressor(const Tensor& embeddings, const std::vector<double>& labels,
                           const EncoderConfig& config, const RegressorConfig& train,
                           std::vector<EpochMetrics>* curve = nullptr);

/// Continues training `head` (fresh optimizer state) on a small labeled set.
/// The label statistics are replaced by those of the new set.
void fine_tune(ParamStore& head, const Tensor& embeddings, const std::vector<double>& labels,
               const EncoderConfig& config, const RegressorConfig& train, std::vector<EpochMetrics>* curve = nullptr);

std::vector<double> predict_all(const ParamStore& head, const EncoderConfig& config, const Tensor& embeddings);

struct GnnBaseline {
  ParamStore encoder;
  ParamStore head;
};

/// End-to-end mean squared error training of the GNN-only predictor.
GnnBaseline train_baseline(const std::vector<GraphInput>& graphs, const std::vector<double>& labels,
                           const EncoderConfig& config, const RegressorConfig& train,
                           std::vector<EpochMetrics>* curve = nullptr);

Tensor baseline_embeddings(const GnnBaseline& model, const EncoderConfig& config,
                           const std::vector<GraphInput>& graphs);

/// Head-only fine-tuning with the encoder frozen.
void fine_tune_baseline(GnnBaseline& model, const std::vector<GraphInput>& graphs,
                        const std::vector<double>& labels, const EncoderConfig& config,
                        const RegressorConfig& train);

std::vector<double> baseline_predict_all(const GnnBaseline& model, const EncoderConfig& config,
                                         const std::vector<GraphInput>& graphs);

/// Standardized embeddings of every graph, n x 2*embed_dim.
Tensor embed_all(const ParamStore& encoder, const EncoderConfig& config, const std::vector<GraphInput>& graphs);

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Spearman correlation: Pearson correlation of average ranks. 0 when either
/// side has no variance; throws for fewer than 2 points.
double srcc(const std::vector<double>& predictions, const std::vector<double>& truths);

/// "epoch,loss,srcc" rows after a digest comment line.
void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows, std::uint64_t config_digest);

}  // namespace cgnas
