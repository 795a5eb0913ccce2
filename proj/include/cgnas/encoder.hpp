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

// Graph encoder: node featurization, a mean-aggregation GNN branch and a
// multi-head self-attention branch over all nodes, the contrastive projection
// head, the accuracy prediction head and the GNN-only baseline.

#include <cstdint>
#include <string>
#include <vector>

#include "cgnas/autodiff.hpp"
#include "cgnas/common.hpp"
#include "cgnas/graph.hpp"
#include "cgnas/tensor.hpp"

namespace cgnas {

inline constexpr std::size_t kNumericFeatures = 10;
inline constexpr std::size_t kPositionalDim = 16;
inline constexpr std::size_t kFeatureDim = kNumOpKinds + kNumericFeatures + 1 + kPositionalDim;

/// Per node: one-hot kind, log2(1+x) of [H_in, W_in, C_in, H_out, W_out,
/// C_out, kernel_h, kernel_w, groups, dilation], has_bias, sinusoidal
/// encoding of topological depth.
Tensor featurize(const ComputationGraph& g);

/// Directed message list over the undirected skeleton (both directions of
/// every skeleton edge).
struct GraphInput {
  Tensor features;
  std::vector<int> src;
  std::vector<int> dst;
  std::size_t node_count = 0;
};

GraphInput prepare(const ComputationGraph& g);

struct EncoderConfig {
  std::size_t embed_dim = 64;
  std::size_t gnn_layers = 4;
  std::size_t attention_layers = 2;
  std::size_t heads = 2;
  std::size_t head_dim = 32;
  std::size_t projection_hidden = 128;
  std::size_t projection_hidden_layers = 4;
  std::size_t projection_dim = 64;
  std::size_t predictor_hidden = 200;
  std::size_t predictor_hidden_layers = 4;
  std::size_t baseline_layers = 4;
  std::size_t baseline_hidden = 128;
  std::size_t baseline_hidden_layers = 4;

  std::size_t embedding_dim() const { return 2 * embed_dim; }
  /// Digest of the architecture fields only.
  std::uint64_t digest() const;
};

/// Where parameters come from while building a forward pass: trainable
/// leaves (gradients flow into the store) or frozen ones.
class Binder {
 public:
  Binder(Tape& tape, ParamStore& store) : tape_(tape), store_(&store), frozen_(&store) {}
  Binder(Tape& tape, const ParamStore& store) : tape_(tape), frozen_(&store) {}

  Var operator()(const std::string& name) const {
    return store_ != nullptr ? tape_.param(*store_, name) : tape_.frozen(*frozen_, name);
  }
  Tape& tape() const { return tape_; }

 private:
  Tape& tape_;
  ParamStore* store_ = nullptr;
  const ParamStore* frozen_ = nullptr;
};

/// Fixed tensors stored alongside the trained weights. Their gradients are
/// always zero. Row 0 holds the embedding mean and row 1 the scale.
inline constexpr const char* kEmbeddingStats = "enc.stats";
/// 1 x 2 target mean and standard deviation; heads are trained on z-scores.
inline constexpr const char* kHeadTarget = "head.target";
inline constexpr const char* kBaselineTarget = "gnn_head.target";

/// Encoder and projection head parameters ("enc.*", "proj.*").
void init_encoder(ParamStore& store, const EncoderConfig& config, Rng& rng);
/// Prediction head parameters ("head.*").
void init_predictor(ParamStore& store, const EncoderConfig& config, Rng& rng);
/// GNN baseline: encoder part ("gnn.*") and head part ("gnn_head.*").
void init_baseline(ParamStore& encoder, ParamStore& head, const EncoderConfig& config, Rng& rng);

/// Sets every parameter to zero.
void zero_parameters(ParamStore& store);

/// Graph embedding h, 1 x 2*embed_dim.
Var encode(const Binder& p, const EncoderConfig& config, const GraphInput& graph);
/// Unit-norm projection of each row of `h`.
Var project(const Binder& p, const EncoderConfig& config, Var h);
/// Scalar prediction per row of `h`.
Var predict(const Binder& p, const EncoderConfig& config, Var h);

/// GNN-only graph embedding, 1 x embed_dim.
Var baseline_embed(const Binder& p, const EncoderConfig& config, const GraphInput& graph);
Var baseline_predict(const Binder& p, const EncoderConfig& config, Var h);

/// Forward-only helpers.
Tensor embed(const ParamStore& encoder, const EncoderConfig& config, const GraphInput& graph);
/// (h - mean) / scale using the encoder's stored statistics.
Tensor standardize_embedding(const ParamStore& encoder, Tensor h);
/// Standardized embedding: the input of the prediction head.
Tensor representation(const ParamStore& encoder, const EncoderConfig& config, const GraphInput& graph);
/// Maps a head output z back to target units: mean + sd * z.
double to_target_scale(const ParamStore& head, const std::string& name, double z);
/// Prediction in target units.
double predict_value(const ParamStore& head, const EncoderConfig& config, const Tensor& h);
Tensor baseline_embedding(const ParamStore& encoder, const EncoderConfig& config, const GraphInput& graph);
double baseline_predict_value(const ParamStore& head, const EncoderConfig& config, const Tensor& h);

/// Trainable scalar count of encoder + projection + prediction head.
std::size_t cl_parameter_count(const EncoderConfig& config);

}  // namespace cgnas
