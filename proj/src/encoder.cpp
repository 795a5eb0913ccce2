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

#include "cgnas/encoder.hpp"

#include <cmath>

namespace cgnas {

namespace {

double log2p1(std::int64_t x) { return std::log2(1.0 + static_cast<double>(x)); }

Tensor uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(fan_in, fan_out);
  for (double& v : t.values()) v = uniform_real(rng, -bound, bound);
  return t;
}

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                bool bias = true) {
  store.add(prefix + ".W", uniform_init(in, out, rng));
  if (bias) store.add(prefix + ".b", Tensor(1, out));
}

void add_mlp(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
             std::size_t hidden_layers, std::size_t out, Rng& rng) {
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    add_linear(store, prefix + "." + std::to_string(i), width, hidden, rng);
    width = hidden;
  }
  add_linear(store, prefix + "." + std::to_string(hidden_layers), width, out, rng);
}

Var linear(const Binder& p, const std::string& prefix, Var x) {
  return add_row(matmul(x, p(prefix + ".W")), p(prefix + ".b"));
}

Var mlp(const Binder& p, const std::string& prefix, std::size_t hidden_layers, Var x) {
  for (std::size_t i = 0; i < hidden_layers; ++i) x = relu(linear(p, prefix + "." + std::to_string(i), x));
  return linear(p, prefix + "." + std::to_string(hidden_layers), x);
}

Var gnn_stack(const Binder& p, const std::string& prefix, std::size_t layers, const GraphInput& g, Var x) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string at = prefix + "." + std::to_string(l);
    Var neigh = scatter_mean_rows(gather_rows(x, g.src), g.dst, g.node_count);
    Var pre = add(matmul(x, p(at + ".W_self")), matmul(neigh, p(at + ".W_neigh")));
    x = relu(add_row(pre, p(at + ".b")));
  }
  return x;
}

void add_gnn_stack(ParamStore& store, const std::string& prefix, std::size_t layers, std::size_t width,
                   Rng& rng) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string at = prefix + "." + std::to_string(l);
    store.add(at + ".W_self", uniform_init(width, width, rng));
    store.add(at + ".W_neigh", uniform_init(width, width, rng));
    store.add(at + ".b", Tensor(1, width));
  }
}

}  // namespace

Tensor featurize(const ComputationGraph& g) {
  const std::vector<int> depth = g.topological_depth();
  Tensor x(g.size(), kFeatureDim);
  for (const CGNode& node : g.nodes()) {
    const auto r = static_cast<std::size_t>(node.id);
    std::size_t c = 0;
    x(r, static_cast<std::size_t>(node.op.kind)) = 1.0;
    c += kNumOpKinds;
    const PrimitiveOp& op = node.op;
    const std::int64_t numeric[kNumericFeatures] = {
        node.in_shape.h,      node.in_shape.w,      node.in_shape.c,   node.out_shape.h,     node.out_shape.w,
        node.out_shape.c,     op.attr("kernel_h"), op.attr("kernel_w"), op.attr("groups"), op.attr("dilation")};
    for (std::int64_t v : numeric) x(r, c++) = log2p1(v);
    x(r, c++) = static_cast<double>(op.attr("has_bias"));
    const double d = depth[r];
    for (std::size_t i = 0; i < kPositionalDim / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / kPositionalDim);
      x(r, c++) = std::sin(d * freq);
      x(r, c++) = std::cos(d * freq);
    }
  }
  return x;
}

GraphInput prepare(const ComputationGraph& g) {
  GraphInput in;
  in.features = featurize(g);
  in.node_count = g.size();
  const auto adj = g.undirected_adjacency();
  for (std::size_t v = 0; v < adj.size(); ++v) {
    for (int u : adj[v]) {
      in.src.push_back(u);
      in.dst.push_back(static_cast<int>(v));
    }
  }
  return in;
}

std::uint64_t EncoderConfig::digest() const {
  std::uint64_t h = fnv1a64("encoder-config");
  for (std::size_t v : {kFeatureDim, embed_dim, gnn_layers, attention_layers, heads, head_dim, projection_hidden,
                        projection_hidden_layers, projection_dim, predictor_hidden, predictor_hidden_layers,
                        baseline_layers, baseline_hidden, baseline_hidden_layers}) {
    h = hash_combine(h, v);
  }
  return h;
}

void init_encoder(ParamStore& store, const EncoderConfig& c, Rng& rng) {
  add_linear(store, "enc.embed", kFeatureDim, c.embed_dim, rng);
  add_gnn_stack(store, "enc.gnn", c.gnn_layers, c.embed_dim, rng);
  for (std::size_t l = 0; l < c.attention_layers; ++l) {
    for (std::size_t h = 0; h < c.heads; ++h) {
      const std::string at = "enc.att." + std::to_string(l) + ".h" + std::to_string(h);
      store.add(at + ".Q", uniform_init(c.embed_dim, c.head_dim, rng));
      store.add(at + ".K", uniform_init(c.embed_dim, c.head_dim, rng));
      store.add(at + ".V", uniform_init(c.embed_dim, c.head_dim, rng));
      store.add(at + ".O", uniform_init(c.head_dim, c.embed_dim, rng));
    }
  }
  add_mlp(store, "proj", c.embedding_dim(), c.projection_hidden, c.projection_hidden_layers, c.projection_dim,
          rng);
  Tensor stats(2, c.embedding_dim());
  for (std::size_t j = 0; j < c.embedding_dim(); ++j) stats(1, j) = 1.0;
  store.add(kEmbeddingStats, stats);
}

void init_predictor(ParamStore& store, const EncoderConfig& c, Rng& rng) {
  add_mlp(store, "head", c.embedding_dim(), c.predictor_hidden, c.predictor_hidden_layers, 1, rng);
  store.add(kHeadTarget, Tensor::row({0.0, 1.0}));
}

void init_baseline(ParamStore& encoder, ParamStore& head, const EncoderConfig& c, Rng& rng) {
  add_linear(encoder, "gnn.embed", kFeatureDim, c.embed_dim, rng);
  add_gnn_stack(encoder, "gnn.layer", c.baseline_layers, c.embed_dim, rng);
  add_mlp(head, "gnn_head", c.embed_dim, c.baseline_hidden, c.baseline_hidden_layers, 1, rng);
  head.add(kBaselineTarget, Tensor::row({0.0, 1.0}));
}

void zero_parameters(ParamStore& store) {
  for (auto& [name, p] : store) std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
}

Var encode(const Binder& p, const EncoderConfig& c, const GraphInput& g) {
  Tape& t = p.tape();
  Var x0 = linear(p, "enc.embed", t.constant(g.features));

  Var branch_a = mean_rows(gnn_stack(p, "enc.gnn", c.gnn_layers, g, x0));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(c.head_dim));
  Var y = x0;
  for (std::size_t l = 0; l < c.attention_layers; ++l) {
    Var mixed = y;
    for (std::size_t h = 0; h < c.heads; ++h) {
      const std::string at = "enc.att." + std::to_string(l) + ".h" + std::to_string(h);
      Var q = matmul(y, p(at + ".Q"));
      Var k = matmul(y, p(at + ".K"));
      Var v = matmul(y, p(at + ".V"));
      Var attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
      mixed = add(mixed, matmul(matmul(attn, v), p(at + ".O")));
    }
    y = relu(mixed);
  }
  Var branch_b = mean_rows(y);
  return concat_cols({branch_a, branch_b});
}

Var project(const Binder& p, const EncoderConfig& c, Var h) {
  return l2_normalize_rows(mlp(p, "proj", c.projection_hidden_layers, h));
}

Var predict(const Binder& p, const EncoderConfig& c, Var h) { return mlp(p, "head", c.predictor_hidden_layers, h); }

Var baseline_embed(const Binder& p, const EncoderConfig& c, const GraphInput& g) {
  Var x0 = linear(p, "gnn.embed", p.tape().constant(g.features));
  return mean_rows(gnn_stack(p, "gnn.layer", c.baseline_layers, g, x0));
}

Var baseline_predict(const Binder& p, const EncoderConfig& c, Var h) {
  return mlp(p, "gnn_head", c.baseline_hidden_layers, h);
}

Tensor embed(const ParamStore& encoder, const EncoderConfig& c, const GraphInput& g) {
  Tape t;
  return encode(Binder(t, encoder), c, g).value();
}

Tensor standardize_embedding(const ParamStore& encoder, Tensor h) {
  const Tensor& stats = encoder.at(kEmbeddingStats).value;
  if (h.cols() != stats.cols()) throw DimensionError("standardize_embedding: width " + h.shape_string());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) = (h(i, j) - stats(0, j)) / stats(1, j);
  }
  return h;
}

Tensor representation(const ParamStore& encoder, const EncoderConfig& c, const GraphInput& g) {
  return standardize_embedding(encoder, embed(encoder, c, g));
}

double to_target_scale(const ParamStore& head, const std::string& name, double z) {
  const Tensor& t = head.at(name).value;
  return t(0, 0) + t(0, 1) * z;
}

double predict_value(const ParamStore& head, const EncoderConfig& c, const Tensor& h) {
  Tape t;
  return to_target_scale(head, kHeadTarget, predict(Binder(t, head), c, t.constant(h)).value().item());
}

Tensor baseline_embedding(const ParamStore& encoder, const EncoderConfig& c, const GraphInput& g) {
  Tape t;
  return baseline_embed(Binder(t, encoder), c, g).value();
}

double baseline_predict_value(const ParamStore& head, const EncoderConfig& c, const Tensor& h) {
  Tape t;
  return to_target_scale(head, kBaselineTarget, baseline_predict(Binder(t, head), c, t.constant(h)).value().item());
}

std::size_t cl_parameter_count(const EncoderConfig& c) {
  Rng rng(0);
  ParamStore enc, head;
  init_encoder(enc, c, rng);
  init_predictor(head, c, rng);
  return enc.scalar_count() - enc.at(kEmbeddingStats).value.size() + head.scalar_count() -
         head.at(kHeadTarget).value.size();
}

}  // namespace cgnas
