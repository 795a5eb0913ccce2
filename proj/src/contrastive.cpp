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

#include "cgnas/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace cgnas {

namespace {

double dot_rows(const Tensor& z, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < z.cols(); ++k) s += z(i, k) * z(j, k);
  return s;
}

void log_line(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

Tensor gather(const Tensor& m, const std::vector<std::size_t>& rows) {
  Tensor out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(m.data() + rows[i] * m.cols(), m.data() + (rows[i] + 1) * m.cols(), out.data() + i * m.cols());
  }
  return out;
}

using HeadForward = std::function<Var(const Binder&, const EncoderConfig&, Var)>;

// Stores the label mean and sd under `target` and returns the z-scores.
std::vector<double> standardize_targets(ParamStore& head, const std::string& target, const std::vector<double>& y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  const double sd = var > 1e-24 ? std::sqrt(var) : 1.0;
  head.at(target).value = Tensor::row({mean, sd});
  std::vector<double> z;
  z.reserve(y.size());
  for (double v : y) z.push_back((v - mean) / sd);
  return z;
}

// Minibatch MSE on fixed inputs, updating only `head`.
void train_head(ParamStore& head, const std::string& target, const HeadForward& forward, const Tensor& x,
                const std::vector<double>& labels, const EncoderConfig& config, const RegressorConfig& train,
                std::vector<EpochMetrics>* curve) {
  if (x.rows() != labels.size()) throw DimensionError("train_head: embeddings and labels differ in count");
  if (labels.empty()) throw Error("train_head: no labeled examples");
  const std::vector<double> y = standardize_targets(head, target, labels);
  const std::size_t batch = std::max<std::size_t>(1, std::min(train.batch_size, y.size()));
  Rng rng(train.seed);
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, order.size())));
      std::vector<double> targets;
      for (std::size_t r : rows) targets.push_back(y[r]);
      head.zero_grad();
      Tape t;
      Var pred = forward(Binder(t, head), config, t.constant(gather(x, rows)));
      Var d = sub(pred, t.constant(Tensor::column(targets)));
      Var loss = scale(sum(mul(d, d)), 1.0 / static_cast<double>(rows.size()));
      t.backward(loss);
      head.adam_step({train.lr});
      total += loss.value().item() * static_cast<double>(rows.size());
    }
    const double mse = total / static_cast<double>(y.size());
    if (!std::isfinite(mse)) throw Error("regression loss diverged");
    if (curve) curve->push_back({static_cast<int>(epoch), mse, std::numeric_limits<double>::quiet_NaN()});
  }
}

}  // namespace

double agreement(const Tensor& z, std::size_t i, std::size_t j, double tau) {
  if (i == j || i >= z.rows() || j >= z.rows()) throw DimensionError("agreement: bad index pair");
  double mx = -INFINITY;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (r != i) mx = std::max(mx, dot_rows(z, i, r) / tau);
  }
  double denom = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    if (r != i) denom += std::exp(dot_rows(z, i, r) / tau - mx);
  }
  return dot_rows(z, i, j) / tau - (mx + std::log(denom));
}

double simclr_loss(const Tensor& z, const std::vector<int>& partner, double tau) {
  if (partner.size() != z.rows()) throw DimensionError("simclr_loss: partner map size");
  double loss = 0.0;
  for (std::size_t i = 0; i < partner.size(); ++i) {
    if (partner[i] < 0) continue;
    loss -= agreement(z, i, static_cast<std::size_t>(partner[i]), tau);
  }
  return loss;
}

double supcon_loss(const Tensor& z, const std::vector<int>& labels, double tau) {
  if (labels.size() != z.rows()) throw DimensionError("supcon_loss: label count");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double inner = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (s == i || labels[s] != labels[i]) continue;
      inner += agreement(z, i, s, tau);
      ++count;
    }
    if (count > 0) loss += -inner / static_cast<double>(count);
  }
  return loss;
}

std::vector<double> alpha_weights(const std::vector<double>& distances, double tau_alpha) {
  std::vector<double> out(distances.size());
  if (distances.empty()) return out;
  const double best = *std::min_element(distances.begin(), distances.end());
  double z = 0.0;
  for (std::size_t k = 0; k < distances.size(); ++k) {
    out[k] = std::exp(-(distances[k] - best) / tau_alpha);
    z += out[k];
  }
  for (double& a : out) a /= z;
  return out;
}

PositiveSets positive_sets(const std::vector<int>& labels, const Tensor& sigma, double tau_alpha) {
  if (sigma.rows() != labels.size() || sigma.cols() != labels.size()) {
    throw DimensionError("positive_sets: sigma must be " + std::to_string(labels.size()) + " square");
  }
  PositiveSets sets;
  sets.members.resize(labels.size());
  sets.alpha.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<double> d;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (s == i || labels[s] != labels[i]) continue;
      sets.members[i].push_back(static_cast<int>(s));
      d.push_back(sigma(i, s));
    }
    if (d.empty()) ++sets.skipped;
    sets.alpha[i] = alpha_weights(d, tau_alpha);
  }
  return sets;
}

double cl_loss(const CLBatch& batch, double tau, double tau_alpha, std::size_t* skipped) {
  if (batch.labels.size() != batch.z.rows()) throw DimensionError("cl_loss: label count");
  const PositiveSets sets = positive_sets(batch.labels, batch.sigma, tau_alpha);
  if (skipped) *skipped = sets.skipped;
  double loss = 0.0;
  for (std::size_t i = 0; i < sets.members.size(); ++i) {
    for (std::size_t k = 0; k < sets.members[i].size(); ++k) {
      loss -= sets.alpha[i][k] * agreement(batch.z, i, static_cast<std::size_t>(sets.members[i][k]), tau);
    }
  }
  return loss;
}

Var cl_loss(Var z, const PositiveSets& sets, double tau) {
  const std::size_t n = z.rows();
  if (sets.members.size() != n) throw DimensionError("cl_loss: positive sets for " + std::to_string(n) + " rows");
  Tape& t = *z.tape;
  Tensor mask(n, n, 1.0);
  Tensor weights(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    mask(i, i) = 0.0;
    for (std::size_t k = 0; k < sets.members[i].size(); ++k) {
      weights(i, static_cast<std::size_t>(sets.members[i][k])) = sets.alpha[i][k];
    }
  }
  Var logits = scale(matmul(z, transpose(z)), 1.0 / tau);
  Var chi = log_softmax_rows_masked(logits, mask);
  return scale(sum(mul(chi, t.constant(std::move(weights)))), -1.0);
}

std::vector<std::size_t> positive_pool(std::size_t anchor, const std::vector<std::size_t>& candidates,
                                       const DistanceCache& cache, std::size_t pool_size) {
  if (pool_size == 0) throw Error("positive pool size must be at least 1");
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t c : candidates) {
    if (c != anchor) ranked.emplace_back(cache(anchor, c), c);
  }
  const std::size_t k = std::min(pool_size, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end());
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < k; ++i) pool.push_back(ranked[i].second);
  return pool;
}

std::size_t select_positive(std::size_t anchor, const std::vector<std::size_t>& candidates,
                            const DistanceCache& cache, std::size_t pool_size, Rng& rng) {
  const auto pool = positive_pool(anchor, candidates, cache, pool_size);
  if (pool.empty()) throw Error("select_positive: anchor has no same-family candidate");
  return pool[uniform_index(rng, pool.size())];
}

PretrainResult pretrain(const std::vector<GraphInput>& graphs, const std::vector<int>& labels,
                        const DistanceCache& cache, const EncoderConfig& config, const PretrainConfig& train) {
  if (labels.size() != graphs.size() || cache.size() != graphs.size()) {
    throw DimensionError("pretrain: graphs, labels and distance cache differ in size");
  }
  if (train.batch_size < 4) throw Error("pretrain: batch size must be at least 4");
  PretrainResult result;
  Rng rng(train.seed);
  init_encoder(result.encoder, config, rng);

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  std::vector<std::size_t> eligible;
  for (const auto& [label, idx] : members) {
    if (idx.size() < 2) {
      result.excluded_labels.push_back(label);
      log_line(train.log, "warning: label " + std::to_string(label) + " has a single graph; excluded");
      continue;
    }
    eligible.insert(eligible.end(), idx.begin(), idx.end());
  }
  std::sort(eligible.begin(), eligible.end());
  const std::size_t anchors_per_batch = train.batch_size / 2;
  if (eligible.size() < 2) throw Error("pretrain: no family has two or more graphs");

  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    std::vector<std::size_t> order = eligible;
    shuffle(order, rng);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += anchors_per_batch) {
      const std::size_t stop = std::min(start + anchors_per_batch, order.size());
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(stop));
      const std::size_t anchors = batch.size();
      for (std::size_t a = 0; a < anchors; ++a) {
        const std::size_t p = select_positive(batch[a], members[labels[batch[a]]], cache, train.pool_size, rng);
        if (std::find(batch.begin(), batch.end(), p) == batch.end()) batch.push_back(p);
      }
      const std::size_t n = batch.size();
      if (n < 4) continue;

      std::vector<Tensor> h_rows;
      std::vector<int> batch_labels;
      Tensor sigma(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        h_rows.push_back(embed(result.encoder, config, graphs[batch[i]]));
        batch_labels.push_back(labels[batch[i]]);
        for (std::size_t j = 0; j < n; ++j) sigma(i, j) = cache(batch[i], batch[j]);
      }
      const PositiveSets sets = positive_sets(batch_labels, sigma, train.tau_alpha);
      result.skipped_anchors += sets.skipped;

      result.encoder.zero_grad();
      Tensor dh;
      double loss_value = 0.0;
      {
        Tape t;
        Var h = t.variable(stack_rows(h_rows));
        Var z = project(Binder(t, result.encoder), config, h);
        Var loss = scale(cl_loss(z, sets, train.tau), 1.0 / static_cast<double>(n - sets.skipped));
        t.backward(loss);
        dh = h.grad();
        loss_value = loss.value().item();
      }
      for (std::size_t i = 0; i < n; ++i) {
        Tape t;
        Var h = encode(Binder(t, result.encoder), config, graphs[batch[i]]);
        Tensor seed(1, dh.cols());
        std::copy(dh.data() + i * dh.cols(), dh.data() + (i + 1) * dh.cols(), seed.data());
        t.backward(h, seed);
      }
      result.encoder.adam_step({train.lr});
      if (!std::isfinite(loss_value)) throw Error("contrastive loss diverged");
      total += loss_value;
      ++steps;
    }
    const double mean = steps ? total / static_cast<double>(steps) : 0.0;
    result.curve.push_back({static_cast<int>(epoch), mean, std::numeric_limits<double>::quiet_NaN()});
    log_line(train.log, "pretrain epoch " + std::to_string(epoch) + " loss " + std::to_string(mean));
  }
  set_embedding_stats(result.encoder, config, graphs);
  return result;
}

void set_embedding_stats(ParamStore& encoder, const EncoderConfig& config, const std::vector<GraphInput>& graphs) {
  if (graphs.empty()) throw Error("set_embedding_stats: no graphs");
  std::vector<Tensor> rows;
  rows.reserve(graphs.size());
  for (const auto& g : graphs) rows.push_back(embed(encoder, config, g));
  const Tensor h = stack_rows(rows);
  Tensor stats(2, h.cols());
  const double n = static_cast<double>(h.rows());
  for (std::size_t j = 0; j < h.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) mean += h(i, j);
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < h.rows(); ++i) var += (h(i, j) - mean) * (h(i, j) - mean);
    var /= n;
    stats(0, j) = mean;
    stats(1, j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  encoder.at(kEmbeddingStats).value = stats;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) return Tensor();
  const std::size_t d = rows.front().cols();
  Tensor out(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rows() != 1 || rows[i].cols() != d) throw DimensionError("stack_rows: row " + std::to_string(i));
    std::copy(rows[i].data(), rows[i].data() + d, out.data() + i * d);
  }
  return out;
}

ParamStore train_regressor(const Tensor& embeddings, const std::vector<double>& labels, const EncoderConfig& config,
                           const RegressorConfig& train, std::vector<EpochMetrics>* curve) {
  ParamStore head;
  Rng rng(train.seed);
  init_predictor(head, config, rng);
  train_head(head, kHeadTarget, predict, embeddings, labels, config, train, curve);
  return head;
}

void fine_tune(ParamStore& head, const Tensor& embeddings, const std::vector<double>& labels,
               const EncoderConfig& config, const RegressorConfig& train, std::vector<EpochMetrics>* curve) {
  head.reset_optimizer();
  train_head(head, kHeadTarget, predict, embeddings, labels, config, train, curve);
}

std::vector<double> predict_all(const ParamStore& head, const EncoderConfig& config, const Tensor& embeddings) {
  Tape t;
  std::vector<double> y = predict(Binder(t, head), config, t.constant(embeddings)).value().values();
  for (double& v : y) v = to_target_scale(head, kHeadTarget, v);
  return y;
}

GnnBaseline train_baseline(const std::vector<GraphInput>& graphs, const std::vector<double>& labels,
                           const EncoderConfig& config, const RegressorConfig& train,
                           std::vector<EpochMetrics>* curve) {
  if (graphs.size() != labels.size()) throw DimensionError("train_baseline: graphs and labels differ in count");
  if (graphs.empty()) throw Error("train_baseline: no labeled examples");
  GnnBaseline model;
  Rng rng(train.seed);
  init_baseline(model.encoder, model.head, config, rng);
  const std::vector<double> z = standardize_targets(model.head, kBaselineTarget, labels);
  const std::size_t batch = std::max<std::size_t>(1, std::min(train.batch_size, graphs.size()));
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      const double inv = 1.0 / static_cast<double>(stop - start);
      model.encoder.zero_grad();
      model.head.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        Tape t;
        Var h = baseline_embed(Binder(t, model.encoder), config, graphs[order[k]]);
        Var y = baseline_predict(Binder(t, model.head), config, h);
        Var d = sub(y, t.constant(Tensor::scalar(z[order[k]])));
        Var loss = scale(mul(d, d), inv);
        t.backward(loss);
        total += loss.value().item() / inv;
      }
      model.encoder.adam_step({train.lr});
      model.head.adam_step({train.lr});
    }
    const double mse = total / static_cast<double>(graphs.size());
    if (!std::isfinite(mse)) throw Error("baseline loss diverged");
    if (curve) curve->push_back({static_cast<int>(epoch), mse, std::numeric_limits<double>::quiet_NaN()});
    log_line(train.log, "baseline epoch " + std::to_string(epoch) + " mse " + std::to_string(mse));
  }
  return model;
}

Tensor baseline_embeddings(const GnnBaseline& model, const EncoderConfig& config,
                           const std::vector<GraphInput>& graphs) {
  std::vector<Tensor> rows;
  for (const auto& g : graphs) rows.push_back(baseline_embedding(model.encoder, config, g));
  return stack_rows(rows);
}

void fine_tune_baseline(GnnBaseline& model, const std::vector<GraphInput>& graphs, const std::vector<double>& labels,
                        const EncoderConfig& config, const RegressorConfig& train) {
  model.head.reset_optimizer();
  train_head(model.head, kBaselineTarget, baseline_predict, baseline_embeddings(model, config, graphs), labels, config,
             train, nullptr);
}

std::vector<double> baseline_predict_all(const GnnBaseline& model, const EncoderConfig& config,
                                         const std::vector<GraphInput>& graphs) {
  Tape t;
  const Tensor h = baseline_embeddings(model, config, graphs);
  std::vector<double> y = baseline_predict(Binder(t, model.head), config, t.constant(h)).value().values();
  for (double& v : y) v = to_target_scale(model.head, kBaselineTarget, v);
  return y;
}

Tensor embed_all(const ParamStore& encoder, const EncoderConfig& config, const std::vector<GraphInput>& graphs) {
  std::vector<Tensor> rows;
  rows.reserve(graphs.size());
  for (const auto& g : graphs) rows.push_back(representation(encoder, config, g));
  return stack_rows(rows);
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double srcc(const std::vector<double>& predictions, const std::vector<double>& truths) {
  if (predictions.size() != truths.size()) throw DimensionError("srcc: inputs differ in length");
  if (predictions.size() < 2) throw Error("srcc: need at least two points");
  const auto ra = average_ranks(predictions);
  const auto rb = average_ranks(truths);
  const double n = static_cast<double>(ra.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void write_metrics_csv(const std::string& path, const std::vector<EpochMetrics>& rows, std::uint64_t config_digest) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write metrics " + path);
  out << "# config_digest=" << hex_digest(config_digest) << "\n";
  out << "epoch,loss,srcc\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.epoch << ",";
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << buf << ",";
    if (!std::isnan(r.srcc)) {
      std::snprintf(buf, sizeof buf, "%.17g", r.srcc);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace cgnas
