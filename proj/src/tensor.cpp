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

#include "cgnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cgnas/common.hpp"

namespace cgnas {

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) t(i, j++) = v;
    ++i;
  }
  return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
  Tensor t(1, values.size());
  t.data_ = values;
  return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
  Tensor t(values.size(), 1);
  t.data_ = values;
  return t;
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) throw DimensionError("item: tensor is " + shape_string() + ", not 1x1");
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Parameter& ParamStore::add(const std::string& name, Tensor init) {
  if (params_.count(name)) throw Error("duplicate parameter '" + name + "'");
  Parameter p;
  p.grad = Tensor(init.rows(), init.cols());
  p.m = p.grad;
  p.v = p.grad;
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) std::fill(p.grad.values().begin(), p.grad.values().end(), 0.0);
}

void ParamStore::reset_optimizer() {
  step_ = 0;
  for (auto& [name, p] : params_) {
    std::fill(p.m.values().begin(), p.m.values().end(), 0.0);
    std::fill(p.v.values().begin(), p.v.values().end(), 0.0);
  }
}

void ParamStore::adam_step(const AdamConfig& c) {
  ++step_;
  const double bc1 = 1.0 - std::pow(c.beta1, step_);
  const double bc2 = 1.0 - std::pow(c.beta2, step_);
  for (auto& [name, p] : params_) {
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

std::uint64_t ParamStore::digest() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, p] : params_) {
    h = fnv1a64(name, h);
    h = hash_combine(h, p.value.rows());
    h = hash_combine(h, p.value.cols());
    for (double v : p.value.values()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = hash_combine(h, bits);
    }
  }
  return h;
}

void save_checkpoint(const std::string& path, const ParamStore& store, std::uint64_t config_digest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << "cgnas-checkpoint v1 digest=" << hex_digest(config_digest) << " tensors=" << store.tensor_count()
      << "\n";
  for (const auto& [name, p] : store) {
    out << name << " " << p.value.rows() << " " << p.value.cols() << "\n";
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version, digest_field, count_field;
  hs >> magic >> version >> digest_field >> count_field;
  if (magic != "cgnas-checkpoint" || version != "v1" || digest_field.rfind("digest=", 0) != 0 ||
      count_field.rfind("tensors=", 0) != 0) {
    throw ParseError("not a checkpoint file: " + path, 1, "header");
  }
  Checkpoint ck;
  std::size_t count = 0;
  try {
    ck.config_digest = parse_hex_digest(digest_field.substr(7));
    count = std::stoull(count_field.substr(8));
  } catch (const std::exception&) {
    throw ParseError("malformed checkpoint header in " + path, 1, "header");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("truncated checkpoint " + path, 0, "tensor");
    std::istringstream ls(line);
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(ls >> name >> rows >> cols)) throw ParseError("bad tensor header in " + path, 0, "tensor");
    Tensor t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != t.size() * sizeof(double)) {
      throw ParseError("truncated payload for '" + name + "' in " + path, 0, name);
    }
    ck.tensors.emplace(name, std::move(t));
  }
  return ck;
}

void restore(ParamStore& store, const Checkpoint& checkpoint) {
  if (checkpoint.tensors.size() != store.tensor_count()) {
    throw SchemaError("checkpoint has " + std::to_string(checkpoint.tensors.size()) + " tensors, model has " +
                          std::to_string(store.tensor_count()),
                      "tensors");
  }
  for (auto& [name, p] : store) {
    auto it = checkpoint.tensors.find(name);
    if (it == checkpoint.tensors.end()) throw SchemaError("checkpoint lacks '" + name + "'", name);
    if (!it->second.same_shape(p.value)) {
      throw SchemaError("shape mismatch for '" + name + "': " + it->second.shape_string() + " vs " +
                            p.value.shape_string(),
                        name);
    }
    p.value = it->second;
  }
}

}  // namespace cgnas
