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

// Dense row-major f64 matrices, named parameter storage with Adam state, and
// the checkpoint container.

#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace cgnas {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(const std::vector<double>& values);
  static Tensor column(const std::vector<double>& values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  /// Value of a 1x1 tensor.
  double item() const;
  bool all_finite() const;
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

class ParamStore {
 public:
  /// Registers a new parameter; throws on a duplicate name.
  Parameter& add(const std::string& name, Tensor init);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t tensor_count() const { return params_.size(); }
  std::size_t scalar_count() const;
  int step() const { return step_; }

  void zero_grad();
  /// Clears Adam moments and the step counter; values are kept.
  void reset_optimizer();
  void adam_step(const AdamConfig& config);

  /// FNV digest over names, shapes and values.
  std::uint64_t digest() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, Parameter> params_;
  int step_ = 0;
};

/// Named tensors with a config digest; raw f64 payloads after a text header.
void save_checkpoint(const std::string& path, const ParamStore& store, std::uint64_t config_digest);

struct Checkpoint {
  std::uint64_t config_digest = 0;
  std::map<std::string, Tensor> tensors;
};

Checkpoint load_checkpoint(const std::string& path);

/// Copies checkpoint values into `store`; names and shapes must match exactly.
void restore(ParamStore& store, const Checkpoint& checkpoint);

}  // namespace cgnas
