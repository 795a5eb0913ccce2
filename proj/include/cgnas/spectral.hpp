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

// Normalized Laplacian spectra of computational graphs and the spectral
// pseudo-distance built from their smallest eigenvalues.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgnas/graph.hpp"

namespace cgnas {

using Matrix = Eigen::MatrixXd;

/// I - D^{-1/2} A D^{-1/2} of an undirected simple graph given as neighbor
/// lists. Isolated vertices get a zero row.
Matrix normalized_laplacian(const std::vector<std::vector<int>>& adjacency);

/// Laplacian of the undirected skeleton of `g` (directions dropped, parallel
/// edges merged).
Matrix normalized_laplacian(const ComputationGraph& g);

/// Ascending eigenvalues of a symmetric matrix via Householder
/// tridiagonalization and implicit QL. Rejects input that is not symmetric
/// within 1e-12.
std::vector<double> eig_sym(const Matrix& m);

struct JacobiOptions {
  double tolerance = 1e-12;  // on the off-diagonal Frobenius norm
  int max_sweeps = 100;
};

/// Same contract as eig_sym, computed by cyclic Jacobi rotations.
std::vector<double> eig_sym_jacobi(const Matrix& m, const JacobiOptions& options = {});

inline constexpr std::size_t kSignatureLength = 11;

struct SpectralSignature {
  std::array<double, kSignatureLength> values{};  // ascending
  std::size_t node_count = 0;

  /// Trailing entries that are zero padding (graphs with fewer than 11 nodes).
  std::size_t padded() const {
    return node_count >= kSignatureLength ? 0 : kSignatureLength - node_count;
  }
};

SpectralSignature signature_from_eigenvalues(const std::vector<double>& ascending);
SpectralSignature signature(const ComputationGraph& g);

/// Euclidean norm of the difference of two signatures.
double spectral_distance(const SpectralSignature& a, const SpectralSignature& b);

/// Symmetric matrix of pairwise spectral distances for one dataset, keyed by
/// the dataset digest. Stored as a packed strict upper triangle.
class DistanceCache {
 public:
  DistanceCache() = default;

  static DistanceCache build(std::span<const SpectralSignature> signatures,
                             std::uint64_t dataset_digest);

  double operator()(std::size_t i, std::size_t j) const;
  std::size_t size() const { return n_; }
  std::uint64_t dataset_digest() const { return digest_; }

  /// Text header line followed by little-endian f64 payload.
  void save(const std::string& path) const;
  static DistanceCache load(const std::string& path);

  /// Reuses `path` when its digest and size match, otherwise rebuilds and
  /// rewrites it.
  static DistanceCache load_or_build(const std::string& path,
                                     std::span<const SpectralSignature> signatures,
                                     std::uint64_t dataset_digest);

 private:
  std::size_t index(std::size_t i, std::size_t j) const;

  std::size_t n_ = 0;
  std::uint64_t digest_ = 0;
  std::vector<double> packed_;
};

/// Order-sensitive digest of a list of graph digests.
std::uint64_t dataset_digest(std::span<const std::uint64_t> graph_digests);

}  // namespace cgnas
