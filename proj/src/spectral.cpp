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

#include "cgnas/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgnas/common.hpp"

namespace cgnas {

namespace {

void require_symmetric(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("eig_sym: matrix is not square");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12) {
        throw std::invalid_argument("eig_sym: matrix is not symmetric");
      }
    }
  }
}

// Householder reduction to tridiagonal form (eigenvalues only). On return d
// holds the diagonal and e[1..n-1] the sub-diagonal.
void tridiagonalize(Matrix& a, std::vector<double>& d, std::vector<double>& e) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const Eigen::Index l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (Eigen::Index k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[static_cast<std::size_t>(i)] = a(i, l);
      } else {
        for (Eigen::Index k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[static_cast<std::size_t>(i)] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (Eigen::Index j = 0; j <= l; ++j) {
          g = 0.0;
          for (Eigen::Index k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (Eigen::Index k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[static_cast<std::size_t>(j)] = g / h;
          f += e[static_cast<std::size_t>(j)] * a(i, j);
        }
        const double hh = f / (h + h);
        for (Eigen::Index j = 0; j <= l; ++j) {
          f = a(i, j);
          g = e[static_cast<std::size_t>(j)] - hh * f;
          e[static_cast<std::size_t>(j)] = g;
          for (Eigen::Index k = 0; k <= j; ++k) {
            a(j, k) -= f * e[static_cast<std::size_t>(k)] + g * a(i, k);
          }
        }
      }
    } else {
      e[static_cast<std::size_t>(i)] = a(i, l);
    }
    d[static_cast<std::size_t>(i)] = h;
  }
  e[0] = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = a(i, i);
}

// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e) {
  const std::size_t n = d.size();
  if (n < 2) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    int iterations = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= kEps * dd) break;
      }
      if (m != l) {
        if (++iterations > 60) throw Error("eig_sym: QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

}  // namespace

Matrix normalized_laplacian(const std::vector<std::vector<int>>& adjacency) {
  const auto n = static_cast<Eigen::Index>(adjacency.size());
  Matrix lap = Matrix::Zero(n, n);
  std::vector<double> degree(adjacency.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i) degree[i] = static_cast<double>(adjacency[i].size());
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    if (degree[i] > 0) lap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    for (int j : adjacency[i]) {
      const auto ju = static_cast<std::size_t>(j);
      lap(static_cast<Eigen::Index>(i), j) = -1.0 / std::sqrt(degree[i] * degree[ju]);
    }
  }
  return lap;
}

Matrix normalized_laplacian(const ComputationGraph& g) {
  return normalized_laplacian(g.undirected_adjacency());
}

std::vector<double> eig_sym(const Matrix& m) {
  require_symmetric(m);
  const auto n = static_cast<std::size_t>(m.rows());
  if (n == 0) return {};
  Matrix a = m;
  std::vector<double> d(n), e(n);
  tridiagonalize(a, d, e);
  tridiagonal_ql(d, e);
  std::sort(d.begin(), d.end());
  return d;
}

std::vector<double> eig_sym_jacobi(const Matrix& m, const JacobiOptions& options) {
  require_symmetric(m);
  Matrix a = m;
  const Eigen::Index n = a.rows();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) s += a(i, j) * a(i, j);
      }
    }
    return std::sqrt(s);
  };
  int sweep = 0;
  for (; sweep < options.max_sweeps && off_norm() >= options.tolerance; ++sweep) {
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }
  if (off_norm() >= options.tolerance) {
    throw Error("eig_sym_jacobi: no convergence after " + std::to_string(options.max_sweeps) + " sweeps");
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(out.begin(), out.end());
  return out;
}

SpectralSignature signature_from_eigenvalues(const std::vector<double>& ascending) {
  SpectralSignature sig;
  sig.node_count = ascending.size();
  for (std::size_t i = 0; i < kSignatureLength && i < ascending.size(); ++i) sig.values[i] = ascending[i];
  return sig;
}

SpectralSignature signature(const ComputationGraph& g) {
  return signature_from_eigenvalues(eig_sym(normalized_laplacian(g)));
}

double spectral_distance(const SpectralSignature& a, const SpectralSignature& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kSignatureLength; ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::size_t DistanceCache::index(std::size_t i, std::size_t j) const {
  // Row i of the strict upper triangle starts after i*(2n-i-1)/2 entries.
  return i * (2 * n_ - i - 1) / 2 + (j - i - 1);
}

DistanceCache DistanceCache::build(std::span<const SpectralSignature> signatures, std::uint64_t digest) {
  DistanceCache cache;
  cache.n_ = signatures.size();
  cache.digest_ = digest;
  cache.packed_.resize(cache.n_ > 1 ? cache.n_ * (cache.n_ - 1) / 2 : 0);
  std::size_t k = 0;
  for (std::size_t i = 0; i < cache.n_; ++i) {
    for (std::size_t j = i + 1; j < cache.n_; ++j) {
      cache.packed_[k++] = spectral_distance(signatures[i], signatures[j]);
    }
  }
  return cache;
}

double DistanceCache::operator()(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw std::out_of_range("DistanceCache index out of range");
  if (i == j) return 0.0;
  if (i > j) std::swap(i, j);
  return packed_[index(i, j)];
}

void DistanceCache::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write distance cache " + path);
  out << "cgnas-distance-cache v1 digest=" << hex_digest(digest_) << " n=" << n_
      << " k=" << kSignatureLength << "\n";
  out.write(reinterpret_cast<const char*>(packed_.data()),
            static_cast<std::streamsize>(packed_.size() * sizeof(double)));
  if (!out) throw Error("failed writing distance cache " + path);
}

DistanceCache DistanceCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open distance cache " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version, digest_field, n_field, k_field;
  hs >> magic >> version >> digest_field >> n_field >> k_field;
  if (magic != "cgnas-distance-cache" || version != "v1") {
    throw ParseError("not a distance cache file: " + path, 1, "header");
  }
  DistanceCache cache;
  try {
    if (digest_field.rfind("digest=", 0) != 0 || n_field.rfind("n=", 0) != 0 ||
        k_field != "k=" + std::to_string(kSignatureLength)) {
      throw std::invalid_argument("header fields");
    }
    cache.digest_ = parse_hex_digest(digest_field.substr(7));
    cache.n_ = std::stoull(n_field.substr(2));
  } catch (const std::exception&) {
    throw ParseError("malformed distance cache header in " + path, 1, "header");
  }
  cache.packed_.resize(cache.n_ > 1 ? cache.n_ * (cache.n_ - 1) / 2 : 0);
  in.read(reinterpret_cast<char*>(cache.packed_.data()),
          static_cast<std::streamsize>(cache.packed_.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != cache.packed_.size() * sizeof(double)) {
    throw ParseError("truncated distance cache payload in " + path, 2, "payload");
  }
  return cache;
}

DistanceCache DistanceCache::load_or_build(const std::string& path,
                                           std::span<const SpectralSignature> signatures,
                                           std::uint64_t digest) {
  if (std::filesystem::exists(path)) {
    try {
      DistanceCache cached = load(path);
      if (cached.digest_ == digest && cached.n_ == signatures.size()) return cached;
    } catch (const Error&) {
      // stale or corrupt; rebuilt below
    }
  }
  DistanceCache cache = build(signatures, digest);
  cache.save(path);
  return cache;
}

std::uint64_t dataset_digest(std::span<const std::uint64_t> graph_digests) {
  std::uint64_t h = hash_combine(kFnvOffset, graph_digests.size());
  for (auto d : graph_digests) h = hash_combine(h, d);
  return h;
}

}  // namespace cgnas
