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

#include "cgnas/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cgnas/common.hpp"

namespace cgnas {

namespace {

void require(bool ok, const char* primitive, const std::string& detail) {
  if (!ok) throw DimensionError(std::string(primitive) + ": " + detail);
}

std::string shapes(const Tensor& a, const Tensor& b) { return a.shape_string() + " vs " + b.shape_string(); }

Tape& same_tape(Var a, Var b, const char* primitive) {
  require(a.tape != nullptr && a.tape == b.tape, primitive, "operands live on different tapes");
  return *a.tape;
}

// Every output entry is accumulated over k in increasing order.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.data() + i * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a(i, k);
      const double* bk = b.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += aik * bk[j];
    }
  }
}

// c += a * b^T
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), m = a.cols(), p = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.data() + i * m;
    for (std::size_t j = 0; j < p; ++j) {
      const double* bj = b.data() + j * m;
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += ai[k] * bj[k];
      c(i, j) += s;
    }
  }
}

// c += a^T * b
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* bi = b.data() + i * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a(i, k);
      double* ck = c.data() + k * p;
      for (std::size_t j = 0; j < p; ++j) ck[j] += aik * bi[j];
    }
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i]);
  return out;
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }

Tensor Var::grad() const { return tape->grad(id); }

Tensor Tape::grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.has_grad) return n.grad;
  const Tensor& v = value(id);
  return Tensor(v.rows(), v.cols());
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Parameter& p = store.at(name);
  Node n;
  n.external = &p.value;
  n.needs_grad = true;
  n.param = &p;
  return push(std::move(n));
}

Var Tape::frozen(const ParamStore& store, const std::string& name) {
  Node n;
  n.external = &store.at(name).value;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<int> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (int id : inputs) n.needs_grad |= needs_grad(id);
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows(), v.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape == this, "backward", "loss is not on this tape");
  const Tensor& v = value(loss.id);
  require(v.rows() == 1 && v.cols() == 1, "backward", "loss must be a scalar, got " + v.shape_string());
  backward(loss, Tensor::scalar(1.0));
}

void Tape::backward(Var out, const Tensor& seed) {
  require(out.tape == this, "backward", "output is not on this tape");
  require(seed.same_shape(value(out.id)), "backward", "seed shape " + shapes(seed, value(out.id)));
  add_into(grad_slot(out.id), seed);
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) add_into(n.param->grad, n.grad);
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), "matmul", "inner dimensions " + shapes(av, bv));
  Tensor out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    if (t.needs_grad(a)) gemm_nt(g, t.value(b), t.grad_slot(a));
    if (t.needs_grad(b)) gemm_tn(t.value(a), g, t.grad_slot(b));
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  require(a.value().same_shape(b.value()), "add", shapes(a.value(), b.value()));
  Tensor out = a.value();
  add_into(out, b.value());
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    if (t.needs_grad(a)) add_into(t.grad_slot(a), t.upstream(self));
    if (t.needs_grad(b)) add_into(t.grad_slot(b), t.upstream(self));
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == av.cols(), "add_row", shapes(av, rv));
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  }
  return t.record(std::move(out), {a.id, row.id}, [a = a.id, r = row.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    if (t.needs_grad(a)) add_into(t.grad_slot(a), g);
    if (t.needs_grad(r)) {
      Tensor& gr = t.grad_slot(r);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  require(a.value().same_shape(b.value()), "sub", shapes(a.value(), b.value()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.value().data()[i];
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    if (t.needs_grad(a)) add_into(t.grad_slot(a), g);
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] -= g.data()[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b, "mul");
  require(a.value().same_shape(b.value()), "mul", shapes(a.value(), b.value()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  return t.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_slot(a);
      const Tensor& bv = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_slot(b);
      const Tensor& av = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = map(a.value(), [s](double x) { return x * s; });
  return a.tape->record(std::move(out), {a.id}, [a = a.id, s](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += s * g.data()[i];
  });
}

Var relu(Var a) {
  Tensor out = map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = map(a.value(), stable_sigmoid);
  return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = y.data()[i];
      ga.data()[i] += g.data()[i] * s * (1.0 - s);
    }
  });
}

Var tanh(Var a) {
  Tensor out = map(a.value(), [](double x) { return std::tanh(x); });
  return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = y.data()[i];
      ga.data()[i] += g.data()[i] * (1.0 - v * v);
    }
  });
}

Var softmax_rows(Var a) {
  const Tensor& av = a.value();
  require(av.cols() > 0, "softmax_rows", "no columns");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double mx = av(i, 0);
    for (std::size_t j = 1; j < av.cols(); ++j) mx = std::max(mx, av(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) {
      out(i, j) = std::exp(av(i, j) - mx);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) /= z;
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows_masked(Var a, const Tensor& mask) {
  const Tensor& av = a.value();
  require(mask.same_shape(av), "log_softmax_rows_masked", "mask " + shapes(mask, av));
  Tensor out(av.rows(), av.cols());
  Tensor probs(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < av.cols(); ++j) {
      if (mask(i, j) != 0.0) mx = std::max(mx, av(i, j));
    }
    if (mx == -INFINITY) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) {
      if (mask(i, j) != 0.0) z += std::exp(av(i, j) - mx);
    }
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < av.cols(); ++j) {
      if (mask(i, j) != 0.0) {
        out(i, j) = av(i, j) - lse;
        probs(i, j) = std::exp(out(i, j));
      }
    }
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id, mask, probs = std::move(probs)](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (mask(i, j) != 0.0) total += g(i, j);
      }
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (mask(i, j) != 0.0) ga(i, j) += g(i, j) - probs(i, j) * total;
      }
    }
  });
}

Var mean_rows(Var a) {
  const Tensor& av = a.value();
  require(av.rows() > 0, "mean_rows", "no rows");
  Tensor out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j);
  }
  const double inv = 1.0 / static_cast<double>(av.rows());
  for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) *= inv;
  return a.tape->record(std::move(out), {a.id}, [a = a.id, inv](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a.id}, [a = a.id](Tape& t, int self) {
    const double g = t.upstream(self)(0, 0);
    Tensor& ga = t.grad_slot(a);
    for (double& v : ga.values()) v += g;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols", "no operands");
  Tape& t = *parts.front().tape;
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    require(p.tape == &t, "concat_cols", "operands live on different tapes");
    require(p.rows() == rows, "concat_cols", "row counts " + shapes(parts.front().value(), p.value()));
    cols += p.cols();
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
    }
    offset += v.cols();
  }
  return t.record(std::move(out), ids, [ids](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    std::size_t offset = 0;
    for (int id : ids) {
      const std::size_t c = t.value(id).cols();
      if (t.needs_grad(id)) {
        Tensor& gi = t.grad_slot(id);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) gi(i, j) += g(i, offset + j);
        }
      }
      offset += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows", "no operands");
  Tape& t = *parts.front().tape;
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<int> ids;
  for (Var p : parts) {
    require(p.tape == &t, "concat_rows", "operands live on different tapes");
    require(p.cols() == cols, "concat_rows", "column counts " + shapes(parts.front().value(), p.value()));
    rows += p.rows();
    ids.push_back(p.id);
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offset * cols);
    offset += v.rows();
  }
  return t.record(std::move(out), ids, [ids](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    std::size_t offset = 0;
    for (int id : ids) {
      const Tensor& v = t.value(id);
      if (t.needs_grad(id)) {
        Tensor& gi = t.grad_slot(id);
        for (std::size_t k = 0; k < v.size(); ++k) gi.data()[k] += g.data()[offset * g.cols() + k];
      }
      offset += v.rows();
    }
  });
}

Var l2_normalize_rows(Var a) {
  constexpr double kMinNorm = 1e-12;
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  std::vector<double> norms(av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j) * av(i, j);
    norms[i] = std::max(std::sqrt(s), kMinNorm);
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) / norms[i];
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id, norms = std::move(norms)](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += y(i, j) * g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += (g(i, j) - y(i, j) * dot) / norms[i];
    }
  });
}

Var gather_rows(Var a, const std::vector<int>& index) {
  const Tensor& av = a.value();
  Tensor out(index.size(), av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && static_cast<std::size_t>(index[i]) < av.rows(), "gather_rows",
            "index " + std::to_string(index[i]) + " out of range for " + av.shape_string());
    const double* src = av.data() + static_cast<std::size_t>(index[i]) * av.cols();
    std::copy(src, src + av.cols(), out.data() + i * av.cols());
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id, index](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < index.size(); ++i) {
      double* dst = ga.data() + static_cast<std::size_t>(index[i]) * ga.cols();
      const double* src = g.data() + i * g.cols();
      for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
    }
  });
}

Var scatter_mean_rows(Var a, const std::vector<int>& index, std::size_t n) {
  const Tensor& av = a.value();
  require(index.size() == av.rows(), "scatter_mean_rows",
          std::to_string(index.size()) + " indices for " + av.shape_string());
  std::vector<double> count(n, 0.0);
  for (int k : index) {
    require(k >= 0 && static_cast<std::size_t>(k) < n, "scatter_mean_rows",
            "index " + std::to_string(k) + " out of range for " + std::to_string(n) + " groups");
    count[static_cast<std::size_t>(k)] += 1.0;
  }
  Tensor out(n, av.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    double* dst = out.data() + static_cast<std::size_t>(index[i]) * av.cols();
    const double* src = av.data() + i * av.cols();
    for (std::size_t j = 0; j < av.cols(); ++j) dst[j] += src[j];
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (count[k] == 0.0) continue;
    for (std::size_t j = 0; j < av.cols(); ++j) out(k, j) /= count[k];
  }
  return a.tape->record(std::move(out), {a.id}, [a = a.id, index, count = std::move(count)](Tape& t, int self) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const auto k = static_cast<std::size_t>(index[i]);
      const double* src = g.data() + k * g.cols();
      double* dst = ga.data() + i * ga.cols();
      for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j] / count[k];
    }
  });
}

}  // namespace cgnas
