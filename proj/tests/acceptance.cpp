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


// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cgnas/contrastive.hpp"
#include "cgnas/evolution.hpp"
#include "cgnas/lowering.hpp"
#include "cgnas/oracle.hpp"
#include "cgnas/pipeline.hpp"
#include "cgnas/spectral.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

namespace {

using namespace cgnas;
using testing::random_tensor;
using testing::weighted_sum;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const Outcome& o, double seconds, double limit) {
  const bool in_time = limit <= 0 || seconds < limit;
  std::cout << "criterion " << id << ": " << (o.pass && in_time ? "PASS" : "FAIL") << "  (" << fmt("%.1f", seconds)
            << " s";
  if (limit > 0) std::cout << ", limit " << fmt("%.0f", limit) << " s";
  std::cout << ")\n";
  for (const auto& n : o.notes) std::cout << "    " << n << "\n";
  std::cout.flush();
}

// 1

Outcome lowering_fidelity() {
  Outcome o;
  const std::vector<std::tuple<Family, std::string, std::size_t>> table = {
      {Family::NB101Style, "conv1x1", 3},    {Family::NB101Style, "conv3x3", 3},
      {Family::NB101Style, "maxpool3x3", 1}, {Family::NB201Style, "zeroize", 0},
      {Family::NB201Style, "skip", 0},       {Family::NB201Style, "conv1x1", 3},
      {Family::NB201Style, "conv3x3", 3},    {Family::NB201Style, "avgpool3x3", 1},
      {Family::NB301Style, "zeroize", 0},    {Family::NB301Style, "skip", 0},
      {Family::NB301Style, "sep3x3", 8},     {Family::NB301Style, "sep5x5", 8},
      {Family::NB301Style, "dil3x3", 4},     {Family::NB301Style, "dil5x5", 4},
      {Family::NB301Style, "avgpool3x3", 1}, {Family::NB301Style, "maxpool3x3", 1},
  };
  std::size_t rows = 0;
  for (Family f : kAllFamilies) rows += grouping_table(f).size();
  o.check(rows == table.size(), "grouping table has " + std::to_string(rows) + " rows");
  for (const auto& [family, label, count] : table) {
    const std::string name = std::string(to_string(family)) + " " + label;
    std::size_t got = 0;
    if (label == kZeroize) {
      got = grouping(family, label).sequence.size();
    } else {
      got = expand_operator(Dialect::standard(family), label, {8, 8, 16}, 16).nodes.size();
    }
    o.check(got == count, name + ": " + std::to_string(got) + " nodes, expected " + std::to_string(count));
  }
  o.note(std::to_string(table.size()) + " (dialect, label) rows checked");
  return o;
}

// 2

using Adjacency = std::vector<std::vector<int>>;

Adjacency complete(int n) {
  Adjacency adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) adj[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  return adj;
}

Adjacency path(int n) {
  Adjacency adj(static_cast<std::size_t>(n));
  for (int i = 0; i + 1 < n; ++i) {
    adj[static_cast<std::size_t>(i)].push_back(i + 1);
    adj[static_cast<std::size_t>(i + 1)].push_back(i);
  }
  return adj;
}

Adjacency disjoint_union(const Adjacency& a, const Adjacency& b) {
  Adjacency out = a;
  const int offset = static_cast<int>(a.size());
  for (const auto& row : b) {
    out.emplace_back();
    for (int j : row) out.back().push_back(j + offset);
  }
  return out;
}

std::size_t zero_count(const std::vector<double>& ev) {
  return static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [](double x) { return std::abs(x) < 1e-9; }));
}

Outcome spectral_correctness() {
  Outcome o;
  for (int n = 2; n <= 6; ++n) {
    const auto ev = eig_sym(normalized_laplacian(complete(n)));
    bool ok = ev.size() == static_cast<std::size_t>(n) && std::abs(ev[0]) <= 1e-9;
    for (std::size_t i = 1; ok && i < ev.size(); ++i) ok = std::abs(ev[i] - n / (n - 1.0)) <= 1e-9;
    o.check(ok, "K" + std::to_string(n) + " spectrum");
  }
  const auto p3 = eig_sym(normalized_laplacian(path(3)));
  o.check(p3.size() == 3 && std::abs(p3[0]) <= 1e-9 && std::abs(p3[1] - 1) <= 1e-9 && std::abs(p3[2] - 2) <= 1e-9,
          "P3 spectrum");

  Rng rng(2026);
  double lo = 2, hi = 0, worst_trace = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto g = testing::random_network(rng);
    const Matrix l = normalized_laplacian(g);
    const auto ev = eig_sym(l);
    lo = std::min(lo, ev.front());
    hi = std::max(hi, ev.back());
    worst_trace = std::max(worst_trace, std::abs(std::accumulate(ev.begin(), ev.end(), 0.0) - l.trace()));
  }
  o.check(lo >= -1e-9 && hi <= 2 + 1e-9, "eigenvalues of random networks in [0, 2]");
  o.check(worst_trace <= 1e-9, "sum of eigenvalues equals trace");
  o.note("1000 random networks: min " + fmt("%.3g", lo) + ", max " + fmt("%.6f", hi) + ", worst trace gap " +
         fmt("%.3g", worst_trace));

  const auto g1 = testing::random_network(rng).undirected_adjacency();
  const auto g2 = testing::random_network(rng).undirected_adjacency();
  o.check(zero_count(eig_sym(normalized_laplacian(disjoint_union(g1, g2)))) == 2, "two-network union");
  const auto three = disjoint_union(disjoint_union(complete(4), path(5)), g1);
  o.check(zero_count(eig_sym(normalized_laplacian(three))) == 3, "three-component union");
  const auto four = disjoint_union(disjoint_union(three, g2), path(2));
  o.check(zero_count(eig_sym(normalized_laplacian(four))) == 5, "five-component union");
  return o;
}

// 3

Outcome autodiff_checks() {
  constexpr double kTol = 1e-4;
  Outcome o;
  Rng rng(2026);
  const Tensor a = random_tensor(4, 5, rng);
  const Tensor b = random_tensor(4, 5, rng);
  const Tensor m = random_tensor(5, 3, rng);
  const Tensor r = random_tensor(1, 5, rng);
  Tensor mask(4, 5, 1.0);
  mask(0, 0) = mask(1, 3) = mask(3, 4) = 0.0;
  const std::vector<int> gather_idx = {3, 0, 0, 2, 1, 3};
  const std::vector<int> scatter_idx = {1, 0, 1, 2};
  using L = testing::LossFn;
  const std::vector<std::tuple<std::string, L, std::vector<Tensor>>> cases = {
      {"matmul", [](Tape&, const std::vector<Var>& v) { return weighted_sum(matmul(v[0], v[1])); }, {a, m}},
      {"transpose", [](Tape&, const std::vector<Var>& v) { return weighted_sum(transpose(v[0])); }, {a}},
      {"add", [](Tape&, const std::vector<Var>& v) { return weighted_sum(add(v[0], v[1])); }, {a, b}},
      {"add_row", [](Tape&, const std::vector<Var>& v) { return weighted_sum(add_row(v[0], v[1])); }, {a, r}},
      {"sub", [](Tape&, const std::vector<Var>& v) { return weighted_sum(sub(v[0], v[1])); }, {a, b}},
      {"mul", [](Tape&, const std::vector<Var>& v) { return weighted_sum(mul(v[0], v[1])); }, {a, b}},
      {"scale", [](Tape&, const std::vector<Var>& v) { return weighted_sum(scale(v[0], -2.5)); }, {a}},
      {"relu", [](Tape&, const std::vector<Var>& v) { return weighted_sum(relu(v[0])); }, {a}},
      {"sigmoid", [](Tape&, const std::vector<Var>& v) { return weighted_sum(sigmoid(v[0])); }, {a}},
      {"tanh", [](Tape&, const std::vector<Var>& v) { return weighted_sum(tanh(v[0])); }, {a}},
      {"softmax_rows", [](Tape&, const std::vector<Var>& v) { return weighted_sum(softmax_rows(v[0])); }, {a}},
      {"log_softmax_rows_masked",
       [mask](Tape&, const std::vector<Var>& v) { return weighted_sum(log_softmax_rows_masked(v[0], mask)); },
       {a}},
      {"mean_rows", [](Tape&, const std::vector<Var>& v) { return weighted_sum(mean_rows(v[0])); }, {a}},
      {"sum", [](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, {a}},
      {"concat_cols", [](Tape&, const std::vector<Var>& v) { return weighted_sum(concat_cols({v[0], v[1]})); },
       {a, b}},
      {"concat_rows", [](Tape&, const std::vector<Var>& v) { return weighted_sum(concat_rows({v[0], v[1]})); },
       {a, b}},
      {"l2_normalize_rows",
       [](Tape&, const std::vector<Var>& v) { return weighted_sum(l2_normalize_rows(v[0])); }, {a}},
      {"gather_rows",
       [gather_idx](Tape&, const std::vector<Var>& v) { return weighted_sum(gather_rows(v[0], gather_idx)); }, {a}},
      {"scatter_mean_rows",
       [scatter_idx](Tape&, const std::vector<Var>& v) {
         return weighted_sum(scatter_mean_rows(v[0], scatter_idx, 4));
       },
       {a}},
  };
  double worst = 0;
  for (const auto& [name, f, inputs] : cases) {
    const double e = testing::gradient_error(f, inputs);
    worst = std::max(worst, e);
    o.check(e < kTol, name + " relative error " + fmt("%.3g", e));
  }
  o.note(std::to_string(cases.size()) + " primitives, worst relative error " + fmt("%.3g", worst));

  // Encoder compositions on lowered networks of each family.
  const EncoderConfig config;
  const std::vector<Family> families = {Family::NB101Style, Family::NB201Style, Family::NB301Style};
  for (std::size_t k = 0; k < families.size(); ++k) {
    Rng crng(300 + k);
    ParamStore store;
    init_encoder(store, config, crng);
    init_predictor(store, config, crng);
    std::vector<GraphInput> batch;
    std::vector<int> labels;
    std::vector<SpectralSignature> sigs;
    for (int i = 0; i < 4; ++i) {
      const Family f = i % 2 ? families[k] : families[(k + 1) % 3];
      const auto g = build_network(random_cell(Dialect::standard(f), crng));
      batch.push_back(prepare(g));
      labels.push_back(static_cast<int>(f));
      sigs.push_back(signature(g));
    }
    Tensor sigma(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) sigma(i, j) = spectral_distance(sigs[i], sigs[j]);
    }
    const PositiveSets sets = positive_sets(labels, sigma, kAlphaTemperature);
    auto loss = [&](Tape& t, ParamStore& s) {
      Binder p(t, s);
      std::vector<Var> rows;
      for (const auto& g : batch) rows.push_back(encode(p, config, g));
      Var h = concat_rows(rows);
      return add(cl_loss(project(p, config, h), sets), weighted_sum(predict(p, config, h), 5 + k));
    };
    const double e = testing::joint_parameter_gradient_error(loss, store, 8, crng);
    o.check(e < kTol, "encoder composition " + std::to_string(k) + " relative error " + fmt("%.3g", e));
    o.note("encoder composition " + std::to_string(k) + ": relative error " + fmt("%.3g", e));
  }
  return o;
}

// 4

Tensor unit_rows(Tensor t) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    double n = 0;
    for (std::size_t j = 0; j < t.cols(); ++j) n += t(i, j) * t(i, j);
    n = std::sqrt(n);
    for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) /= n;
  }
  return t;
}

Outcome loss_laws() {
  Outcome o;
  Rng rng(4);
  double worst_supcon = 0, worst_simclr = 0;
  bool alpha_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + uniform_index(rng, 12);
    const Tensor z = unit_rows(random_tensor(n, 16, rng));
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(uniform_index(rng, 3));
    worst_supcon = std::max(worst_supcon, std::abs(cl_loss({z, labels, Tensor(n, n, 0.25)}) - supcon_loss(z, labels)));

    std::vector<int> pairs(n), partner(n, -1);
    for (std::size_t i = 0; i < n; ++i) pairs[i] = static_cast<int>(i / 2);
    for (std::size_t i = 0; i + 1 < n; i += 2) {
      partner[i] = static_cast<int>(i + 1);
      partner[i + 1] = static_cast<int>(i);
    }
    Tensor sigma(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) sigma(i, j) = sigma(j, i) = uniform01(rng);
    }
    worst_simclr = std::max(worst_simclr, std::abs(cl_loss({z, pairs, sigma}) - simclr_loss(z, partner)));

    Tensor random_sigma(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) random_sigma(i, j) = random_sigma(j, i) = uniform01(rng);
    }
    const PositiveSets sets = positive_sets(labels, random_sigma, kAlphaTemperature);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& members = sets.members[i];
      const auto& alpha = sets.alpha[i];
      if (members.empty()) continue;
      double total = 0;
      for (double w : alpha) {
        alpha_ok = alpha_ok && w >= 0;
        total += w;
      }
      alpha_ok = alpha_ok && std::abs(total - 1) <= 1e-12;
      for (std::size_t p = 0; p < members.size(); ++p) {
        for (std::size_t q = 0; q < members.size(); ++q) {
          const double dp = random_sigma(i, members[p]), dq = random_sigma(i, members[q]);
          if (dp < dq) alpha_ok = alpha_ok && alpha[p] > alpha[q];
          if (dp == dq) alpha_ok = alpha_ok && alpha[p] == alpha[q];
        }
      }
    }
  }
  o.check(worst_supcon <= 1e-12, "uniform alpha reduces to SupCon (" + fmt("%.3g", worst_supcon) + ")");
  o.check(worst_simclr <= 1e-12, "singleton positives reduce to SimCLR (" + fmt("%.3g", worst_simclr) + ")");
  o.check(alpha_ok, "alpha weights convex and distance-monotone");
  Tensor twin(2, 2);
  twin(0, 0) = twin(1, 0) = 0.6;
  twin(0, 1) = twin(1, 1) = 0.8;
  const double identical = simclr_loss(twin, {1, 0});
  o.check(identical == 0.0, "identical pair SimCLR loss " + fmt("%.3g", identical));
  o.note("100 batches: SupCon gap " + fmt("%.3g", worst_supcon) + ", SimCLR gap " + fmt("%.3g", worst_simclr));
  return o;
}

// 5

std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double brute_srcc(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = brute_ranks(a), rb = brute_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0;
  return num / std::sqrt(va * vb);
}

Outcome srcc_equivalence() {
  Outcome o;
  Rng rng(5);
  std::size_t mismatches = 0, tied = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_index(rng, 9);
    std::vector<double> a(n), b(n);
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(uniform_index(rng, 4)) : standard_normal(rng);
      b[i] = ties ? static_cast<double>(uniform_index(rng, 4)) : standard_normal(rng);
    }
    tied += ties;
    if (average_ranks(a) != brute_ranks(a) || average_ranks(b) != brute_ranks(b) || srcc(a, b) != brute_srcc(a, b)) {
      ++mismatches;
    }
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " of 1000 vectors differ");
  o.note("1000 vector pairs of length 2..10 (" + std::to_string(tied) + " with ties), exact equality");
  return o;
}

// 6

struct Shared {
  RunConfig config;
  OracleConfig oracle;
  std::vector<Labeled> data;
  std::optional<TransferResult> transfer;
};

Outcome transfer(Shared& s) {
  Outcome o;
  s.transfer = run_transfer(s.config, s.data, 7, [](const std::string& line) { std::cerr << line << "\n"; });
  const TransferResult& t = *s.transfer;
  o.note("CL  zero-shot " + fmt("%.4f", t.cl_zero_shot) + ", fine-tuned " + fmt("%.4f", t.cl_srcc));
  o.note("GNN zero-shot " + fmt("%.4f", t.gnn_zero_shot) + ", fine-tuned " + fmt("%.4f", t.gnn_srcc));
  o.note("random " + fmt("%.4f", t.random_srcc));
  o.check(t.cl_srcc >= 0.6, "(a) CL fine-tuned SRCC >= 0.6");
  o.check(std::abs(t.random_srcc) < 0.1, "(b) random estimator |SRCC| < 0.1");
  o.check(t.cl_srcc >= std::abs(t.random_srcc) + 0.4, "(b) CL beats random by at least 0.4");
  o.check(t.cl_srcc >= t.gnn_srcc - 0.05, "(c) CL >= GNN - 0.05");
  return o;
}

// 7

std::vector<ArchRecord> records_of(const Shared& s, Family f) {
  for (const auto& d : s.data) {
    if (d.family == f) return d.records;
  }
  return {};
}

RegressorConfig regressor(const RunConfig& c, std::uint64_t seed, std::size_t epochs) {
  RegressorConfig r;
  r.epochs = epochs;
  r.batch_size = c.regressor_batch;
  r.lr = c.regressor_lr;
  r.seed = seed;
  return r;
}

std::vector<GraphInput> inputs_of(const std::vector<ArchRecord>& rs) {
  std::vector<GraphInput> out;
  for (const auto& r : rs) out.push_back(prepare(r.cg));
  return out;
}

std::vector<double> labels_of(const std::vector<ArchRecord>& rs) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(*r.accuracy);
  return out;
}

std::vector<SearchState> g_nb201_cl_states;

Outcome search(Shared& s) {
  Outcome o;
  const Dialect reduced = Dialect::nb201_reduced();
  const auto space = enumerate_space(reduced, s.oracle);
  double optimum = 0;
  for (const auto& r : space) optimum = std::max(optimum, *r.accuracy);
  o.note("reduced space: " + std::to_string(space.size()) + " distinct graphs, optimum " + fmt("%.6f", optimum));

  const EAConfig random_preset = ea_preset(Family::NB201Style, Preset::Random);
  const EAConfig cl_preset = ea_preset(Family::NB201Style, Preset::CL);
  int found = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto est = oracle_estimator(s.oracle);
    const SearchState st = ea_search(random_preset, reduced, *est, s.oracle, rng);
    const bool hit = *st.best().accuracy == optimum && st.ledger.count() <= random_preset.budget();
    found += hit;
  }
  o.check(found == 5, "(a) oracle-direct EA found the optimum on " + std::to_string(found) + "/5 seeds");
  o.note("(a) oracle-direct EA: optimum on " + std::to_string(found) + "/5 seeds within " +
         std::to_string(random_preset.budget()) + " queries");

  // CL predictor: source head on the other two families, fine-tuned on reduced-space samples.
  if (!s.transfer) {
    o.check(false, "(b) needs the transfer encoder");
    return o;
  }
  const TransferResult& t = *s.transfer;
  const EncoderConfig& ec = t.encoder_config;
  std::vector<ArchRecord> source = records_of(s, Family::NB101Style);
  const auto nb301 = records_of(s, Family::NB301Style);
  source.insert(source.end(), nb301.begin(), nb301.end());
  const ParamStore source_head = train_regressor(embed_all(t.encoder, ec, inputs_of(source)), labels_of(source), ec,
                                                 regressor(s.config, 71, s.config.regressor_epochs));
  const std::size_t ft_n = 40;
  double cl_sum = 0, random_sum = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto ft = generate_dataset(reduced, ft_n, hash_combine(seed, 21), s.oracle);
    ParamStore head = source_head;
    fine_tune(head, embed_all(t.encoder, ec, inputs_of(ft)), labels_of(ft), ec,
              regressor(s.config, hash_combine(seed, 22), s.config.finetune_epochs));
    SearchState state;
    precharge(state, ft, s.oracle);
    auto cl = cl_estimator(t.encoder, head, ec);
    Rng rng_cl(seed);
    SearchState cl_state = ea_search(cl_preset, reduced, *cl, s.oracle, rng_cl, std::move(state));

    auto rnd = random_estimator(hash_combine(seed, 7));
    Rng rng_rnd(seed);
    const SearchState rnd_state = ea_search(random_preset, reduced, *rnd, s.oracle, rng_rnd);
    cl_sum += *cl_state.best().accuracy;
    random_sum += *rnd_state.best().accuracy;
    o.note("seed " + std::to_string(seed) + ": CL " + fmt("%.6f", *cl_state.best().accuracy) + " (" +
           std::to_string(cl_state.ledger.count()) + " queries), random " + fmt("%.6f", *rnd_state.best().accuracy) +
           " (" + std::to_string(rnd_state.ledger.count()) + " queries)");
    g_nb201_cl_states.push_back(std::move(cl_state));
  }
  o.check(cl_sum >= random_sum, "(b) mean best CL >= mean best random");
  o.note("(b) mean best: CL " + fmt("%.6f", cl_sum / 5) + ", random " + fmt("%.6f", random_sum / 5));
  return o;
}

// 8

Outcome ledgers(Shared& s) {
  Outcome o;
  for (Family f : {Family::NB101Style, Family::NB301Style}) {
    const EAConfig ea = ea_preset(f, Preset::Random);
    Rng rng(11);
    auto est = random_estimator(11);
    const SearchState st = ea_search(ea, Dialect::standard(f), *est, s.oracle, rng);
    const std::size_t expected = f == Family::NB101Style ? 700 : 800;
    o.check(st.ledger.count() == expected, std::string(to_string(f)) + " random preset ledger");
    o.note(std::string(to_string(f)) + " random: " + std::to_string(st.ledger.count()) + " queries (expected " +
           std::to_string(expected) + ")");
  }
  if (!s.transfer) {
    o.check(false, "CL presets need the transfer encoder");
    return o;
  }
  const TransferResult& t = *s.transfer;
  auto formula = [&](const std::string& name, const EAConfig& ea, const SearchState& st) {
    const std::size_t expected = ea.p_init + ea.T * ea.B + st.fine_tune_charge;
    o.check(st.ledger.count() == expected, name + " CL preset ledger");
    o.note(name + " CL: " + std::to_string(st.ledger.count()) + " queries = " + std::to_string(ea.p_init) + " + " +
           std::to_string(ea.T) + "*" + std::to_string(ea.B) + " + fine-tune " +
           std::to_string(st.fine_tune_charge));
  };
  {
    const EAConfig ea = ea_preset(Family::NB101Style, Preset::CL);
    const auto nb101 = records_of(s, Family::NB101Style);
    std::vector<ArchRecord> ft(nb101.begin(), nb101.begin() + 50);
    ParamStore head = train_regressor(embed_all(t.encoder, t.encoder_config, inputs_of(ft)), labels_of(ft),
                                      t.encoder_config, regressor(s.config, 81, s.config.finetune_epochs));
    SearchState state;
    precharge(state, ft, s.oracle);
    auto est = cl_estimator(t.encoder, head, t.encoder_config);
    Rng rng(12);
    formula("NB101Style", ea, ea_search(ea, Dialect::nb101(), *est, s.oracle, rng, std::move(state)));
  }
  for (std::size_t i = 0; i < g_nb201_cl_states.size(); ++i) {
    formula("NB201Style (reduced, seed " + std::to_string(i + 1) + ")", ea_preset(Family::NB201Style, Preset::CL),
            g_nb201_cl_states[i]);
  }
  {
    const EAConfig ea = ea_preset(Family::NB301Style, Preset::CL);
    SearchState state;
    std::vector<ArchRecord> ft = t.finetune_set;
    precharge(state, ft, s.oracle);
    auto est = cl_estimator(t.encoder, t.head, t.encoder_config);
    Rng rng(13);
    formula("NB301Style", ea, ea_search(ea, Dialect::nb301(), *est, s.oracle, rng, std::move(state)));
  }
  return o;
}

// 9

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const RunConfig smoke = RunConfig::load(CGNAS_SOURCE_DIR "/tools/configs/smoke.cfg");
  const fs::path root = fs::temp_directory_path() / "cgnas_acceptance_repro";
  fs::remove_all(root);
  repro(smoke, 7, (root / "a").string(), false);
  repro(smoke, 7, (root / "b").string(), false);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    if (entry.path().extension() != ".csv") continue;
    const fs::path other = root / "b" / entry.path().filename();
    o.check(fs::exists(other) && read_file(entry.path()) == read_file(other),
            entry.path().filename().string() + " identical");
    ++compared;
  }
  o.check(compared >= 6, "expected the metric, prediction, eval and search CSVs");
  o.note(std::to_string(compared) + " CSV files byte-identical across two runs");
  fs::remove_all(root);
  return o;
}

// Not a numbered criterion: GNN baseline on 2000 labeled records of one family.
constexpr std::size_t kLearnabilityEpochs = 20;

Outcome learnability(Shared& s) {
  Outcome o;
  const auto train = records_of(s, Family::NB201Style);
  std::set<std::uint64_t> seen;
  for (const auto& r : train) seen.insert(r.digest);
  std::vector<ArchRecord> held;
  for (const auto& r : generate_dataset(Dialect::nb201(), 1000, 97, s.oracle)) {
    if (held.size() < 500 && !seen.count(r.digest)) held.push_back(r);
  }
  const EncoderConfig ec;
  const GnnBaseline model =
      train_baseline(inputs_of(train), labels_of(train), ec, regressor(s.config, 91, kLearnabilityEpochs));
  const double rho = srcc(baseline_predict_all(model, ec, inputs_of(held)), labels_of(held));
  o.check(rho >= 0.8, "GNN baseline SRCC >= 0.8");
  o.note("GNN baseline, " + std::to_string(kLearnabilityEpochs) + " epochs on " + std::to_string(train.size()) +
         " NB201Style records, " + std::to_string(held.size()) + " held out: SRCC " + fmt("%.4f", rho));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.count(id); };
  bool all = true;
  auto run = [&](int id, double limit, const std::function<Outcome()>& f) {
    if (!wanted(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    report(id, o, secs, limit);
    all = all && o.pass && (limit <= 0 || secs < limit);
  };

  Shared shared;
  shared.config = RunConfig::load(CGNAS_SOURCE_DIR "/tools/configs/desk.cfg");
  shared.oracle = OracleConfig::from_seed(shared.config.oracle_seed);
  auto ensure_data = [&] {
    if (shared.data.empty()) shared.data = make_datasets(shared.config, shared.oracle, 7);
  };

  run(1, 1, lowering_fidelity);
  run(2, 30, spectral_correctness);
  run(3, 60, autodiff_checks);
  run(4, 0, loss_laws);
  run(5, 0, srcc_equivalence);
  run(6, 1800, [&] {
    ensure_data();
    return transfer(shared);
  });
  if ((wanted(7) || wanted(8)) && !shared.transfer) {
    ensure_data();
    shared.transfer = run_transfer(shared.config, shared.data, 7);
  }
  run(7, 900, [&] { return search(shared); });
  run(8, 0, [&] { return ledgers(shared); });
  run(9, 0, determinism);
  if (wanted(10)) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      ensure_data();
      o = learnability(shared);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    std::cout << "learnability: " << (o.pass ? "PASS" : "FAIL") << "  (" << fmt("%.1f", seconds_since(t0)) << " s)\n";
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
