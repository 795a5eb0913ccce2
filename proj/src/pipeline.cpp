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

#include "cgnas/pipeline.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cgnas/lowering.hpp"
#include "cgnas/spectral.hpp"

namespace cgnas {
namespace {

namespace fs = std::filesystem;

constexpr std::array<Family, 3> kFamilies = {Family::NB101Style, Family::NB201Style, Family::NB301Style};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(const std::string& v, std::size_t line, const std::string& key) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ParseError(key + ": expected a non-negative integer", line, key);
  return out;
}

double to_double(const std::string& v, std::size_t line, const std::string& key) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw ParseError(key + ": expected a number", line, key);
  }
  return out;
}

bool to_bool(const std::string& v, std::size_t line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(key + ": expected true or false", line, key);
}

Family to_family(const std::string& v, std::size_t line, const std::string& key) {
  if (auto f = parse_family(v)) return *f;
  throw ParseError(key + ": unknown family '" + v + "'", line, key);
}

std::vector<double> labels_of(const std::vector<ArchRecord>& rs, std::size_t begin, std::size_t end) {
  std::vector<double> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(*rs[i].accuracy);
  return out;
}

std::vector<GraphInput> inputs_of(const std::vector<ArchRecord>& rs, std::size_t begin, std::size_t end) {
  std::vector<GraphInput> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(prepare(rs[i].cg));
  return out;
}

void say(const LogFn& log, const std::string& s) {
  if (log) log(s);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  using Setter = std::function<void(const std::string&, std::size_t, const std::string&)>;
  auto size_field = [](std::size_t& f) -> Setter {
    return [&f](const std::string& v, std::size_t l, const std::string& k) { f = to_size(v, l, k); };
  };
  auto double_field = [](double& f) -> Setter {
    return [&f](const std::string& v, std::size_t l, const std::string& k) { f = to_double(v, l, k); };
  };
  auto bool_field = [](bool& f) -> Setter {
    return [&f](const std::string& v, std::size_t l, const std::string& k) { f = to_bool(v, l, k); };
  };
  std::map<std::string, Setter> setters = {
      {"oracle_seed", [&c](const std::string& v, std::size_t l, const std::string& k) { c.oracle_seed = to_size(v, l, k); }},
      {"n_nb101", size_field(c.n_nb101)},
      {"n_nb201", size_field(c.n_nb201)},
      {"n_nb301", size_field(c.n_nb301)},
      {"target", [&c](const std::string& v, std::size_t l, const std::string& k) { c.target = to_family(v, l, k); }},
      {"finetune_n", size_field(c.finetune_n)},
      {"test_n", size_field(c.test_n)},
      {"pretrain_target_only", bool_field(c.pretrain_target_only)},
      {"pretrain_epochs", size_field(c.pretrain_epochs)},
      {"pretrain_batch", size_field(c.pretrain_batch)},
      {"pretrain_lr", double_field(c.pretrain_lr)},
      {"pool_size", size_field(c.pool_size)},
      {"regressor_epochs", size_field(c.regressor_epochs)},
      {"regressor_batch", size_field(c.regressor_batch)},
      {"regressor_lr", double_field(c.regressor_lr)},
      {"finetune_epochs", size_field(c.finetune_epochs)},
      {"baseline_epochs", size_field(c.baseline_epochs)},
      {"run_search", bool_field(c.run_search)},
  };
  std::istringstream in(text);
  std::string raw;
  for (std::size_t line = 1; std::getline(in, raw); ++line) {
    const std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    const std::string key = trim(s.substr(0, eq));
    auto it = setters.find(key);
    if (it == setters.end()) throw SchemaError("unknown config key '" + key + "'", key);
    it->second(trim(s.substr(eq + 1)), line, key);
  }
  if (c.pretrain_batch < 4) throw SchemaError("pretrain_batch must be at least 4", "pretrain_batch");
  if (c.regressor_batch == 0) throw SchemaError("regressor_batch must be positive", "regressor_batch");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "oracle_seed=" << oracle_seed << "\n"
     << "n_nb101=" << n_nb101 << "\n"
     << "n_nb201=" << n_nb201 << "\n"
     << "n_nb301=" << n_nb301 << "\n"
     << "target=" << to_string(target) << "\n"
     << "finetune_n=" << finetune_n << "\n"
     << "test_n=" << test_n << "\n"
     << "pretrain_target_only=" << (pretrain_target_only ? "true" : "false") << "\n"
     << "pretrain_epochs=" << pretrain_epochs << "\n"
     << "pretrain_batch=" << pretrain_batch << "\n"
     << "pretrain_lr=" << fmt(pretrain_lr) << "\n"
     << "pool_size=" << pool_size << "\n"
     << "regressor_epochs=" << regressor_epochs << "\n"
     << "regressor_batch=" << regressor_batch << "\n"
     << "regressor_lr=" << fmt(regressor_lr) << "\n"
     << "finetune_epochs=" << finetune_epochs << "\n"
     << "baseline_epochs=" << baseline_epochs << "\n"
     << "run_search=" << (run_search ? "true" : "false") << "\n";
  return os.str();
}

std::uint64_t RunConfig::digest(std::uint64_t seed) const {
  return fnv1a64("seed=" + std::to_string(seed) + "\n", fnv1a64(to_text()));
}

std::size_t RunConfig::count(Family f) const {
  switch (f) {
    case Family::NB101Style: return n_nb101;
    case Family::NB201Style: return n_nb201;
    case Family::NB301Style: return n_nb301;
  }
  return 0;
}

std::vector<Labeled> make_datasets(const RunConfig& config, const OracleConfig& oracle, std::uint64_t seed) {
  std::vector<Labeled> out;
  for (Family f : kFamilies) {
    if (config.count(f) == 0) continue;
    out.push_back({f, generate_dataset(Dialect::standard(f), config.count(f),
                                       hash_combine(seed, static_cast<std::uint64_t>(f)), oracle)});
  }
  return out;
}

TransferResult run_transfer(const RunConfig& config, const std::vector<Labeled>& data, std::uint64_t seed,
                            const LogFn& log) {
  TransferResult r;
  const EncoderConfig& ec = r.encoder_config;

  const Labeled* target = nullptr;
  for (const auto& d : data) {
    if (d.family == config.target) target = &d;
  }
  if (!target) throw SchemaError("no dataset for the target family", "target");
  if (target->records.size() < config.finetune_n + config.test_n) {
    throw SchemaError("target dataset smaller than finetune_n + test_n", "test_n");
  }

  // Pretraining set: unlabeled graphs of every family (or the target only).
  std::vector<GraphInput> graphs;
  std::vector<int> families;
  std::vector<SpectralSignature> sigs;
  for (const auto& d : data) {
    if (config.pretrain_target_only && d.family != config.target) continue;
    for (const auto& rec : d.records) {
      graphs.push_back(prepare(rec.cg));
      families.push_back(static_cast<int>(d.family));
      sigs.push_back(signature(rec.cg));
    }
  }
  std::vector<std::uint64_t> digests;
  for (const auto& d : data) {
    for (const auto& rec : d.records) digests.push_back(rec.digest);
  }
  const DistanceCache cache = DistanceCache::build(sigs, dataset_digest(digests));
  say(log, "pretraining on " + std::to_string(graphs.size()) + " graphs");

  PretrainConfig pc;
  pc.batch_size = config.pretrain_batch;
  pc.epochs = config.pretrain_epochs;
  pc.lr = config.pretrain_lr;
  pc.pool_size = config.pool_size;
  pc.seed = hash_combine(seed, 1);
  pc.log = log;
  PretrainResult pre = pretrain(graphs, families, cache, ec, pc);
  r.encoder = std::move(pre.encoder);
  r.pretrain_curve = std::move(pre.curve);

  // Source regression.
  std::vector<GraphInput> source_inputs;
  std::vector<double> source_labels;
  for (const auto& d : data) {
    if (d.family == config.target) continue;
    for (const auto& rec : d.records) {
      source_inputs.push_back(prepare(rec.cg));
      source_labels.push_back(*rec.accuracy);
    }
  }
  if (source_inputs.empty()) throw SchemaError("no labeled source family", "target");
  const std::size_t n_ft = config.finetune_n, n_test = config.test_n;
  const auto ft_inputs = inputs_of(target->records, 0, n_ft);
  const auto test_inputs = inputs_of(target->records, n_ft, n_ft + n_test);
  const auto ft_labels = labels_of(target->records, 0, n_ft);
  r.test_truth = labels_of(target->records, n_ft, n_ft + n_test);
  r.finetune_set.assign(target->records.begin(), target->records.begin() + static_cast<std::ptrdiff_t>(n_ft));

  RegressorConfig rc;
  rc.epochs = config.regressor_epochs;
  rc.batch_size = config.regressor_batch;
  rc.lr = config.regressor_lr;
  rc.seed = hash_combine(seed, 2);
  rc.log = log;
  const Tensor source_emb = embed_all(r.encoder, ec, source_inputs);
  const Tensor ft_emb = embed_all(r.encoder, ec, ft_inputs);
  const Tensor test_emb = embed_all(r.encoder, ec, test_inputs);
  r.head = train_regressor(source_emb, source_labels, ec, rc, &r.regressor_curve);
  r.cl_zero_shot = srcc(predict_all(r.head, ec, test_emb), r.test_truth);

  RegressorConfig fc = rc;
  fc.epochs = config.finetune_epochs;
  fc.seed = hash_combine(seed, 3);
  fine_tune(r.head, ft_emb, ft_labels, ec, fc, &r.finetune_curve);
  r.cl_predictions = predict_all(r.head, ec, test_emb);
  r.cl_srcc = srcc(r.cl_predictions, r.test_truth);
  say(log, "cl zero-shot " + fmt(r.cl_zero_shot) + " fine-tuned " + fmt(r.cl_srcc));

  if (config.baseline_epochs > 0) {
    RegressorConfig bc = rc;
    bc.epochs = config.baseline_epochs;
    bc.seed = hash_combine(seed, 4);
    GnnBaseline base = train_baseline(source_inputs, source_labels, ec, bc);
    r.gnn_zero_shot = srcc(baseline_predict_all(base, ec, test_inputs), r.test_truth);
    RegressorConfig bf = fc;
    bf.seed = hash_combine(seed, 5);
    fine_tune_baseline(base, ft_inputs, ft_labels, ec, bf);
    r.gnn_predictions = baseline_predict_all(base, ec, test_inputs);
    r.gnn_srcc = srcc(r.gnn_predictions, r.test_truth);
    r.baseline_run = true;
    say(log, "gnn zero-shot " + fmt(r.gnn_zero_shot) + " fine-tuned " + fmt(r.gnn_srcc));
  }

  Rng rng(hash_combine(seed, 6));
  for (std::size_t i = 0; i < n_test; ++i) r.random_predictions.push_back(uniform01(rng));
  r.random_srcc = srcc(r.random_predictions, r.test_truth);
  return r;
}

void guard_output(const std::string& dir, std::uint64_t digest, bool force) {
  const fs::path manifest = fs::path(dir) / "manifest.txt";
  if (fs::exists(manifest) && !force) {
    std::ifstream in(manifest);
    std::string line, found;
    while (std::getline(in, line)) {
      if (line.rfind("config_digest=", 0) == 0) found = line.substr(14);
    }
    if (found != hex_digest(digest)) {
      throw Error("refusing to overwrite " + dir + ": it holds artifacts of config " +
                  (found.empty() ? std::string("<unknown>") : found) + ", this run is " + hex_digest(digest) +
                  " (use --force)");
    }
  }
  fs::create_directories(dir);
}

void write_predictions_csv(const std::string& path, const std::vector<double>& predictions,
                           const std::vector<double>& truths, std::uint64_t config_digest) {
  if (predictions.size() != truths.size()) throw DimensionError("predictions and truths differ in length");
  auto out = open_out(path);
  out << "# config_digest=" << hex_digest(config_digest) << "\nprediction,truth\n";
  for (std::size_t i = 0; i < truths.size(); ++i) out << fmt(predictions[i]) << ',' << fmt(truths[i]) << '\n';
}

void repro(const RunConfig& config, std::uint64_t seed, const std::string& dir, bool force, const LogFn& log) {
  const std::uint64_t digest = config.digest(seed);
  guard_output(dir, digest, force);
  const fs::path root(dir);
  const std::string tag = "# config_digest=" + hex_digest(digest) + "\n";

  const OracleConfig oracle = OracleConfig::from_seed(config.oracle_seed);
  const auto data = make_datasets(config, oracle, seed);
  for (const auto& d : data) {
    write_manifest((root / ("dataset_" + std::string(to_string(d.family)) + ".json")).string(),
                   Dialect::standard(d.family), d.records, oracle, digest);
  }

  TransferResult t = run_transfer(config, data, seed, log);
  save_checkpoint((root / "encoder.ckpt").string(), t.encoder, digest);
  save_checkpoint((root / "head.ckpt").string(), t.head, digest);
  write_metrics_csv((root / "pretrain_metrics.csv").string(), t.pretrain_curve, digest);
  write_metrics_csv((root / "regressor_metrics.csv").string(), t.regressor_curve, digest);
  write_metrics_csv((root / "finetune_metrics.csv").string(), t.finetune_curve, digest);
  write_predictions_csv((root / "predictions_cl.csv").string(), t.cl_predictions, t.test_truth, digest);
  {
    auto out = open_out(root / "eval.csv");
    out << tag << "method,zero_shot_srcc,finetune_srcc\n";
    out << "cl," << fmt(t.cl_zero_shot) << ',' << fmt(t.cl_srcc) << '\n';
    if (t.baseline_run) out << "gnn," << fmt(t.gnn_zero_shot) << ',' << fmt(t.gnn_srcc) << '\n';
    out << "random,," << fmt(t.random_srcc) << '\n';
  }

  std::ostringstream report;
  report << "config_digest " << hex_digest(digest) << "\nseed " << seed << "\n\n";
  report << "Target " << to_string(config.target) << ", fine-tuned on " << config.finetune_n << ", evaluated on "
         << config.test_n << "\n";
  report << "method   zero-shot SRCC  fine-tune SRCC\n";
  char line[128];
  std::snprintf(line, sizeof line, "CL       %14.4f  %14.4f\n", t.cl_zero_shot, t.cl_srcc);
  report << line;
  if (t.baseline_run) {
    std::snprintf(line, sizeof line, "GNN      %14.4f  %14.4f\n", t.gnn_zero_shot, t.gnn_srcc);
    report << line;
  }
  std::snprintf(line, sizeof line, "Random   %14s  %14.4f\n", "-", t.random_srcc);
  report << line;

  if (config.run_search) {
    const Dialect dialect = Dialect::standard(config.target);
    report << "\nSearch on " << to_string(config.target) << "\nmethod          best accuracy  #Q\n";
    for (Preset preset : {Preset::Random, Preset::CL}) {
      const EAConfig ea = ea_preset(config.target, preset);
      SearchState state;
      std::unique_ptr<Estimator> est;
      if (preset == Preset::CL) {
        std::vector<ArchRecord> ft = t.finetune_set;
        precharge(state, ft, oracle);
        est = cl_estimator(t.encoder, t.head, t.encoder_config);
      } else {
        est = random_estimator(hash_combine(seed, 7));
      }
      Rng rng(hash_combine(seed, 8));
      state = ea_search(ea, dialect, *est, oracle, rng, std::move(state), log);
      const std::string name = preset == Preset::CL ? "cl" : "random";
      write_search_log((root / ("search_" + name + ".csv")).string(), state, digest);
      std::snprintf(line, sizeof line, "%-14s  %13.6f  %zu\n", preset == Preset::CL ? "CL-fine-tune" : "Random",
                    *state.best().accuracy, state.ledger.count());
      report << line;
      say(log, search_report(state, ea, to_string(est->kind())));
    }
  }
  open_out(root / "report.txt") << report.str();
  open_out(root / "manifest.txt") << "config_digest=" << hex_digest(digest) << "\nseed=" << seed << "\n"
                                  << config.to_text();
}

}  // namespace cgnas
