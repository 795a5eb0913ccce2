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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cgnas/evolution.hpp"
#include "cgnas/lowering.hpp"
#include "cgnas/pipeline.hpp"
#include "cgnas/spectral.hpp"

namespace {

using namespace cgnas;
namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::uint64_t seed = 7;
  std::string out;
  std::string dialect = "nb201";
  std::string preset = "random";
  bool force = false;

  RunConfig config() const { return config_path.empty() ? RunConfig{} : RunConfig::load(config_path); }
  std::uint64_t digest() const { return config().digest(seed); }
};

Dialect parse_dialect(const std::string& name) {
  if (name == "nb101") return Dialect::nb101();
  if (name == "nb201") return Dialect::nb201();
  if (name == "nb201_reduced") return Dialect::nb201_reduced();
  if (name == "nb301") return Dialect::nb301();
  if (auto f = parse_family(name)) return Dialect::standard(*f);
  throw SchemaError("unknown dialect '" + name + "'", "dialect");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Sidecar manifest next to a single-file artifact.
void write_run_manifest(const std::string& artifact, const Common& c, const std::string& command) {
  write_text(artifact + ".manifest", "command=" + command + "\nconfig_digest=" + hex_digest(c.digest()) +
                                         "\nseed=" + std::to_string(c.seed) + "\n" + c.config().to_text());
}

void require_out(const Common& c) {
  if (c.out.empty()) throw SchemaError("--out is required", "out");
}

void log_line(const std::string& s) { std::cerr << s << "\n"; }

ParamStore load_encoder(const std::string& path, const EncoderConfig& config) {
  ParamStore store;
  Rng rng(0);
  init_encoder(store, config, rng);
  restore(store, load_checkpoint(path));
  return store;
}

ParamStore load_head(const std::string& path, const EncoderConfig& config) {
  ParamStore store;
  Rng rng(0);
  init_predictor(store, config, rng);
  restore(store, load_checkpoint(path));
  return store;
}

struct LabeledSet {
  std::vector<GraphInput> inputs;
  std::vector<double> labels;
  std::vector<ArchRecord> records;
};

LabeledSet load_data(const std::vector<std::string>& paths, std::size_t skip = 0, std::size_t limit = SIZE_MAX) {
  LabeledSet s;
  for (const auto& p : paths) {
    Manifest m = read_manifest(p);
    for (std::size_t i = skip; i < m.records.size() && s.records.size() < limit; ++i) {
      ArchRecord& r = m.records[i];
      if (!r.accuracy) throw SchemaError(p + ": record " + std::to_string(i) + " is unlabeled", "accuracy");
      s.inputs.push_back(prepare(r.cg));
      s.labels.push_back(*r.accuracy);
      s.records.push_back(std::move(r));
    }
  }
  return s;
}

RegressorConfig regressor_config(const RunConfig& rc, std::uint64_t seed, std::size_t epochs) {
  RegressorConfig c;
  c.epochs = epochs;
  c.batch_size = rc.regressor_batch;
  c.lr = rc.regressor_lr;
  c.seed = seed;
  c.log = log_line;
  return c;
}

void add_common(CLI::App* cmd, Common& c, bool dialect = false, bool preset = false) {
  cmd->add_option("--config", c.config_path, "Flat key=value config file");
  cmd->add_option("--seed", c.seed, "Run seed");
  cmd->add_option("--out", c.out, "Output file or directory");
  cmd->add_flag("--force", c.force, "Overwrite artifacts of a different config");
  if (dialect) cmd->add_option("--dialect", c.dialect, "nb101 | nb201 | nb201_reduced | nb301");
  if (preset) cmd->add_option("--preset", c.preset, "random | cl")->check(CLI::IsMember({"random", "cl"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Computational-graph performance predictor toolkit"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen", "Generate a labeled dataset manifest");
  std::size_t gen_n = 100;
  add_common(gen, c, true);
  gen->add_option("--n", gen_n, "Number of unique architectures");

  auto* lower = app.add_subcommand("lower", "Lower a cell spec to a computational graph file");
  std::string cell_text;
  add_common(lower, c, true);
  lower->add_option("--cell", cell_text, "Cell in its dialect text format")->required();

  auto* spectral = app.add_subcommand("spectral", "Print spectral signatures and distances");
  std::vector<std::string> graph_paths;
  std::string spectral_data;
  add_common(spectral, c);
  spectral->add_option("--graph", graph_paths, "Graph file (repeat for pairwise distance)");
  spectral->add_option("--data", spectral_data, "Dataset manifest; with --out writes a distance cache");

  std::vector<std::string> data_paths;
  std::string encoder_path, head_path;
  std::size_t take_n = 50, skip_n = 0;

  auto* pre = app.add_subcommand("pretrain", "Contrastive pretraining of the encoder");
  add_common(pre, c);
  pre->add_option("--data", data_paths, "Dataset manifests (labels unused)")->required();

  auto* train = app.add_subcommand("train", "Train the regressor head on frozen embeddings");
  add_common(train, c);
  train->add_option("--data", data_paths, "Labeled dataset manifests")->required();
  train->add_option("--encoder", encoder_path, "Encoder checkpoint")->required();

  auto* ft = app.add_subcommand("finetune", "Fine-tune the head on a few target records");
  add_common(ft, c);
  ft->add_option("--data", data_paths, "Target dataset manifest")->required();
  ft->add_option("--encoder", encoder_path, "Encoder checkpoint")->required();
  ft->add_option("--head", head_path, "Head checkpoint")->required();
  ft->add_option("--n", take_n, "Records used for fine-tuning (from the front)");

  auto* ev = app.add_subcommand("eval-srcc", "Spearman correlation of predictions against truths");
  std::string predictions_path;
  add_common(ev, c);
  ev->add_option("--predictions", predictions_path, "CSV with prediction,truth columns");
  ev->add_option("--data", data_paths, "Dataset manifest to predict");
  ev->add_option("--encoder", encoder_path, "Encoder checkpoint");
  ev->add_option("--head", head_path, "Head checkpoint");
  ev->add_option("--skip", skip_n, "Records to skip (the fine-tuning prefix)");

  auto* search = app.add_subcommand("search", "Evolutionary search with a preset budget");
  add_common(search, c, true, true);
  search->add_option("--encoder", encoder_path, "Encoder checkpoint (cl preset)");
  search->add_option("--head", head_path, "Fine-tuned head checkpoint (cl preset)");
  search->add_option("--finetune-data", data_paths, "Records the head was fine-tuned on; charged to the ledger");
  search->add_option("--n", take_n, "Fine-tuning records charged from --finetune-data");
  std::string estimator_name;
  search->add_option("--estimator", estimator_name, "Override: random | cl_predictor | oracle_direct");

  auto* rep = app.add_subcommand("repro", "Run the full pipeline from one config and seed");
  add_common(rep, c);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig rc = c.config();
    const EncoderConfig ec;
    const std::uint64_t digest = rc.digest(c.seed);

    if (*gen) {
      require_out(c);
      const Dialect d = parse_dialect(c.dialect);
      const OracleConfig oracle = OracleConfig::from_seed(rc.oracle_seed);
      write_manifest(c.out, d, generate_dataset(d, gen_n, c.seed, oracle), oracle, digest);
      write_run_manifest(c.out, c, "gen");
    } else if (*lower) {
      const ComputationGraph g = build_network(parse_cell(parse_dialect(c.dialect), cell_text));
      require_valid(g);
      if (c.out.empty()) {
        std::cout << serialize(g) << "\n";
      } else {
        write_text(c.out, serialize(g) + "\n");
        write_run_manifest(c.out, c, "lower");
      }
    } else if (*spectral) {
      std::vector<SpectralSignature> sigs;
      for (const auto& p : graph_paths) {
        const SpectralSignature s = signature(deserialize(read_text(p)));
        std::cout << p << ":";
        for (double v : s.values) std::cout << " " << fmt(v);
        std::cout << "\n";
        sigs.push_back(s);
      }
      if (sigs.size() == 2) std::cout << "distance " << fmt(spectral_distance(sigs[0], sigs[1])) << "\n";
      if (!spectral_data.empty()) {
        require_out(c);
        const Manifest m = read_manifest(spectral_data);
        std::vector<SpectralSignature> all;
        std::vector<std::uint64_t> digests;
        for (const auto& r : m.records) {
          all.push_back(signature(r.cg));
          digests.push_back(r.digest);
        }
        DistanceCache::build(all, dataset_digest(digests)).save(c.out);
        write_run_manifest(c.out, c, "spectral");
      }
    } else if (*pre) {
      require_out(c);
      std::vector<GraphInput> graphs;
      std::vector<int> families;
      std::vector<SpectralSignature> sigs;
      std::vector<std::uint64_t> digests;
      for (const auto& p : data_paths) {
        const Manifest m = read_manifest(p);
        for (const auto& r : m.records) {
          graphs.push_back(prepare(r.cg));
          families.push_back(static_cast<int>(r.family()));
          sigs.push_back(signature(r.cg));
          digests.push_back(r.digest);
        }
      }
      PretrainConfig pc;
      pc.batch_size = rc.pretrain_batch;
      pc.epochs = rc.pretrain_epochs;
      pc.lr = rc.pretrain_lr;
      pc.pool_size = rc.pool_size;
      pc.seed = c.seed;
      pc.log = log_line;
      const auto result = pretrain(graphs, families, DistanceCache::build(sigs, dataset_digest(digests)), ec, pc);
      save_checkpoint(c.out, result.encoder, digest);
      write_metrics_csv(c.out + ".metrics.csv", result.curve, digest);
      write_run_manifest(c.out, c, "pretrain");
    } else if (*train) {
      require_out(c);
      const ParamStore enc = load_encoder(encoder_path, ec);
      const LabeledSet s = load_data(data_paths);
      std::vector<EpochMetrics> curve;
      const ParamStore head =
          train_regressor(embed_all(enc, ec, s.inputs), s.labels, ec, regressor_config(rc, c.seed, rc.regressor_epochs), &curve);
      save_checkpoint(c.out, head, digest);
      write_metrics_csv(c.out + ".metrics.csv", curve, digest);
      write_run_manifest(c.out, c, "train");
    } else if (*ft) {
      require_out(c);
      const ParamStore enc = load_encoder(encoder_path, ec);
      ParamStore head = load_head(head_path, ec);
      const LabeledSet s = load_data(data_paths, 0, take_n);
      std::vector<EpochMetrics> curve;
      fine_tune(head, embed_all(enc, ec, s.inputs), s.labels, ec, regressor_config(rc, c.seed, rc.finetune_epochs), &curve);
      save_checkpoint(c.out, head, digest);
      write_metrics_csv(c.out + ".metrics.csv", curve, digest);
      write_run_manifest(c.out, c, "finetune");
    } else if (*ev) {
      std::vector<double> predictions, truths;
      if (!predictions_path.empty()) {
        std::istringstream in(read_text(predictions_path));
        std::string line;
        for (std::size_t n = 1; std::getline(in, line); ++n) {
          if (line.empty() || line[0] == '#' || line.rfind("prediction", 0) == 0) continue;
          const auto comma = line.find(',');
          if (comma == std::string::npos) throw ParseError("expected prediction,truth", n, "predictions");
          try {
            predictions.push_back(std::stod(line.substr(0, comma)));
            truths.push_back(std::stod(line.substr(comma + 1)));
          } catch (const std::exception&) {
            throw ParseError("expected two numbers", n, "predictions");
          }
        }
      } else {
        if (encoder_path.empty() || head_path.empty() || data_paths.empty()) {
          throw SchemaError("eval-srcc needs --predictions or --encoder, --head and --data", "predictions");
        }
        const LabeledSet s = load_data(data_paths, skip_n);
        predictions = predict_all(load_head(head_path, ec), ec, embed_all(load_encoder(encoder_path, ec), ec, s.inputs));
        truths = s.labels;
      }
      const double rho = srcc(predictions, truths);
      std::cout << fmt(rho) << "\n";
      if (!c.out.empty()) {
        std::ofstream out(c.out, std::ios::binary);
        out << "# config_digest=" << hex_digest(digest) << "\nn,srcc\n" << truths.size() << ',' << fmt(rho) << "\n";
      }
    } else if (*search) {
      require_out(c);
      const Dialect d = parse_dialect(c.dialect);
      const Preset preset = *parse_preset(c.preset);
      const OracleConfig oracle = OracleConfig::from_seed(rc.oracle_seed);
      std::string kind = estimator_name.empty() ? (preset == Preset::CL ? "cl_predictor" : "random") : estimator_name;
      SearchState state;
      std::unique_ptr<Estimator> est;
      if (kind == "cl_predictor") {
        if (encoder_path.empty() || head_path.empty()) throw SchemaError("cl_predictor needs --encoder and --head", "encoder");
        if (!data_paths.empty()) {
          LabeledSet s = load_data(data_paths, 0, take_n);
          precharge(state, s.records, oracle);
        }
        est = cl_estimator(load_encoder(encoder_path, ec), load_head(head_path, ec), ec);
      } else if (kind == "oracle_direct") {
        est = oracle_estimator(oracle);
      } else if (kind == "random") {
        est = random_estimator(hash_combine(c.seed, 7));
      } else {
        throw SchemaError("unknown estimator '" + kind + "'", "estimator");
      }
      guard_output(c.out, digest, c.force);
      Rng rng(c.seed);
      const EAConfig ea = ea_preset(d.family, preset);
      const SearchState result = ea_search(ea, d, *est, oracle, rng, std::move(state), log_line);
      write_search_log((fs::path(c.out) / "search_log.csv").string(), result, digest);
      write_text((fs::path(c.out) / "report.txt").string(),
                 "config_digest " + hex_digest(digest) + "\n" + search_report(result, ea, kind));
      write_text((fs::path(c.out) / "manifest.txt").string(), "config_digest=" + hex_digest(digest) + "\nseed=" +
                                                                  std::to_string(c.seed) + "\n" + rc.to_text());
      std::cout << search_report(result, ea, kind);
    } else if (*rep) {
      require_out(c);
      repro(rc, c.seed, c.out, c.force, log_line);
      std::cout << read_text((fs::path(c.out) / "report.txt").string());
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << " (line " << e.line() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
