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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace cgnas {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cgnas_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny() {
  return RunConfig::parse(
      "n_nb101 = 24\nn_nb201 = 24\nn_nb301 = 30\n"
      "finetune_n = 6\ntest_n = 12\n"
      "pretrain_epochs = 1\npretrain_batch = 16\n"
      "regressor_epochs = 3\nfinetune_epochs = 3\nbaseline_epochs = 1\n"
      "run_search = false\n");
}

TEST(RunConfigTest, CanonicalTextRoundTrips) {
  const RunConfig a;
  const RunConfig b = RunConfig::parse(a.to_text());
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.digest(7), b.digest(7));
}

TEST(RunConfigTest, CommentsAndBlankLinesIgnored) {
  const RunConfig c = RunConfig::parse("# header\n\n  finetune_n = 40   # fewer\ntarget=NB201Style\n");
  EXPECT_EQ(c.finetune_n, 40u);
  EXPECT_EQ(c.target, Family::NB201Style);
  EXPECT_EQ(c.test_n, RunConfig{}.test_n);
}

TEST(RunConfigTest, UnknownKeyIsSchemaError) {
  try {
    RunConfig::parse("finetune_n = 4\nbogus = 1\n");
    FAIL() << "no throw";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "bogus");
  }
}

TEST(RunConfigTest, MalformedValueReportsLine) {
  try {
    RunConfig::parse("finetune_n = 4\n\npretrain_lr = fast\n");
    FAIL() << "no throw";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "pretrain_lr");
  }
  EXPECT_THROW(RunConfig::parse("finetune_n\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("finetune_n = -3\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("run_search = maybe\n"), ParseError);
  EXPECT_THROW(RunConfig::parse("target = NB999Style\n"), ParseError);
}

TEST(RunConfigTest, DigestTracksSeedAndFields) {
  const RunConfig a;
  RunConfig b;
  b.finetune_epochs += 1;
  EXPECT_NE(a.digest(7), a.digest(8));
  EXPECT_NE(a.digest(7), b.digest(7));
}

TEST(RunConfigTest, CountPerFamily) {
  const RunConfig c;
  EXPECT_EQ(c.count(Family::NB101Style), 2000u);
  EXPECT_EQ(c.count(Family::NB201Style), 2000u);
  EXPECT_EQ(c.count(Family::NB301Style), 1000u);
}

TEST(GuardOutputTest, RefusesForeignDigestUnlessForced) {
  const fs::path dir = scratch("guard");
  EXPECT_NO_THROW(guard_output(dir.string(), 1, false));
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.txt") << "config_digest=" << hex_digest(1) << "\n";
  EXPECT_NO_THROW(guard_output(dir.string(), 1, false));
  EXPECT_THROW(guard_output(dir.string(), 2, false), Error);
  EXPECT_NO_THROW(guard_output(dir.string(), 2, true));
  fs::remove_all(dir);
}

TEST(DatasetsTest, OnePerFamilyWithConfiguredSizes) {
  const RunConfig c = tiny();
  const auto data = make_datasets(c, OracleConfig::from_seed(c.oracle_seed), 3);
  ASSERT_EQ(data.size(), 3u);
  for (const auto& d : data) {
    EXPECT_EQ(d.records.size(), c.count(d.family));
    for (const auto& r : d.records) {
      ASSERT_TRUE(r.accuracy.has_value());
      EXPECT_EQ(r.family(), d.family);
    }
  }
}

TEST(TransferTest, RejectsUndersizedTarget) {
  RunConfig c = tiny();
  c.test_n = 100;
  const auto data = make_datasets(c, OracleConfig::from_seed(c.oracle_seed), 3);
  EXPECT_THROW(run_transfer(c, data, 3), SchemaError);
}

TEST(TransferTest, ProducesPredictionsForEveryTestRecord) {
  const RunConfig c = tiny();
  const auto data = make_datasets(c, OracleConfig::from_seed(c.oracle_seed), 3);
  const TransferResult r = run_transfer(c, data, 3);
  EXPECT_EQ(r.test_truth.size(), c.test_n);
  EXPECT_EQ(r.cl_predictions.size(), c.test_n);
  EXPECT_EQ(r.gnn_predictions.size(), c.test_n);
  EXPECT_EQ(r.random_predictions.size(), c.test_n);
  EXPECT_EQ(r.finetune_set.size(), c.finetune_n);
  EXPECT_TRUE(r.baseline_run);
  EXPECT_EQ(r.pretrain_curve.size(), 1u);
  EXPECT_EQ(r.finetune_curve.size(), 3u);
  for (double p : r.cl_predictions) EXPECT_TRUE(std::isfinite(p));
}

TEST(ReproTest, WritesArtifactsAndIsDeterministic) {
  const RunConfig c = tiny();
  const fs::path a = scratch("repro_a");
  const fs::path b = scratch("repro_b");
  repro(c, 5, a.string(), false);
  repro(c, 5, b.string(), false);
  for (const char* f : {"dataset_NB101Style.json", "dataset_NB201Style.json", "dataset_NB301Style.json",
                        "encoder.ckpt", "head.ckpt", "pretrain_metrics.csv", "regressor_metrics.csv",
                        "finetune_metrics.csv", "predictions_cl.csv", "eval.csv", "report.txt", "manifest.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  EXPECT_NE(read_file(a / "manifest.txt").find("config_digest=" + hex_digest(c.digest(5))), std::string::npos);

  RunConfig other = c;
  other.finetune_epochs = 4;
  EXPECT_THROW(repro(other, 5, a.string(), false), Error);
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // namespace
}  // namespace cgnas
