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

#include <gtest/gtest.h>

#include <filesystem>

#include "cgnas/common.hpp"
#include "gradcheck.hpp"

namespace cgnas {
namespace {

using testing::gradient_error;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kTol = 1e-4;

TEST(Primitives, ReluValues) {
  Tape t;
  auto y = relu(t.constant(Tensor::row({-1, 0, 2})));
  EXPECT_EQ(y.value(), Tensor::row({0, 0, 2}));
}

TEST(Primitives, SoftmaxOfConstantRow) {
  Tape t;
  auto y = softmax_rows(t.constant(Tensor::row({3, 3, 3, 3})));
  for (double v : y.value().values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Primitives, ScatterMeanRows) {
  Tape t;
  auto y = scatter_mean_rows(t.constant(Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}})), {0, 0, 1}, 2);
  EXPECT_EQ(y.value(), Tensor::from_rows({{2, 3}, {5, 6}}));
  auto empty_group = scatter_mean_rows(t.constant(Tensor::from_rows({{1, 2}})), {1}, 3);
  EXPECT_EQ(empty_group.value(), Tensor::from_rows({{0, 0}, {1, 2}, {0, 0}}));
}

TEST(Primitives, MatmulValues) {
  Tape t;
  auto c = matmul(t.constant(Tensor::from_rows({{1, 2}, {3, 4}})), t.constant(Tensor::from_rows({{5}, {6}})));
  EXPECT_EQ(c.value(), Tensor::from_rows({{17}, {39}}));
}

TEST(Primitives, MaskedLogSoftmax) {
  Tape t;
  Tensor mask = Tensor::from_rows({{0, 1, 1}, {0, 0, 0}});
  auto y = log_softmax_rows_masked(t.constant(Tensor::from_rows({{100, 1, 1}, {1, 2, 3}})), mask);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.0);
  EXPECT_NEAR(y.value()(0, 1), std::log(0.5), 1e-15);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y.value()(1, j), 0.0);
}

TEST(Primitives, L2NormalizeRowsUnitNorm) {
  Rng rng(1);
  Tape t;
  auto y = l2_normalize_rows(t.constant(random_tensor(20, 64, rng, 10.0)));
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 64; ++j) s += y.value()(i, j) * y.value()(i, j);
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-12);
  }
}

TEST(Primitives, DimensionErrorsNameThePrimitive) {
  Tape t;
  auto a = t.constant(Tensor(2, 3));
  auto b = t.constant(Tensor(2, 3));
  try {
    matmul(a, b);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
  try {
    add(a, t.constant(Tensor(3, 2)));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
  EXPECT_THROW(add_row(a, t.constant(Tensor(1, 2))), DimensionError);
  EXPECT_THROW(concat_cols({a, t.constant(Tensor(3, 3))}), DimensionError);
  EXPECT_THROW(concat_rows({a, t.constant(Tensor(2, 2))}), DimensionError);
  EXPECT_THROW(gather_rows(a, {2}), DimensionError);
  EXPECT_THROW(scatter_mean_rows(a, {0}, 1), DimensionError);
  EXPECT_THROW(mean_rows(t.constant(Tensor(0, 3))), DimensionError);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape t;
  auto x = t.variable(Tensor(2, 2, 1.0));
  EXPECT_THROW(t.backward(relu(x)), DimensionError);
}

TEST(Backward, LinearCaseBroadcastsInput) {
  ParamStore store;
  store.add("W", Tensor::from_rows({{1, 2, 3}, {4, 5, 6}}));
  Tape t;
  auto w = t.param(store, "W");
  auto x = t.constant(Tensor::column({7, 8, 9}));
  t.backward(sum(matmul(w, x)));
  EXPECT_EQ(store.at("W").grad, Tensor::from_rows({{7, 8, 9}, {7, 8, 9}}));
}

TEST(Backward, DeadUnitHasZeroGradient) {
  ParamStore store;
  store.add("w", Tensor::row({0.3, -1.2, 2.0}));
  Tape t;
  auto w = t.param(store, "w");
  auto neg_abs = scale(mul(w, w), -1.0);  // -|w|^2 <= 0
  t.backward(scale(sum(relu(neg_abs)), 5.0));
  for (double g : store.at("w").grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, UnreachableParameterGetsZero) {
  ParamStore store;
  store.add("used", Tensor::row({1.0}));
  store.add("unused", Tensor::row({2.0}));
  Tape t;
  auto u = t.param(store, "used");
  t.param(store, "unused");
  t.backward(sum(scale(u, 3.0)));
  EXPECT_EQ(store.at("used").grad.item(), 3.0);
  EXPECT_EQ(store.at("unused").grad.item(), 0.0);
}

TEST(Backward, SeededBackwardMatchesScalarLoss) {
  Rng rng(3);
  const Tensor x = random_tensor(4, 5, rng);
  const Tensor seed = random_tensor(4, 5, rng);
  Tape a;
  auto va = a.variable(x);
  a.backward(tanh(va), seed);
  Tape b;
  auto vb = b.variable(x);
  b.backward(sum(mul(tanh(vb), b.constant(seed))));
  EXPECT_EQ(va.grad(), vb.grad());
}

TEST(GradCheck, EveryPrimitive) {
  Rng rng(2026);
  const Tensor a = random_tensor(4, 5, rng);
  const Tensor b = random_tensor(4, 5, rng);
  const Tensor m = random_tensor(5, 3, rng);
  const Tensor r = random_tensor(1, 5, rng);
  Tensor mask(4, 5, 1.0);
  mask(0, 0) = mask(1, 3) = mask(3, 4) = 0.0;
  const std::vector<int> gather_idx = {3, 0, 0, 2, 1, 3};
  const std::vector<int> scatter_idx = {1, 0, 1, 2};

  const std::vector<std::pair<const char*, std::pair<testing::LossFn, std::vector<Tensor>>>> cases = {
      {"matmul", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(matmul(v[0], v[1])); }, {a, m}}},
      {"transpose", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(transpose(v[0])); }, {a}}},
      {"add", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(add(v[0], v[1])); }, {a, b}}},
      {"add_row", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(add_row(v[0], v[1])); }, {a, r}}},
      {"sub", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(sub(v[0], v[1])); }, {a, b}}},
      {"mul", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(mul(v[0], v[1])); }, {a, b}}},
      {"mul_self", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(mul(v[0], v[0])); }, {a}}},
      {"scale", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(scale(v[0], -2.5)); }, {a}}},
      {"relu", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(relu(v[0])); }, {a}}},
      {"sigmoid", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(sigmoid(v[0])); }, {a}}},
      {"tanh", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(tanh(v[0])); }, {a}}},
      {"softmax_rows", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(softmax_rows(v[0])); }, {a}}},
      {"log_softmax_rows_masked",
       {[mask](Tape&, const std::vector<Var>& v) { return weighted_sum(log_softmax_rows_masked(v[0], mask)); },
        {a}}},
      {"mean_rows", {[](Tape&, const std::vector<Var>& v) { return weighted_sum(mean_rows(v[0])); }, {a}}},
      {"sum", {[](Tape&, const std::vector<Var>& v) { return sum(v[0]); }, {a}}},
      {"concat_cols",
       {[](Tape&, const std::vector<Var>& v) { return weighted_sum(concat_cols({v[0], v[1], v[0]})); }, {a, b}}},
      {"concat_rows",
       {[](Tape&, const std::vector<Var>& v) { return weighted_sum(concat_rows({v[0], v[1]})); }, {a, b}}},
      {"l2_normalize_rows",
       {[](Tape&, const std::vector<Var>& v) { return weighted_sum(l2_normalize_rows(v[0])); }, {a}}},
      {"gather_rows",
       {[gather_idx](Tape&, const std::vector<Var>& v) { return weighted_sum(gather_rows(v[0], gather_idx)); },
        {a}}},
      {"scatter_mean_rows",
       {[scatter_idx](Tape&, const std::vector<Var>& v) {
          return weighted_sum(scatter_mean_rows(v[0], scatter_idx, 4));
        },
        {a}}},
  };
  for (const auto& [name, c] : cases) {
    EXPECT_LT(gradient_error(c.first, c.second), kTol) << name;
  }
}

TEST(GradCheck, RandomCompositions) {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor x = random_tensor(6, 4, rng);
    const Tensor w1 = random_tensor(4, 8, rng, 0.5);
    const Tensor b1 = random_tensor(1, 8, rng, 0.1);
    const Tensor w2 = random_tensor(8, 3, rng, 0.5);
    const std::vector<int> groups = {0, 1, 0, 2, 1, 2};
    auto f = [&](Tape&, const std::vector<Var>& v) {
      Var h = relu(add_row(matmul(v[0], v[1]), v[2]));
      Var att = softmax_rows(scale(matmul(h, transpose(h)), 0.1));
      Var mixed = add(h, matmul(att, h));
      Var pooled = scatter_mean_rows(tanh(matmul(mixed, v[3])), groups, 3);
      Var z = l2_normalize_rows(concat_cols({pooled, sigmoid(pooled)}));
      return weighted_sum(concat_rows({z, mean_rows(z)}), static_cast<std::uint64_t>(trial));
    };
    EXPECT_LT(gradient_error(f, {x, w1, b1, w2}), kTol) << "trial " << trial;
  }
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  ParamStore store;
  store.add("w", Tensor::row({1.0, -2.0}));
  store.adam_step({0.1});
  EXPECT_EQ(store.at("w").value, Tensor::row({1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.add("w", Tensor::scalar(0.5));
  store.at("w").grad = Tensor::scalar(1.0);
  store.adam_step({0.1});
  // m_hat = 1, v_hat = 1
  EXPECT_NEAR(store.at("w").value.item(), 0.5 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(store.step(), 1);
}

TEST(Adam, IdenticalRunsAreBitwiseIdentical) {
  auto run = [] {
    Rng rng(5);
    ParamStore store;
    store.add("w", random_tensor(3, 3, rng));
    for (int step = 0; step < 20; ++step) {
      store.zero_grad();
      Tape t;
      auto w = t.param(store, "w");
      t.backward(sum(mul(tanh(w), w)));
      store.adam_step({0.05});
    }
    return store.digest();
  };
  EXPECT_EQ(run(), run());
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(6);
  ParamStore store;
  store.add("a", random_tensor(3, 4, rng));
  store.add("b", random_tensor(1, 7, rng));
  const auto path = (std::filesystem::temp_directory_path() / "cgnas_ckpt_test.bin").string();
  save_checkpoint(path, store, 0x1234ULL);
  const auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.config_digest, 0x1234ULL);
  ParamStore other;
  other.add("a", Tensor(3, 4));
  other.add("b", Tensor(1, 7));
  restore(other, ck);
  EXPECT_EQ(other.digest(), store.digest());

  ParamStore wrong;
  wrong.add("a", Tensor(4, 3));
  wrong.add("b", Tensor(1, 7));
  EXPECT_THROW(restore(wrong, ck), SchemaError);
  std::filesystem::remove(path);
}

TEST(ParamStoreTest, DuplicateAndUnknownNames) {
  ParamStore store;
  store.add("x", Tensor(1, 1));
  EXPECT_THROW(store.add("x", Tensor(1, 1)), Error);
  EXPECT_THROW(store.at("y"), Error);
  EXPECT_EQ(store.scalar_count(), 1u);
}

}  // namespace
}  // namespace cgnas
