/*
 * Copyright 2026 The pxattack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <gtest/gtest.h>

#include <fstream>
#include <thread>
#include <vector>

#include "nlohmann/json.hpp"
#include "pxattack/attack.hpp"
#include "pxattack/classifier.hpp"
#include "pxattack/png.hpp"
#include "test_util.hpp"

namespace pxattack {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

TEST(Softmax, StableAndNormalized) {
  const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(argmax(std::vector<double>{0.3, 0.3, 0.1}), 0u);
}

TEST(ToyModel, ZeroWeightsGiveUniform) {
  const Shape s{2, 3, 3};
  ToyModel m = ToyModel::linear(s, std::vector<double>(4 * s.size(), 0.0), std::vector<double>(4, 0.0));
  for (double p : m.predict(ImageTensor::filled(s, 0.3))) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(ToyModel, DeterministicAndCounted) {
  Rng rng(1);
  const auto x = test::random_image({4, 4, 3}, rng);
  auto m = test::random_linear(x.shape(), 3, rng);
  const auto before = m.query_count();
  const auto a = m.predict(x);
  const auto b = m.predict(x);
  EXPECT_EQ(a, b);
  EXPECT_EQ(m.query_count(), before + 2);
  ToyModel copy = m;
  EXPECT_EQ(copy.query_count(), 0u);
}

TEST(ToyModel, CounterIsExactUnderThreads) {
  Rng rng(2);
  const auto x = test::random_image({4, 4, 3}, rng);
  auto m = test::random_linear(x.shape(), 3, rng);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      for (int i = 0; i < 250; ++i) m.predict(x);
    });
  for (auto& t : pool) t.join();
  EXPECT_EQ(m.query_count(), 1000u);
}

TEST(ToyModel, ShapeMismatch) {
  Rng rng(3);
  auto m = test::random_linear({4, 4, 3}, 3, rng);
  EXPECT_EQ(code_of([&] { m.predict(ImageTensor::filled({4, 4, 1}, 0.5)); }), ErrorCode::kShape);
  EXPECT_EQ(code_of([] { ToyModel::linear({2, 2, 1}, std::vector<double>(7, 0.0), {0.0, 0.0}); }),
            ErrorCode::kShape);
}

TEST(ToyModel, EqualRowsGiveZeroLoss) {
  const Shape s{2, 2, 1};
  ToyModel m = ToyModel::linear(s, {0.3, -1, 2, 0.5, 0.3, -1, 2, 0.5}, {0.1, 0.1});
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto p = m.predict(test::random_image(s, rng));
    EXPECT_EQ(cw_loss(p, 0), 0.0);
    EXPECT_EQ(cw_loss(p, 1), 0.0);
  }
}

TEST(ToyModel, LinearFixtureHeader) {
  const auto m = load_toy_model(test::fixture("models/linear_2x2x1.toy"));
  EXPECT_EQ(m.kind(), ToyModel::Kind::kLinear);
  EXPECT_EQ(m.class_count(), 2u);
  EXPECT_EQ(m.input_shape(), (Shape{2, 2, 1}));
  const auto& d = std::get<toy::Dense>(m.layers().front());
  EXPECT_EQ(d.weight, (std::vector<double>{1, -1, 2, -3, 0.5, 0.25, -0.5, 0}));
  EXPECT_EQ(d.bias, (std::vector<double>{0.125, -0.25}));
}

TEST(ToyModel, MlpFixtureMatchesGolden) {
  auto m = load_toy_model(test::fixture("models/mlp_4x4x3.toy"));
  EXPECT_EQ(m.kind(), ToyModel::Kind::kMlp);
  const auto x = load_png(test::fixture("models/mlp_input.png"));
  std::ifstream in(test::fixture("models/mlp_golden.json"));
  const auto golden = nlohmann::json::parse(in)["probs"].get<std::vector<double>>();
  const auto p = m.predict(x);
  ASSERT_EQ(p.size(), golden.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], golden[i], 1e-12) << i;
}

TEST(ToyModel, SceneCnnMatchesGolden) {
  auto m = load_toy_model(test::fixture("scenes/cnn.toy"));
  EXPECT_EQ(m.kind(), ToyModel::Kind::kCnn);
  EXPECT_EQ(m.class_count(), 4u);
  std::ifstream in(test::fixture("scenes/cnn_golden.json"));
  const auto golden = nlohmann::json::parse(in);
  for (std::size_t i = 0; i < golden["images"].size(); ++i) {
    const auto x = load_png(test::fixture("scenes/" + golden["images"][i].get<std::string>()));
    const auto expect = golden["probs"][i].get<std::vector<double>>();
    const auto p = m.predict(x);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], expect[k], 1e-10) << i << "," << k;
  }
}

ToyModel small_cnn(Rng& rng) {
  std::normal_distribution<double> g(0.0, 0.3);
  const auto fill = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<float>(g(rng));
    return v;
  };
  std::vector<toy::Layer> layers;
  layers.emplace_back(toy::Conv{4, 3, 3, 2, 1, fill(4 * 3 * 3 * 3), fill(4)});
  layers.emplace_back(toy::Relu{});
  layers.emplace_back(toy::Conv{5, 2, 4, 1, 0, fill(5 * 2 * 2 * 4), fill(5)});
  layers.emplace_back(toy::Relu{});
  layers.emplace_back(toy::GlobalAvgPool{});
  layers.emplace_back(toy::Dense{3, 5, fill(15), fill(3)});
  return ToyModel(ToyModel::Kind::kCnn, {7, 6, 3}, std::move(layers));
}

TEST(ToyModel, ConvMatchesDirectSum) {
  // One 2x2 kernel, stride 1, no padding, on a 2x2 single-channel image:
  // the single output is the dot product of kernel and image.
  std::vector<toy::Layer> layers;
  layers.emplace_back(toy::Conv{1, 2, 1, 1, 0, {1, 2, 3, 4}, {0.5}});
  layers.emplace_back(toy::Dense{2, 1, {1, 0}, {0, 0}});
  ToyModel m(ToyModel::Kind::kCnn, {2, 2, 1}, std::move(layers));
  const auto z = m.logits(ImageTensor({2, 2, 1}, {0.1, 0.2, 0.3, 0.4}));
  EXPECT_NEAR(z[0], 0.1 + 0.4 + 0.9 + 1.6 + 0.5, 1e-12);
  EXPECT_EQ(z[1], 0.0);
}

TEST(ToyModel, SaveLoadPreservesPredictionsBitExactly) {
  test::TempDir dir("toy");
  Rng rng(5);
  for (int kind = 0; kind < 3; ++kind) {
    ToyModel m = kind == 0 ? test::random_linear({3, 3, 3}, 4, rng)
               : kind == 1 ? load_toy_model(test::fixture("models/mlp_4x4x3.toy"))
                           : small_cnn(rng);
    // Round through f32 once so the in-memory model equals the file.
    save_toy_model(m, dir.path() / "a.toy");
    ToyModel a = load_toy_model(dir.path() / "a.toy");
    save_toy_model(a, dir.path() / "b.toy");
    ToyModel b = load_toy_model(dir.path() / "b.toy");
    EXPECT_EQ(detail::read_file(dir.path() / "a.toy"), detail::read_file(dir.path() / "b.toy"));
    EXPECT_EQ(a.kind(), m.kind());
    for (int i = 0; i < 5; ++i) {
      const auto x = test::random_image(m.input_shape(), rng);
      EXPECT_EQ(a.predict(x), b.predict(x));
    }
  }
}

TEST(ToyModel, MalformedFiles) {
  const std::string good = detail::read_file(test::fixture("models/linear_2x2x1.toy"));
  EXPECT_EQ(code_of([&] { decode_toy_model(good.substr(0, good.size() - 1)); }), ErrorCode::kPayloadLength);
  EXPECT_EQ(code_of([] { decode_toy_model("no newline"); }), ErrorCode::kMalformed);
  EXPECT_EQ(code_of([] { decode_toy_model("{\"kind\":\"linear\"}\n"); }), ErrorCode::kMalformed);
  const auto payload = good.substr(good.find('\n'));
  EXPECT_EQ(code_of([&] {
              decode_toy_model(R"({"kind":"linear","shapes":[[2,4],[2]],"Y":3,"input":[2,2,1]})" + payload);
            }),
            ErrorCode::kShape);
  EXPECT_EQ(code_of([&] {
              decode_toy_model(R"({"kind":"linear","shapes":[[2,4],[2]],"Y":2,"input":[2,3,1]})" + payload);
            }),
            ErrorCode::kShape);
  EXPECT_EQ(code_of([&] {
              decode_toy_model(R"({"kind":"svm","shapes":[[2,4],[2]],"Y":2,"input":[2,2,1]})" + payload);
            }),
            ErrorCode::kMalformed);
}

TEST(ToyModel, MlpChainMismatch) {
  std::string bytes = R"({"kind":"mlp","shapes":[[3,4],[3],[2,5],[2]],"Y":2,"input":[2,2,1]})";
  bytes += '\n';
  bytes += std::string(4 * (12 + 3 + 10 + 2), '\0');
  EXPECT_EQ(code_of([&] { decode_toy_model(bytes); }), ErrorCode::kShape);
}

TEST(FunctionClassifier, CountsCalls) {
  auto m = test::constant_classifier({0.25, 0.75});
  m.predict(ImageTensor::filled({1, 1, 1}, 0.0));
  EXPECT_EQ(m.query_count(), 1u);
  EXPECT_EQ(m.class_count(), 2u);
}

}  // namespace
}  // namespace pxattack
