// Copyright 2026 The muevo Authors.
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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "muevo/error.hpp"
#include "muevo/neural.hpp"
#include "muevo/tasks.hpp"
#include "support.hpp"

using namespace muevo;
using muevo::testing::build_path;
using muevo::testing::register_path;

namespace {

Layer make_layer(ComponentKind kind, std::uint32_t in, std::uint32_t out,
                 std::vector<double> params) {
  return Layer{kind, in, out, std::move(params)};
}

Matrix random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = rng.uniform(-1.0, 1.0);
  return m;
}

Network random_network(CounterRng& rng, std::uint32_t in, std::vector<std::uint32_t> widths,
                       std::uint32_t classes) {
  Network net;
  net.input_dim = in;
  std::uint32_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const auto kind = i == 0 ? ComponentKind::kEmbeddingStub : ComponentKind::kDense;
    std::vector<double> p(static_cast<std::size_t>(prev) * widths[i] + widths[i]);
    for (auto& x : p) x = rng.uniform(-0.8, 0.8);
    net.layers.push_back(make_layer(kind, prev, widths[i], std::move(p)));
    net.layers.push_back(make_layer(ComponentKind::kActivation, widths[i], widths[i], {}));
    prev = widths[i];
  }
  std::vector<double> h(static_cast<std::size_t>(prev) * classes + classes);
  for (auto& x : h) x = rng.uniform(-0.8, 0.8);
  net.layers.push_back(make_layer(ComponentKind::kDense, prev, classes, std::move(h)));
  return net;
}

std::vector<int> random_labels(std::size_t n, int classes, CounterRng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return y;
}

double loss_of(const Network& net, const Matrix& x, const std::vector<int>& y) {
  return loss_and_grads(net, x, y, std::vector<bool>(net.layers.size(), false)).loss;
}

// Two-class task whose classes differ in the sign of the first feature.
TaskData separable_task() {
  CounterRng rng(77);
  auto make = [&](std::size_t n) {
    Dataset ds{Matrix(n, 4), std::vector<int>(n)};
    for (std::size_t r = 0; r < n; ++r) {
      const int c = static_cast<int>(r % 2);
      ds.y[r] = c;
      ds.x(r, 0) = (c == 0 ? -1.0 : 1.0) * (0.5 + rng.uniform());
      for (std::size_t f = 1; f < 4; ++f) ds.x(r, f) = rng.uniform(-1.0, 1.0);
    }
    return ds;
  };
  TaskData t;
  t.spec.task_id = "sep";
  t.spec.n_classes = 2;
  t.spec.input_dim = 4;
  t.train = make(256);
  t.val = make(64);
  t.test = make(64);
  return t;
}

}  // namespace

TEST_SUITE("neural") {
  TEST_CASE("identity layers pass inputs through") {
    Network net;
    net.input_dim = 2;
    net.layers.push_back(make_layer(ComponentKind::kEmbeddingStub, 2, 2, {1, 0, 0, 1, 0, 0}));
    net.layers.push_back(make_layer(ComponentKind::kDense, 2, 2, {1, 0, 0, 1, 0, 0}));
    Matrix x(1, 2);
    x(0, 0) = 1;
    x(0, 1) = 2;
    const Matrix out = forward(net, x);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == 2.0);
  }

  TEST_CASE("zero weights give zero logits") {
    CounterRng rng(1);
    Network net = random_network(rng, 3, {4}, 5);
    for (auto& v : net.layers.back().params) v = 0.0;
    const Matrix out = forward(net, random_matrix(7, 3, rng));
    for (double v : out.data()) CHECK(v == 0.0);
  }

  TEST_CASE("logit shape follows the dims") {
    CounterRng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const auto in = static_cast<std::uint32_t>(1 + rng.below(6));
      const auto w = static_cast<std::uint32_t>(1 + rng.below(6));
      const auto k = static_cast<std::uint32_t>(2 + rng.below(5));
      const auto rows = 1 + rng.below(9);
      SystemState s;
      auto b = build_path("t", in, w, static_cast<int>(rng.below(3)), k, rng);
      register_path(s, b.path, b.components);
      Batch batch{random_matrix(rows, in, rng), std::vector<int>(rows, 0)};
      const Matrix out = forward(b.path, s, batch);
      CHECK(out.rows() == rows);
      CHECK(out.cols() == k);
    }
  }

  TEST_CASE("a batch of the wrong width is a DimMismatch") {
    CounterRng rng(3);
    SystemState s;
    auto b = build_path("t", 4, 3, 0, 2, rng);
    register_path(s, b.path, b.components);
    Batch batch{random_matrix(2, 5, rng), {0, 1}};
    try {
      forward(b.path, s, batch);
      FAIL("expected DimMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimMismatch);
    }
  }

  TEST_CASE("uniform logits cost ln k") {
    CounterRng rng(4);
    for (std::uint32_t k : {2u, 3u, 7u}) {
      Network net = random_network(rng, 3, {4}, k);
      for (auto& v : net.layers.back().params) v = 0.0;
      const Matrix x = random_matrix(5, 3, rng);
      CHECK(loss_of(net, x, random_labels(5, static_cast<int>(k), rng)) ==
            doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-15));
    }
  }

  TEST_CASE("empty batches are rejected") {
    CounterRng rng(5);
    SystemState s;
    auto b = build_path("t", 4, 3, 0, 2, rng);
    register_path(s, b.path, b.components);
    try {
      loss_and_grads(b.path, s, Batch{Matrix(0, 4), {}}, {});
      FAIL("expected EmptyBatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kEmptyBatch);
    }
  }

  TEST_CASE("gradients match central differences") {
    // 2-layer path with at most 32 parameters: embed 3->4 (16), head 4->3 (15).
    CounterRng rng(6);
    Network small = random_network(rng, 3, {4}, 3);
    std::size_t count = 0;
    for (const auto& l : small.layers) count += l.params.size();
    CHECK(count <= 32);
    const Matrix x = random_matrix(6, 3, rng);
    const auto y = random_labels(6, 3, rng);
    const auto lg = loss_and_grads(small, x, y, std::vector<bool>(small.layers.size(), true));
    const double eps = 1e-4;
    for (std::size_t li = 0; li < small.layers.size(); ++li) {
      if (small.layers[li].params.empty()) {
        CHECK((!lg.grads[li] || lg.grads[li]->empty()));
        continue;
      }
      REQUIRE(lg.grads[li].has_value());
      for (std::size_t j = 0; j < small.layers[li].params.size(); ++j) {
        Network plus = small, minus = small;
        plus.layers[li].params[j] += eps;
        minus.layers[li].params[j] -= eps;
        const double numeric = (loss_of(plus, x, y) - loss_of(minus, x, y)) / (2 * eps);
        const double analytic = (*lg.grads[li])[j];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-10});
        CHECK(std::abs(numeric - analytic) / denom <= 1e-4);
      }
    }
  }

  TEST_CASE("frozen layers get no gradient buffer and the head always trains") {
    CounterRng rng(7);
    SystemState s;
    auto b = build_path("t", 4, 3, 1, 2, rng);
    register_path(s, b.path, b.components);
    Batch batch{random_matrix(4, 4, rng), {0, 1, 1, 0}};
    const auto lg = loss_and_grads(b.path, s, batch, {});
    REQUIRE(lg.grads.size() == b.path.component_ids.size() + 1);
    for (std::size_t i = 0; i + 1 < lg.grads.size(); ++i) CHECK_FALSE(lg.grads[i].has_value());
    CHECK(lg.grads.back().has_value());
    const auto lg2 = loss_and_grads(b.path, s, batch, {2});
    CHECK(lg2.grads[2].has_value());
    CHECK_FALSE(lg2.grads[0].has_value());
  }

  TEST_CASE("a small step does not increase the batch loss") {
    CounterRng rng(8);
    for (int trial = 0; trial < 25; ++trial) {
      Network net = random_network(rng, 4, {5, 5}, 3);
      const Matrix x = random_matrix(8, 4, rng);
      const auto y = random_labels(8, 3, rng);
      const auto lg = loss_and_grads(net, x, y, std::vector<bool>(net.layers.size(), true));
      for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!lg.grads[i]) continue;
        for (std::size_t j = 0; j < net.layers[i].params.size(); ++j) {
          net.layers[i].params[j] -= 1e-3 * (*lg.grads[i])[j];
        }
      }
      CHECK(loss_of(net, x, y) <= lg.loss + 1e-9);
    }
  }

  TEST_CASE("planned steps follow the budget") {
    HyperParams hp;
    hp.batch_size = 512;
    hp.epochs = 4;
    CHECK(planned_steps(TrainBudget{4, 51200, false}, hp, 100000) == 400);
    hp.batch_size = 32;
    CHECK(planned_steps(TrainBudget{4, 2048, false}, hp, 512) == 64);
    CHECK(planned_steps(TrainBudget{4, 2048, true}, hp, 512) == 256);
    CHECK(planned_steps(TrainBudget{2, 2048, false}, hp, 512) == 32);
    CHECK(planned_steps(TrainBudget{4, 16, false}, hp, 512) == 0);
  }

  TEST_CASE("training is deterministic and leaves stored components alone") {
    CounterRng rng(9);
    const TaskData task = separable_task();
    SystemState s;
    auto b = build_path("sep", 4, 6, 1, 2, rng);
    register_path(s, b.path, b.components);
    std::map<std::string, std::vector<std::uint8_t>> before;
    for (const auto& [id, c] : s.components) before[id] = serialize_component(*c);

    const std::set<std::size_t> unfrozen{0, 2};
    const auto o1 = train_child(b.path, s, unfrozen, task, TrainBudget{2, 128, false}, 5);
    const auto o2 = train_child(b.path, s, unfrozen, task, TrainBudget{2, 128, false}, 5);
    REQUIRE(o1.new_components.size() == 3);
    for (std::size_t i = 0; i < o1.new_components.size(); ++i) {
      CHECK(o1.new_components[i].first == o2.new_components[i].first);
      CHECK(o1.new_components[i].second.id == o2.new_components[i].second.id);
      CHECK(o1.new_components[i].second.origin_task == "sep");
    }
    std::set<std::size_t> positions;
    for (const auto& [pos, c] : o1.new_components) positions.insert(pos);
    CHECK(positions == std::set<std::size_t>{0, 2, b.path.component_ids.size()});
    CHECK(o1.steps_executed == 8);
    CHECK(o1.trained_path.component_ids[1] == b.path.component_ids[1]);
    CHECK(o1.trained_path.component_ids[0] != b.path.component_ids[0]);

    for (const auto& [id, bytes] : before) CHECK(serialize_component(s.at(id)) == bytes);
    const auto o3 = train_child(b.path, s, unfrozen, task, TrainBudget{2, 128, false}, 6);
    CHECK(o3.trained_path.head_id != o1.trained_path.head_id);
  }

  TEST_CASE("a separable task is learned") {
    CounterRng rng(10);
    const TaskData task = separable_task();
    SystemState s;
    auto b = build_path("sep", 4, 6, 0, 2, rng);
    register_path(s, b.path, b.components);
    ModelPath p = b.path;
    p.hyperparams.learning_rate = 0.1;
    p.hyperparams.batch_size = 16;
    p.hyperparams.epochs = 4;
    // 4 epochs of 800 samples at batch 16: 200 steps.
    const auto out = train_child(p, s, {0}, task, TrainBudget{4, 800, true}, 1);
    CHECK(out.steps_executed == 200);
    CHECK(out.final_train_loss < 0.1);
  }

  TEST_CASE("bad budgets are rejected") {
    CounterRng rng(11);
    const TaskData task = separable_task();
    SystemState s;
    auto b = build_path("sep", 4, 6, 0, 2, rng);
    register_path(s, b.path, b.components);
    for (TrainBudget bad : {TrainBudget{0, 128, false}, TrainBudget{1, 8, false}}) {
      try {
        train_child(b.path, s, {}, task, bad, 1);
        FAIL("expected InvalidBudget");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kInvalidBudget);
      }
    }
  }

  TEST_CASE("evaluate scores argmax with low-index ties") {
    SystemState s;
    // Embedding copies the 2 inputs, head copies them as logits.
    auto e = std::make_shared<const Component>(
        make_component(ComponentKind::kEmbeddingStub, 2, 2, {1, 0, 0, 1, 0, 0}, {}, 0));
    auto a = std::make_shared<const Component>(
        make_component(ComponentKind::kActivation, 2, 2, {}, {}, 1));
    auto h = std::make_shared<const Component>(
        make_component(ComponentKind::kDense, 2, 2, {1, 0, 0, 1, 0, 0}, "t", 2));
    ModelPath p;
    p.task_id = "t";
    p.component_ids = {e->id, a->id};
    p.head_id = h->id;
    muevo::testing::register_path(s, p, {e, a, h});
    Dataset ds{Matrix(4, 2), {1, 0, 0, 1}};
    ds.x(0, 1) = 1.0;   // class 1 wins
    ds.x(1, 0) = 1.0;   // class 0 wins
    ds.x(2, 0) = 0.5;   // tie -> class 0
    ds.x(2, 1) = 0.5;
    ds.x(3, 0) = 0.25;  // tie -> class 0, label 1
    ds.x(3, 1) = 0.25;
    const std::string before = canonical_json(p);
    CHECK(evaluate(p, s, ds) == 0.75);
    CHECK(canonical_json(p) == before);
    try {
      evaluate(p, s, Dataset{Matrix(0, 2), {}});
      FAIL("expected EmptySplit");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::kEmptySplit);
    }
  }

  TEST_CASE("a random predictor scores near chance") {
    // Random heads on a balanced 4-class split: accuracy over many heads has
    // mean 1/4 and binomial spread.
    FamilySpec spec;
    spec.n_tasks = 1;
    spec.n_classes = 4;
    spec.sizes = {SplitSizes{64, 64, 4000}};
    const TaskData task = generate_family(spec)[0];
    CounterRng rng(12);
    double sum = 0.0;
    const int heads = 40;
    for (int i = 0; i < heads; ++i) {
      SystemState s;
      auto b = build_path("task0", 16, 8, 0, 4, rng);
      register_path(s, b.path, b.components);
      sum += evaluate(b.path, s, task.test);
    }
    const double mean = sum / heads;
    // Each head is a fixed classifier, so the pooled accuracy is not binomial
    // in the heads; the mean still sits at chance within a loose bound.
    const double sigma = std::sqrt(0.25 * 0.75 / (4000.0 * heads));
    CHECK(std::abs(mean - 0.25) < 3 * sigma + 0.03);
  }

  TEST_CASE("input resolution selects features") {
    Matrix x(1, 5);
    for (std::size_t i = 0; i < 5; ++i) x(0, i) = static_cast<double>(i);
    const Matrix low = select_features(x, Resolution::kLow, 3);
    CHECK(low.cols() == 3);
    CHECK(low(0, 0) == 0.0);
    CHECK(low(0, 1) == 2.0);
    CHECK(low(0, 2) == 4.0);
    CHECK(select_features(x, Resolution::kHigh, 5) == x);
    CHECK_THROWS_AS(select_features(x, Resolution::kLow, 5), Error);
  }

  TEST_CASE("near-identity init") {
    CounterRng rng(13);
    const auto p = init_near_identity(6, rng);
    REQUIRE(p.size() == 42);
    const float bound = static_cast<float>(0.1 / std::sqrt(6.0)) + 1e-6f;
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 6; ++c) {
        CHECK(std::abs(p[r * 6 + c] - (r == c ? 1.0f : 0.0f)) <= bound);
      }
      CHECK(p[36 + r] == 0.0f);
    }
  }
}
