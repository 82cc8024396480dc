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
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "muevo/error.hpp"
#include "muevo/tasks.hpp"
#include "support.hpp"

using namespace muevo;

namespace {

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::kInvalidSpec;
}

}  // namespace

TEST_SUITE("tasks") {
  TEST_CASE("families are bit-identical across calls") {
    FamilySpec spec;
    spec.n_tasks = 3;
    const auto a = generate_family(spec);
    const auto b = generate_family(spec);
    REQUIRE(a.size() == 3);
    for (std::size_t t = 0; t < a.size(); ++t) {
      CHECK(a[t].spec.task_id == "task" + std::to_string(t));
      CHECK(same_bytes(a[t].train.x, b[t].train.x));
      CHECK(same_bytes(a[t].test.x, b[t].test.x));
      CHECK(a[t].val.y == b[t].val.y);
    }
    spec.family_seed = 2;
    CHECK_FALSE(same_bytes(generate_family(spec)[0].train.x, a[0].train.x));
  }

  TEST_CASE("classes are exactly balanced") {
    FamilySpec spec;
    spec.n_tasks = 2;
    spec.n_classes = 4;
    spec.sizes = {SplitSizes{1000, 100, 102}};
    for (const auto& t : generate_family(spec)) {
      const auto st = dataset_stats(t);
      CHECK(st.train.size == 1000);
      for (auto c : st.train.class_counts) CHECK(c == 250);
      for (auto c : st.val.class_counts) CHECK(c == 25);
      for (auto c : st.test.class_counts) {
        CHECK(c >= 25);
        CHECK(c <= 26);
      }
    }
  }

  TEST_CASE("features are standardized") {
    FamilySpec spec;
    spec.n_tasks = 2;
    for (const auto& t : generate_family(spec)) {
      const auto st = dataset_stats(t);
      REQUIRE(st.feature_var.size() == static_cast<std::size_t>(spec.input_dim));
      for (std::size_t f = 0; f < st.feature_var.size(); ++f) {
        CHECK(std::abs(st.feature_mean[f]) < 1e-9);
        CHECK(std::abs(st.feature_var[f] - 1.0) < 0.1);
      }
      // Held-out splits use the train statistics and stay near unit scale.
      for (std::size_t f = 0; f < t.test.x.cols(); ++f) {
        double m = 0.0, v = 0.0;
        for (std::size_t r = 0; r < t.test.size(); ++r) m += t.test.x(r, f);
        m /= static_cast<double>(t.test.size());
        for (std::size_t r = 0; r < t.test.size(); ++r) v += std::pow(t.test.x(r, f) - m, 2);
        v /= static_cast<double>(t.test.size());
        CHECK(v > 0.6);
        CHECK(v < 1.6);
      }
    }
  }

  TEST_CASE("full relatedness without noise gives identical tasks up to relabeling") {
    FamilySpec spec;
    spec.n_tasks = 4;
    spec.relatedness = 1.0;
    spec.noise_level = 0.0;
    const auto tasks = generate_family(spec);
    for (std::size_t t = 1; t < tasks.size(); ++t) {
      CHECK(same_bytes(tasks[t].train.x, tasks[0].train.x));
      CHECK(same_bytes(tasks[t].test.x, tasks[0].test.x));
      std::map<int, int> mapping;
      bool consistent = true;
      for (std::size_t r = 0; r < tasks[0].train.size(); ++r) {
        auto [it, fresh] = mapping.emplace(tasks[0].train.y[r], tasks[t].train.y[r]);
        if (!fresh && it->second != tasks[t].train.y[r]) consistent = false;
      }
      CHECK(consistent);
      std::set<int> image;
      for (const auto& [from, to] : mapping) image.insert(to);
      CHECK(image.size() == static_cast<std::size_t>(spec.n_classes));
    }
  }

  TEST_CASE("lower relatedness moves siblings apart") {
    FamilySpec spec;
    spec.n_tasks = 2;
    spec.noise_level = 0.0;
    auto distance = [&](double rel) {
      spec.relatedness = rel;
      const auto t = generate_family(spec);
      double d = 0.0;
      for (std::size_t i = 0; i < t[0].train.x.data().size(); ++i) {
        d += std::pow(t[0].train.x.data()[i] - t[1].train.x.data()[i], 2);
      }
      return d;
    };
    const double near = distance(0.9), far = distance(0.0);
    CHECK(near > 0.0);
    CHECK(far > near);
  }

  TEST_CASE("splits share no samples") {
    FamilySpec spec;
    spec.n_tasks = 1;
    const auto t = generate_family(spec)[0];
    std::set<std::vector<double>> train;
    for (std::size_t r = 0; r < t.train.size(); ++r) {
      train.emplace(t.train.x.row(r).begin(), t.train.x.row(r).end());
    }
    for (std::size_t r = 0; r < t.test.size(); ++r) {
      CHECK(train.count(std::vector<double>(t.test.x.row(r).begin(), t.test.x.row(r).end())) == 0);
    }
  }

  TEST_CASE("invalid specs") {
    FamilySpec spec;
    spec.sizes = {SplitSizes{10, 0, 10}};
    CHECK(code_of([&] { generate_family(spec); }) == ErrorCode::kInvalidSpec);
    spec = FamilySpec{};
    spec.n_tasks = 0;
    CHECK(code_of([&] { generate_family(spec); }) == ErrorCode::kInvalidSpec);
    spec = FamilySpec{};
    spec.n_classes = 64;
    spec.clusters_per_class = 64;
    spec.input_dim = 2;
    CHECK(code_of([&] { generate_family(spec); }) == ErrorCode::kInvalidSpec);
    spec = FamilySpec{};
    spec.relatedness = 1.5;
    CHECK(code_of([&] { generate_family(spec); }) == ErrorCode::kInvalidSpec);
    spec = FamilySpec{};
    spec.sizes = {SplitSizes{}, SplitSizes{}};
    CHECK(code_of([&] { generate_family(spec); }) == ErrorCode::kInvalidSpec);

    TaskData empty = generate_family(FamilySpec{})[0];
    empty.val = Dataset{};
    CHECK(code_of([&] { dataset_stats(empty); }) == ErrorCode::kInvalidSpec);
  }

  TEST_CASE("per-task split sizes") {
    FamilySpec spec;
    spec.n_tasks = 2;
    spec.sizes = {SplitSizes{64, 32, 32}, SplitSizes{256, 32, 32}};
    const auto t = generate_family(spec);
    CHECK(t[0].train.size() == 64);
    CHECK(t[1].train.size() == 256);
  }

  TEST_CASE("csv ingestion") {
    muevo::testing::TempDir dir;
    auto write = [&](const std::string& name, const std::string& text) {
      std::ofstream(dir / name) << text;
      return dir / name;
    };
    const auto train = write("train.csv", "x0,label,x1\n0.5,1,2\n-1,0,3.25\n1e-3,2,0\n");
    const auto val = write("val.csv", "x0,label,x1\r\n1,0,1\r\n");
    const auto test = write("test.csv", "label,x0,x1\n1,2,2\n");
    const Dataset ds = load_csv_dataset(train);
    REQUIRE(ds.size() == 3);
    CHECK(ds.x.cols() == 2);
    CHECK(ds.y == std::vector<int>{1, 0, 2});
    CHECK(ds.x(0, 0) == 0.5);
    CHECK(ds.x(0, 1) == 2.0);
    CHECK(ds.x(1, 1) == 3.25);
    CHECK(ds.x(2, 0) == 1e-3);

    const TaskData t = load_csv_task("csv", train, val, test);
    CHECK(t.spec.n_classes == 3);
    CHECK(t.spec.input_dim == 2);
    CHECK(t.val.size() == 1);

    CHECK(code_of([&] { load_csv_dataset(write("a.csv", "x0,x1\n1,2\n")); }) ==
          ErrorCode::kInvalidSpec);
    CHECK(code_of([&] { load_csv_dataset(write("b.csv", "x0,label\nfoo,1\n")); }) ==
          ErrorCode::kInvalidSpec);
    CHECK(code_of([&] { load_csv_dataset(write("c.csv", "x0,label\n1,2,3\n")); }) ==
          ErrorCode::kInvalidSpec);
    CHECK(code_of([&] { load_csv_dataset(write("d.csv", "x0,label\n1,-1\n")); }) ==
          ErrorCode::kInvalidSpec);
    CHECK(code_of([&] { load_csv_dataset(dir / "missing.csv"); }) == ErrorCode::kInvalidSpec);
  }
}
