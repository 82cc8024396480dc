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

#ifndef MUEVO_TESTS_SUPPORT_HPP_
#define MUEVO_TESTS_SUPPORT_HPP_

#include <stdlib.h>

#include <filesystem>
#include <string>
#include <vector>

#include "muevo/graph.hpp"
#include "muevo/neural.hpp"
#include "muevo/rng.hpp"

namespace muevo::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "muevo-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_params(std::size_t n, CounterRng& rng, double scale = 0.5) {
  std::vector<float> p(n);
  for (auto& x : p) x = static_cast<float>(rng.uniform(-scale, scale));
  return p;
}

inline ComponentPtr dense(ComponentKind kind, std::uint32_t in, std::uint32_t out,
                          CounterRng& rng, std::string origin = {}, std::uint32_t depth = 0) {
  return std::make_shared<const Component>(make_component(
      kind, in, out, random_params(expected_param_count(kind, in, out), rng), std::move(origin),
      depth));
}

inline ComponentPtr activation(std::uint32_t dim, std::uint32_t depth = 0) {
  return std::make_shared<const Component>(
      make_component(ComponentKind::kActivation, dim, dim, {}, {}, depth));
}

// A system holding `path` for task `task_id` (n_classes from the head).
inline void register_path(SystemState& state, const ModelPath& path,
                          const std::vector<ComponentPtr>& comps) {
  for (const auto& c : comps) state.add(c);
  const Component& head = state.at(path.head_id);
  const Component& first = state.at(path.component_ids.front());
  state.tasks[path.task_id] = TaskInfo{head.out_dim, first.in_dim};
  state.best[path.task_id] = path;
}

// [embed(in -> width), act, (dense, act) x hidden] + head(width -> classes).
struct BuiltPath {
  ModelPath path;
  std::vector<ComponentPtr> components;
};

inline BuiltPath build_path(const std::string& task, std::uint32_t in, std::uint32_t width,
                            int hidden, std::uint32_t classes, CounterRng& rng) {
  BuiltPath b;
  b.path.task_id = task;
  auto add = [&](ComponentPtr c) {
    b.path.component_ids.push_back(c->id);
    b.components.push_back(std::move(c));
  };
  add(dense(ComponentKind::kEmbeddingStub, in, width, rng));
  add(activation(width, 1));
  for (int i = 0; i < hidden; ++i) {
    add(dense(ComponentKind::kDense, width, width, rng));
    add(activation(width));
  }
  auto head = dense(ComponentKind::kDense, width, classes, rng, task);
  b.path.head_id = head->id;
  b.components.push_back(head);
  return b;
}

}  // namespace muevo::testing

#endif  // MUEVO_TESTS_SUPPORT_HPP_
