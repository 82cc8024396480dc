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

#ifndef MUEVO_STORE_HPP_
#define MUEVO_STORE_HPP_

#include <chrono>
#include <filesystem>
#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "muevo/graph.hpp"

namespace muevo {

// Store layout under the root directory:
//
//   manifest.json                      registered tasks, agents, root path
//   components/<id>.bin                write-once component blobs
//   tasks/<task>/best/<seq>.json       write-once best-path records; the
//                                      highest sequence number is current
//   tasks/<task>/iter/<agent>.<n>.done write-once empty completion markers
//
// Every file is written to a temporary name in its final directory and then
// hard-linked (exclusive create) or renamed into place, so readers never see
// partial content. Names starting with ".tmp-" are ignored by readers.
struct Manifest {
  std::map<std::string, TaskInfo> tasks;
  std::map<std::string, std::string> agents;  // agent id -> task id
  ModelPath root;
  LayerBounds bounds;

  friend bool operator==(const Manifest& a, const Manifest& b);
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);

struct BestRecord {
  std::uint64_t seq = 0;
  ModelPath path;
  std::string fingerprint;  // fingerprint(path)
  std::optional<std::string> prev_fingerprint;
};

enum class PublishStatus { kOk, kConflict };

struct StoreOptions {
  bool fsync = true;
  // Verified component blobs are cached per handle.
  bool cache_components = true;
};

struct AuditReport {
  std::size_t components = 0;
  std::size_t records = 0;
  std::size_t markers = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

struct GcReport {
  std::size_t removed_components = 0;
  std::size_t removed_temp_files = 0;
  std::size_t kept_components = 0;
};

// One handle per worker; handles are not shared across threads.
class Store {
 public:
  // Creates the layout, publishes the root components and writes the
  // manifest. Opening an existing store with an identical manifest resumes
  // it; a differing manifest is a kStoreError.
  static Store create(const std::filesystem::path& root, const Manifest& manifest,
                      const std::vector<Component>& root_components,
                      StoreOptions options = {});
  static Store open(const std::filesystem::path& root, StoreOptions options = {});

  const std::filesystem::path& root() const noexcept { return root_; }
  const Manifest& manifest() const noexcept { return manifest_; }

  // Idempotent write-once publish; kIntegrityViolation if the id already
  // holds different bytes.
  std::string publish_component(const Component& component);
  bool has_component(const std::string& id) const;
  // Reads and hash-verifies a blob (kIntegrityViolation, kDanglingComponent).
  ComponentPtr load_component(const std::string& id);

  // Compare-and-swap on the task's best record. expected_prev is the
  // fingerprint of the record the caller last saw (nullopt: none yet).
  // Throws kDanglingComponent if a referenced component is unpublished.
  PublishStatus publish_best(const std::string& task_id, const ModelPath& path,
                             const std::optional<std::string>& expected_prev);

  std::optional<BestRecord> latest_best(const std::string& task_id) const;
  // All records of a task in publication order.
  std::vector<BestRecord> best_history(const std::string& task_id) const;

  // Snapshot of the shared system. With `through_iteration`, each task's
  // best is the latest record published in an iteration <= that value.
  SystemState load_system_image(std::optional<int> through_iteration = std::nullopt);

  // Throws kDuplicateMarker if the marker already exists.
  void mark_iteration_complete(const std::string& agent_id, int n);
  bool iteration_complete(const std::string& agent_id, int n) const;
  // Returns once every registered agent has completed iteration n - 1.
  // Iteration 0 passes immediately. Throws BarrierTimeout naming the agents
  // still missing when the timeout expires.
  void wait_for_barrier(int n, std::chrono::milliseconds timeout,
                        std::chrono::milliseconds max_poll = std::chrono::milliseconds(20),
                        const std::atomic<bool>* cancel = nullptr);

  // Full scan: blob names match recomputed ids, records parse and reference
  // published components, marker files are empty.
  AuditReport audit() const;
  // Offline only: removes temp files and blobs no record (any version) or the
  // root references.
  GcReport gc();

  // Test hook invoked at named points inside publish operations.
  void set_fault_hook(std::function<void(std::string_view)> hook) {
    fault_hook_ = std::move(hook);
  }

 private:
  Store(std::filesystem::path root, Manifest manifest, StoreOptions options);

  std::filesystem::path component_path(const std::string& id) const;
  std::filesystem::path best_dir(const std::string& task_id) const;
  std::filesystem::path marker_path(const std::string& agent_id, int n) const;
  void fault(std::string_view point) const {
    if (fault_hook_) fault_hook_(point);
  }

  std::filesystem::path root_;
  Manifest manifest_;
  StoreOptions options_;
  std::map<std::string, ComponentPtr> cache_;
  std::function<void(std::string_view)> fault_hook_;
};

}  // namespace muevo

#endif  // MUEVO_STORE_HPP_
