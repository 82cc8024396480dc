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

#ifndef MUEVO_GRAPH_HPP_
#define MUEVO_GRAPH_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace muevo {

enum class ComponentKind : std::uint8_t {
  kDense = 0,
  kActivation = 1,
  kEmbeddingStub = 2,
};

std::string_view to_string(ComponentKind kind);

// Number of parameters implied by kind and dims. Dense and embedding-stub
// layers are affine maps stored as an out x in row-major weight matrix
// followed by out biases; activations carry no parameters.
std::size_t expected_param_count(ComponentKind kind, std::uint32_t in_dim,
                                 std::uint32_t out_dim);

// One immutable, content-addressed layer.
struct Component {
  std::string id;
  ComponentKind kind = ComponentKind::kDense;
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  std::vector<float> params;
  std::string origin_task;  // empty for root components
  std::uint32_t depth_hint = 0;
};

using ComponentPtr = std::shared_ptr<const Component>;

// Blob layout, all integers little-endian:
//   u8 kind, u32 in_dim, u32 out_dim, u64 param_count,
//   u32 origin_len, origin_len bytes UTF-8 origin_task, u32 depth_hint,
//   param_count x f32 params.
std::vector<std::uint8_t> serialize_component_fields(
    ComponentKind kind, std::uint32_t in_dim, std::uint32_t out_dim,
    std::span<const float> params, std::string_view origin_task,
    std::uint32_t depth_hint);

// SHA-256 (hex) of the blob bytes above. Throws kInvalidComponent on a
// params-length mismatch.
std::string component_id(ComponentKind kind, std::uint32_t in_dim,
                         std::uint32_t out_dim, std::span<const float> params,
                         std::string_view origin_task = {},
                         std::uint32_t depth_hint = 0);

// Validates dims and computes the id.
Component make_component(ComponentKind kind, std::uint32_t in_dim,
                         std::uint32_t out_dim, std::vector<float> params,
                         std::string origin_task = {},
                         std::uint32_t depth_hint = 0);

std::vector<std::uint8_t> serialize_component(const Component& c);
// Parses a blob and recomputes its id. Throws kIntegrityViolation on
// malformed input.
Component deserialize_component(std::span<const std::uint8_t> bytes);

enum class Resolution { kLow, kHigh };

std::string_view to_string(Resolution r);
// Number of input features the embedding sees: all of them at kHigh, the
// even-indexed ones at kLow.
std::uint32_t input_width(std::uint32_t input_dim, Resolution r);

struct HyperParams {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 4;
  Resolution input_resolution = Resolution::kHigh;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

enum class HyperField {
  kLearningRate,
  kMomentum,
  kBatchSize,
  kEpochs,
  kInputResolution,
};

inline constexpr HyperField kAllHyperFields[] = {
    HyperField::kLearningRate, HyperField::kMomentum, HyperField::kBatchSize,
    HyperField::kEpochs, HyperField::kInputResolution};

std::string_view to_string(HyperField f);

// Discrete grids every HyperParams value must belong to.
struct SearchSpace {
  std::vector<double> learning_rates{1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  std::vector<double> momenta{0.0, 0.5, 0.9};
  std::vector<int> batch_sizes{16, 32, 64};
  std::vector<int> epochs{4};
  std::vector<Resolution> resolutions{Resolution::kLow, Resolution::kHigh};

  bool contains(const HyperParams& hp) const;
  // Moves `field` one grid step up (direction > 0) or down; nullopt at the
  // grid edge or if the current value is off-grid.
  std::optional<HyperParams> step(const HyperParams& hp, HyperField field,
                                  int direction) const;
};

struct MuBounds {
  double p_min = 0.05;
  double p_max = 0.9;
  double p_init = 0.15;
};

// Per-path learned mutation probabilities keyed by action descriptor.
struct MuTable {
  std::map<std::string, double> probs;

  double get(const std::string& key, const MuBounds& bounds) const;
  void clamp(const MuBounds& bounds);

  friend bool operator==(const MuTable&, const MuTable&) = default;
};

struct LayerBounds {
  std::size_t min_layers = 2;
  std::size_t max_layers = 8;
};

// One candidate or retained model for one task. component_ids[0] is the
// embedding stub; the head is stored separately.
struct ModelPath {
  std::string task_id;
  std::vector<std::string> component_ids;
  std::string head_id;  // empty only for the root path
  HyperParams hyperparams;
  MuTable mu;
  double score = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  int generation_born = 0;
  std::optional<std::string> parent_fingerprint;
  // Task-set iteration in which this path was published (-1 for root).
  int iteration = -1;

  // All referenced ids, body first, then the head (if any).
  std::vector<std::string> all_component_ids() const;
};

void to_json(nlohmann::json& j, const HyperParams& hp);
void from_json(const nlohmann::json& j, HyperParams& hp);
void to_json(nlohmann::json& j, const ModelPath& p);
void from_json(const nlohmann::json& j, ModelPath& p);

// Canonical JSON text: sorted keys, compact, shortest round-trip reals.
std::string canonical_json(const nlohmann::json& j);
// SHA-256 of the canonical JSON record of the path.
std::string fingerprint(const ModelPath& p);

struct TaskInfo {
  std::uint32_t n_classes = 2;
  std::uint32_t input_dim = 2;
};

// The shared multitask system as seen by one reader.
struct SystemState {
  std::map<std::string, ComponentPtr> components;
  std::map<std::string, ModelPath> best;  // by task id
  std::map<std::string, TaskInfo> tasks;
  ModelPath root;
  LayerBounds bounds;

  const Component* find(const std::string& id) const;
  // Throws kDanglingComponent.
  const Component& at(const std::string& id) const;
  void add(ComponentPtr c);
};

struct Violation {
  enum class Kind {
    kDanglingComponent,
    kDimMismatch,
    kLayerCount,
    kHeadMismatch,
    kInputMismatch,
  };
  Kind kind;
  std::size_t position = 0;  // body index; body size denotes the head
  std::string detail;
};

std::string_view to_string(Violation::Kind k);

// Every invariant violation of `path` against `state`; empty means valid.
std::vector<Violation> validate_path(const ModelPath& path,
                                     const SystemState& state);

// Sum over the path's distinct components (head included) of param_count / share
// count, where the share count is the number of best paths in `state`
// referencing the component (at least 1).
double accounted_parameters(const ModelPath& path, const SystemState& state);

// Per-sample inference flops: 2*in*out per affine layer (head included) and
// out per activation.
double inference_flops(const ModelPath& path, const SystemState& state);

// Plain parameter total of the path's distinct components.
double total_parameters(const ModelPath& path, const SystemState& state);

}  // namespace muevo

#endif  // MUEVO_GRAPH_HPP_
