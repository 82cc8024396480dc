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

#ifndef MUEVO_NEURAL_HPP_
#define MUEVO_NEURAL_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "muevo/graph.hpp"
#include "muevo/matrix.hpp"
#include "muevo/rng.hpp"
#include "muevo/tasks.hpp"

namespace muevo {

// Inputs carry the task's full feature width; the path's input resolution
// selects the columns the embedding sees.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
};

// A component unpacked to double precision for computation.
struct Layer {
  ComponentKind kind = ComponentKind::kDense;
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  std::vector<double> params;  // out x in weights, then out biases
};

// Body layers followed by the head (always the last layer).
struct Network {
  std::vector<Layer> layers;
  Resolution resolution = Resolution::kHigh;
  std::uint32_t input_dim = 0;  // embedding in_dim

  std::size_t head_position() const { return layers.size() - 1; }
};

// Throws kDanglingComponent, kDimMismatch or kUnsupportedComponentKind.
Network build_network(const ModelPath& path, const SystemState& state);

// Selects the resolution's feature columns; kDimMismatch if the selected
// width differs from `expected_width`.
Matrix select_features(const Matrix& inputs, Resolution resolution,
                       std::uint32_t expected_width);

Matrix forward(const Network& net, const Matrix& inputs);
Matrix forward(const ModelPath& path, const SystemState& state, const Batch& batch);

struct LossGrads {
  double loss = 0.0;
  // One entry per layer; only trainable layers carry a buffer.
  std::vector<std::optional<std::vector<double>>> grads;
};

// Mean softmax cross-entropy and its gradient for the layers flagged in
// `trainable` (the head is always included). Inputs are already at the
// embedding width. Throws kEmptyBatch.
LossGrads loss_and_grads(const Network& net, const Matrix& features,
                         std::span<const int> labels,
                         const std::vector<bool>& trainable);

// Path-level form; `unfrozen` holds body positions (body size = head).
LossGrads loss_and_grads(const ModelPath& path, const SystemState& state,
                         const Batch& batch, const std::set<std::size_t>& unfrozen);

struct TrainBudget {
  int epochs = 4;
  int samples_cap = 2048;
  // When set, every epoch draws exactly samples_cap examples (reshuffling as
  // needed) so all tasks get identical step counts.
  bool equal_budget = false;
};

struct TrainOutcome {
  // Fresh components keyed by position (body positions, then the head).
  std::vector<std::pair<std::size_t, Component>> new_components;
  double final_train_loss = 0.0;
  int steps_executed = 0;
  // Input path with the retrained positions pointing at the new ids.
  ModelPath trained_path;
};

// Number of SGD steps a budget yields for the given train-set size and
// hyperparameters: min(hp.epochs, budget.epochs) epochs of
// floor(samples_per_epoch / batch_size) steps each.
int planned_steps(const TrainBudget& budget, const HyperParams& hp,
                  std::size_t train_size);

// Mini-batch SGD with momentum over the unfrozen positions and the head.
// Stored components are only read; retrained layers come back as new
// components whose origin_task is the task's id. Deterministic in `seed`.
TrainOutcome train_child(const ModelPath& path, const SystemState& state,
                         const std::set<std::size_t>& unfrozen,
                         const TaskData& task, const TrainBudget& budget,
                         std::uint64_t seed);

// Fraction of argmax-correct predictions; ties go to the lowest class index.
double evaluate(const ModelPath& path, const SystemState& state,
                const Dataset& split);

// Initializers.
// Glorot-uniform weights, zero bias.
std::vector<float> init_glorot(std::uint32_t in_dim, std::uint32_t out_dim,
                               CounterRng& rng);
// Square layer W = I + U(-a, a) with a = 0.1 / sqrt(dim), zero bias: the
// identity in expectation.
std::vector<float> init_near_identity(std::uint32_t dim, CounterRng& rng);

}  // namespace muevo

#endif  // MUEVO_NEURAL_HPP_
