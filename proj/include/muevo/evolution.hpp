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

#ifndef MUEVO_EVOLUTION_HPP_
#define MUEVO_EVOLUTION_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "muevo/graph.hpp"
#include "muevo/mutation.hpp"
#include "muevo/neural.hpp"
#include "muevo/store.hpp"
#include "muevo/tasks.hpp"

namespace muevo {

inline constexpr double kCostClamp = 0.5;

struct CostNorms {
  double params_norm = 1.0;
  double flops_norm = 1.0;
};

// r = acc * (1 - scale * min(params / params_norm, 0.5))
//         * (1 - scale * min(flops / flops_norm, 0.5))
// Throws kInvalidReward on non-finite input or non-positive norms.
double reward(double val_accuracy, double acc_params, double flops,
              const CostNorms& norms, double scale);

using Trainer = std::function<TrainOutcome(
    const ModelPath&, const SystemState&, const std::set<std::size_t>&,
    const TaskData&, const TrainBudget&, std::uint64_t)>;

struct AgentConfig {
  std::string agent_id;
  std::string task_id;
  int generations_per_iteration = 4;
  int samples_per_generation = 8;
  TrainBudget budget;
  double cost_scale = 1.0;
  std::uint64_t rng_seed = 0;
  MutationConfig mutation;
  // Concurrent child trainings within one generation.
  int sample_workers = 1;
  std::chrono::milliseconds barrier_timeout{std::chrono::minutes(30)};
  // Multiagent runs read other tasks' bests as of the end of the previous
  // task-set iteration, which makes the outcome independent of scheduling.
  bool image_through_previous_iteration = false;
  int publish_retries = 8;
  // When set and raised, barrier waits give up with kCancelled.
  const std::atomic<bool>* cancel = nullptr;
  // Defaults to train_child.
  Trainer trainer;
};

// Root stack [embedding(input_dim -> width), tanh, (dense(width), tanh) x
// hidden_layers] with Glorot init. The root path has no task and no head.
struct RootModel {
  ModelPath path;
  std::vector<Component> components;
};
RootModel make_root(std::uint32_t input_dim, std::uint32_t width, int hidden_layers,
                    std::uint64_t seed, const HyperParams& hyperparams = {});

// Cost normalizers: the root body plus a head for the task.
CostNorms root_norms(const SystemState& state, const std::string& task_id);

struct Candidate {
  ModelPath path;  // trained and scored, mu already updated as a winner
  // Components the path references that the base image does not hold.
  std::vector<ComponentPtr> components;
  std::size_t sample_index = 0;
  double train_loss = 0.0;
  int steps = 0;
  bool cross_task_parent = false;
  std::vector<MutationAction> applied;
};

// Samples, mutates, trains and scores samples_per_generation children
// against `image`. Failed children are dropped. Results are ordered by
// sample index regardless of how many workers trained them.
std::vector<Candidate> run_generation(const AgentConfig& agent, const SystemState& image,
                                      const TaskData& task, const CostNorms& norms,
                                      int iteration, int generation);

// Highest score, ties to the lowest sample index.
const Candidate* select_best(const std::vector<Candidate>& candidates);

struct IterationResult {
  int iteration = 0;
  bool best_changed = false;
  double best_score = 0.0;
  double wall_time_s = 0.0;
  int conflicts = 0;
  std::int64_t start_ns = 0;  // steady clock
  std::int64_t end_ns = 0;
};

std::int64_t steady_now_ns();

// One task iteration: refresh the image, run the generations as a short hill
// climb, publish the winner if it beats the stored best.
IterationResult run_task_iteration(const AgentConfig& agent, Store& store,
                                   const TaskData& task, int iteration);

struct AgentEvent {
  enum class Kind { kStart, kComplete };
  Kind kind;
  std::string agent_id;
  int iteration;
  std::int64_t time_ns;
};

// Barrier-gated loop over iterations [first incomplete, num_iterations).
std::vector<IterationResult> run_agent(const AgentConfig& agent, Store& store,
                                       const TaskData& task, int num_iterations,
                                       std::vector<AgentEvent>* events = nullptr);

}  // namespace muevo

#endif  // MUEVO_EVOLUTION_HPP_
