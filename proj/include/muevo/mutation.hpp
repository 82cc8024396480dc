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

#ifndef MUEVO_MUTATION_HPP_
#define MUEVO_MUTATION_HPP_

#include <set>
#include <string>
#include <vector>

#include "muevo/graph.hpp"
#include "muevo/rng.hpp"

namespace muevo {

struct MutationAction {
  enum class Type {
    kCloneLayer,
    kRemoveTopLayer,
    kAddLayerOnTop,
    kHyperparamStep,
    kSwapTransferSource,
  };

  Type type = Type::kCloneLayer;
  std::size_t position = 0;                         // clone / swap
  HyperField field = HyperField::kLearningRate;     // hyperparam step
  int direction = 0;                                // +1 up, -1 down

  static MutationAction clone(std::size_t p) { return {Type::kCloneLayer, p}; }
  static MutationAction remove_top() { return {Type::kRemoveTopLayer}; }
  static MutationAction add_top() { return {Type::kAddLayerOnTop}; }
  static MutationAction step(HyperField f, int dir) {
    return {Type::kHyperparamStep, 0, f, dir > 0 ? 1 : -1};
  }
  static MutationAction swap(std::size_t p) { return {Type::kSwapTransferSource, p}; }

  // Key into MuTable, e.g. "clone:2", "remove_top", "hp:learning_rate:up".
  std::string descriptor() const;

  friend bool operator==(const MutationAction&, const MutationAction&) = default;
};

struct MutationConfig {
  // Probability of mutating the task's own best rather than another task's.
  double own_parent_prob = 0.5;
  MuBounds mu;
  double mu_eta = 0.2;
  SearchSpace space;
};

// An untrained child: the path (whose unfrozen positions still reference
// their source components), the positions to train (body indices; the head
// at index body size is always trained) and locally created components.
struct Child {
  ModelPath path;
  std::set<std::size_t> unfrozen;
  std::vector<ComponentPtr> fresh;
  std::vector<MutationAction> applied;
  std::vector<MutationAction> considered;
};

// The task's current best with probability own_parent_prob, otherwise a
// uniformly chosen best of another task. Falls back to the root path when
// the task has no best yet. Throws kNoParentAvailable on an empty system.
ModelPath sample_parent(const SystemState& state, const std::string& task_id,
                        CounterRng& rng, const MutationConfig& config);

// Every action applicable to `parent` when producing a child for `task_id`.
std::vector<MutationAction> legal_actions(const ModelPath& parent,
                                          const std::string& task_id,
                                          const SystemState& state,
                                          const MutationConfig& config);

// Includes each legal action independently with its mu probability, then
// resolves conflicts: RemoveTopLayer beats AddLayerOnTop and any action on the
// removed position; SwapTransferSource(p) beats CloneLayer(p); a down step
// beats an up step on the same field.
std::vector<MutationAction> sample_mutations(const ModelPath& parent,
                                             const std::vector<MutationAction>& legal,
                                             CounterRng& rng,
                                             const MutationConfig& config);

// Builds the untrained child. Never touches a stored component; new layers,
// heads and re-sampled embeddings land in Child::fresh. Throws
// kIllegalMutation for an action the parent's shape does not allow.
Child apply_mutations(const ModelPath& parent, const std::string& task_id,
                      const std::vector<MutationAction>& actions,
                      const SystemState& state, CounterRng& rng,
                      const MutationConfig& config);

// Multiplicative update applied to a winning child's inherited table:
// applied actions x(1 + eta), every other known action x(1 - eta), clamped to
// [p_min, p_max]. Losing children leave the table unchanged.
MuTable update_mu(const MuTable& parent_mu, const std::vector<MutationAction>& applied,
                  const std::vector<MutationAction>& considered, bool child_won,
                  const MutationConfig& config);

}  // namespace muevo

#endif  // MUEVO_MUTATION_HPP_
