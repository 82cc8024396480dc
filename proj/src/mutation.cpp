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

#include "muevo/mutation.hpp"

#include <algorithm>

#include "muevo/error.hpp"
#include "muevo/neural.hpp"

namespace muevo {

namespace {

using Type = MutationAction::Type;

bool is_affine(ComponentKind k) {
  return k == ComponentKind::kDense || k == ComponentKind::kEmbeddingStub;
}

const TaskInfo& task_info(const SystemState& state, const std::string& task_id) {
  auto it = state.tasks.find(task_id);
  if (it == state.tasks.end()) {
    throw Error(ErrorCode::kIllegalMutation, "unknown task " + task_id);
  }
  return it->second;
}

// Same-depth, same-shape components in other tasks' best paths.
std::vector<std::string> swap_candidates(const ModelPath& parent, std::size_t p,
                                         const std::string& task_id,
                                         const SystemState& state) {
  std::vector<std::string> out;
  if (p >= parent.component_ids.size()) return out;
  const Component* current = state.find(parent.component_ids[p]);
  if (current == nullptr || !is_affine(current->kind)) return out;
  for (const auto& [other, best] : state.best) {
    if (other == task_id || p >= best.component_ids.size()) continue;
    const Component* c = state.find(best.component_ids[p]);
    if (c == nullptr || c->id == current->id) continue;
    if (c->kind == current->kind && c->in_dim == current->in_dim &&
        c->out_dim == current->out_dim && c->depth_hint == current->depth_hint &&
        std::find(out.begin(), out.end(), c->id) == out.end()) {
      out.push_back(c->id);
    }
  }
  return out;
}

bool is_legal(const MutationAction& a, const ModelPath& parent,
              const std::string& task_id, const SystemState& state,
              const MutationConfig& config) {
  const std::size_t n = parent.component_ids.size();
  switch (a.type) {
    case Type::kCloneLayer: {
      if (a.position >= n) return false;
      const Component* c = state.find(parent.component_ids[a.position]);
      return c != nullptr && is_affine(c->kind);
    }
    case Type::kRemoveTopLayer:
      return n > state.bounds.min_layers && n > 1;
    case Type::kAddLayerOnTop:
      return n < state.bounds.max_layers;
    case Type::kHyperparamStep:
      return (a.direction == 1 || a.direction == -1) &&
             config.space.step(parent.hyperparams, a.field, a.direction).has_value();
    case Type::kSwapTransferSource:
      return !swap_candidates(parent, a.position, task_id, state).empty();
  }
  return false;
}

// Re-samples an embedding for a new input resolution so the layer computes
// the same function on the features both resolutions share.
std::vector<float> resample_embedding(const Component& emb, std::uint32_t new_in) {
  const std::uint32_t old_in = emb.in_dim;
  const std::uint32_t out = emb.out_dim;
  std::vector<float> p(expected_param_count(ComponentKind::kEmbeddingStub, new_in, out), 0.0f);
  for (std::uint32_t o = 0; o < out; ++o) {
    for (std::uint32_t k = 0; k < new_in; ++k) {
      float w = 0.0f;
      if (new_in > old_in) {
        // low -> high: low column j is high column 2j
        if (k % 2 == 0 && k / 2 < old_in) w = emb.params[static_cast<std::size_t>(o) * old_in + k / 2];
      } else {
        // high -> low: keep the even columns
        if (2 * k < old_in) w = emb.params[static_cast<std::size_t>(o) * old_in + 2 * k];
      }
      p[static_cast<std::size_t>(o) * new_in + k] = w;
    }
    p[static_cast<std::size_t>(new_in) * out + o] =
        emb.params[static_cast<std::size_t>(old_in) * out + o];
  }
  return p;
}

}  // namespace

std::string MutationAction::descriptor() const {
  switch (type) {
    case Type::kCloneLayer: return "clone:" + std::to_string(position);
    case Type::kRemoveTopLayer: return "remove_top";
    case Type::kAddLayerOnTop: return "add_top";
    case Type::kHyperparamStep:
      return "hp:" + std::string(to_string(field)) + (direction > 0 ? ":up" : ":down");
    case Type::kSwapTransferSource: return "swap:" + std::to_string(position);
  }
  return "unknown";
}

ModelPath sample_parent(const SystemState& state, const std::string& task_id,
                        CounterRng& rng, const MutationConfig& config) {
  const bool want_own = rng.uniform() < config.own_parent_prob;
  std::vector<const ModelPath*> others;
  for (const auto& [t, p] : state.best) {
    if (t != task_id) others.push_back(&p);
  }
  if (!want_own && !others.empty()) {
    return *others[rng.below(others.size())];
  }
  auto own = state.best.find(task_id);
  if (own != state.best.end()) return own->second;
  if (state.root.component_ids.empty()) {
    throw Error(ErrorCode::kNoParentAvailable, "system has neither root nor best paths");
  }
  return state.root;
}

std::vector<MutationAction> legal_actions(const ModelPath& parent,
                                          const std::string& task_id,
                                          const SystemState& state,
                                          const MutationConfig& config) {
  std::vector<MutationAction> candidates;
  const std::size_t n = parent.component_ids.size();
  for (std::size_t p = 0; p < n; ++p) candidates.push_back(MutationAction::swap(p));
  for (std::size_t p = 0; p < n; ++p) candidates.push_back(MutationAction::clone(p));
  candidates.push_back(MutationAction::remove_top());
  candidates.push_back(MutationAction::add_top());
  for (HyperField f : kAllHyperFields) {
    candidates.push_back(MutationAction::step(f, -1));
    candidates.push_back(MutationAction::step(f, +1));
  }
  std::vector<MutationAction> legal;
  for (const auto& a : candidates) {
    if (is_legal(a, parent, task_id, state, config)) legal.push_back(a);
  }
  return legal;
}

std::vector<MutationAction> sample_mutations(const ModelPath& parent,
                                             const std::vector<MutationAction>& legal,
                                             CounterRng& rng,
                                             const MutationConfig& config) {
  std::vector<MutationAction> drawn;
  for (const auto& a : legal) {
    if (rng.bernoulli(parent.mu.get(a.descriptor(), config.mu))) drawn.push_back(a);
  }
  auto has = [&](Type t) {
    return std::any_of(drawn.begin(), drawn.end(), [t](const auto& a) { return a.type == t; });
  };
  const bool removing = has(Type::kRemoveTopLayer);
  const std::size_t top = parent.component_ids.empty() ? 0 : parent.component_ids.size() - 1;

  std::vector<MutationAction> out;
  for (const auto& a : drawn) {
    switch (a.type) {
      case Type::kAddLayerOnTop:
        if (removing) continue;
        break;
      case Type::kCloneLayer:
        if (removing && a.position == top) continue;
        if (std::find(drawn.begin(), drawn.end(), MutationAction::swap(a.position)) !=
            drawn.end()) {
          continue;
        }
        break;
      case Type::kSwapTransferSource:
        if (removing && a.position == top) continue;
        break;
      case Type::kHyperparamStep:
        if (a.direction > 0 &&
            std::find(drawn.begin(), drawn.end(), MutationAction::step(a.field, -1)) !=
                drawn.end()) {
          continue;
        }
        break;
      case Type::kRemoveTopLayer:
        break;
    }
    out.push_back(a);
  }
  return out;
}

Child apply_mutations(const ModelPath& parent, const std::string& task_id,
                      const std::vector<MutationAction>& actions,
                      const SystemState& state, CounterRng& rng,
                      const MutationConfig& config) {
  const TaskInfo& info = task_info(state, task_id);
  for (const auto& a : actions) {
    if (!is_legal(a, parent, task_id, state, config)) {
      throw Error(ErrorCode::kIllegalMutation, "illegal action " + a.descriptor());
    }
  }

  Child child;
  child.applied = actions;
  ModelPath& path = child.path;
  path = parent;
  path.task_id = task_id;
  path.score = 0.0;
  path.val_accuracy = 0.0;
  path.test_accuracy = 0.0;
  path.iteration = -1;
  path.parent_fingerprint =
      parent.task_id.empty() ? std::nullopt : std::optional<std::string>(fingerprint(parent));
  const bool own_lineage = parent.task_id == task_id && !parent.head_id.empty();

  auto add_fresh = [&](Component c) {
    auto ptr = std::make_shared<const Component>(std::move(c));
    child.fresh.push_back(ptr);
    return ptr->id;
  };

  // Position actions against the parent's layout.
  for (const auto& a : actions) {
    if (a.type == Type::kSwapTransferSource) {
      const auto candidates = swap_candidates(parent, a.position, task_id, state);
      path.component_ids[a.position] = candidates[rng.below(candidates.size())];
      child.unfrozen.erase(a.position);
    } else if (a.type == Type::kCloneLayer) {
      child.unfrozen.insert(a.position);
    }
  }

  for (const auto& a : actions) {
    if (a.type == Type::kRemoveTopLayer) {
      child.unfrozen.erase(path.component_ids.size() - 1);
      path.component_ids.pop_back();
    } else if (a.type == Type::kAddLayerOnTop) {
      const Component& top = state.at(path.component_ids.back());
      const std::uint32_t width = top.out_dim;
      const auto depth = static_cast<std::uint32_t>(path.component_ids.size());
      if (top.kind == ComponentKind::kActivation) {
        path.component_ids.push_back(add_fresh(make_component(
            ComponentKind::kDense, width, width, init_near_identity(width, rng), task_id, depth)));
        child.unfrozen.insert(depth);
      } else {
        path.component_ids.push_back(add_fresh(
            make_component(ComponentKind::kActivation, width, width, {}, {}, depth)));
      }
    }
  }

  for (const auto& a : actions) {
    if (a.type != Type::kHyperparamStep) continue;
    const auto stepped = config.space.step(path.hyperparams, a.field, a.direction);
    path.hyperparams = *stepped;
    if (a.field == HyperField::kInputResolution) {
      const Component& emb = state.at(path.component_ids[0]);
      const std::uint32_t width = input_width(info.input_dim, path.hyperparams.input_resolution);
      if (emb.in_dim != width) {
        path.component_ids[0] = add_fresh(make_component(
            ComponentKind::kEmbeddingStub, width, emb.out_dim,
            resample_embedding(emb, width), task_id, 0));
        child.unfrozen.insert(0);
      }
    }
  }

  // Head: the own lineage fine-tunes its head; anything else gets a fresh one.
  const std::uint32_t top_width = [&] {
    const std::string& top_id = path.component_ids.back();
    for (const auto& f : child.fresh) {
      if (f->id == top_id) return f->out_dim;
    }
    return state.at(top_id).out_dim;
  }();
  const Component* head = own_lineage ? state.find(parent.head_id) : nullptr;
  if (head == nullptr || head->in_dim != top_width || head->out_dim != info.n_classes) {
    path.head_id = add_fresh(make_component(
        ComponentKind::kDense, top_width, info.n_classes,
        init_glorot(top_width, info.n_classes, rng), task_id,
        static_cast<std::uint32_t>(path.component_ids.size())));
  }
  return child;
}

MuTable update_mu(const MuTable& parent_mu, const std::vector<MutationAction>& applied,
                  const std::vector<MutationAction>& considered, bool child_won,
                  const MutationConfig& config) {
  MuTable out = parent_mu;
  if (!child_won) return out;
  std::set<std::string> applied_keys;
  for (const auto& a : applied) applied_keys.insert(a.descriptor());
  std::set<std::string> keys(applied_keys);
  for (const auto& a : considered) keys.insert(a.descriptor());
  for (const auto& [k, p] : parent_mu.probs) keys.insert(k);
  for (const auto& k : keys) {
    const double p = parent_mu.get(k, config.mu);
    out.probs[k] = applied_keys.count(k) ? p * (1.0 + config.mu_eta)
                                         : p * (1.0 - config.mu_eta);
  }
  out.clamp(config.mu);
  return out;
}

}  // namespace muevo
