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

#include "muevo/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "muevo/error.hpp"

namespace muevo {

namespace {

constexpr std::uint64_t kTagGeneration = 0x6E4;
constexpr std::uint64_t kTagRoot = 0x2007;

std::optional<Candidate> make_candidate(const AgentConfig& agent, const SystemState& image,
                                        const TaskData& task, const CostNorms& norms,
                                        int iteration, int generation, std::size_t sample) {
  CounterRng rng = CounterRng(agent.rng_seed)
                       .derive({string_tag(task.spec.task_id.data(), task.spec.task_id.size()),
                                kTagGeneration, static_cast<std::uint64_t>(iteration),
                                static_cast<std::uint64_t>(generation), sample});
  const std::string& task_id = task.spec.task_id;
  try {
    const ModelPath parent = sample_parent(image, task_id, rng, agent.mutation);
    const auto legal = legal_actions(parent, task_id, image, agent.mutation);
    const auto actions = sample_mutations(parent, legal, rng, agent.mutation);
    Child child = apply_mutations(parent, task_id, actions, image, rng, agent.mutation);

    SystemState local = image;
    for (const auto& c : child.fresh) local.add(c);
    const std::uint64_t train_seed = rng.next_u64();
    const Trainer& trainer = agent.trainer ? agent.trainer : Trainer(&train_child);
    TrainOutcome outcome =
        trainer(child.path, local, child.unfrozen, task, agent.budget, train_seed);
    for (auto& [pos, c] : outcome.new_components) {
      local.add(std::make_shared<const Component>(std::move(c)));
    }

    Candidate cand;
    cand.path = outcome.trained_path;
    cand.path.generation_born = iteration * agent.generations_per_iteration + generation;
    cand.path.val_accuracy = evaluate(cand.path, local, task.val);
    local.best[task_id] = cand.path;
    const double acc_params = accounted_parameters(cand.path, local);
    const double flops = inference_flops(cand.path, local);
    cand.path.score = reward(cand.path.val_accuracy, acc_params, flops, norms, agent.cost_scale);
    cand.path.mu = update_mu(parent.mu, child.applied, legal, true, agent.mutation);
    cand.sample_index = sample;
    cand.train_loss = outcome.final_train_loss;
    cand.steps = outcome.steps_executed;
    cand.cross_task_parent = parent.task_id != task_id;
    cand.applied = child.applied;
    for (const auto& id : cand.path.all_component_ids()) {
      if (image.find(id) == nullptr) cand.components.push_back(local.components.at(id));
    }
    return cand;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kTrainingDiverged || e.code() == ErrorCode::kInvalidBudget) {
      return std::nullopt;
    }
    throw;
  }
}

}  // namespace

double reward(double val_accuracy, double acc_params, double flops,
              const CostNorms& norms, double scale) {
  if (!std::isfinite(val_accuracy) || !std::isfinite(acc_params) || !std::isfinite(flops) ||
      !std::isfinite(scale) || !std::isfinite(norms.params_norm) ||
      !std::isfinite(norms.flops_norm) || norms.params_norm <= 0.0 || norms.flops_norm <= 0.0) {
    throw Error(ErrorCode::kInvalidReward, "reward inputs must be finite with positive norms");
  }
  const double size_factor = 1.0 - scale * std::min(acc_params / norms.params_norm, kCostClamp);
  const double compute_factor = 1.0 - scale * std::min(flops / norms.flops_norm, kCostClamp);
  return val_accuracy * size_factor * compute_factor;
}

RootModel make_root(std::uint32_t input_dim, std::uint32_t width, int hidden_layers,
                    std::uint64_t seed, const HyperParams& hyperparams) {
  CounterRng rng = CounterRng(seed).derive({kTagRoot});
  RootModel root;
  root.path.hyperparams = hyperparams;
  auto push = [&](Component c) {
    root.path.component_ids.push_back(c.id);
    root.components.push_back(std::move(c));
  };
  const std::uint32_t emb_in = input_width(input_dim, hyperparams.input_resolution);
  push(make_component(ComponentKind::kEmbeddingStub, emb_in, width,
                      init_glorot(emb_in, width, rng), {}, 0));
  push(make_component(ComponentKind::kActivation, width, width, {}, {}, 1));
  for (int i = 0; i < hidden_layers; ++i) {
    const auto depth = static_cast<std::uint32_t>(root.path.component_ids.size());
    push(make_component(ComponentKind::kDense, width, width, init_glorot(width, width, rng), {},
                        depth));
    push(make_component(ComponentKind::kActivation, width, width, {}, {}, depth + 1));
  }
  return root;
}

CostNorms root_norms(const SystemState& state, const std::string& task_id) {
  const TaskInfo& info = state.tasks.at(task_id);
  const ModelPath& root = state.root;
  const std::uint32_t width = state.at(root.component_ids.back()).out_dim;
  const double head_params = static_cast<double>(width) * info.n_classes + info.n_classes;
  const double head_flops = 2.0 * width * info.n_classes;
  CostNorms n;
  n.params_norm = total_parameters(root, state) + head_params;
  n.flops_norm = inference_flops(root, state) + head_flops;
  return n;
}

std::vector<Candidate> run_generation(const AgentConfig& agent, const SystemState& image,
                                      const TaskData& task, const CostNorms& norms,
                                      int iteration, int generation) {
  const auto n = static_cast<std::size_t>(std::max(agent.samples_per_generation, 0));
  std::vector<std::optional<Candidate>> slots(n);
  const auto workers = static_cast<std::size_t>(
      std::clamp(agent.sample_workers, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t s = 0; s < n; ++s) {
      slots[s] = make_candidate(agent, image, task, norms, iteration, generation, s);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t s = next++; s < n; s = next++) {
            slots[s] = make_candidate(agent, image, task, norms, iteration, generation, s);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<Candidate> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

const Candidate* select_best(const std::vector<Candidate>& candidates) {
  const Candidate* best = nullptr;
  for (const auto& c : candidates) {
    if (best == nullptr || c.path.score > best->path.score ||
        (c.path.score == best->path.score && c.sample_index < best->sample_index)) {
      best = &c;
    }
  }
  return best;
}

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

IterationResult run_task_iteration(const AgentConfig& agent, Store& store,
                                   const TaskData& task, int iteration) {
  IterationResult result;
  result.iteration = iteration;
  result.start_ns = steady_now_ns();
  const std::string& task_id = task.spec.task_id;

  SystemState image = store.load_system_image(
      agent.image_through_previous_iteration ? std::optional<int>(iteration - 1) : std::nullopt);
  const CostNorms norms = root_norms(image, task_id);

  std::optional<ModelPath> stored;
  if (auto it = image.best.find(task_id); it != image.best.end()) stored = it->second;

  std::optional<Candidate> winner;
  std::map<std::string, ComponentPtr> unpublished;
  for (int g = 0; g < agent.generations_per_iteration; ++g) {
    const auto candidates = run_generation(agent, image, task, norms, iteration, g);
    const Candidate* best = select_best(candidates);
    if (best == nullptr) continue;
    const double bar = winner ? winner->path.score
                              : (stored ? stored->score : -std::numeric_limits<double>::infinity());
    if (best->path.score > bar) {
      winner = *best;
      // Later generations may pick the winner as their parent.
      for (const auto& c : winner->components) {
        image.add(c);
        unpublished[c->id] = c;
      }
      image.best[task_id] = winner->path;
    }
  }

  result.best_score = stored ? stored->score : 0.0;
  if (winner) {
    ModelPath path = winner->path;
    path.iteration = iteration;
    {
      SystemState local = image;
      path.test_accuracy = evaluate(path, local, task.test);
    }
    for (const auto& id : path.all_component_ids()) {
      if (auto it = unpublished.find(id); it != unpublished.end()) {
        store.publish_component(*it->second);
      }
    }
    std::optional<std::string> expected =
        stored ? std::optional<std::string>(fingerprint(*stored)) : std::nullopt;
    for (int attempt = 0; attempt <= agent.publish_retries; ++attempt) {
      if (store.publish_best(task_id, path, expected) == PublishStatus::kOk) {
        result.best_changed = true;
        result.best_score = path.score;
        break;
      }
      ++result.conflicts;
      const auto latest = store.latest_best(task_id);
      if (latest && latest->path.score >= path.score) {
        result.best_score = latest->path.score;
        break;
      }
      expected = latest ? std::optional<std::string>(latest->fingerprint) : std::nullopt;
    }
  }
  result.end_ns = steady_now_ns();
  result.wall_time_s = static_cast<double>(result.end_ns - result.start_ns) * 1e-9;
  return result;
}

std::vector<IterationResult> run_agent(const AgentConfig& agent, Store& store,
                                       const TaskData& task, int num_iterations,
                                       std::vector<AgentEvent>* events) {
  std::vector<IterationResult> results;
  int first = 0;
  while (first < num_iterations && store.iteration_complete(agent.agent_id, first)) ++first;
  for (int n = first; n < num_iterations; ++n) {
    store.wait_for_barrier(n, agent.barrier_timeout, std::chrono::milliseconds(20),
                           agent.cancel);
    if (events) events->push_back({AgentEvent::Kind::kStart, agent.agent_id, n, steady_now_ns()});
    results.push_back(run_task_iteration(agent, store, task, n));
    if (events) {
      events->push_back({AgentEvent::Kind::kComplete, agent.agent_id, n, steady_now_ns()});
    }
    store.mark_iteration_complete(agent.agent_id, n);
  }
  return results;
}

}  // namespace muevo
