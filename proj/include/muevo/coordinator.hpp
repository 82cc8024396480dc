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

#ifndef MUEVO_COORDINATOR_HPP_
#define MUEVO_COORDINATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "muevo/evolution.hpp"
#include "muevo/graph.hpp"
#include "muevo/mutation.hpp"
#include "muevo/store.hpp"
#include "muevo/tasks.hpp"

namespace muevo {

enum class RunMode { kSequential, kMultiagent };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);  // kConfigError

struct CsvTaskSource {
  std::string task_id;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;
};

struct AgentTemplate {
  int generations = 4;
  int samples = 8;
  int epochs = 4;
  int samples_cap = 512;
  double cost_scale = 1.0;
  int sample_workers = 1;
  double barrier_timeout_s = 1800.0;
  int publish_retries = 8;
  MutationConfig mutation;
};

struct RootTemplate {
  std::uint32_t width = 24;
  int hidden_layers = 1;
};

struct ExperimentConfig {
  RunMode mode = RunMode::kSequential;
  // Exactly one of family / csv_tasks is used.
  std::optional<FamilySpec> family;
  std::vector<CsvTaskSource> csv_tasks;
  // Sequential visiting order; empty means declaration order.
  std::vector<std::string> task_order;
  RootTemplate root;
  HyperParams hyperparams;
  LayerBounds layer_bounds;
  AgentTemplate agent;
  int iterations = 10;
  int repetitions = 1;
  bool equal_budget = false;
  bool processes = false;
  std::uint64_t seed = 1;
  std::filesystem::path store = "muevo-run";
};

// Unknown keys and out-of-range values raise kConfigError. Relative CSV
// paths resolve against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& file);

// Tasks in visiting order.
std::vector<TaskData> load_tasks(const ExperimentConfig& config);

std::string agent_id_for(const std::string& task_id);
std::uint64_t repetition_seed(std::uint64_t seed, int repetition);
TrainBudget task_budget(const ExperimentConfig& config);
AgentConfig make_agent_config(const ExperimentConfig& config, const std::string& task_id,
                              std::uint64_t rep_seed);
RootModel make_experiment_root(const ExperimentConfig& config, std::uint32_t input_dim,
                               std::uint64_t rep_seed);
Manifest make_manifest(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                       const RootModel& root);

// Training samples one task iteration of `task` consumes per child.
double budget_samples(const ExperimentConfig& config, const TaskData& task);
// Speedup ceiling for one agent per task: sum of budgets over the largest.
double speedup_bound(const ExperimentConfig& config, const std::vector<TaskData>& tasks);

struct TaskIterationTiming {
  std::string agent_id;
  std::string task_id;
  int iteration = 0;
  double start_s = 0.0;  // relative to the repetition start
  double end_s = 0.0;
  bool best_changed = false;
  int conflicts = 0;

  double wall_s() const { return end_s - start_s; }
};

struct TaskMetrics {
  std::string task_id;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  double acc_params = 0.0;
  double flops = 0.0;
};

struct IterationMetrics {
  int iteration = 0;  // 1-based
  double wall_clock_s = 0.0;
  double mean_val_acc = 0.0;
  double mean_test_acc = 0.0;
  double mean_acc_params = 0.0;
  double mean_flops = 0.0;
  std::vector<TaskMetrics> tasks;
};

struct FinalPath {
  std::string task_id;
  std::size_t depth = 0;
  HyperParams hyperparams;
  std::map<std::string, double> mu;
};

struct RepetitionRecord {
  int index = 0;
  std::uint64_t seed = 0;
  std::string store;  // relative to the run directory
  std::vector<IterationMetrics> iterations;
  std::vector<TaskIterationTiming> timings;
  std::vector<FinalPath> final_paths;
};

struct RunRecord {
  RunMode mode = RunMode::kSequential;
  bool processes = false;
  bool equal_budget = false;
  int iterations = 0;
  std::vector<std::string> tasks;
  double speedup_bound = 0.0;
  nlohmann::json config;
  std::vector<RepetitionRecord> repetitions;
};

nlohmann::json run_record_to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);  // kReportError
RunRecord load_run_record(const std::filesystem::path& run_dir);

// Per-iteration metrics of the retained bests, read back from a store.
std::vector<IterationMetrics> collect_metrics(Store& store, const std::vector<std::string>& tasks,
                                              int iterations);
std::vector<FinalPath> collect_final_paths(Store& store, const std::vector<std::string>& tasks);

struct RepetitionOutcome {
  std::vector<TaskIterationTiming> timings;
  std::vector<AgentEvent> events;  // multiagent only
};

// One repetition on an existing store. Sequential mode visits the tasks in
// order within a single thread and writes the same completion markers the
// agents would.
RepetitionOutcome run_sequential(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                                 Store& store, std::uint64_t rep_seed);

struct ProcessLaunch {
  std::filesystem::path executable;
  std::filesystem::path config_file;
  std::filesystem::path timings_dir;
};

// One agent per task. In-process agents are threads; with `launch` each
// agent is a separate OS process running the `agent` subcommand.
RepetitionOutcome run_multiagent(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                                 Store& store, std::uint64_t rep_seed,
                                 const std::optional<ProcessLaunch>& launch = std::nullopt);

// Entry point of an agent process. Writes its timings and events as JSON.
void run_agent_process(const ExperimentConfig& config, const std::filesystem::path& store_dir,
                       const std::string& agent_id, std::uint64_t rep_seed,
                       const std::filesystem::path& timings_file);

// Full experiment under config.store:
//   config.json   effective configuration
//   run.json      run record
//   rep-<k>/      store of repetition k
RunRecord run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& executable = {});

// Mean over iterations (and paired repetitions) of the sequential
// task-set-iteration time over the slowest agent's task-iteration time.
double measured_speedup(const RunRecord& sequential, const RunRecord& multiagent);

}  // namespace muevo

#endif  // MUEVO_COORDINATOR_HPP_
