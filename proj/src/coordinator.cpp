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

#include "muevo/coordinator.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "muevo/error.hpp"
#include "muevo/rng.hpp"

extern char** environ;

namespace muevo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTagRepetition = 0x7265;
constexpr std::uint64_t kTagRoot = 0x726F6F74;
constexpr std::uint64_t kTagAgents = 0x6167;

template <typename T>
class Channel {
 public:
  void send(T value) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  T receive() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty(); });
    T value = std::move(queue_.front());
    queue_.pop_front();
    return value;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> queue_;
};

void write_text_atomic(const fs::path& file, const std::string& text) {
  const fs::path tmp = file.parent_path() / (".tmp-" + file.filename().string());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::kStoreError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw Error(ErrorCode::kStoreError, "cannot rename to " + file.string());
}

json read_json_file(const fs::path& file, ErrorCode code) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(code, "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(code, file.string() + ": " + e.what());
  }
}

double seconds_between(std::int64_t from_ns, std::int64_t to_ns) {
  return static_cast<double>(to_ns - from_ns) * 1e-9;
}

TaskIterationTiming to_timing(const std::string& agent_id, const std::string& task_id,
                              const IterationResult& r, std::int64_t origin_ns) {
  TaskIterationTiming t;
  t.agent_id = agent_id;
  t.task_id = task_id;
  t.iteration = r.iteration;
  t.start_s = seconds_between(origin_ns, r.start_ns);
  t.end_s = seconds_between(origin_ns, r.end_ns);
  t.best_changed = r.best_changed;
  t.conflicts = r.conflicts;
  return t;
}

json iteration_result_to_json(const IterationResult& r) {
  return {{"iteration", r.iteration},     {"start_ns", r.start_ns},
          {"end_ns", r.end_ns},           {"best_changed", r.best_changed},
          {"best_score", r.best_score},   {"conflicts", r.conflicts}};
}

IterationResult iteration_result_from_json(const json& j) {
  IterationResult r;
  r.iteration = j.at("iteration").get<int>();
  r.start_ns = j.at("start_ns").get<std::int64_t>();
  r.end_ns = j.at("end_ns").get<std::int64_t>();
  r.best_changed = j.at("best_changed").get<bool>();
  r.best_score = j.at("best_score").get<double>();
  r.conflicts = j.at("conflicts").get<int>();
  r.wall_time_s = seconds_between(r.start_ns, r.end_ns);
  return r;
}

const TaskData& find_task(const std::vector<TaskData>& tasks, const std::string& id) {
  for (const auto& t : tasks) {
    if (t.spec.task_id == id) return t;
  }
  throw Error(ErrorCode::kConfigError, "unknown task " + id);
}

std::vector<std::string> task_ids(const std::vector<TaskData>& tasks) {
  std::vector<std::string> ids;
  for (const auto& t : tasks) ids.push_back(t.spec.task_id);
  return ids;
}

void fill_wall_clock(std::vector<IterationMetrics>& metrics,
                     const std::vector<TaskIterationTiming>& timings) {
  for (auto& m : metrics) {
    double end = 0.0;
    for (const auto& t : timings) {
      if (t.iteration == m.iteration - 1) end = std::max(end, t.end_s);
    }
    m.wall_clock_s = end;
  }
}

}  // namespace

std::string agent_id_for(const std::string& task_id) { return "agent-" + task_id; }

std::uint64_t repetition_seed(std::uint64_t seed, int repetition) {
  return CounterRng(seed).derive({kTagRepetition, static_cast<std::uint64_t>(repetition)}).next_u64();
}

TrainBudget task_budget(const ExperimentConfig& config) {
  TrainBudget b;
  b.epochs = config.agent.epochs;
  b.samples_cap = config.agent.samples_cap;
  b.equal_budget = config.equal_budget;
  return b;
}

AgentConfig make_agent_config(const ExperimentConfig& config, const std::string& task_id,
                              std::uint64_t rep_seed) {
  AgentConfig a;
  a.agent_id = agent_id_for(task_id);
  a.task_id = task_id;
  a.generations_per_iteration = config.agent.generations;
  a.samples_per_generation = config.agent.samples;
  a.budget = task_budget(config);
  a.cost_scale = config.agent.cost_scale;
  a.rng_seed = CounterRng(rep_seed).derive({kTagAgents}).next_u64();
  a.mutation = config.agent.mutation;
  a.sample_workers = config.agent.sample_workers;
  a.barrier_timeout = std::chrono::milliseconds(
      static_cast<std::int64_t>(std::ceil(config.agent.barrier_timeout_s * 1000.0)));
  a.publish_retries = config.agent.publish_retries;
  a.image_through_previous_iteration = config.mode == RunMode::kMultiagent;
  return a;
}

RootModel make_experiment_root(const ExperimentConfig& config, std::uint32_t input_dim,
                               std::uint64_t rep_seed) {
  const std::uint64_t seed = CounterRng(rep_seed).derive({kTagRoot}).next_u64();
  return make_root(input_dim, config.root.width, config.root.hidden_layers, seed,
                   config.hyperparams);
}

Manifest make_manifest(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                       const RootModel& root) {
  Manifest m;
  for (const auto& t : tasks) {
    m.tasks[t.spec.task_id] = TaskInfo{static_cast<std::uint32_t>(t.spec.n_classes),
                                       static_cast<std::uint32_t>(t.spec.input_dim)};
    m.agents[agent_id_for(t.spec.task_id)] = t.spec.task_id;
  }
  m.root = root.path;
  m.bounds = config.layer_bounds;
  return m;
}

double budget_samples(const ExperimentConfig& config, const TaskData& task) {
  const double per_epoch =
      config.equal_budget
          ? static_cast<double>(config.agent.samples_cap)
          : std::min(static_cast<double>(task.train.size()),
                     static_cast<double>(config.agent.samples_cap));
  return per_epoch * config.agent.epochs;
}

double speedup_bound(const ExperimentConfig& config, const std::vector<TaskData>& tasks) {
  double sum = 0.0;
  double max = 0.0;
  for (const auto& t : tasks) {
    const double b = budget_samples(config, t);
    sum += b;
    max = std::max(max, b);
  }
  return max > 0.0 ? sum / max : 0.0;
}

json run_record_to_json(const RunRecord& r) {
  json reps = json::array();
  for (const auto& rep : r.repetitions) {
    json iters = json::array();
    for (const auto& m : rep.iterations) {
      json tasks = json::array();
      for (const auto& t : m.tasks) {
        tasks.push_back({{"task_id", t.task_id},
                         {"val_accuracy", t.val_accuracy},
                         {"test_accuracy", t.test_accuracy},
                         {"acc_params", t.acc_params},
                         {"flops", t.flops}});
      }
      iters.push_back({{"iteration", m.iteration},
                       {"wall_clock_s", m.wall_clock_s},
                       {"mean_val_acc", m.mean_val_acc},
                       {"mean_test_acc", m.mean_test_acc},
                       {"mean_acc_params", m.mean_acc_params},
                       {"mean_flops", m.mean_flops},
                       {"tasks", tasks}});
    }
    json timings = json::array();
    for (const auto& t : rep.timings) {
      timings.push_back({{"agent_id", t.agent_id},
                         {"task_id", t.task_id},
                         {"iteration", t.iteration},
                         {"start_s", t.start_s},
                         {"end_s", t.end_s},
                         {"best_changed", t.best_changed},
                         {"conflicts", t.conflicts}});
    }
    json finals = json::array();
    for (const auto& f : rep.final_paths) {
      finals.push_back({{"task_id", f.task_id},
                        {"depth", f.depth},
                        {"hyperparams", f.hyperparams},
                        {"mu", f.mu}});
    }
    reps.push_back({{"index", rep.index},
                    {"seed", rep.seed},
                    {"store", rep.store},
                    {"iterations", iters},
                    {"timings", timings},
                    {"final_paths", finals}});
  }
  return {{"format", "muevo-run/1"},
          {"mode", to_string(r.mode)},
          {"processes", r.processes},
          {"equal_budget", r.equal_budget},
          {"iterations", r.iterations},
          {"tasks", r.tasks},
          {"speedup_bound", r.speedup_bound},
          {"config", r.config},
          {"repetitions", reps}};
}

RunRecord run_record_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "muevo-run/1") {
      throw Error(ErrorCode::kReportError, "unsupported run record format");
    }
    RunRecord r;
    r.mode = parse_run_mode(j.at("mode").get<std::string>());
    r.processes = j.at("processes").get<bool>();
    r.equal_budget = j.at("equal_budget").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.tasks = j.at("tasks").get<std::vector<std::string>>();
    r.speedup_bound = j.at("speedup_bound").get<double>();
    r.config = j.at("config");
    for (const auto& jr : j.at("repetitions")) {
      RepetitionRecord rep;
      rep.index = jr.at("index").get<int>();
      rep.seed = jr.at("seed").get<std::uint64_t>();
      rep.store = jr.at("store").get<std::string>();
      for (const auto& ji : jr.at("iterations")) {
        IterationMetrics m;
        m.iteration = ji.at("iteration").get<int>();
        m.wall_clock_s = ji.at("wall_clock_s").get<double>();
        m.mean_val_acc = ji.at("mean_val_acc").get<double>();
        m.mean_test_acc = ji.at("mean_test_acc").get<double>();
        m.mean_acc_params = ji.at("mean_acc_params").get<double>();
        m.mean_flops = ji.at("mean_flops").get<double>();
        for (const auto& jt : ji.at("tasks")) {
          m.tasks.push_back({jt.at("task_id").get<std::string>(),
                             jt.at("val_accuracy").get<double>(),
                             jt.at("test_accuracy").get<double>(),
                             jt.at("acc_params").get<double>(), jt.at("flops").get<double>()});
        }
        rep.iterations.push_back(std::move(m));
      }
      for (const auto& jt : jr.at("timings")) {
        TaskIterationTiming t;
        t.agent_id = jt.at("agent_id").get<std::string>();
        t.task_id = jt.at("task_id").get<std::string>();
        t.iteration = jt.at("iteration").get<int>();
        t.start_s = jt.at("start_s").get<double>();
        t.end_s = jt.at("end_s").get<double>();
        t.best_changed = jt.at("best_changed").get<bool>();
        t.conflicts = jt.at("conflicts").get<int>();
        rep.timings.push_back(std::move(t));
      }
      for (const auto& jf : jr.at("final_paths")) {
        FinalPath f;
        f.task_id = jf.at("task_id").get<std::string>();
        f.depth = jf.at("depth").get<std::size_t>();
        f.hyperparams = jf.at("hyperparams").get<HyperParams>();
        f.mu = jf.at("mu").get<std::map<std::string, double>>();
        rep.final_paths.push_back(std::move(f));
      }
      r.repetitions.push_back(std::move(rep));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kReportError, std::string("malformed run record: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kReportError) throw;
    throw Error(ErrorCode::kReportError, std::string("malformed run record: ") + e.what());
  }
}

RunRecord load_run_record(const fs::path& run_dir) {
  return run_record_from_json(read_json_file(run_dir / "run.json", ErrorCode::kReportError));
}

std::vector<IterationMetrics> collect_metrics(Store& store, const std::vector<std::string>& tasks,
                                              int iterations) {
  std::vector<IterationMetrics> out;
  for (int n = 0; n < iterations; ++n) {
    const SystemState image = store.load_system_image(n);
    IterationMetrics m;
    m.iteration = n + 1;
    for (const auto& id : tasks) {
      auto it = image.best.find(id);
      if (it == image.best.end()) {
        throw Error(ErrorCode::kStoreError,
                    "task " + id + " has no best through iteration " + std::to_string(n));
      }
      const ModelPath& p = it->second;
      TaskMetrics t{id, p.val_accuracy, p.test_accuracy, accounted_parameters(p, image),
                    inference_flops(p, image)};
      m.mean_val_acc += t.val_accuracy;
      m.mean_test_acc += t.test_accuracy;
      m.mean_acc_params += t.acc_params;
      m.mean_flops += t.flops;
      m.tasks.push_back(std::move(t));
    }
    const double k = static_cast<double>(std::max<std::size_t>(tasks.size(), 1));
    m.mean_val_acc /= k;
    m.mean_test_acc /= k;
    m.mean_acc_params /= k;
    m.mean_flops /= k;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<FinalPath> collect_final_paths(Store& store, const std::vector<std::string>& tasks) {
  const SystemState image = store.load_system_image();
  std::vector<FinalPath> out;
  for (const auto& id : tasks) {
    auto it = image.best.find(id);
    if (it == image.best.end()) continue;
    out.push_back({id, it->second.component_ids.size(), it->second.hyperparams,
                   it->second.mu.probs});
  }
  return out;
}

RepetitionOutcome run_sequential(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                                 Store& store, std::uint64_t rep_seed) {
  RepetitionOutcome out;
  const std::int64_t origin = steady_now_ns();
  for (int n = 0; n < config.iterations; ++n) {
    for (const auto& task : tasks) {
      AgentConfig agent = make_agent_config(config, task.spec.task_id, rep_seed);
      agent.image_through_previous_iteration = false;
      if (store.iteration_complete(agent.agent_id, n)) continue;
      const IterationResult r = run_task_iteration(agent, store, task, n);
      store.mark_iteration_complete(agent.agent_id, n);
      out.timings.push_back(to_timing(agent.agent_id, task.spec.task_id, r, origin));
    }
  }
  return out;
}

namespace {

struct AgentReport {
  std::string agent_id;
  std::string task_id;
  std::vector<IterationResult> results;
  std::vector<AgentEvent> events;
  std::exception_ptr error;
};

RepetitionOutcome run_multiagent_threads(const ExperimentConfig& config,
                                         const std::vector<TaskData>& tasks, Store& store,
                                         std::uint64_t rep_seed) {
  const std::int64_t origin = steady_now_ns();
  std::atomic<bool> cancel{false};
  Channel<AgentReport> channel;
  std::vector<std::thread> workers;
  for (const auto& task : tasks) {
    AgentConfig agent = make_agent_config(config, task.spec.task_id, rep_seed);
    agent.image_through_previous_iteration = true;
    agent.cancel = &cancel;
    workers.emplace_back([agent, &task, &store, &channel, &config] {
      AgentReport report{agent.agent_id, agent.task_id, {}, {}, nullptr};
      try {
        // Each agent holds its own handle, as a separate process would.
        Store handle = Store::open(store.root());
        report.results = run_agent(agent, handle, task, config.iterations, &report.events);
      } catch (...) {
        report.error = std::current_exception();
      }
      channel.send(std::move(report));
    });
  }

  RepetitionOutcome out;
  std::exception_ptr first_error;
  bool first_cancelled = false;
  for (std::size_t received = 0; received < tasks.size(); ++received) {
    AgentReport report = channel.receive();
    if (report.error) {
      cancel = true;
      bool cancelled = false;
      try {
        std::rethrow_exception(report.error);
      } catch (const Error& e) {
        cancelled = e.code() == ErrorCode::kCancelled;
      } catch (...) {
      }
      // A cancelled sibling is a symptom; keep the root cause.
      if (!first_error || (first_cancelled && !cancelled)) {
        first_error = report.error;
        first_cancelled = cancelled;
      }
      continue;
    }
    for (const auto& r : report.results) {
      out.timings.push_back(to_timing(report.agent_id, report.task_id, r, origin));
    }
    out.events.insert(out.events.end(), report.events.begin(), report.events.end());
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

RepetitionOutcome run_multiagent_processes(const std::vector<TaskData>& tasks, Store& store,
                                           std::uint64_t rep_seed, const ProcessLaunch& launch) {
  std::error_code ec;
  fs::create_directories(launch.timings_dir, ec);
  if (ec) throw Error(ErrorCode::kStoreError, "mkdir " + launch.timings_dir.string());
  const std::int64_t origin = steady_now_ns();

  struct Child {
    pid_t pid;
    std::string agent_id;
    std::string task_id;
    fs::path timings;
  };
  std::vector<Child> children;
  auto kill_all = [&] {
    for (const auto& c : children) ::kill(c.pid, SIGTERM);
  };
  for (const auto& task : tasks) {
    const std::string agent_id = agent_id_for(task.spec.task_id);
    const fs::path timings = launch.timings_dir / (agent_id + ".json");
    std::vector<std::string> args = {launch.executable.string(),
                                     "agent",
                                     "--config",
                                     launch.config_file.string(),
                                     "--store",
                                     store.root().string(),
                                     "--agent",
                                     agent_id,
                                     "--seed",
                                     std::to_string(rep_seed),
                                     "--timings",
                                     timings.string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    const int rc = ::posix_spawn(&pid, args[0].c_str(), nullptr, nullptr, argv.data(), environ);
    if (rc != 0) {
      kill_all();
      for (const auto& c : children) ::waitpid(c.pid, nullptr, 0);
      throw Error(ErrorCode::kAgentFailed, "cannot spawn agent " + agent_id + ": " +
                                               std::strerror(rc));
    }
    children.push_back({pid, agent_id, task.spec.task_id, timings});
  }

  std::string failure;
  for (std::size_t done = 0; done < children.size(); ++done) {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) break;
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    if (!ok && failure.empty()) {
      for (const auto& c : children) {
        if (c.pid == pid) {
          failure = "agent " + c.agent_id + " failed with " +
                    (WIFEXITED(status) ? "exit status " + std::to_string(WEXITSTATUS(status))
                                       : "signal " + std::to_string(WTERMSIG(status)));
        }
      }
      kill_all();
    }
  }
  if (!failure.empty()) throw Error(ErrorCode::kAgentFailed, failure);

  RepetitionOutcome out;
  for (const auto& c : children) {
    const json j = read_json_file(c.timings, ErrorCode::kAgentFailed);
    for (const auto& jr : j.at("results")) {
      out.timings.push_back(to_timing(c.agent_id, c.task_id, iteration_result_from_json(jr), origin));
    }
    for (const auto& je : j.at("events")) {
      out.events.push_back({je.at("kind").get<std::string>() == "start" ? AgentEvent::Kind::kStart
                                                                         : AgentEvent::Kind::kComplete,
                            je.at("agent_id").get<std::string>(), je.at("iteration").get<int>(),
                            je.at("time_ns").get<std::int64_t>()});
    }
  }
  return out;
}

}  // namespace

RepetitionOutcome run_multiagent(const ExperimentConfig& config, const std::vector<TaskData>& tasks,
                                 Store& store, std::uint64_t rep_seed,
                                 const std::optional<ProcessLaunch>& launch) {
  RepetitionOutcome out = launch ? run_multiagent_processes(tasks, store, rep_seed, *launch)
                                 : run_multiagent_threads(config, tasks, store, rep_seed);
  std::sort(out.timings.begin(), out.timings.end(),
            [](const TaskIterationTiming& a, const TaskIterationTiming& b) {
              return std::tie(a.iteration, a.agent_id) < std::tie(b.iteration, b.agent_id);
            });
  return out;
}

void run_agent_process(const ExperimentConfig& config, const fs::path& store_dir,
                       const std::string& agent_id, std::uint64_t rep_seed,
                       const fs::path& timings_file) {
  Store store = Store::open(store_dir);
  auto it = store.manifest().agents.find(agent_id);
  if (it == store.manifest().agents.end()) {
    throw Error(ErrorCode::kConfigError, "agent " + agent_id + " is not registered in the store");
  }
  const std::vector<TaskData> tasks = load_tasks(config);
  const TaskData& task = find_task(tasks, it->second);
  AgentConfig agent = make_agent_config(config, task.spec.task_id, rep_seed);
  agent.image_through_previous_iteration = true;
  std::vector<AgentEvent> events;
  const auto results = run_agent(agent, store, task, config.iterations, &events);

  json jr = json::array();
  for (const auto& r : results) jr.push_back(iteration_result_to_json(r));
  json je = json::array();
  for (const auto& e : events) {
    je.push_back({{"kind", e.kind == AgentEvent::Kind::kStart ? "start" : "complete"},
                  {"agent_id", e.agent_id},
                  {"iteration", e.iteration},
                  {"time_ns", e.time_ns}});
  }
  if (!timings_file.empty()) {
    write_text_atomic(timings_file, canonical_json(json{{"results", jr}, {"events", je}}));
  }
}

RunRecord run_experiment(const ExperimentConfig& config, const fs::path& executable) {
  const std::vector<TaskData> tasks = load_tasks(config);
  const std::vector<std::string> ids = task_ids(tasks);
  const fs::path run_dir = config.store;
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw Error(ErrorCode::kStoreError, "mkdir " + run_dir.string() + ": " + ec.message());
  const fs::path config_file = run_dir / "config.json";
  write_text_atomic(config_file, canonical_json(config_to_json(config)));

  RunRecord record;
  record.mode = config.mode;
  record.processes = config.processes && config.mode == RunMode::kMultiagent;
  record.equal_budget = config.equal_budget;
  record.iterations = config.iterations;
  record.tasks = ids;
  record.speedup_bound = speedup_bound(config, tasks);
  record.config = config_to_json(config);

  const auto input_dim = static_cast<std::uint32_t>(tasks.front().spec.input_dim);
  for (int k = 0; k < config.repetitions; ++k) {
    const std::uint64_t rep_seed = repetition_seed(config.seed, k);
    const std::string rep_name = "rep-" + std::to_string(k);
    const RootModel root = make_experiment_root(config, input_dim, rep_seed);
    Store store = Store::create(run_dir / rep_name, make_manifest(config, tasks, root),
                                root.components);
    RepetitionOutcome outcome;
    if (config.mode == RunMode::kSequential) {
      outcome = run_sequential(config, tasks, store, rep_seed);
    } else if (record.processes) {
      if (executable.empty()) {
        throw Error(ErrorCode::kConfigError, "process mode needs the agent executable");
      }
      outcome = run_multiagent(config, tasks, store, rep_seed,
                               ProcessLaunch{executable, config_file,
                                             run_dir / (rep_name + ".timings")});
    } else {
      outcome = run_multiagent(config, tasks, store, rep_seed);
    }

    RepetitionRecord rep;
    rep.index = k;
    rep.seed = rep_seed;
    rep.store = rep_name;
    rep.timings = std::move(outcome.timings);
    rep.iterations = collect_metrics(store, ids, config.iterations);
    fill_wall_clock(rep.iterations, rep.timings);
    rep.final_paths = collect_final_paths(store, ids);
    record.repetitions.push_back(std::move(rep));
  }
  write_text_atomic(run_dir / "run.json", canonical_json(run_record_to_json(record)));
  return record;
}

double measured_speedup(const RunRecord& sequential, const RunRecord& multiagent) {
  if (sequential.mode != RunMode::kSequential || multiagent.mode != RunMode::kMultiagent) {
    throw Error(ErrorCode::kReportError, "speedup needs a sequential and a multiagent run");
  }
  if (sequential.tasks != multiagent.tasks || sequential.iterations != multiagent.iterations ||
      sequential.repetitions.size() != multiagent.repetitions.size()) {
    throw Error(ErrorCode::kReportError, "speedup needs runs of the same shape");
  }
  double sum = 0.0;
  int count = 0;
  for (std::size_t r = 0; r < sequential.repetitions.size(); ++r) {
    for (int n = 0; n < sequential.iterations; ++n) {
      double seq = 0.0;
      double slowest = 0.0;
      for (const auto& t : sequential.repetitions[r].timings) {
        if (t.iteration == n) seq += t.wall_s();
      }
      for (const auto& t : multiagent.repetitions[r].timings) {
        if (t.iteration == n) slowest = std::max(slowest, t.wall_s());
      }
      if (seq <= 0.0 || slowest <= 0.0) continue;
      sum += seq / slowest;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::kReportError, "runs carry no timings");
  return sum / count;
}

}  // namespace muevo
