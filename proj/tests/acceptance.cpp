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

// Acceptance checks. Usage: muevo_acceptance <criterion 1-9>
// Prints one "[PASS]" or "[FAIL]" line and exits nonzero on failure.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>

#include "json.hpp"
#include "muevo/coordinator.hpp"
#include "muevo/error.hpp"
#include "muevo/evolution.hpp"
#include "muevo/neural.hpp"
#include "muevo/report.hpp"
#include "muevo/store.hpp"

using namespace muevo;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "muevo-accept-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

json base_config() {
  std::ifstream in(fs::path(MUEVO_SOURCE_DIR) / "configs" / "mccb_like.json");
  return json::parse(in);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

// --- 1: curve shape ---------------------------------------------------------

Verdict criterion1() {
  ScratchDir dir;
  ExperimentConfig c = config_from_json(base_config());
  c.repetitions = 5;
  c.iterations = 10;
  c.mode = RunMode::kSequential;
  c.store = dir / "seq";
  const auto seq = aggregate_curve(run_experiment(c));
  c.mode = RunMode::kMultiagent;
  c.store = dir / "multi";
  const auto multi = aggregate_curve(run_experiment(c));
  const auto& s1 = seq.front();
  const auto& m1 = multi.front();
  const auto& s10 = seq.back();
  const auto& m10 = multi.back();
  const double pooled =
      std::sqrt((s10.std_test_acc * s10.std_test_acc + m10.std_test_acc * m10.std_test_acc) / 2);
  const double gap = std::abs(s10.mean_test_acc - m10.mean_test_acc);
  const bool a = m1.mean_test_acc < s1.mean_test_acc;
  const bool b = gap <= pooled;
  return {a && b,
          fmt("iteration 1 multiagent %.4f vs sequential %.4f (%s); iteration 10 gap %.4f vs "
              "pooled std %.4f (%s)",
              m1.mean_test_acc, s1.mean_test_acc, a ? "lower" : "not lower", gap, pooled,
              b ? "within" : "outside")};
}

// --- 2: speedup -------------------------------------------------------------

Verdict criterion2() {
  ScratchDir dir;
  const unsigned threads = std::thread::hardware_concurrency();
  auto measure = [&](const json& j, const std::string& name, double* bound) {
    ExperimentConfig c = config_from_json(j);
    c.repetitions = 1;
    c.iterations = 3;
    c.processes = true;
    c.mode = RunMode::kSequential;
    c.store = dir / (name + "-seq");
    const RunRecord seq = run_experiment(c, MUEVO_CLI_PATH);
    c.mode = RunMode::kMultiagent;
    c.store = dir / (name + "-multi");
    const RunRecord multi = run_experiment(c, MUEVO_CLI_PATH);
    *bound = multi.speedup_bound;
    return measured_speedup(seq, multi);
  };

  json equal = base_config();
  equal["equal_budget"] = true;
  double equal_bound = 0.0;
  const double equal_speedup = measure(equal, "equal", &equal_bound);

  json prop = base_config();
  prop["agent"]["samples_cap"] = 512;
  json sizes = json::array();
  for (int i = 0; i < 8; ++i) {
    sizes.push_back({{"train", i % 2 == 0 ? 512 : 128}, {"val", 256}, {"test", 256}});
  }
  prop["family"]["sizes"] = sizes;
  double prop_bound = 0.0;
  const double prop_speedup = measure(prop, "proportional", &prop_bound);

  const bool host = threads >= 8;
  const bool a = equal_speedup >= 0.6 * 8;
  const bool b = prop_speedup <= prop_bound && prop_speedup >= 0.5 * prop_bound;
  return {host && a && b,
          fmt("%u hardware threads (need >= 8); equal-budget speedup %.2f (need >= 4.80, bound "
              "%.2f); budget-proportional speedup %.2f (need within [%.2f, %.2f])",
              threads, equal_speedup, equal_bound, prop_speedup, 0.5 * prop_bound, prop_bound)};
}

// --- 3: forgetting immunity ---------------------------------------------------

Verdict criterion3() {
  ScratchDir dir;
  json j = base_config();
  j["family"]["n_tasks"] = 3;
  ExperimentConfig c = config_from_json(j);
  c.mode = RunMode::kMultiagent;
  const auto tasks = load_tasks(c);
  const std::uint64_t rep_seed = repetition_seed(c.seed, 0);
  const RootModel root = make_experiment_root(c, tasks.front().spec.input_dim, rep_seed);
  Store store = Store::create(dir / "store", make_manifest(c, tasks, root), root.components);
  std::map<std::string, const TaskData*> by_id;
  for (const auto& t : tasks) by_id[t.spec.task_id] = &t;

  struct Seen {
    double val;
    double test;
  };
  std::map<std::string, Seen> first_seen;
  std::size_t checks = 0;
  std::size_t mismatches = 0;
  for (int n = 0; n < 10; ++n) {
    c.iterations = n + 1;
    run_multiagent(c, tasks, store, rep_seed);
    Store reader = Store::open(dir / "store");
    if (!reader.audit().ok()) return {false, fmt("audit failed after iteration %d", n)};
    SystemState image = reader.load_system_image();
    for (const auto& t : tasks) {
      for (const auto& rec : reader.best_history(t.spec.task_id)) {
        for (const auto& id : rec.path.all_component_ids()) {
          if (!image.find(id)) image.add(reader.load_component(id));
        }
        const double val = evaluate(rec.path, image, by_id[t.spec.task_id]->val);
        const double test = evaluate(rec.path, image, by_id[t.spec.task_id]->test);
        auto [it, fresh] = first_seen.try_emplace(rec.fingerprint, Seen{val, test});
        ++checks;
        if (val != rec.path.val_accuracy || test != rec.path.test_accuracy ||
            (!fresh && (it->second.val != val || it->second.test != test))) {
          ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0 && !first_seen.empty(),
          fmt("%zu best paths re-evaluated %zu times over 10 iterations, %zu mismatches",
              first_seen.size(), checks, mismatches)};
}

// --- 4: gradients -----------------------------------------------------------

Verdict criterion4() {
  CounterRng rng(2026);
  const double eps = 1e-4;
  std::size_t coords = 0;
  std::size_t bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = static_cast<std::uint32_t>(2 + rng.below(5));
    const auto width = static_cast<std::uint32_t>(2 + rng.below(5));
    const auto classes = static_cast<std::uint32_t>(2 + rng.below(4));
    const int hidden = static_cast<int>(rng.below(2));  // 2 or 3 affine layers
    Network net;
    net.input_dim = in;
    auto affine = [&](ComponentKind kind, std::uint32_t i, std::uint32_t o) {
      Layer l{kind, i, o, std::vector<double>(static_cast<std::size_t>(i) * o + o)};
      for (auto& x : l.params) x = rng.uniform(-0.8, 0.8);
      net.layers.push_back(std::move(l));
    };
    affine(ComponentKind::kEmbeddingStub, in, width);
    net.layers.push_back(Layer{ComponentKind::kActivation, width, width, {}});
    for (int h = 0; h < hidden; ++h) {
      affine(ComponentKind::kDense, width, width);
      net.layers.push_back(Layer{ComponentKind::kActivation, width, width, {}});
    }
    affine(ComponentKind::kDense, width, classes);

    const std::size_t rows = 3 + rng.below(6);
    Matrix x(rows, in);
    for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
    std::vector<int> y(rows);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));
    const std::vector<bool> all(net.layers.size(), true);
    const LossGrads lg = loss_and_grads(net, x, y, all);
    const std::vector<bool> none(net.layers.size(), false);
    for (int k = 0; k < 8; ++k) {
      std::size_t li = 0;
      do {
        li = rng.below(net.layers.size());
      } while (net.layers[li].params.empty());
      const std::size_t pj = rng.below(net.layers[li].params.size());
      Network plus = net;
      Network minus = net;
      plus.layers[li].params[pj] += eps;
      minus.layers[li].params[pj] -= eps;
      const double numeric =
          (loss_and_grads(plus, x, y, none).loss - loss_and_grads(minus, x, y, none).loss) /
          (2 * eps);
      const double analytic = (*lg.grads[li])[pj];
      const double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), 1e-10});
      worst = std::max(worst, rel);
      bad += rel > 1e-4;
      ++coords;
    }
  }
  return {coords >= 100 && bad == 0,
          fmt("%zu coordinates on 20 random paths, worst relative error %.3g, %zu above 1e-4",
              coords, worst, bad)};
}

// --- 5: store safety --------------------------------------------------------

constexpr int kSlots = 4;
constexpr int kPublishes = 1000;

[[noreturn]] void publish_worker(const fs::path& root, int slot, int start, int attempt,
                                 int progress_fd) {
  int rc = 0;
  try {
    Store s = Store::open(root);
    CounterRng faults = CounterRng(99).derive({static_cast<std::uint64_t>(slot),
                                               static_cast<std::uint64_t>(attempt)});
    s.set_fault_hook([&](std::string_view) {
      if (faults.bernoulli(0.0015)) ::_exit(0);
    });
    const ModelPath& root_path = s.manifest().root;
    for (int j = start; j < kPublishes; ++j) {
      // Even publishes use a head every slot writes with identical bytes.
      CounterRng prng = j % 2 == 0
                            ? CounterRng(7).derive({static_cast<std::uint64_t>(j)})
                            : CounterRng(8).derive({static_cast<std::uint64_t>(slot),
                                                    static_cast<std::uint64_t>(j)});
      std::vector<float> params(6 * 3 + 3);
      for (auto& p : params) p = static_cast<float>(prng.uniform(-0.5, 0.5));
      const std::string task = "t" + std::to_string((j + slot) % kSlots);
      const Component head =
          make_component(ComponentKind::kDense, 6, 3, params, j % 2 == 0 ? "" : task, 4);
      s.publish_component(head);
      ModelPath p = root_path;
      p.task_id = task;
      p.head_id = head.id;
      p.iteration = j;
      p.score = j;
      bool done = false;
      for (int retry = 0; retry < 1000 && !done; ++retry) {
        const auto latest = s.latest_best(task);
        done = s.publish_best(task, p, latest ? std::optional(latest->fingerprint)
                                              : std::nullopt) == PublishStatus::kOk;
      }
      if (!done) {
        rc = 3;
        break;
      }
      const char tick = 'x';
      if (::write(progress_fd, &tick, 1) != 1) {
        rc = 4;
        break;
      }
    }
  } catch (...) {
    rc = 2;
  }
  ::_exit(rc);
}

[[noreturn]] void reader_worker(const fs::path& root, const fs::path& stop,
                                const fs::path& result) {
  std::size_t loads = 0;
  std::size_t failures = 0;
  std::size_t paths = 0;
  while (!fs::exists(stop)) {
    try {
      Store s = Store::open(root);
      const SystemState image = s.load_system_image();
      for (const auto& [task, p] : image.best) {
        ++paths;
        if (!validate_path(p, image).empty()) ++failures;
      }
    } catch (...) {
      ++failures;
    }
    ++loads;
  }
  std::ofstream(result) << loads << " " << failures << " " << paths;
  ::_exit(0);
}

Verdict criterion5() {
  ScratchDir dir;
  const fs::path root = dir / "store";
  {
    Manifest m;
    const RootModel r = make_root(8, 6, 1, 5);
    m.root = r.path;
    for (int t = 0; t < kSlots; ++t) m.tasks["t" + std::to_string(t)] = TaskInfo{3, 8};
    Store::create(root, m, r.components);
  }
  std::fflush(stdout);
  const pid_t reader = ::fork();
  if (reader == 0) reader_worker(root, dir / "stop", dir / "reader.txt");

  struct Slot {
    int read_fd = -1;
    int write_fd = -1;
    pid_t pid = -1;
    int done = 0;
    int attempts = 0;
  };
  std::vector<Slot> slots(kSlots);
  auto spawn = [&](int k) {
    Slot& s = slots[k];
    const pid_t pid = ::fork();
    if (pid == 0) publish_worker(root, k, s.done, s.attempts, s.write_fd);
    s.pid = pid;
    ++s.attempts;
  };
  for (int k = 0; k < kSlots; ++k) {
    int fds[2];
    if (::pipe(fds) != 0) return {false, "pipe failed"};
    ::fcntl(fds[0], F_SETFL, O_NONBLOCK);
    slots[k].read_fd = fds[0];
    slots[k].write_fd = fds[1];
    spawn(k);
  }

  CounterRng chaos(17);
  int kills = 0;
  int crashes = 0;
  int worker_errors = 0;
  int live = kSlots;
  while (live > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    for (int k = 0; k < kSlots; ++k) {
      Slot& s = slots[k];
      char buf[4096];
      ssize_t n;
      while ((n = ::read(s.read_fd, buf, sizeof buf)) > 0) s.done += static_cast<int>(n);
      if (s.pid < 0) continue;
      int status = 0;
      if (::waitpid(s.pid, &status, WNOHANG) == s.pid) {
        while ((n = ::read(s.read_fd, buf, sizeof buf)) > 0) s.done += static_cast<int>(n);
        s.pid = -1;
        if (WIFEXITED(status) && WEXITSTATUS(status) != 0) ++worker_errors;
        if (s.done >= kPublishes) {
          --live;
        } else {
          if (WIFEXITED(status) && WEXITSTATUS(status) == 0) ++crashes;
          spawn(k);
        }
        continue;
      }
      if (kills < 60 && chaos.bernoulli(0.01)) {
        ::kill(s.pid, SIGKILL);
        ++kills;
      }
    }
  }
  std::ofstream(dir / "stop") << "";
  int status = 0;
  ::waitpid(reader, &status, 0);
  std::size_t loads = 0, read_failures = 0, read_paths = 0;
  std::ifstream(dir / "reader.txt") >> loads >> read_failures >> read_paths;

  Store s = Store::open(root);
  const AuditReport audit = s.audit();
  std::size_t temp_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    temp_files += e.path().filename().string().rfind(".tmp-", 0) == 0;
  }
  std::size_t torn = 0;
  std::size_t records = 0;
  for (int t = 0; t < kSlots; ++t) {
    try {
      records += s.best_history("t" + std::to_string(t)).size();
    } catch (const Error&) {
      ++torn;
    }
  }
  const SystemState final_image = s.load_system_image();
  std::size_t final_violations = 0;
  for (const auto& [task, p] : final_image.best) final_violations += !validate_path(p, final_image).empty();
  const int total = slots[0].done + slots[1].done + slots[2].done + slots[3].done;
  const bool ok = audit.ok() && torn == 0 && read_failures == 0 && loads > 0 &&
                  final_violations == 0 && worker_errors == 0 && total >= kSlots * kPublishes &&
                  kills + crashes > 0;
  return {ok, fmt("%d publishes from %d processes, %d SIGKILLs, %d injected crashes, %zu records, "
                  "%zu audit violations, %zu torn records, %zu leftover temp files; reader: %zu "
                  "images, %zu paths, %zu failures",
                  total, kSlots, kills, crashes, records, audit.violations.size(), torn,
                  temp_files, loads, read_paths, read_failures)};
}

// --- 6: barrier -------------------------------------------------------------

Verdict criterion6() {
  ScratchDir dir;
  json j = base_config();
  j["family"]["n_tasks"] = 4;
  j["agent"]["generations"] = 1;
  j["agent"]["samples"] = 2;
  ExperimentConfig c = config_from_json(j);
  c.mode = RunMode::kMultiagent;
  c.iterations = 6;
  const auto tasks = load_tasks(c);
  const std::uint64_t rep_seed = repetition_seed(c.seed, 0);
  const RootModel root = make_experiment_root(c, tasks.front().spec.input_dim, rep_seed);
  const Manifest manifest = make_manifest(c, tasks, root);

  Store store = Store::create(dir / "ordered", manifest, root.components);
  const RepetitionOutcome out = run_multiagent(c, tasks, store, rep_seed);
  std::map<int, std::int64_t> last_complete;
  std::map<int, std::int64_t> first_start;
  std::size_t starts = 0;
  for (const auto& e : out.events) {
    if (e.kind == AgentEvent::Kind::kComplete) {
      last_complete[e.iteration] = std::max(last_complete[e.iteration], e.time_ns);
    } else {
      ++starts;
      auto [it, fresh] = first_start.try_emplace(e.iteration, e.time_ns);
      if (!fresh) it->second = std::min(it->second, e.time_ns);
    }
  }
  int order_violations = 0;
  for (const auto& [n, t] : first_start) {
    if (n > 0 && t < last_complete[n - 1]) ++order_violations;
  }

  // Agent of the last task completes iteration 0 only.
  Store stalled_store = Store::create(dir / "stalled", manifest, root.components);
  const std::string stalled_task = tasks.back().spec.task_id;
  {
    AgentConfig a = make_agent_config(c, stalled_task, rep_seed);
    run_agent(a, stalled_store, tasks.back(), 1);
  }
  std::vector<std::vector<std::string>> named(tasks.size() - 1);
  std::vector<int> iterations(tasks.size() - 1, -1);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i + 1 < tasks.size(); ++i) {
    threads.emplace_back([&, i] {
      AgentConfig a = make_agent_config(c, tasks[i].spec.task_id, rep_seed);
      a.barrier_timeout = std::chrono::milliseconds(500);
      Store s = Store::open(dir / "stalled");
      try {
        run_agent(a, s, tasks[i], 6);
      } catch (const BarrierTimeout& e) {
        named[i] = e.missing_agents();
        iterations[i] = e.iteration();
      }
    });
  }
  for (auto& t : threads) t.join();
  const std::vector<std::string> expected{agent_id_for(stalled_task)};
  int exact = 0;
  for (std::size_t i = 0; i < named.size(); ++i) exact += named[i] == expected && iterations[i] == 2;
  const bool ok = starts == 24 && order_violations == 0 && exact == static_cast<int>(named.size());
  return {ok, fmt("%zu iteration starts, %d started before a peer finished the previous "
                  "iteration; %d/%zu waiting agents timed out at iteration 2 naming exactly %s",
                  starts, order_violations, exact, named.size(), expected[0].c_str())};
}

// --- 7: reward and selection ------------------------------------------------

Verdict criterion7() {
  ScratchDir dir;
  json j = base_config();
  j["family"]["n_tasks"] = 4;
  ExperimentConfig c = config_from_json(j);
  c.mode = RunMode::kMultiagent;
  c.iterations = 8;
  c.repetitions = 1;
  c.store = dir / "run";
  const RunRecord record = run_experiment(c);
  Store store = Store::open(dir / "run" / "rep-0");
  int drops = 0;
  std::size_t records = 0;
  for (const auto& task : record.tasks) {
    const auto hist = store.best_history(task);
    records += hist.size();
    for (std::size_t i = 1; i < hist.size(); ++i) drops += hist[i].path.score < hist[i - 1].path.score;
    double prev = -1.0;
    for (int n = 0; n < c.iterations; ++n) {
      const SystemState image = store.load_system_image(n);
      const auto it = image.best.find(task);
      if (it == image.best.end()) continue;
      drops += it->second.score < prev;
      prev = it->second.score;
    }
  }
  const bool audited = store.audit().ok();

  CounterRng rng(7);
  const CostNorms norms{1000.0, 5000.0};
  int identity_failures = 0;
  int monotone_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const double acc = rng.uniform();
    const double p = rng.uniform(0.0, 499.0);
    const double f = rng.uniform(0.0, 2499.0);
    identity_failures += reward(acc, p, f, norms, 0.0) != acc;
    const double scale = rng.uniform(0.01, 1.0);
    const double r = reward(acc + 0.01, p, f, norms, scale);
    monotone_failures += !(reward(acc + 0.01, p + 1.0, f, norms, scale) < r);
    monotone_failures += !(reward(acc + 0.01, p, f + 1.0, norms, scale) < r);
  }
  const bool ok = drops == 0 && audited && records > 0 && identity_failures == 0 &&
                  monotone_failures == 0;
  return {ok, fmt("%zu best records over %d iterations with %d reward decreases; scale 0 "
                  "identity failures %d/10000; cost monotonicity failures %d/20000",
                  records, c.iterations, drops, identity_failures, monotone_failures)};
}

// --- 8: transfer benefit ----------------------------------------------------

Verdict criterion8() {
  int wins = 0;
  double sum_transfer = 0.0;
  double sum_root = 0.0;
  constexpr int kTrials = 20;
  for (int trial = 0; trial < kTrials; ++trial) {
    FamilySpec spec;
    spec.family_seed = 100 + trial;
    spec.n_tasks = 2;
    spec.relatedness = 0.9;
    spec.noise_level = 0.1;
    spec.n_classes = 6;
    spec.input_dim = 16;
    spec.clusters_per_class = 3;
    spec.sizes = {SplitSizes{512, 256, 256}};
    const auto tasks = generate_family(spec);
    HyperParams hp;
    hp.learning_rate = 0.03;
    const RootModel root = make_root(16, 24, 1, 1000 + trial, hp);

    SystemState s;
    for (const auto& comp : root.components) s.add(std::make_shared<const Component>(comp));
    s.root = root.path;
    for (const auto& t : tasks) s.tasks[t.spec.task_id] = TaskInfo{6, 16};
    MutationConfig mc;
    CounterRng rng = CounterRng(31).derive({static_cast<std::uint64_t>(trial)});
    auto clone_all = [](const ModelPath& p, const SystemState& state) {
      std::vector<MutationAction> a;
      for (std::size_t i = 0; i < p.component_ids.size(); ++i) {
        if (!state.at(p.component_ids[i]).params.empty()) a.push_back(MutationAction::clone(i));
      }
      return a;
    };
    auto train = [&](const ModelPath& parent, const TaskData& task, const TrainBudget& budget,
                     std::uint64_t seed) {
      const std::string& id = task.spec.task_id;
      Child c = apply_mutations(parent, id, clone_all(parent, s), s, rng, mc);
      SystemState local = s;
      for (const auto& f : c.fresh) local.add(f);
      TrainOutcome out = train_child(c.path, local, c.unfrozen, task, budget, seed);
      for (auto& [pos, comp] : out.new_components) {
        local.add(std::make_shared<const Component>(std::move(comp)));
      }
      return std::pair{out.trained_path, local};
    };
    // Source: well-trained on sibling A, then published.
    auto [source, with_source] = train(root.path, tasks[0], TrainBudget{4, 2048, true}, 1);
    s = with_source;
    s.best[tasks[0].spec.task_id] = source;
    const TrainBudget target{4, 256, false};
    auto [transferred, st] = train(source, tasks[1], target, 2);
    auto [from_root, sr] = train(root.path, tasks[1], target, 2);
    const double acc_t = evaluate(transferred, st, tasks[1].val);
    const double acc_r = evaluate(from_root, sr, tasks[1].val);
    wins += acc_t > acc_r;
    sum_transfer += acc_t;
    sum_root += acc_r;
  }
  const bool ok = wins * 100 >= 80 * kTrials;
  return {ok, fmt("transferred children beat root-only children in %d/%d trials (mean val "
                  "accuracy %.4f vs %.4f, need >= 80%%)",
                  wins, kTrials, sum_transfer / kTrials, sum_root / kTrials)};
}

// --- 9: determinism and parity ----------------------------------------------

std::string drop_column(const std::string& csv, const std::string& column) {
  std::stringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  const auto skip = std::find(header.begin(), header.end(), column) - header.begin();
  std::string out;
  auto emit = [&](const std::string& row) {
    std::stringstream r(row);
    std::string cell;
    long i = 0;
    bool first = true;
    while (std::getline(r, cell, ',')) {
      if (i++ == skip) continue;
      out += (first ? "" : ",") + cell;
      first = false;
    }
    out += "\n";
  };
  emit(line);
  while (std::getline(in, line)) emit(line);
  return out;
}

Verdict criterion9() {
  ScratchDir dir;
  json one = base_config();
  one["family"]["n_tasks"] = 1;
  ExperimentConfig c = config_from_json(one);
  c.repetitions = 1;
  c.mode = RunMode::kSequential;
  c.store = dir / "p-seq";
  run_experiment(c);
  c.mode = RunMode::kMultiagent;
  c.store = dir / "p-multi";
  run_experiment(c);
  const auto seq_tree = tree(dir / "p-seq" / "rep-0");
  const bool parity = seq_tree == tree(dir / "p-multi" / "rep-0");

  ExperimentConfig full = config_from_json(base_config());
  full.repetitions = 2;
  full.iterations = 4;
  std::vector<LabeledRun> runs[2];
  bool stores_equal = true;
  for (int attempt = 0; attempt < 2; ++attempt) {
    for (RunMode mode : {RunMode::kSequential, RunMode::kMultiagent}) {
      full.mode = mode;
      full.store = dir / fmt("r%d-%s", attempt, std::string(to_string(mode)).c_str());
      runs[attempt].push_back({std::string(to_string(mode)), run_experiment(full)});
    }
    emit_report(runs[attempt], dir / fmt("report-%d", attempt));
  }
  for (RunMode mode : {RunMode::kSequential, RunMode::kMultiagent}) {
    for (int k = 0; k < 2; ++k) {
      const std::string m(to_string(mode));
      stores_equal &= tree(dir / ("r0-" + m) / fmt("rep-%d", k)) ==
                      tree(dir / ("r1-" + m) / fmt("rep-%d", k));
    }
  }
  int identical = 0;
  int differing = 0;
  int timing_only = 0;
  for (const auto& e : fs::directory_iterator(dir / "report-0")) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() != ".csv" || name == "speedup.csv") continue;
    const std::string a = read_file(e.path());
    const std::string b = read_file(dir / "report-1" / name);
    if (a == b) {
      ++identical;
    } else if (name.ends_with(".curves.csv") &&
               drop_column(a, "wall_clock_s") == drop_column(b, "wall_clock_s")) {
      ++timing_only;
    } else {
      ++differing;
    }
  }
  // Re-emitting from the same records is exact, timing columns included.
  emit_report(runs[0], dir / "report-again");
  const bool reemit = tree(dir / "report-0") == tree(dir / "report-again");
  const bool ok = parity && !seq_tree.empty() && stores_equal && differing == 0 && reemit;
  return {ok, fmt("1-task sequential vs multiagent stores %s (%zu files); rerun stores %s; "
                  "rerun CSVs: %d identical, %d differing only in measured wall_clock_s, %d "
                  "differing otherwise; report re-emission %s",
                  parity ? "identical" : "differ", seq_tree.size(),
                  stores_equal ? "identical" : "differ", identical, timing_only, differing,
                  reemit ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Verdict()>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};
  if (argc != 2 || !criteria.count(std::atoi(argv[1]))) {
    std::fprintf(stderr, "usage: %s <criterion 1-9>\n", argv[0]);
    return 2;
  }
  const int n = std::atoi(argv[1]);
  Verdict v;
  try {
    v = criteria.at(n)();
  } catch (const std::exception& e) {
    v = {false, std::string("error: ") + e.what()};
  }
  std::printf("[%s] criterion %d: %s\n", v.pass ? "PASS" : "FAIL", n, v.detail.c_str());
  return v.pass ? 0 : 1;
}
