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

// muevo command line: run experiments, emit reports, collect store garbage.

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "muevo/coordinator.hpp"
#include "muevo/error.hpp"
#include "muevo/report.hpp"
#include "muevo/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void print_error(std::string_view code, const std::string& message,
                 const json& extra = json::object()) {
  json record = {{"code", code}, {"message", message}};
  for (const auto& [k, v] : extra.items()) record[k] = v;
  std::cerr << json{{"error", record}}.dump() << std::endl;
}

fs::path self_executable(const char* argv0) {
  std::error_code ec;
  fs::path p = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) return p;
  return fs::absolute(argv0);
}

std::vector<fs::path> store_roots(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) return {dir};
  std::vector<fs::path> roots;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_directory() && fs::exists(it->path() / "manifest.json")) {
      roots.push_back(it->path());
    }
  }
  std::sort(roots.begin(), roots.end());
  if (roots.empty()) {
    throw muevo::Error(muevo::ErrorCode::kStoreError, "no store under " + dir.string());
  }
  return roots;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"muevo: multiagent evolutionary multitask system"};
  app.require_subcommand(1);

  std::string config_file, mode, store_dir;
  bool processes = false, equal_budget = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations, repetitions;
  auto* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", config_file, "experiment config (JSON)")->required();
  run->add_option("--mode", mode, "sequential or multiagent")
      ->required()
      ->check(CLI::IsMember({"sequential", "multiagent"}));
  run->add_flag("--processes", processes, "one OS process per agent");
  run->add_flag("--equal-budget", equal_budget, "same training budget for every task");
  run->add_option("--store", store_dir, "run directory");
  run->add_option("--seed", seed, "experiment seed");
  run->add_option("--iterations", iterations, "task-set iterations")->check(CLI::PositiveNumber);
  run->add_option("--repetitions", repetitions, "repetitions")->check(CLI::PositiveNumber);

  std::vector<std::string> run_dirs;
  std::string out_dir = "report";
  auto* report = app.add_subcommand("report", "emit CSV reports and plots");
  report->add_option("--runs", run_dirs, "run directories")->required()->expected(1, -1);
  report->add_option("--out", out_dir, "output directory");

  std::string gc_dir;
  auto* gc = app.add_subcommand("gc", "remove unreferenced blobs and temp files");
  gc->add_option("--store", gc_dir, "store or run directory")->required();

  std::string agent_id, timings_file;
  std::uint64_t agent_seed = 0;
  auto* agent = app.add_subcommand("agent", "");
  agent->group("");
  agent->add_option("--config", config_file)->required();
  agent->add_option("--store", store_dir)->required();
  agent->add_option("--agent", agent_id)->required();
  agent->add_option("--seed", agent_seed)->required();
  agent->add_option("--timings", timings_file);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    if (run->parsed()) {
      muevo::ExperimentConfig config = muevo::load_config(config_file);
      config.mode = muevo::parse_run_mode(mode);
      if (processes) config.processes = true;
      if (equal_budget) config.equal_budget = true;
      if (!store_dir.empty()) config.store = store_dir;
      if (seed) config.seed = *seed;
      if (iterations) config.iterations = *iterations;
      if (repetitions) config.repetitions = *repetitions;
      config.store = fs::absolute(config.store);
      const muevo::RunRecord record = muevo::run_experiment(config, self_executable(argv[0]));
      json summary = json::array();
      for (const auto& rep : record.repetitions) {
        const auto& last = rep.iterations.back();
        summary.push_back({{"repetition", rep.index},
                           {"wall_clock_s", last.wall_clock_s},
                           {"mean_test_acc", last.mean_test_acc},
                           {"mean_val_acc", last.mean_val_acc}});
      }
      std::cout << json{{"run", config.store.string()},
                        {"mode", muevo::to_string(config.mode)},
                        {"repetitions", summary}}
                       .dump()
                << std::endl;
    } else if (report->parsed()) {
      std::vector<muevo::LabeledRun> runs;
      std::set<std::string> used;
      for (const auto& dir : run_dirs) {
        std::string label = fs::path(dir).lexically_normal().filename().string();
        if (label.empty()) label = fs::path(dir).lexically_normal().parent_path().filename().string();
        if (label.empty()) label = "run";
        std::string unique = label;
        for (int i = 2; !used.insert(unique).second; ++i) unique = label + "-" + std::to_string(i);
        runs.push_back({unique, muevo::load_run_record(dir)});
      }
      for (const auto& f : muevo::emit_report(runs, out_dir)) std::cout << f.string() << "\n";
    } else if (gc->parsed()) {
      json out = json::array();
      for (const auto& root : store_roots(gc_dir)) {
        muevo::Store store = muevo::Store::open(root);
        const muevo::GcReport r = store.gc();
        out.push_back({{"store", root.string()},
                       {"removed_components", r.removed_components},
                       {"removed_temp_files", r.removed_temp_files},
                       {"kept_components", r.kept_components}});
      }
      std::cout << out.dump() << std::endl;
    } else if (agent->parsed()) {
      const muevo::ExperimentConfig config = muevo::load_config(config_file);
      muevo::run_agent_process(config, store_dir, agent_id, agent_seed, timings_file);
    }
  } catch (const muevo::BarrierTimeout& e) {
    print_error(muevo::to_string(e.code()), e.what(),
                {{"iteration", e.iteration()}, {"missing_agents", e.missing_agents()}});
    return 1;
  } catch (const muevo::Error& e) {
    print_error(muevo::to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
