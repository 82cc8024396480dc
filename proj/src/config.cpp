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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "muevo/coordinator.hpp"
#include "muevo/error.hpp"

namespace muevo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::kConfigError, msg);
}

// Strict object reader: every key must be consumed.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) config_error(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    const std::string name = where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) config_error(name + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) config_error(name + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        config_error(name + ": expected a non-negative integer");
      }
      out = v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) config_error(name + ": expected an integer");
      const auto x = v.get<std::int64_t>();
      if (x < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
          x > static_cast<std::int64_t>(std::numeric_limits<T>::max())) {
        config_error(name + ": out of range");
      }
      out = static_cast<T>(x);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) config_error(name + ": expected a number");
      out = v.get<double>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

  template <typename T>
  void get_list(const char* key, std::vector<T>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) config_error(where_ + "." + key + ": expected a non-empty array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      json wrap = {{"v", v[i]}};
      Fields f(wrap, where_ + "." + key + "[" + std::to_string(i) + "]");
      T x{};
      f.get("v", x);
      out.push_back(x);
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) config_error(where_ + ": unknown key \"" + k + "\"");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Resolution parse_resolution(const std::string& s, const std::string& where) {
  if (s == "low") return Resolution::kLow;
  if (s == "high") return Resolution::kHigh;
  config_error(where + ": resolution must be \"low\" or \"high\"");
}

void require(bool ok, const std::string& msg) {
  if (!ok) config_error(msg);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

FamilySpec parse_family(const json& j) {
  FamilySpec f;
  Fields r(j, "family");
  r.get("seed", f.family_seed);
  r.get("n_tasks", f.n_tasks);
  r.get("relatedness", f.relatedness);
  r.get("noise", f.noise_level);
  r.get("n_classes", f.n_classes);
  r.get("input_dim", f.input_dim);
  r.get("clusters_per_class", f.clusters_per_class);
  r.get("id_prefix", f.id_prefix);
  if (r.has("sizes")) {
    const json& sizes = r.raw("sizes");
    if (!sizes.is_array() || sizes.empty()) config_error("family.sizes: expected a non-empty array");
    f.sizes.clear();
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      Fields s(sizes[i], "family.sizes[" + std::to_string(i) + "]");
      SplitSizes z;
      s.get("train", z.train);
      s.get("val", z.val);
      s.get("test", z.test);
      s.finish();
      f.sizes.push_back(z);
    }
  }
  r.finish();
  require(f.n_tasks >= 1, "family.n_tasks must be >= 1");
  require(f.n_classes >= 2, "family.n_classes must be >= 2");
  require(f.input_dim >= 1, "family.input_dim must be >= 1");
  require(f.clusters_per_class >= 1, "family.clusters_per_class must be >= 1");
  require(is_probability(f.relatedness), "family.relatedness must be in [0, 1]");
  require(std::isfinite(f.noise_level) && f.noise_level >= 0.0, "family.noise must be >= 0");
  require(f.sizes.size() == 1 || f.sizes.size() == static_cast<std::size_t>(f.n_tasks),
          "family.sizes must hold 1 or n_tasks entries");
  for (const auto& z : f.sizes) {
    require(z.train >= 1 && z.val >= 1 && z.test >= 1, "family.sizes entries must be >= 1");
  }
  return f;
}

void parse_hyperparams(const json& j, HyperParams& hp, const std::string& where) {
  Fields r(j, where);
  r.get("learning_rate", hp.learning_rate);
  r.get("momentum", hp.momentum);
  r.get("batch_size", hp.batch_size);
  r.get("epochs", hp.epochs);
  std::string res(to_string(hp.input_resolution));
  r.get("input_resolution", res);
  hp.input_resolution = parse_resolution(res, where + ".input_resolution");
  r.finish();
}

void parse_search_space(const json& j, SearchSpace& space) {
  Fields r(j, "agent.search_space");
  r.get_list("learning_rates", space.learning_rates);
  r.get_list("momenta", space.momenta);
  r.get_list("batch_sizes", space.batch_sizes);
  r.get_list("epochs", space.epochs);
  std::vector<std::string> res;
  r.get_list("resolutions", res);
  if (!res.empty()) {
    space.resolutions.clear();
    for (const auto& s : res) {
      space.resolutions.push_back(parse_resolution(s, "agent.search_space.resolutions"));
    }
  }
  r.finish();
  for (double x : space.learning_rates) {
    require(std::isfinite(x) && x > 0.0, "search_space.learning_rates must be > 0");
  }
  for (double x : space.momenta) {
    require(std::isfinite(x) && x >= 0.0 && x < 1.0, "search_space.momenta must be in [0, 1)");
  }
  for (int x : space.batch_sizes) require(x >= 1, "search_space.batch_sizes must be >= 1");
  for (int x : space.epochs) require(x >= 1, "search_space.epochs must be >= 1");
}

void parse_agent(const json& j, AgentTemplate& a) {
  Fields r(j, "agent");
  r.get("generations", a.generations);
  r.get("samples", a.samples);
  r.get("epochs", a.epochs);
  r.get("samples_cap", a.samples_cap);
  r.get("cost_scale", a.cost_scale);
  r.get("sample_workers", a.sample_workers);
  r.get("barrier_timeout_s", a.barrier_timeout_s);
  r.get("publish_retries", a.publish_retries);
  r.get("own_parent_prob", a.mutation.own_parent_prob);
  r.get("mu_eta", a.mutation.mu_eta);
  r.get("mu_min", a.mutation.mu.p_min);
  r.get("mu_max", a.mutation.mu.p_max);
  r.get("mu_init", a.mutation.mu.p_init);
  if (r.has("search_space")) parse_search_space(r.raw("search_space"), a.mutation.space);
  r.finish();
  require(a.generations >= 1, "agent.generations must be >= 1");
  require(a.samples >= 1, "agent.samples must be >= 1");
  require(a.epochs >= 1, "agent.epochs must be >= 1");
  require(a.samples_cap >= 1, "agent.samples_cap must be >= 1");
  require(std::isfinite(a.cost_scale) && a.cost_scale >= 0.0, "agent.cost_scale must be >= 0");
  require(a.sample_workers >= 1, "agent.sample_workers must be >= 1");
  require(std::isfinite(a.barrier_timeout_s) && a.barrier_timeout_s > 0.0,
          "agent.barrier_timeout_s must be > 0");
  require(a.publish_retries >= 0, "agent.publish_retries must be >= 0");
  require(is_probability(a.mutation.own_parent_prob), "agent.own_parent_prob must be in [0, 1]");
  require(std::isfinite(a.mutation.mu_eta) && a.mutation.mu_eta > 0.0 && a.mutation.mu_eta <= 1.0,
          "agent.mu_eta must be in (0, 1]");
  const MuBounds& mb = a.mutation.mu;
  require(is_probability(mb.p_min) && is_probability(mb.p_max) && is_probability(mb.p_init) &&
              mb.p_min <= mb.p_init && mb.p_init <= mb.p_max,
          "agent mu bounds need 0 <= mu_min <= mu_init <= mu_max <= 1");
}

json family_to_json(const FamilySpec& f) {
  json sizes = json::array();
  for (const auto& z : f.sizes) sizes.push_back({{"train", z.train}, {"val", z.val}, {"test", z.test}});
  return {{"seed", f.family_seed},   {"n_tasks", f.n_tasks},
          {"relatedness", f.relatedness}, {"noise", f.noise_level},
          {"n_classes", f.n_classes}, {"input_dim", f.input_dim},
          {"clusters_per_class", f.clusters_per_class},
          {"sizes", sizes},          {"id_prefix", f.id_prefix}};
}

}  // namespace

std::string_view to_string(RunMode mode) {
  return mode == RunMode::kSequential ? "sequential" : "multiagent";
}

RunMode parse_run_mode(std::string_view text) {
  if (text == "sequential") return RunMode::kSequential;
  if (text == "multiagent") return RunMode::kMultiagent;
  config_error("mode must be \"sequential\" or \"multiagent\", got \"" + std::string(text) + "\"");
}

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  Fields r(j, "config");
  std::string mode(to_string(c.mode));
  r.get("mode", mode);
  c.mode = parse_run_mode(mode);
  if (r.has("family")) c.family = parse_family(r.raw("family"));
  if (r.has("csv_tasks")) {
    const json& list = r.raw("csv_tasks");
    if (!list.is_array() || list.empty()) config_error("csv_tasks: expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Fields t(list[i], "csv_tasks[" + std::to_string(i) + "]");
      CsvTaskSource src;
      std::string train, val, test;
      t.get("task_id", src.task_id);
      t.get("train", train);
      t.get("val", val);
      t.get("test", test);
      t.finish();
      require(!src.task_id.empty() && !train.empty() && !val.empty() && !test.empty(),
              "csv_tasks entries need task_id, train, val and test");
      auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
      };
      src.train = resolve(train);
      src.val = resolve(val);
      src.test = resolve(test);
      c.csv_tasks.push_back(std::move(src));
    }
  }
  require(c.family.has_value() != !c.csv_tasks.empty(),
          "config needs exactly one of \"family\" and \"csv_tasks\"");
  if (r.has("task_order")) {
    const json& order = r.raw("task_order");
    if (!order.is_array()) config_error("task_order: expected an array");
    for (const auto& t : order) {
      if (!t.is_string()) config_error("task_order: expected task id strings");
      c.task_order.push_back(t.get<std::string>());
    }
  }
  if (r.has("root")) {
    Fields rt(r.raw("root"), "root");
    rt.get("width", c.root.width);
    rt.get("hidden_layers", c.root.hidden_layers);
    rt.finish();
  }
  if (r.has("hyperparams")) parse_hyperparams(r.raw("hyperparams"), c.hyperparams, "hyperparams");
  if (r.has("layer_bounds")) {
    Fields lb(r.raw("layer_bounds"), "layer_bounds");
    lb.get("min", c.layer_bounds.min_layers);
    lb.get("max", c.layer_bounds.max_layers);
    lb.finish();
  }
  if (r.has("agent")) parse_agent(r.raw("agent"), c.agent);
  r.get("iterations", c.iterations);
  r.get("repetitions", c.repetitions);
  r.get("equal_budget", c.equal_budget);
  r.get("processes", c.processes);
  r.get("seed", c.seed);
  std::string store = c.store.string();
  r.get("store", store);
  c.store = store;
  r.finish();

  require(c.iterations >= 1, "iterations must be >= 1");
  require(c.repetitions >= 1, "repetitions must be >= 1");
  require(c.root.width >= 1, "root.width must be >= 1");
  require(c.root.hidden_layers >= 0, "root.hidden_layers must be >= 0");
  require(c.layer_bounds.min_layers >= 2 && c.layer_bounds.min_layers <= c.layer_bounds.max_layers,
          "layer_bounds need 2 <= min <= max");
  const std::size_t root_layers = 2 + 2 * static_cast<std::size_t>(c.root.hidden_layers);
  require(root_layers >= c.layer_bounds.min_layers && root_layers <= c.layer_bounds.max_layers,
          "root stack size must lie within layer_bounds");
  require(c.agent.mutation.space.contains(c.hyperparams),
          "initial hyperparams must lie on the search grid");
  require(c.hyperparams.batch_size <= c.agent.samples_cap,
          "agent.samples_cap must be >= hyperparams.batch_size");
  require(!store.empty(), "store must be non-empty");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["mode"] = to_string(c.mode);
  if (c.family) j["family"] = family_to_json(*c.family);
  if (!c.csv_tasks.empty()) {
    json list = json::array();
    for (const auto& t : c.csv_tasks) {
      list.push_back({{"task_id", t.task_id},
                      {"train", t.train.string()},
                      {"val", t.val.string()},
                      {"test", t.test.string()}});
    }
    j["csv_tasks"] = list;
  }
  if (!c.task_order.empty()) j["task_order"] = c.task_order;
  j["root"] = {{"width", c.root.width}, {"hidden_layers", c.root.hidden_layers}};
  j["hyperparams"] = c.hyperparams;
  j["layer_bounds"] = {{"min", c.layer_bounds.min_layers}, {"max", c.layer_bounds.max_layers}};
  const AgentTemplate& a = c.agent;
  const SearchSpace& s = a.mutation.space;
  json res = json::array();
  for (Resolution x : s.resolutions) res.push_back(to_string(x));
  j["agent"] = {{"generations", a.generations},
                {"samples", a.samples},
                {"epochs", a.epochs},
                {"samples_cap", a.samples_cap},
                {"cost_scale", a.cost_scale},
                {"sample_workers", a.sample_workers},
                {"barrier_timeout_s", a.barrier_timeout_s},
                {"publish_retries", a.publish_retries},
                {"own_parent_prob", a.mutation.own_parent_prob},
                {"mu_eta", a.mutation.mu_eta},
                {"mu_min", a.mutation.mu.p_min},
                {"mu_max", a.mutation.mu.p_max},
                {"mu_init", a.mutation.mu.p_init},
                {"search_space",
                 {{"learning_rates", s.learning_rates},
                  {"momenta", s.momenta},
                  {"batch_sizes", s.batch_sizes},
                  {"epochs", s.epochs},
                  {"resolutions", res}}}};
  j["iterations"] = c.iterations;
  j["repetitions"] = c.repetitions;
  j["equal_budget"] = c.equal_budget;
  j["processes"] = c.processes;
  j["seed"] = c.seed;
  j["store"] = c.store.string();
  return j;
}

ExperimentConfig load_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) config_error("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    config_error(file.string() + ": " + e.what());
  }
  return config_from_json(j, file.parent_path());
}

std::vector<TaskData> load_tasks(const ExperimentConfig& config) {
  std::vector<TaskData> tasks;
  if (config.family) {
    tasks = generate_family(*config.family);
  } else {
    for (const auto& src : config.csv_tasks) {
      tasks.push_back(load_csv_task(src.task_id, src.train, src.val, src.test));
    }
  }
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.spec.task_id).second) config_error("duplicate task id " + t.spec.task_id);
  }
  if (tasks.size() > 1) {
    const int dim = tasks.front().spec.input_dim;
    for (const auto& t : tasks) {
      require(t.spec.input_dim == dim, "all tasks must share the input dimension");
    }
  }
  if (config.task_order.empty()) return tasks;
  require(config.task_order.size() == tasks.size(),
          "task_order must list every task exactly once");
  std::vector<TaskData> ordered;
  std::set<std::string> used;
  for (const auto& id : config.task_order) {
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const TaskData& t) { return t.spec.task_id == id; });
    require(it != tasks.end() && used.insert(id).second,
            "task_order must list every task exactly once");
    ordered.push_back(*it);
  }
  return ordered;
}

}  // namespace muevo
