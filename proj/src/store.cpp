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

#include "muevo/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include "muevo/error.hpp"
#include "muevo/hash.hpp"
#include "muevo/rng.hpp"

namespace muevo {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kTempPrefix = ".tmp-";
constexpr std::string_view kFormat = "muevo-store/1";

[[noreturn]] void store_error(const std::string& what) {
  throw Error(ErrorCode::kStoreError, what + ": " + std::strerror(errno));
}

std::optional<std::vector<std::uint8_t>> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

std::string as_text(const std::vector<std::uint8_t>& bytes) {
  return std::string(bytes.begin(), bytes.end());
}

std::string temp_name() {
  static std::atomic<std::uint64_t> counter{0};
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  return std::string(kTempPrefix) + std::to_string(::getpid()) + "-" +
         std::to_string(tid % 1000000007ULL) + "-" + std::to_string(counter++);
}

// Writes bytes to a fresh temp file inside `dir` and returns its path.
fs::path write_temp(const fs::path& dir, std::span<const std::uint8_t> bytes, bool sync) {
  const fs::path tmp = dir / temp_name();
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) store_error("create " + tmp.string());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      store_error("write " + tmp.string());
    }
    done += static_cast<std::size_t>(w);
  }
  if (sync && ::fsync(fd) != 0) {
    ::close(fd);
    store_error("fsync " + tmp.string());
  }
  if (::close(fd) != 0) store_error("close " + tmp.string());
  return tmp;
}

// Exclusive publish: true if `target` was created, false if it already
// existed. The temp file is removed either way.
bool link_exclusive(const fs::path& tmp, const fs::path& target) {
  const int rc = ::link(tmp.c_str(), target.c_str());
  const int err = errno;
  ::unlink(tmp.c_str());
  if (rc == 0) return true;
  if (err == EEXIST) return false;
  errno = err;
  store_error("link " + target.string());
}

bool is_temp(const fs::path& p) {
  return p.filename().string().rfind(kTempPrefix, 0) == 0;
}

std::optional<std::uint64_t> record_seq(const fs::path& p) {
  const std::string name = p.filename().string();
  if (name.size() != 15 || name.substr(10) != ".json") return std::nullopt;
  std::uint64_t v = 0;
  for (int i = 0; i < 10; ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint64_t>(name[i] - '0');
  }
  return v;
}

std::string record_name(std::uint64_t seq) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%010llu.json", static_cast<unsigned long long>(seq));
  return buf;
}

std::vector<std::uint64_t> list_seqs(const fs::path& dir) {
  std::vector<std::uint64_t> seqs;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (auto s = record_seq(it->path())) seqs.push_back(*s);
  }
  std::sort(seqs.begin(), seqs.end());
  return seqs;
}

BestRecord parse_record(const fs::path& p) {
  auto bytes = read_file(p);
  if (!bytes) store_error("read " + p.string());
  try {
    const auto j = nlohmann::json::parse(as_text(*bytes));
    BestRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.path = j.at("path").get<ModelPath>();
    r.fingerprint = fingerprint(r.path);
    if (j.at("fingerprint").get<std::string>() != r.fingerprint) {
      throw Error(ErrorCode::kIntegrityViolation, "fingerprint mismatch in " + p.string());
    }
    const auto& prev = j.at("prev_fingerprint");
    if (!prev.is_null()) r.prev_fingerprint = prev.get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrityViolation, "malformed record " + p.string() + ": " + e.what());
  }
}

}  // namespace

bool operator==(const Manifest& a, const Manifest& b) {
  return canonical_json(manifest_to_json(a)) == canonical_json(manifest_to_json(b));
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& [id, t] : m.tasks) {
    tasks[id] = {{"n_classes", t.n_classes}, {"input_dim", t.input_dim}};
  }
  return {{"format", kFormat},
          {"tasks", tasks},
          {"agents", m.agents},
          {"root", m.root},
          {"layer_bounds", {{"min_layers", m.bounds.min_layers},
                            {"max_layers", m.bounds.max_layers}}}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != kFormat) {
    throw Error(ErrorCode::kStoreError, "unsupported store format");
  }
  Manifest m;
  for (const auto& [id, t] : j.at("tasks").items()) {
    m.tasks[id] = TaskInfo{t.at("n_classes").get<std::uint32_t>(),
                           t.at("input_dim").get<std::uint32_t>()};
  }
  m.agents = j.at("agents").get<std::map<std::string, std::string>>();
  m.root = j.at("root").get<ModelPath>();
  m.bounds.min_layers = j.at("layer_bounds").at("min_layers").get<std::size_t>();
  m.bounds.max_layers = j.at("layer_bounds").at("max_layers").get<std::size_t>();
  return m;
}

Store::Store(fs::path root, Manifest manifest, StoreOptions options)
    : root_(std::move(root)), manifest_(std::move(manifest)), options_(options) {}

Store Store::create(const fs::path& root, const Manifest& manifest,
                    const std::vector<Component>& root_components,
                    StoreOptions options) {
  for (const auto& [agent, task] : manifest.agents) {
    if (!manifest.tasks.count(task)) {
      throw Error(ErrorCode::kConfigError, "agent " + agent + " assigned to unknown task " + task);
    }
  }
  std::error_code ec;
  fs::create_directories(root / "components", ec);
  if (ec) throw Error(ErrorCode::kStoreError, "mkdir " + root.string() + ": " + ec.message());
  for (const auto& [task, info] : manifest.tasks) {
    fs::create_directories(root / "tasks" / task / "best", ec);
    fs::create_directories(root / "tasks" / task / "iter", ec);
    if (ec) throw Error(ErrorCode::kStoreError, "mkdir tasks/" + task + ": " + ec.message());
  }
  Store store(root, manifest, options);
  for (const auto& c : root_components) store.publish_component(c);

  const std::string text = canonical_json(manifest_to_json(manifest));
  const fs::path target = root / "manifest.json";
  const fs::path tmp = write_temp(
      root, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      options.fsync);
  if (!link_exclusive(tmp, target)) {
    auto existing = read_file(target);
    if (!existing || as_text(*existing) != text) {
      throw Error(ErrorCode::kStoreError,
                  "store at " + root.string() + " holds a different manifest");
    }
  }
  return store;
}

Store Store::open(const fs::path& root, StoreOptions options) {
  auto bytes = read_file(root / "manifest.json");
  if (!bytes) {
    throw Error(ErrorCode::kStoreError, "no store manifest under " + root.string());
  }
  Manifest m;
  try {
    m = manifest_from_json(nlohmann::json::parse(as_text(*bytes)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIntegrityViolation, std::string("malformed manifest: ") + e.what());
  }
  return Store(root, std::move(m), options);
}

fs::path Store::component_path(const std::string& id) const {
  return root_ / "components" / (id + ".bin");
}

fs::path Store::best_dir(const std::string& task_id) const {
  return root_ / "tasks" / task_id / "best";
}

fs::path Store::marker_path(const std::string& agent_id, int n) const {
  auto it = manifest_.agents.find(agent_id);
  if (it == manifest_.agents.end()) {
    throw Error(ErrorCode::kStoreError, "agent " + agent_id + " is not registered");
  }
  return root_ / "tasks" / it->second / "iter" /
         (agent_id + "." + std::to_string(n) + ".done");
}

std::string Store::publish_component(const Component& component) {
  const auto bytes = serialize_component(component);
  if (sha256_hex(bytes) != component.id) {
    throw Error(ErrorCode::kInvalidComponent, "component id does not match its content");
  }
  const fs::path target = component_path(component.id);
  fault("component:before-write");
  const fs::path tmp = write_temp(target.parent_path(), bytes, options_.fsync);
  fault("component:before-link");
  if (!link_exclusive(tmp, target)) {
    auto existing = read_file(target);
    if (!existing || *existing != bytes) {
      throw Error(ErrorCode::kIntegrityViolation,
                  "component " + component.id + " exists with different bytes");
    }
  }
  fault("component:after-link");
  return component.id;
}

bool Store::has_component(const std::string& id) const {
  std::error_code ec;
  return fs::exists(component_path(id), ec);
}

ComponentPtr Store::load_component(const std::string& id) {
  if (options_.cache_components) {
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
  }
  auto bytes = read_file(component_path(id));
  if (!bytes) throw Error(ErrorCode::kDanglingComponent, "component " + id + " not in store");
  auto c = std::make_shared<const Component>(deserialize_component(*bytes));
  if (c->id != id) {
    throw Error(ErrorCode::kIntegrityViolation, "component blob " + id + " hashes to " + c->id);
  }
  if (options_.cache_components) cache_.emplace(id, c);
  return c;
}

PublishStatus Store::publish_best(const std::string& task_id, const ModelPath& path,
                                  const std::optional<std::string>& expected_prev) {
  if (!manifest_.tasks.count(task_id)) {
    throw Error(ErrorCode::kStoreError, "unknown task " + task_id);
  }
  for (const auto& id : path.all_component_ids()) {
    if (!has_component(id)) {
      throw Error(ErrorCode::kDanglingComponent, "best path references unpublished " + id);
    }
  }
  const auto current = latest_best(task_id);
  const std::optional<std::string> current_fp =
      current ? std::optional<std::string>(current->fingerprint) : std::nullopt;
  if (current_fp != expected_prev) return PublishStatus::kConflict;

  const std::uint64_t seq = current ? current->seq + 1 : 0;
  nlohmann::json j{{"seq", seq},
                   {"path", path},
                   {"fingerprint", fingerprint(path)},
                   {"prev_fingerprint", expected_prev ? nlohmann::json(*expected_prev)
                                                      : nlohmann::json(nullptr)}};
  const std::string text = canonical_json(j);
  const fs::path dir = best_dir(task_id);
  fault("best:before-write");
  const fs::path tmp = write_temp(
      dir, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
      options_.fsync);
  fault("best:before-link");
  const bool created = link_exclusive(tmp, dir / record_name(seq));
  fault("best:after-link");
  return created ? PublishStatus::kOk : PublishStatus::kConflict;
}

std::optional<BestRecord> Store::latest_best(const std::string& task_id) const {
  const auto seqs = list_seqs(best_dir(task_id));
  if (seqs.empty()) return std::nullopt;
  return parse_record(best_dir(task_id) / record_name(seqs.back()));
}

std::vector<BestRecord> Store::best_history(const std::string& task_id) const {
  std::vector<BestRecord> out;
  for (auto seq : list_seqs(best_dir(task_id))) {
    out.push_back(parse_record(best_dir(task_id) / record_name(seq)));
  }
  return out;
}

SystemState Store::load_system_image(std::optional<int> through_iteration) {
  SystemState state;
  state.tasks = manifest_.tasks;
  state.bounds = manifest_.bounds;
  state.root = manifest_.root;
  for (const auto& [task, info] : manifest_.tasks) {
    const auto seqs = list_seqs(best_dir(task));
    for (auto it = seqs.rbegin(); it != seqs.rend(); ++it) {
      BestRecord r = parse_record(best_dir(task) / record_name(*it));
      if (!through_iteration || r.path.iteration <= *through_iteration) {
        state.best.emplace(task, std::move(r.path));
        break;
      }
    }
  }
  auto load_all = [&](const ModelPath& p) {
    for (const auto& id : p.all_component_ids()) {
      if (!state.components.count(id)) state.add(load_component(id));
    }
  };
  load_all(state.root);
  for (const auto& [task, p] : state.best) load_all(p);
  return state;
}

void Store::mark_iteration_complete(const std::string& agent_id, int n) {
  const fs::path p = marker_path(agent_id, n);
  const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error(ErrorCode::kDuplicateMarker,
                  "marker " + agent_id + "." + std::to_string(n) + " already exists");
    }
    store_error("create marker " + p.string());
  }
  if (options_.fsync) ::fsync(fd);
  ::close(fd);
}

bool Store::iteration_complete(const std::string& agent_id, int n) const {
  std::error_code ec;
  return fs::exists(marker_path(agent_id, n), ec);
}

void Store::wait_for_barrier(int n, std::chrono::milliseconds timeout,
                             std::chrono::milliseconds max_poll,
                             const std::atomic<bool>* cancel) {
  if (n <= 0) return;
  const auto start = std::chrono::steady_clock::now();
  CounterRng jitter(static_cast<std::uint64_t>(start.time_since_epoch().count()) ^
                    static_cast<std::uint64_t>(::getpid()));
  double delay_ms = 0.5;
  while (true) {
    std::vector<std::string> missing;
    for (const auto& [agent, task] : manifest_.agents) {
      if (!iteration_complete(agent, n - 1)) missing.push_back(agent);
    }
    if (missing.empty()) return;
    if (cancel != nullptr && cancel->load()) {
      throw Error(ErrorCode::kCancelled, "barrier wait cancelled");
    }
    if (std::chrono::steady_clock::now() - start >= timeout) {
      throw BarrierTimeout(n, std::move(missing));
    }
    const double sleep_ms = delay_ms * (0.75 + 0.5 * jitter.uniform());
    std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(sleep_ms));
    delay_ms = std::min(delay_ms * 1.5, static_cast<double>(max_poll.count()));
  }
}

AuditReport Store::audit() const {
  AuditReport report;
  std::set<std::string> ids;
  std::error_code ec;
  for (fs::directory_iterator it(root_ / "components", ec), end; !ec && it != end;
       it.increment(ec)) {
    const fs::path& p = it->path();
    if (is_temp(p)) continue;
    ++report.components;
    const std::string name = p.filename().string();
    if (p.extension() != ".bin") {
      report.violations.push_back("unexpected file components/" + name);
      continue;
    }
    const std::string id = p.stem().string();
    auto bytes = read_file(p);
    if (!bytes) {
      report.violations.push_back("unreadable blob " + id);
      continue;
    }
    try {
      const Component c = deserialize_component(*bytes);
      if (c.id != id) report.violations.push_back("blob " + id + " hashes to " + c.id);
    } catch (const Error& e) {
      report.violations.push_back("blob " + id + ": " + e.what());
    }
    ids.insert(id);
  }
  auto check_refs = [&](const ModelPath& p, const std::string& where) {
    for (const auto& id : p.all_component_ids()) {
      if (!ids.count(id)) report.violations.push_back(where + " references missing " + id);
    }
  };
  check_refs(manifest_.root, "root");
  for (const auto& [task, info] : manifest_.tasks) {
    std::optional<std::string> prev;
    for (auto seq : list_seqs(best_dir(task))) {
      ++report.records;
      try {
        const BestRecord r = parse_record(best_dir(task) / record_name(seq));
        if (r.seq != seq) report.violations.push_back(task + " record seq mismatch");
        if (r.prev_fingerprint != prev) {
          report.violations.push_back(task + " record " + std::to_string(seq) +
                                      " does not chain to its predecessor");
        }
        prev = r.fingerprint;
        check_refs(r.path, task + "/" + std::to_string(seq));
      } catch (const Error& e) {
        report.violations.push_back(e.what());
      }
    }
    for (fs::directory_iterator it(root_ / "tasks" / task / "iter", ec), end;
         !ec && it != end; it.increment(ec)) {
      if (is_temp(it->path())) continue;
      ++report.markers;
      if (fs::file_size(it->path(), ec) != 0) {
        report.violations.push_back("non-empty marker " + it->path().filename().string());
      }
    }
  }
  return report;
}

GcReport Store::gc() {
  GcReport report;
  std::set<std::string> referenced;
  for (const auto& id : manifest_.root.all_component_ids()) referenced.insert(id);
  for (const auto& [task, info] : manifest_.tasks) {
    for (const auto& r : best_history(task)) {
      for (const auto& id : r.path.all_component_ids()) referenced.insert(id);
    }
  }
  std::vector<fs::path> dirs{root_, root_ / "components"};
  for (const auto& [task, info] : manifest_.tasks) {
    dirs.push_back(best_dir(task));
    dirs.push_back(root_ / "tasks" / task / "iter");
  }
  std::error_code ec;
  for (const auto& dir : dirs) {
    std::vector<fs::path> doomed;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
      const fs::path& p = it->path();
      if (is_temp(p)) {
        doomed.push_back(p);
        ++report.removed_temp_files;
      } else if (dir == root_ / "components" && p.extension() == ".bin") {
        if (referenced.count(p.stem().string())) {
          ++report.kept_components;
        } else {
          doomed.push_back(p);
          ++report.removed_components;
        }
      }
    }
    for (const auto& p : doomed) fs::remove(p, ec);
  }
  cache_.clear();
  return report;
}

}  // namespace muevo
