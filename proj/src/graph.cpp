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

#include "muevo/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "muevo/error.hpp"
#include "muevo/hash.hpp"

namespace muevo {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += width;
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kIntegrityViolation, "truncated component blob");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_dims(ComponentKind kind, std::uint32_t in_dim, std::uint32_t out_dim,
                std::size_t param_count) {
  if (in_dim == 0 || out_dim == 0) {
    throw Error(ErrorCode::kInvalidComponent, "component dims must be positive");
  }
  if (kind == ComponentKind::kActivation && in_dim != out_dim) {
    throw Error(ErrorCode::kInvalidComponent,
                "activation must have in_dim == out_dim");
  }
  const std::size_t expected = expected_param_count(kind, in_dim, out_dim);
  if (param_count != expected) {
    throw Error(ErrorCode::kInvalidComponent,
                std::string(to_string(kind)) + " " + std::to_string(in_dim) +
                    "x" + std::to_string(out_dim) + " needs " +
                    std::to_string(expected) + " params, got " +
                    std::to_string(param_count));
  }
}

template <typename T>
std::ptrdiff_t grid_index(const std::vector<T>& grid, const T& value) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if constexpr (std::is_floating_point_v<T>) {
      if (std::abs(grid[i] - value) <= 1e-12 * std::max(1.0, std::abs(value))) {
        return static_cast<std::ptrdiff_t>(i);
      }
    } else {
      if (grid[i] == value) return static_cast<std::ptrdiff_t>(i);
    }
  }
  return -1;
}

template <typename T>
std::optional<T> grid_step(const std::vector<T>& grid, const T& value,
                           int direction) {
  const std::ptrdiff_t i = grid_index(grid, value);
  if (i < 0) return std::nullopt;
  const std::ptrdiff_t j = i + (direction > 0 ? 1 : -1);
  if (j < 0 || j >= static_cast<std::ptrdiff_t>(grid.size())) return std::nullopt;
  return grid[static_cast<std::size_t>(j)];
}

}  // namespace

std::string_view to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::kDense: return "dense";
    case ComponentKind::kActivation: return "activation";
    case ComponentKind::kEmbeddingStub: return "embedding-stub";
  }
  return "unknown";
}

std::size_t expected_param_count(ComponentKind kind, std::uint32_t in_dim,
                                 std::uint32_t out_dim) {
  switch (kind) {
    case ComponentKind::kDense:
    case ComponentKind::kEmbeddingStub:
      return static_cast<std::size_t>(in_dim) * out_dim + out_dim;
    case ComponentKind::kActivation:
      return 0;
  }
  throw Error(ErrorCode::kUnsupportedComponentKind, "unknown component kind");
}

std::vector<std::uint8_t> serialize_component_fields(
    ComponentKind kind, std::uint32_t in_dim, std::uint32_t out_dim,
    std::span<const float> params, std::string_view origin_task,
    std::uint32_t depth_hint) {
  std::vector<std::uint8_t> out;
  out.reserve(25 + origin_task.size() + 4 * params.size());
  put_u8(out, static_cast<std::uint8_t>(kind));
  put_u32(out, in_dim);
  put_u32(out, out_dim);
  put_u64(out, params.size());
  put_u32(out, static_cast<std::uint32_t>(origin_task.size()));
  out.insert(out.end(), origin_task.begin(), origin_task.end());
  put_u32(out, depth_hint);
  for (float p : params) put_u32(out, std::bit_cast<std::uint32_t>(p));
  return out;
}

std::string component_id(ComponentKind kind, std::uint32_t in_dim,
                         std::uint32_t out_dim, std::span<const float> params,
                         std::string_view origin_task,
                         std::uint32_t depth_hint) {
  check_dims(kind, in_dim, out_dim, params.size());
  return sha256_hex(serialize_component_fields(kind, in_dim, out_dim, params,
                                               origin_task, depth_hint));
}

Component make_component(ComponentKind kind, std::uint32_t in_dim,
                         std::uint32_t out_dim, std::vector<float> params,
                         std::string origin_task, std::uint32_t depth_hint) {
  Component c;
  c.id = component_id(kind, in_dim, out_dim, params, origin_task, depth_hint);
  c.kind = kind;
  c.in_dim = in_dim;
  c.out_dim = out_dim;
  c.params = std::move(params);
  c.origin_task = std::move(origin_task);
  c.depth_hint = depth_hint;
  return c;
}

std::vector<std::uint8_t> serialize_component(const Component& c) {
  return serialize_component_fields(c.kind, c.in_dim, c.out_dim, c.params,
                                    c.origin_task, c.depth_hint);
}

Component deserialize_component(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto kind_raw = r.uint(1);
  if (kind_raw > 2) {
    throw Error(ErrorCode::kIntegrityViolation, "unknown component kind byte");
  }
  const auto kind = static_cast<ComponentKind>(kind_raw);
  const auto in_dim = static_cast<std::uint32_t>(r.uint(4));
  const auto out_dim = static_cast<std::uint32_t>(r.uint(4));
  const std::uint64_t count = r.uint(8);
  const auto origin_len = static_cast<std::size_t>(r.uint(4));
  std::string origin = r.text(origin_len);
  const auto depth = static_cast<std::uint32_t>(r.uint(4));
  if (count > bytes.size() / 4) {
    throw Error(ErrorCode::kIntegrityViolation, "param count exceeds blob size");
  }
  std::vector<float> params(count);
  for (auto& p : params) p = std::bit_cast<float>(static_cast<std::uint32_t>(r.uint(4)));
  if (!r.done()) {
    throw Error(ErrorCode::kIntegrityViolation, "trailing bytes in component blob");
  }
  try {
    return make_component(kind, in_dim, out_dim, std::move(params),
                          std::move(origin), depth);
  } catch (const Error& e) {
    throw Error(ErrorCode::kIntegrityViolation, e.what());
  }
}

std::string_view to_string(Resolution r) {
  return r == Resolution::kLow ? "low" : "high";
}

std::uint32_t input_width(std::uint32_t input_dim, Resolution r) {
  return r == Resolution::kLow ? (input_dim + 1) / 2 : input_dim;
}

std::string_view to_string(HyperField f) {
  switch (f) {
    case HyperField::kLearningRate: return "learning_rate";
    case HyperField::kMomentum: return "momentum";
    case HyperField::kBatchSize: return "batch_size";
    case HyperField::kEpochs: return "epochs";
    case HyperField::kInputResolution: return "input_resolution";
  }
  return "unknown";
}

bool SearchSpace::contains(const HyperParams& hp) const {
  return grid_index(learning_rates, hp.learning_rate) >= 0 &&
         grid_index(momenta, hp.momentum) >= 0 &&
         grid_index(batch_sizes, hp.batch_size) >= 0 &&
         grid_index(epochs, hp.epochs) >= 0 &&
         grid_index(resolutions, hp.input_resolution) >= 0;
}

std::optional<HyperParams> SearchSpace::step(const HyperParams& hp,
                                             HyperField field,
                                             int direction) const {
  HyperParams out = hp;
  switch (field) {
    case HyperField::kLearningRate: {
      auto v = grid_step(learning_rates, hp.learning_rate, direction);
      if (!v) return std::nullopt;
      out.learning_rate = *v;
      break;
    }
    case HyperField::kMomentum: {
      auto v = grid_step(momenta, hp.momentum, direction);
      if (!v) return std::nullopt;
      out.momentum = *v;
      break;
    }
    case HyperField::kBatchSize: {
      auto v = grid_step(batch_sizes, hp.batch_size, direction);
      if (!v) return std::nullopt;
      out.batch_size = *v;
      break;
    }
    case HyperField::kEpochs: {
      auto v = grid_step(epochs, hp.epochs, direction);
      if (!v) return std::nullopt;
      out.epochs = *v;
      break;
    }
    case HyperField::kInputResolution: {
      auto v = grid_step(resolutions, hp.input_resolution, direction);
      if (!v) return std::nullopt;
      out.input_resolution = *v;
      break;
    }
  }
  return out;
}

double MuTable::get(const std::string& key, const MuBounds& bounds) const {
  auto it = probs.find(key);
  return it == probs.end() ? bounds.p_init : it->second;
}

void MuTable::clamp(const MuBounds& bounds) {
  for (auto& [key, p] : probs) p = std::clamp(p, bounds.p_min, bounds.p_max);
}

std::vector<std::string> ModelPath::all_component_ids() const {
  std::vector<std::string> ids = component_ids;
  if (!head_id.empty()) ids.push_back(head_id);
  return ids;
}

void to_json(nlohmann::json& j, const HyperParams& hp) {
  j = nlohmann::json{{"learning_rate", hp.learning_rate},
                     {"momentum", hp.momentum},
                     {"batch_size", hp.batch_size},
                     {"epochs", hp.epochs},
                     {"input_resolution", to_string(hp.input_resolution)}};
}

void from_json(const nlohmann::json& j, HyperParams& hp) {
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.momentum = j.at("momentum").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  hp.epochs = j.at("epochs").get<int>();
  const auto res = j.at("input_resolution").get<std::string>();
  if (res != "low" && res != "high") {
    throw Error(ErrorCode::kConfigError, "bad input_resolution: " + res);
  }
  hp.input_resolution = res == "low" ? Resolution::kLow : Resolution::kHigh;
}

void to_json(nlohmann::json& j, const ModelPath& p) {
  j = nlohmann::json{
      {"task_id", p.task_id},
      {"component_ids", p.component_ids},
      {"head_id", p.head_id},
      {"hyperparams", p.hyperparams},
      {"mu", p.mu.probs},
      {"score", p.score},
      {"val_accuracy", p.val_accuracy},
      {"test_accuracy", p.test_accuracy},
      {"generation_born", p.generation_born},
      {"iteration", p.iteration},
  };
  j["parent_fingerprint"] = p.parent_fingerprint
                                ? nlohmann::json(*p.parent_fingerprint)
                                : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ModelPath& p) {
  p.task_id = j.at("task_id").get<std::string>();
  p.component_ids = j.at("component_ids").get<std::vector<std::string>>();
  p.head_id = j.at("head_id").get<std::string>();
  p.hyperparams = j.at("hyperparams").get<HyperParams>();
  p.mu.probs = j.at("mu").get<std::map<std::string, double>>();
  p.score = j.at("score").get<double>();
  p.val_accuracy = j.at("val_accuracy").get<double>();
  p.test_accuracy = j.at("test_accuracy").get<double>();
  p.generation_born = j.at("generation_born").get<int>();
  p.iteration = j.at("iteration").get<int>();
  const auto& pf = j.at("parent_fingerprint");
  p.parent_fingerprint =
      pf.is_null() ? std::nullopt : std::optional<std::string>(pf.get<std::string>());
}

std::string canonical_json(const nlohmann::json& j) {
  // nlohmann::json objects are std::map backed (sorted keys) and dump reals
  // in shortest round-trip form.
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::string fingerprint(const ModelPath& p) {
  return sha256_hex(canonical_json(nlohmann::json(p)));
}

const Component* SystemState::find(const std::string& id) const {
  auto it = components.find(id);
  return it == components.end() ? nullptr : it->second.get();
}

const Component& SystemState::at(const std::string& id) const {
  const Component* c = find(id);
  if (c == nullptr) {
    throw Error(ErrorCode::kDanglingComponent, "dangling component " + id);
  }
  return *c;
}

void SystemState::add(ComponentPtr c) {
  const std::string id = c->id;
  components.emplace(id, std::move(c));
}

std::string_view to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::kDanglingComponent: return "DanglingComponent";
    case Violation::Kind::kDimMismatch: return "DimMismatch";
    case Violation::Kind::kLayerCount: return "LayerCount";
    case Violation::Kind::kHeadMismatch: return "HeadMismatch";
    case Violation::Kind::kInputMismatch: return "InputMismatch";
  }
  return "Unknown";
}

std::vector<Violation> validate_path(const ModelPath& path,
                                     const SystemState& state) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  const std::size_t n = path.component_ids.size();
  if (n == 0 || n < state.bounds.min_layers || n > state.bounds.max_layers) {
    out.push_back({K::kLayerCount, 0,
                   "layer count " + std::to_string(n) + " outside [" +
                       std::to_string(state.bounds.min_layers) + ", " +
                       std::to_string(state.bounds.max_layers) + "]"});
  }

  const auto task_it = state.tasks.find(path.task_id);
  const TaskInfo* task = task_it == state.tasks.end() ? nullptr : &task_it->second;

  const Component* prev = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    const Component* c = state.find(path.component_ids[i]);
    if (c == nullptr) {
      out.push_back({K::kDanglingComponent, i, path.component_ids[i]});
      prev = nullptr;
      continue;
    }
    if (i == 0) {
      if (c->kind != ComponentKind::kEmbeddingStub) {
        out.push_back({K::kInputMismatch, 0, "first component must be an embedding-stub"});
      } else if (task != nullptr &&
                 c->in_dim != input_width(task->input_dim,
                                          path.hyperparams.input_resolution)) {
        out.push_back({K::kInputMismatch, 0,
                       "embedding in_dim " + std::to_string(c->in_dim) +
                           " does not match input width"});
      }
    } else if (c->kind == ComponentKind::kEmbeddingStub) {
      out.push_back({K::kInputMismatch, i, "embedding-stub above position 0"});
    }
    if (prev != nullptr && prev->out_dim != c->in_dim) {
      out.push_back({K::kDimMismatch, i,
                     std::to_string(prev->out_dim) + " != " +
                         std::to_string(c->in_dim)});
    }
    prev = c;
  }

  if (!path.head_id.empty()) {
    const Component* head = state.find(path.head_id);
    if (head == nullptr) {
      out.push_back({K::kDanglingComponent, n, path.head_id});
    } else {
      if (head->kind != ComponentKind::kDense) {
        out.push_back({K::kHeadMismatch, n, "head must be dense"});
      }
      if (prev != nullptr && prev->out_dim != head->in_dim) {
        out.push_back({K::kDimMismatch, n,
                       std::to_string(prev->out_dim) + " != " +
                           std::to_string(head->in_dim)});
      }
      if (task != nullptr && head->out_dim != task->n_classes) {
        out.push_back({K::kHeadMismatch, n,
                       "head out_dim " + std::to_string(head->out_dim) +
                           " != class count " + std::to_string(task->n_classes)});
      }
    }
  }
  return out;
}

double accounted_parameters(const ModelPath& path, const SystemState& state) {
  std::vector<std::set<std::string>> best_sets;
  best_sets.reserve(state.best.size());
  for (const auto& [task, best] : state.best) {
    const auto ids = best.all_component_ids();
    best_sets.emplace_back(ids.begin(), ids.end());
  }
  double total = 0.0;
  const auto ids = path.all_component_ids();
  for (const auto& id : std::set<std::string>(ids.begin(), ids.end())) {
    const Component& c = state.at(id);
    std::size_t share = 0;
    for (const auto& s : best_sets) share += s.count(id);
    total += static_cast<double>(c.params.size()) /
             static_cast<double>(std::max<std::size_t>(share, 1));
  }
  return total;
}

double inference_flops(const ModelPath& path, const SystemState& state) {
  double flops = 0.0;
  for (const auto& id : path.all_component_ids()) {
    const Component& c = state.at(id);
    switch (c.kind) {
      case ComponentKind::kDense:
      case ComponentKind::kEmbeddingStub:
        flops += 2.0 * c.in_dim * c.out_dim;
        break;
      case ComponentKind::kActivation:
        flops += c.out_dim;
        break;
      default:
        throw Error(ErrorCode::kUnsupportedComponentKind,
                    "no flop model for component " + id);
    }
  }
  return flops;
}

double total_parameters(const ModelPath& path, const SystemState& state) {
  double total = 0.0;
  const auto ids = path.all_component_ids();
  for (const auto& id : std::set<std::string>(ids.begin(), ids.end())) {
    total += static_cast<double>(state.at(id).params.size());
  }
  return total;
}

}  // namespace muevo
