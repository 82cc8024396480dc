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

#include "muevo/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "muevo/error.hpp"
#include "muevo/rng.hpp"

namespace muevo {

namespace {

constexpr std::uint64_t kTagBase = 0xB45E;
constexpr std::uint64_t kTagSample = 0x5A3D;
constexpr std::uint64_t kTagTask = 0x7A5C;
constexpr std::uint64_t kTagNoise = 0x4015E;

constexpr double kCenterScale = 1.5;
constexpr double kClusterSpread = 0.7;

double softsign(double v) { return v / (1.0 + std::fabs(v)); }

// The shared generative transform of a family.
struct BaseTransform {
  int latent = 0;
  int hidden = 0;
  int out = 0;
  int clusters = 0;
  std::vector<double> centers;  // [n_classes * clusters][latent]
  std::vector<double> w1;       // [hidden][latent]
  std::vector<double> b1;       // [hidden]
  std::vector<double> w2;       // [out][hidden]

  std::vector<double> apply(const std::vector<double>& z) const {
    std::vector<double> h(hidden);
    for (int r = 0; r < hidden; ++r) {
      double s = b1[r];
      for (int c = 0; c < latent; ++c) s += w1[r * latent + c] * z[c];
      h[r] = softsign(s);
    }
    std::vector<double> x(out);
    for (int r = 0; r < out; ++r) {
      double s = 0.0;
      for (int c = 0; c < hidden; ++c) s += w2[r * hidden + c] * h[c];
      x[r] = s;
    }
    return x;
  }
};

BaseTransform make_base(const FamilySpec& spec) {
  CounterRng rng = CounterRng(spec.family_seed).derive({kTagBase});
  BaseTransform t;
  t.latent = spec.input_dim;
  t.hidden = 2 * spec.input_dim;
  t.out = spec.input_dim;
  t.clusters = spec.clusters_per_class;
  const int n_centers = spec.n_classes * spec.clusters_per_class;
  t.centers.resize(static_cast<std::size_t>(n_centers) * t.latent);
  for (auto& v : t.centers) v = kCenterScale * rng.normal();
  const double s1 = 2.0 / std::sqrt(static_cast<double>(t.latent));
  t.w1.resize(static_cast<std::size_t>(t.hidden) * t.latent);
  for (auto& v : t.w1) v = s1 * rng.normal();
  t.b1.resize(t.hidden);
  for (auto& v : t.b1) v = 0.5 * rng.normal();
  const double s2 = 1.0 / std::sqrt(static_cast<double>(t.hidden));
  t.w2.resize(static_cast<std::size_t>(t.out) * t.hidden);
  for (auto& v : t.w2) v = s2 * rng.normal();
  return t;
}

// Row-major dim x dim rotation: one Givens rotation per pair (a < b), in
// lexicographic order, with tan(angle / 2) = magnitude * U(-1, 1).
std::vector<double> make_rotation(int dim, double magnitude, CounterRng& rng) {
  std::vector<double> r(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) r[i * dim + i] = 1.0;
  for (int a = 0; a < dim; ++a) {
    for (int b = a + 1; b < dim; ++b) {
      const double tau = magnitude * (2.0 * rng.uniform() - 1.0);
      const double denom = 1.0 + tau * tau;
      const double c = (1.0 - tau * tau) / denom;
      const double s = 2.0 * tau / denom;
      // Left-multiply by the Givens rotation in plane (a, b).
      for (int k = 0; k < dim; ++k) {
        const double ra = r[a * dim + k];
        const double rb = r[b * dim + k];
        r[a * dim + k] = c * ra - s * rb;
        r[b * dim + k] = s * ra + c * rb;
      }
    }
  }
  return r;
}

std::vector<int> make_permutation(int n, CounterRng& rng) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

void validate(const FamilySpec& spec) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidSpec, m); };
  if (spec.n_tasks < 1) fail("n_tasks must be >= 1");
  if (spec.n_classes < 2) fail("n_classes must be >= 2");
  if (spec.input_dim < 2) fail("input_dim must be >= 2");
  if (spec.clusters_per_class < 1) fail("clusters_per_class must be >= 1");
  if (spec.n_classes * spec.clusters_per_class > 64 * spec.input_dim) {
    fail("more class clusters than the input dimension can place");
  }
  if (!(spec.relatedness >= 0.0 && spec.relatedness <= 1.0)) {
    fail("relatedness must lie in [0, 1]");
  }
  if (!(spec.noise_level >= 0.0) || !std::isfinite(spec.noise_level)) {
    fail("noise_level must be a non-negative real");
  }
  if (spec.sizes.empty() ||
      (spec.sizes.size() != 1 &&
       spec.sizes.size() != static_cast<std::size_t>(spec.n_tasks))) {
    fail("sizes must have one entry or one per task");
  }
  for (const auto& s : spec.sizes) {
    if (s.train < 1 || s.val < 1 || s.test < 1) fail("split sizes must be >= 1");
  }
}

Dataset make_split(const FamilySpec& spec, const BaseTransform& base,
                   const std::vector<double>& rotation,
                   const std::vector<int>& labels, int split, int size,
                   const CounterRng& task_rng) {
  const int d = spec.input_dim;
  Dataset ds{Matrix(static_cast<std::size_t>(size), static_cast<std::size_t>(d)),
             std::vector<int>(static_cast<std::size_t>(size))};
  const CounterRng family(spec.family_seed);
  std::vector<double> z(d);
  for (int j = 0; j < size; ++j) {
    CounterRng srng = family.derive({kTagSample, static_cast<std::uint64_t>(split),
                                     static_cast<std::uint64_t>(j)});
    const int cls = j % spec.n_classes;
    const int cluster = static_cast<int>(srng.below(static_cast<std::uint64_t>(base.clusters)));
    const double* center =
        &base.centers[static_cast<std::size_t>(cls * base.clusters + cluster) * d];
    for (int k = 0; k < d; ++k) z[k] = center[k] + kClusterSpread * srng.normal();
    const std::vector<double> x = base.apply(z);
    CounterRng nrng = task_rng.derive({kTagNoise, static_cast<std::uint64_t>(split),
                                       static_cast<std::uint64_t>(j)});
    auto row = ds.x.row(static_cast<std::size_t>(j));
    for (int r = 0; r < d; ++r) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += rotation[r * d + c] * x[c];
      row[r] = s + (spec.noise_level > 0.0 ? spec.noise_level * nrng.normal() : 0.0);
    }
    ds.y[j] = labels[cls];
  }
  return ds;
}

void standardize(TaskData& t) {
  const std::size_t d = t.train.x.cols();
  const auto n = static_cast<double>(t.train.size());
  std::vector<double> mean(d, 0.0), inv_std(d, 1.0);
  for (std::size_t i = 0; i < t.train.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += t.train.x(i, k);
  }
  for (auto& m : mean) m /= n;
  for (std::size_t k = 0; k < d; ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < t.train.size(); ++i) {
      const double e = t.train.x(i, k) - mean[k];
      v += e * e;
    }
    v /= n;
    inv_std[k] = v > 0.0 ? 1.0 / std::sqrt(v) : 1.0;
  }
  for (Dataset* ds : {&t.train, &t.val, &t.test}) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        ds->x(i, k) = (ds->x(i, k) - mean[k]) * inv_std[k];
      }
    }
  }
}

SplitStats split_stats(const Dataset& ds, int n_classes) {
  SplitStats s;
  s.size = ds.size();
  s.class_counts.assign(static_cast<std::size_t>(n_classes), 0);
  for (int y : ds.y) {
    if (y >= 0 && y < n_classes) ++s.class_counts[static_cast<std::size_t>(y)];
  }
  return s;
}

}  // namespace

std::vector<TaskData> generate_family(const FamilySpec& spec) {
  validate(spec);
  const BaseTransform base = make_base(spec);
  const CounterRng family(spec.family_seed);
  std::vector<TaskData> tasks;
  tasks.reserve(static_cast<std::size_t>(spec.n_tasks));
  for (int i = 0; i < spec.n_tasks; ++i) {
    const SplitSizes sizes = spec.sizes.size() == 1 ? spec.sizes[0] : spec.sizes[i];
    TaskData t;
    t.spec.task_id = spec.id_prefix + std::to_string(i);
    t.spec.family_seed = spec.family_seed;
    t.spec.index = i;
    t.spec.n_classes = spec.n_classes;
    t.spec.input_dim = spec.input_dim;
    t.spec.sizes = sizes;
    t.spec.relatedness = spec.relatedness;
    t.spec.noise_level = spec.noise_level;

    const CounterRng task_rng = family.derive({kTagTask, static_cast<std::uint64_t>(i)});
    CounterRng rot_rng = task_rng.derive({1});
    CounterRng perm_rng = task_rng.derive({2});
    const auto rotation = make_rotation(spec.input_dim, 1.0 - spec.relatedness, rot_rng);
    const auto labels = make_permutation(spec.n_classes, perm_rng);

    t.train = make_split(spec, base, rotation, labels, 0, sizes.train, task_rng);
    t.val = make_split(spec, base, rotation, labels, 1, sizes.val, task_rng);
    t.test = make_split(spec, base, rotation, labels, 2, sizes.test, task_rng);
    standardize(t);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

DatasetStats dataset_stats(const TaskData& task) {
  if (task.train.size() == 0 || task.val.size() == 0 || task.test.size() == 0) {
    throw Error(ErrorCode::kInvalidSpec, "empty split");
  }
  DatasetStats s;
  s.train = split_stats(task.train, task.spec.n_classes);
  s.val = split_stats(task.val, task.spec.n_classes);
  s.test = split_stats(task.test, task.spec.n_classes);
  const std::size_t d = task.train.x.cols();
  const auto n = static_cast<double>(task.train.size());
  s.feature_mean.assign(d, 0.0);
  s.feature_var.assign(d, 0.0);
  for (std::size_t i = 0; i < task.train.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) s.feature_mean[k] += task.train.x(i, k);
  }
  for (auto& m : s.feature_mean) m /= n;
  for (std::size_t i = 0; i < task.train.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double e = task.train.x(i, k) - s.feature_mean[k];
      s.feature_var[k] += e * e;
    }
  }
  for (auto& v : s.feature_var) v /= n;
  return s;
}

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidSpec, "cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kInvalidSpec, path.string() + ": missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) {
    throw Error(ErrorCode::kInvalidSpec, path.string() + ": no 'label' column");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t d = header.size() - 1;
  if (d == 0) throw Error(ErrorCode::kInvalidSpec, path.string() + ": no features");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kInvalidSpec,
                  path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    try {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c == label_col) {
          std::size_t used = 0;
          const int y = std::stoi(cells[c], &used);
          if (used != cells[c].size() || y < 0) throw std::invalid_argument("label");
          labels.push_back(y);
        } else {
          values.push_back(std::stod(cells[c]));
        }
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidSpec,
                  path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  if (labels.empty()) throw Error(ErrorCode::kInvalidSpec, path.string() + ": no rows");
  Dataset ds{Matrix(labels.size(), d), std::move(labels)};
  std::copy(values.begin(), values.end(), ds.x.data().begin());
  return ds;
}

TaskData load_csv_task(const std::string& task_id,
                       const std::filesystem::path& train,
                       const std::filesystem::path& val,
                       const std::filesystem::path& test) {
  TaskData t;
  t.train = load_csv_dataset(train);
  t.val = load_csv_dataset(val);
  t.test = load_csv_dataset(test);
  const std::size_t d = t.train.x.cols();
  if (t.val.x.cols() != d || t.test.x.cols() != d) {
    throw Error(ErrorCode::kInvalidSpec, task_id + ": feature count differs across splits");
  }
  int max_label = 0;
  for (const Dataset* ds : {&t.train, &t.val, &t.test}) {
    for (int y : ds->y) max_label = std::max(max_label, y);
  }
  t.spec.task_id = task_id;
  t.spec.n_classes = max_label + 1;
  t.spec.input_dim = static_cast<int>(d);
  t.spec.sizes = {static_cast<int>(t.train.size()), static_cast<int>(t.val.size()),
                  static_cast<int>(t.test.size())};
  return t;
}

}  // namespace muevo
