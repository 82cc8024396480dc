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

#ifndef MUEVO_TASKS_HPP_
#define MUEVO_TASKS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "muevo/matrix.hpp"

namespace muevo {

struct SplitSizes {
  int train = 512;
  int val = 256;
  int test = 256;
};

struct TaskSpec {
  std::string task_id;
  std::uint64_t family_seed = 0;
  int index = 0;  // position within the family
  int n_classes = 4;
  int input_dim = 16;
  SplitSizes sizes;
  // Fraction of the generative transform shared with the family base task.
  double relatedness = 1.0;
  double noise_level = 0.0;
};

struct Dataset {
  Matrix x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
};

struct TaskData {
  TaskSpec spec;
  Dataset train;
  Dataset val;
  Dataset test;
};

struct FamilySpec {
  std::uint64_t family_seed = 1;
  int n_tasks = 8;
  double relatedness = 0.9;
  double noise_level = 0.1;
  int n_classes = 6;
  int input_dim = 16;
  int clusters_per_class = 2;
  // Per-task split sizes; a single entry applies to every task.
  std::vector<SplitSizes> sizes{SplitSizes{}};
  std::string id_prefix = "task";
};

// Deterministic synthetic task family.
//
// The base task draws Gaussian class clusters (clusters_per_class per class)
// in an input_dim latent space and pushes them through a fixed random
// two-layer softsign map. Sibling task i then applies its own rotation, built
// from one Givens rotation per coordinate pair with tan(angle / 2) drawn
// uniformly from (1 - relatedness) * [-1, 1), adds noise_level * N(0, 1)
// noise and relabels classes with a random permutation. Sample inputs come
// from family-shared streams, so relatedness 1 with zero noise gives datasets
// identical up to the label permutation. Classes are assigned round-robin
// (exact stratification) and features are standardized with the train split
// statistics.
//
// Every value is produced with CounterRng and exactly rounded IEEE
// arithmetic (+ - * / sqrt), so the bytes depend only on the FamilySpec.
std::vector<TaskData> generate_family(const FamilySpec& spec);

struct SplitStats {
  std::size_t size = 0;
  std::vector<std::size_t> class_counts;
};

struct DatasetStats {
  SplitStats train;
  SplitStats val;
  SplitStats test;
  // Train split, per feature.
  std::vector<double> feature_mean;
  std::vector<double> feature_var;
};

DatasetStats dataset_stats(const TaskData& task);

// CSV with a header row; the column named "label" holds integer class ids
// and every other column is a decimal feature.
Dataset load_csv_dataset(const std::filesystem::path& path);

// Builds a task from three CSV files. n_classes is max label + 1.
TaskData load_csv_task(const std::string& task_id,
                       const std::filesystem::path& train,
                       const std::filesystem::path& val,
                       const std::filesystem::path& test);

}  // namespace muevo

#endif  // MUEVO_TASKS_HPP_
