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

#ifndef MUEVO_REPORT_HPP_
#define MUEVO_REPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "muevo/coordinator.hpp"

namespace muevo {

struct LabeledRun {
  std::string label;
  RunRecord record;
};

// Across-repetition aggregate of one iteration. std_test_acc is the sample
// standard deviation (zero for a single repetition).
struct CurvePoint {
  int iteration = 0;
  double wall_clock_s = 0.0;
  double mean_val_acc = 0.0;
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;
  double mean_acc_params = 0.0;
  double mean_flops = 0.0;
};

std::vector<CurvePoint> aggregate_curve(const RunRecord& run);  // kReportError

struct DepthProbability {
  std::size_t depth = 0;
  double mean_clone_prob = 0.0;
  std::size_t paths = 0;
};
std::vector<DepthProbability> clone_probability_by_depth(const RunRecord& run);

struct HyperparamCount {
  std::string field;
  std::string value;
  std::size_t count = 0;
};
std::vector<HyperparamCount> hyperparam_histogram(const RunRecord& run);

inline constexpr const char* kCurveCsvHeader =
    "iteration,wall_clock_s,mean_val_acc,mean_test_acc,std_test_acc,mean_acc_params,mean_flops";

std::string curve_csv(const std::vector<CurvePoint>& curve);
std::string depth_csv(const std::vector<DepthProbability>& rows);
std::string hyperparam_csv(const std::vector<HyperparamCount>& rows);

// Writes, per run, <label>.curves.csv, <label>.mu_by_depth.csv and
// <label>.hyperparams.csv, plus comparison plots (SVG) and, when both modes
// are present, speedup.csv. Runs must share tasks and iteration counts.
// Returns the written files in order.
std::vector<std::filesystem::path> emit_report(const std::vector<LabeledRun>& runs,
                                               const std::filesystem::path& out_dir);

}  // namespace muevo

#endif  // MUEVO_REPORT_HPP_
