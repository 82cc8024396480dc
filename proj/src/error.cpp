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

#include "muevo/error.hpp"

namespace muevo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidComponent: return "InvalidComponent";
    case ErrorCode::kDanglingComponent: return "DanglingComponent";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kUnsupportedComponentKind: return "UnsupportedComponentKind";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kInvalidBudget: return "InvalidBudget";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kNoParentAvailable: return "NoParentAvailable";
    case ErrorCode::kIllegalMutation: return "IllegalMutation";
    case ErrorCode::kInvalidReward: return "InvalidReward";
    case ErrorCode::kIntegrityViolation: return "IntegrityViolation";
    case ErrorCode::kConflict: return "Conflict";
    case ErrorCode::kDuplicateMarker: return "DuplicateMarker";
    case ErrorCode::kBarrierTimeout: return "BarrierTimeout";
    case ErrorCode::kStoreError: return "StoreError";
    case ErrorCode::kReportError: return "ReportError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kCancelled: return "Cancelled";
    case ErrorCode::kAgentFailed: return "AgentFailed";
  }
  return "Unknown";
}

namespace {

std::string barrier_message(int iteration,
                            const std::vector<std::string>& missing) {
  std::string msg = "barrier for iteration " + std::to_string(iteration) +
                    " timed out; missing agents:";
  for (const auto& a : missing) msg += " " + a;
  return msg;
}

}  // namespace

BarrierTimeout::BarrierTimeout(int iteration,
                               std::vector<std::string> missing_agents)
    : Error(ErrorCode::kBarrierTimeout,
            barrier_message(iteration, missing_agents)),
      iteration_(iteration),
      missing_(std::move(missing_agents)) {}

}  // namespace muevo
