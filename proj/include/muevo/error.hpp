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

#ifndef MUEVO_ERROR_HPP_
#define MUEVO_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace muevo {

enum class ErrorCode {
  kInvalidComponent,
  kDanglingComponent,
  kDimMismatch,
  kUnsupportedComponentKind,
  kEmptyBatch,
  kEmptySplit,
  kInvalidBudget,
  kInvalidSpec,
  kNoParentAvailable,
  kIllegalMutation,
  kInvalidReward,
  kIntegrityViolation,
  kConflict,
  kDuplicateMarker,
  kBarrierTimeout,
  kStoreError,
  kReportError,
  kConfigError,
  kTrainingDiverged,
  kCancelled,
  kAgentFailed,
};

std::string_view to_string(ErrorCode code);

// All failures in the library surface as Error (or a subclass) carrying a
// machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class BarrierTimeout : public Error {
 public:
  BarrierTimeout(int iteration, std::vector<std::string> missing_agents);

  int iteration() const noexcept { return iteration_; }
  const std::vector<std::string>& missing_agents() const noexcept {
    return missing_;
  }

 private:
  int iteration_;
  std::vector<std::string> missing_;
};

}  // namespace muevo

#endif  // MUEVO_ERROR_HPP_
