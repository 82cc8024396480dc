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

#include <atomic>
#include <cstdlib>
#include <string>

#include "muevo/error.hpp"
#include "muevo/kernels.hpp"

namespace muevo::kernels {

#ifndef MUEVO_HAVE_AVX2
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif

namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  const char* forced = std::getenv("MUEVO_KERNEL");
  if (forced != nullptr && std::string(forced) == "scalar") {
    return &scalar_table();
  }
  if (isa_available(Isa::kAvx2)) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return avx2_table() != nullptr && cpu_has_avx2_fma();
  }
  return false;
}

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& active() noexcept {
  return *active_slot().load(std::memory_order_relaxed);
}

void set_active(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorCode::kConfigError,
                "kernel variant unavailable: " + std::string(isa_name(isa)));
  }
  active_slot().store(isa == Isa::kAvx2 ? avx2_table() : &scalar_table(),
                      std::memory_order_relaxed);
}

}  // namespace muevo::kernels
