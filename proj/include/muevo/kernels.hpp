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

#ifndef MUEVO_KERNELS_HPP_
#define MUEVO_KERNELS_HPP_

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

// Inner-loop arithmetic for the training engine. Every kernel has a scalar
// reference implementation and, where the build and the CPU allow, an AVX2+FMA
// variant. The variant is picked once at startup (override with the
// MUEVO_KERNEL environment variable: "scalar" or "avx2").
//
// Variants differ in summation order and FMA rounding, so trained parameters
// are bit-reproducible only for a fixed kernel choice.
namespace muevo::kernels {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // v[i] = momentum * v[i] + g[i];  p[i] -= lr * v[i]
  void (*momentum_step)(double* p, double* v, const double* g, double lr,
                        double momentum, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table() noexcept;

bool isa_available(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

const KernelTable& active() noexcept;
// Throws muevo::Error if the variant is unavailable on this build or CPU.
void set_active(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void momentum_step(std::span<double> p, std::span<double> v,
                          std::span<const double> g, double lr,
                          double momentum) {
  assert(p.size() == v.size() && p.size() == g.size());
  active().momentum_step(p.data(), v.data(), g.data(), lr, momentum, p.size());
}

}  // namespace muevo::kernels

#endif  // MUEVO_KERNELS_HPP_
