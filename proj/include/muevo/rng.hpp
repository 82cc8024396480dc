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

#ifndef MUEVO_RNG_HPP_
#define MUEVO_RNG_HPP_

#include <cstdint>
#include <initializer_list>

namespace muevo {

// Portable counter-based generator. Output i (0-based) of a stream with key k
// is splitmix64_finalize(k + (i + 1) * 0x9E3779B97F4A7C15), all arithmetic
// modulo 2^64. Streams are derived by folding tags into the key with the same
// finalizer, so every draw depends only on (key, counter) and is identical on
// every platform.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  // Independent child stream keyed by this stream's key and the given tags.
  CounterRng derive(std::initializer_list<std::uint64_t> tags) const noexcept {
    std::uint64_t k = finalize(key_ ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t t : tags) k = finalize(k + kGolden * (t + 1));
    return CounterRng(k);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return finalize(key_ + counter_ * kGolden);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Uniform integer in [0, n); n must be positive. Rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Approximate standard normal: Irwin-Hall sum of 12 uniforms minus 6. Uses
  // only exactly-rounded IEEE operations, so values are bit-reproducible.
  double normal() noexcept {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stable 64-bit tag for a string, used when deriving streams from ids.
constexpr std::uint64_t string_tag(const char* s, std::size_t n) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(s[i]);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace muevo

#endif  // MUEVO_RNG_HPP_
