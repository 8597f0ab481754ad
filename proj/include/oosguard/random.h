/* Copyright 2026 The oosguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef OOSGUARD_RANDOM_H_
#define OOSGUARD_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace oosguard {

// Stream identifiers keep independent consumers of one seed decorrelated, so
// adding a consumer never shifts the draws of another.
enum class RngStream : std::uint64_t {
  kEncoderInit = 1,
  kSoftmaxInit = 2,
  kAutoencoderInit = 3,
  kShuffle = 4,
  kSplit = 5,
  kSynthetic = 6,
  kTest = 7,
};

// Counter-based generator: output i is a SplitMix64 finalizer applied to
// (key + i * golden). Results depend only on (seed, stream, counter), never on
// the standard library's distribution implementations.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngStream stream, std::uint64_t substream = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (cosine branch only).
  double normal();

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Seeded permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng);

}  // namespace oosguard

#endif  // OOSGUARD_RANDOM_H_
