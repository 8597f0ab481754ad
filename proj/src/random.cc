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

#include "oosguard/random.h"

#include <cmath>
#include <numbers>

namespace oosguard {
namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, RngStream stream,
                       std::uint64_t substream)
    : key_(splitmix64(splitmix64(seed) ^
                      splitmix64(static_cast<std::uint64_t>(stream) * kGolden +
                                 substream))) {}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ + (counter_++) * kGolden);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double CounterRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Rejection on the low end removes modulo bias.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

}  // namespace oosguard
