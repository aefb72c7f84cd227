// Copyright 2025 The BudgetGuard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BUDGETGUARD_RNG_HPP
#define BUDGETGUARD_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace budgetguard {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// All randomness in the library flows through this wrapper so that results
// are reproducible bit-for-bit under a fixed seed. Substreams are derived
// from a master seed and a name; distributions are implemented directly on
// top of the raw 64-bit output instead of std::*_distribution, whose results
// vary across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

  static Rng substream(uint64_t master_seed, std::string_view name) {
    return Rng(splitmix64(master_seed ^ fnv1a64(name)));
  }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Laplace(scale) centered at zero, via inverse CDF.
  double laplace(double scale) {
    double u = uniform01() - 0.5;
    double a = 1.0 - 2.0 * std::abs(u);
    if (a <= 0.0) a = 0x1.0p-53;
    double x = -scale * std::log(a);
    return u < 0 ? -x : x;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_RNG_HPP
