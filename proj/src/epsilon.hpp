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

#ifndef BUDGETGUARD_EPSILON_HPP
#define BUDGETGUARD_EPSILON_HPP

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "errors.hpp"

namespace budgetguard {

// Privacy budget amount, stored as an integer count of micro-epsilon units
// (1 unit = 1e-6 epsilon). Budget comparisons in the filter machinery are
// exact inequalities, so all internal arithmetic must be exact; real-valued
// inputs are converted once, by round-to-nearest, at the API boundary.
class Epsilon {
 public:
  static constexpr int64_t kUnitsPerEpsilon = 1000000;

  constexpr Epsilon() = default;

  static Epsilon from_micros(int64_t micros) {
    if (micros < 0) throw InvalidParams("epsilon must be non-negative");
    Epsilon e;
    e.micros_ = micros;
    return e;
  }

  static Epsilon from_double(double eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw InvalidParams("epsilon must be a finite non-negative real");
    }
    return from_micros(static_cast<int64_t>(
        std::llround(eps * static_cast<double>(kUnitsPerEpsilon))));
  }

  int64_t micros() const { return micros_; }
  double value() const {
    return static_cast<double>(micros_) / static_cast<double>(kUnitsPerEpsilon);
  }
  bool is_zero() const { return micros_ == 0; }

  // Round-to-nearest scaling, used for (value / maxValue) * epsilon.
  Epsilon scaled(double ratio) const {
    if (!(ratio >= 0.0) || !std::isfinite(ratio)) {
      throw InvalidParams("scale ratio must be a finite non-negative real");
    }
    return from_micros(static_cast<int64_t>(
        std::llround(ratio * static_cast<double>(micros_))));
  }

  // Ceiling division: splitting a loss across k parts such that the parts
  // always sum to at least the whole.
  Epsilon ceil_div(int64_t k) const {
    if (k <= 0) throw InvalidParams("divisor must be positive");
    return from_micros((micros_ + k - 1) / k);
  }

  Epsilon operator+(Epsilon o) const { return from_micros(micros_ + o.micros_); }
  Epsilon operator-(Epsilon o) const {
    if (o.micros_ > micros_) throw InvalidParams("epsilon subtraction underflow");
    return from_micros(micros_ - o.micros_);
  }
  Epsilon operator*(int64_t k) const {
    if (k < 0) throw InvalidParams("epsilon multiplier must be non-negative");
    return from_micros(micros_ * k);
  }
  Epsilon& operator+=(Epsilon o) {
    micros_ += o.micros_;
    return *this;
  }
  auto operator<=>(const Epsilon&) const = default;

  std::string str() const { return std::to_string(value()); }

 private:
  int64_t micros_ = 0;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_EPSILON_HPP
