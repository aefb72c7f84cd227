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

#ifndef BUDGETGUARD_VERIFY_HPP
#define BUDGETGUARD_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace budgetguard {

struct VerifyReport {
  int64_t trials = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Randomized transaction traces against freshly built filter sets. Every
// rejected transaction must leave a snapshot-identical filter set; every
// accepted one must deduct exactly the requested amounts.
VerifyReport atomicity_fuzz(uint64_t seed, int64_t trials);

// Randomized adversarial mini-scenarios with random quota configurations,
// chains, and report shapes. The ledger audit bounds (global cap,
// stock-and-flow bound, user-action bound) must hold exactly on every run.
VerifyReport resilience_fuzz(uint64_t seed, int64_t trials);

}  // namespace budgetguard

#endif  // BUDGETGUARD_VERIFY_HPP
