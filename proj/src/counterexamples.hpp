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

#ifndef BUDGETGUARD_COUNTEREXAMPLES_HPP
#define BUDGETGUARD_COUNTEREXAMPLES_HPP

#include <cstdint>

#include "rng.hpp"

namespace budgetguard {

// Executable constructions showing that per-querier budget enforcement is
// unsound: (1) adaptive data generation re-encodes other queriers' results
// into the dataset; (2) a shared budget across queriers leaks through its
// accept/reject state. Both are Monte Carlo simulations of two worlds that
// differ in one record, with exact closed forms as oracles.

enum class CxVariant { DP, IDP };

struct CxParams {
  double eps = 1.0;         // per-querier filter capacity
  int n = 1;                // helper querier count
  int64_t trials = 10000;   // Monte Carlo trials per world
  double eps_global = 0.0;  // shared filter capacity (<= 0: default)
  double eps0 = 0.0;        // final-query budget split (<= 0: eps/2)
  int64_t tail_threshold = 0;  // N for the tail event (<= 0: default)
  CxVariant variant = CxVariant::DP;
};

struct Thm1ClosedForm {
  double p = 0.0;          // Pr[Lap(1/eps) > 1/2] = exp(-eps/2)/2
  double eps_prime = 0.0;  // ln((p + (1-p)e^eps) / (p e^eps + 1-p))
  double log_ratio = 0.0;  // eps + n * eps_prime
};

// Closed form of the log probability ratio for the adaptive-data-generation
// construction with n helper queriers of capacity eps.
Thm1ClosedForm thm1_closed_form(double eps, int n);

struct CxResult {
  double estimate = 0.0;  // Monte Carlo estimate of ln(Pr1[S] / Pr0[S])
  double stderr_est = 0.0;
  double closed_form = 0.0;   // exact value (or lower bound, see lower_bound)
  double lower_bound = 0.0;   // proof-style bound the estimate should exceed
  int64_t trials = 0;
  double max_per_querier_spend = 0.0;  // never exceeds eps by construction
};

// Adaptive data generation: n helpers observe the challenge record through
// Laplace counts, the data generation process inserts the number of high
// observations, and a final querier reads the total. The estimator samples
// the binomial part and integrates the final Laplace tail exactly; an
// effective-sample-size check stands in for the raw tail count and throws
// InsufficientTailMass below 100.
CxResult thm1_simulate(const CxParams& params, Rng& rng);

// Shared-limit leakage. DP variant: helpers spend eps1 then conditionally
// eps2 = 2*eps0/n; the final querier's eps0 request hits the saturated
// shared filter exactly when more than half the helpers followed up, and the
// rejection itself is the observable. IDP variant: filters are per-record
// and rejections are silent record drops; the observable is the tail of a
// count query over the helper records.
CxResult thm2_simulate(const CxParams& params, Rng& rng);

}  // namespace budgetguard

#endif  // BUDGETGUARD_COUNTEREXAMPLES_HPP
