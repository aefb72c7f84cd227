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

#ifndef BUDGETGUARD_QUOTA_CONFIG_HPP
#define BUDGETGUARD_QUOTA_CONFIG_HPP

#include <cstdint>

#include "epsilon.hpp"
#include "event_store.hpp"

namespace budgetguard {

// Expected benign workload scale, used to size quota capacities:
//   N: max conversion sites requesting non-zero loss from an epoch
//   M: max impression sites contributing non-zero loss in an epoch
//   n: max conversion sites requesting non-zero loss from (epoch, impSite)
//   r: intermediary budget fraction of the querier budget
struct WorkloadParams {
  int64_t conv_sites_per_epoch = 0;      // N
  int64_t imp_sites_per_epoch = 0;       // M
  int64_t conv_sites_per_imp_site = 0;   // n
  double intermediary_fraction = 0.0;    // r
};

struct QuotaConfig {
  Epsilon eps_querier;
  Epsilon eps_global;
  Epsilon eps_imp_quota;
  Epsilon eps_conv_quota;
  int kappa_action = 2;

  // eps_conv_quota <= eps_imp_quota <= eps_global and
  // eps_querier <= eps_conv_quota must hold.
  void validate() const;
};

// Capacity derivation from workload parameters:
//   conv-quota = (1+r) * eps_querier
//   imp-quota  = n * (1+r) * eps_querier
//   global     = max(N, n*M) * (1+r) * eps_querier
// Monotone in each of N, M, n, r and eps_querier.
QuotaConfig derive_capacities(Epsilon eps_querier, const WorkloadParams& params,
                              int kappa_action);

// Upper-bound estimates of the workload parameters from an event stream.
// Per (device, epoch): distinct impression sites, distinct conversion sites,
// and the per-impression-site fan-out of conversion sites active alongside
// it. The given percentile (nearest-rank) of each distribution is returned;
// percentile 1.0 yields the maximum.
WorkloadParams estimate_workload_params(const EventStore& store, double percentile);

}  // namespace budgetguard

#endif  // BUDGETGUARD_QUOTA_CONFIG_HPP
