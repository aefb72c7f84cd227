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

#ifndef BUDGETGUARD_METRICS_HPP
#define BUDGETGUARD_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "engine.hpp"
#include "rng.hpp"

namespace budgetguard {

struct QueryResult {
  std::string query_id;
  std::vector<double> true_histogram;
  std::vector<double> noisy_estimate;
  int batch_size = 0;
  double tau = 0.05;
  double rmsre = 0.0;
  // Per-(report, epoch) outcome counts for the batch, keyed by "committed"
  // or the null cause name. Sums to the batch's epoch-attempt count.
  std::map<std::string, std::size_t> cause_counts;
};

// Bucketwise sum of device reports plus one independent Laplace(lambda) draw
// per bucket. Deterministic under a fixed rng state. The dimension is taken
// from the reports; `dim` must be supplied when the report set is empty, in
// which case the result is a pure noise vector.
std::vector<double> aggregate_and_noise(const std::vector<std::vector<double>>& reports,
                                        double lambda, Rng& rng, int dim = -1);

// Root mean squared relative error across buckets, with per-bucket
// denominators clipped below tau * batch_size:
//   sqrt( (1/m) * sum_j ((est_j - true_j) / max(true_j, tau*batch))^2 )
double rmsre_tau(const std::vector<double>& true_hist,
                 const std::vector<double>& est_hist, double tau, int batch_size);

// Fraction of (report, epoch) attempts per outcome, keyed by "committed" or
// the null cause name.
std::map<std::string, double> cause_breakdown(const std::vector<ReportLogEntry>& log);

struct AdversaryInfo {
  std::set<SiteId> sites;                      // attacker-controlled site ids
  std::map<DeviceId, int64_t> user_actions;    // logged adversarial actions per device
  double intermediary_fraction = 0.0;          // r used in bound (c)
};

struct AuditViolation {
  std::string what;
  DeviceId device;
  EpochId epoch = 0;
};

// Verifies the run's ledger against the enforcement bounds:
//  (a) per (device, epoch): committed global deductions sum to at most the
//      global capacity (checked whenever the variant has a global filter);
//  (b) adversarial global consumption per (device, epoch) is at most
//      min(M_adv * eps_imp, N_adv * eps_conv), where M_adv / N_adv count
//      adversarial quota filters with nonzero consumption;
//  (c) adversarial global consumption per (device, epoch) is at most
//      (1+r) * eps_querier * kappa * U_adv for the device's logged
//      adversarial user-action count.
// Quota bounds (b) and (c) apply only to the full enforcement variant.
std::vector<AuditViolation> ledger_audit(const Ledger& ledger, const QuotaConfig& config,
                                         const AdversaryInfo& adversary,
                                         EngineVariant variant);

}  // namespace budgetguard

#endif  // BUDGETGUARD_METRICS_HPP
