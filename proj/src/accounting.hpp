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

#ifndef BUDGETGUARD_ACCOUNTING_HPP
#define BUDGETGUARD_ACCOUNTING_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epsilon.hpp"
#include "event_store.hpp"
#include "types.hpp"

namespace budgetguard {

enum class AttributionPolicy {
  UniformSplit,  // divide the conversion value evenly across matched impressions
  LastTouch,     // full value to the most recent matched impression
};

// Granularity rule for the per-impression-site quota charge.
enum class ImpSiteBudgetMode {
  // Divide the epoch loss evenly (rounded up) across the epoch's
  // contributing sites. Sums to at least the epoch loss.
  UniformHeuristic,
  // Conservative sensitivity bound: twice the epoch loss when the report
  // spans multiple epochs or multiple contributing sites, the epoch loss
  // itself in the single-epoch single-site case.
  TwoDeltaBound,
};

struct ReportRequest {
  std::string report_id;
  DeviceId device;
  QuerierId querier;
  SiteId conv_site;
  std::set<SiteId> imp_sites;       // registered relevant impression sites
  EpochId epoch_start = 0;
  EpochId epoch_end = 0;            // inclusive window
  Epsilon requested_epsilon;
  double value = 0.0;
  double max_value = 0.0;
  int histogram_dim = 0;
  std::optional<std::string> match_ad_key;  // match everything when unset
  UaCtxId ua_ctx;
  AttributionPolicy policy = AttributionPolicy::UniformSplit;
  // Cross-report support restriction; unset outside that path.
  std::optional<std::set<ImpressionKey>> support;

  // Laplace noise scale is derived, not stored.
  double noise_scale() const { return max_value / requested_epsilon.value(); }
  void validate() const;
};

enum class NullCause {
  QuerierBudget,
  GlobalBudget,
  ConvQuota,
  ImpQuota,
  DomainCap,
  NoMatch,
};

const char* null_cause_name(NullCause cause);

struct EpochStatus {
  bool committed = false;
  NullCause cause = NullCause::NoMatch;  // meaningful when !committed
};

struct Report {
  std::vector<double> histogram;
  std::map<EpochId, EpochStatus> per_epoch;
};

struct AttributedImpression {
  EpochId epoch = 0;
  SiteId site;
  std::string ad_key;
  int bucket = 0;
  uint64_t seq = 0;
  double value = 0.0;  // attributed share, >= 0
};

// Result of running the attribution policy over the matched impressions of a
// whole request window. Sum of attributed values never exceeds `a_max`.
struct AttributionOutcome {
  std::map<EpochId, std::vector<AttributedImpression>> per_epoch;
  double a_max = 0.0;

  bool epoch_relevant(EpochId e) const {
    auto it = per_epoch.find(e);
    return it != per_epoch.end() && !it->second.empty();
  }
  std::set<SiteId> contributing_sites(EpochId e) const;
};

// Impressions in (request.device, epoch) whose site is registered, whose key
// matches the request predicate, and whose user-action context differs from
// the request's (same-action impressions are never attributable).
std::vector<ImpressionEvent> match_impressions(const EventStore& store,
                                               const ReportRequest& request,
                                               EpochId epoch);

AttributionOutcome attribute(
    const std::map<EpochId, std::vector<ImpressionEvent>>& matched,
    const ReportRequest& request);

// Individual device-epoch loss: zero for epochs with no matched impression,
// (value / maxValue) * requestedEpsilon otherwise.
Epsilon epoch_budget(const AttributionOutcome& outcome, const ReportRequest& request,
                     EpochId epoch);

// Device-epoch-impression-site loss for one registered site.
Epsilon epoch_imp_site_budget(const AttributionOutcome& outcome,
                              const ReportRequest& request, EpochId epoch,
                              const SiteId& site, ImpSiteBudgetMode mode);

// Per-site losses for all contributing sites of an epoch. Sites that matched
// nothing never appear (they consume no quota).
std::map<SiteId, Epsilon> imp_site_budgets(const AttributionOutcome& outcome,
                                           const ReportRequest& request,
                                           EpochId epoch, ImpSiteBudgetMode mode);

// Histogram over committed epochs only; nulled epochs contribute nothing.
Report build_histogram(const AttributionOutcome& outcome, const ReportRequest& request,
                       const std::map<EpochId, EpochStatus>& statuses);

}  // namespace budgetguard

#endif  // BUDGETGUARD_ACCOUNTING_HPP
