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

#include "accounting.hpp"

#include <algorithm>

namespace budgetguard {

void ReportRequest::validate() const {
  if (report_id.empty()) throw InvalidRequest("report id must be non-empty");
  if (device.empty()) throw InvalidRequest("report device must be non-empty");
  if (epoch_end < epoch_start) throw InvalidRequest("report epoch window is empty");
  if (requested_epsilon.is_zero()) throw InvalidRequest("requested epsilon must be positive");
  if (max_value <= 0.0) throw InvalidRequest("maxValue must be positive");
  if (value < 0.0 || value > max_value) {
    throw InvalidRequest("value must lie in [0, maxValue]");
  }
  if (histogram_dim <= 0) throw InvalidRequest("histogram dimension must be positive");
}

const char* null_cause_name(NullCause cause) {
  switch (cause) {
    case NullCause::QuerierBudget:
      return "querier_budget";
    case NullCause::GlobalBudget:
      return "global_budget";
    case NullCause::ConvQuota:
      return "conv_quota";
    case NullCause::ImpQuota:
      return "imp_quota";
    case NullCause::DomainCap:
      return "domain_cap";
    case NullCause::NoMatch:
      return "no_match";
  }
  return "unknown";
}

std::set<SiteId> AttributionOutcome::contributing_sites(EpochId e) const {
  std::set<SiteId> sites;
  auto it = per_epoch.find(e);
  if (it == per_epoch.end()) return sites;
  for (const auto& imp : it->second) sites.insert(imp.site);
  return sites;
}

std::vector<ImpressionEvent> match_impressions(const EventStore& store,
                                               const ReportRequest& request,
                                               EpochId epoch) {
  std::vector<ImpressionEvent> matched;
  for (const auto& imp : store.impressions(request.device, epoch)) {
    if (imp.ua_ctx == request.ua_ctx) continue;
    if (!request.imp_sites.count(imp.site)) continue;
    if (request.match_ad_key && imp.ad_key != *request.match_ad_key) continue;
    matched.push_back(imp);
  }
  return matched;
}

AttributionOutcome attribute(
    const std::map<EpochId, std::vector<ImpressionEvent>>& matched,
    const ReportRequest& request) {
  AttributionOutcome outcome;
  outcome.a_max = request.value;

  std::size_t total = 0;
  for (const auto& [e, imps] : matched) total += imps.size();
  if (total == 0) return outcome;

  // LastTouch: the whole value goes to the most recent impression in the
  // window, ties broken by store order.
  const ImpressionEvent* last = nullptr;
  if (request.policy == AttributionPolicy::LastTouch) {
    for (const auto& [e, imps] : matched) {
      for (const auto& imp : imps) {
        if (!last || imp.timestamp > last->timestamp ||
            (imp.timestamp == last->timestamp && imp.seq > last->seq)) {
          last = &imp;
        }
      }
    }
  }

  const double uniform_share = request.value / static_cast<double>(total);
  for (const auto& [e, imps] : matched) {
    auto& out = outcome.per_epoch[e];
    for (const auto& imp : imps) {
      double share = request.policy == AttributionPolicy::LastTouch
                         ? (&imp == last ? request.value : 0.0)
                         : uniform_share;
      out.push_back(AttributedImpression{imp.epoch, imp.site, imp.ad_key, imp.bucket,
                                         imp.seq, share});
    }
  }
  return outcome;
}

Epsilon epoch_budget(const AttributionOutcome& outcome, const ReportRequest& request,
                     EpochId epoch) {
  if (!outcome.epoch_relevant(epoch)) return Epsilon();
  return request.requested_epsilon.scaled(request.value / request.max_value);
}

Epsilon epoch_imp_site_budget(const AttributionOutcome& outcome,
                              const ReportRequest& request, EpochId epoch,
                              const SiteId& site, ImpSiteBudgetMode mode) {
  if (!request.imp_sites.count(site)) {
    throw SiteNotRegistered("site not registered for this report: " + site);
  }
  auto sites = outcome.contributing_sites(epoch);
  if (!sites.count(site)) return Epsilon();

  Epsilon epoch_loss = epoch_budget(outcome, request, epoch);
  if (mode == ImpSiteBudgetMode::UniformHeuristic) {
    return epoch_loss.ceil_div(static_cast<int64_t>(sites.size()));
  }
  bool multi = (request.epoch_end > request.epoch_start) || sites.size() > 1;
  return multi ? epoch_loss * 2 : epoch_loss;
}

std::map<SiteId, Epsilon> imp_site_budgets(const AttributionOutcome& outcome,
                                           const ReportRequest& request,
                                           EpochId epoch, ImpSiteBudgetMode mode) {
  std::map<SiteId, Epsilon> losses;
  for (const auto& site : outcome.contributing_sites(epoch)) {
    losses[site] = epoch_imp_site_budget(outcome, request, epoch, site, mode);
  }
  return losses;
}

Report build_histogram(const AttributionOutcome& outcome, const ReportRequest& request,
                       const std::map<EpochId, EpochStatus>& statuses) {
  Report report;
  report.histogram.assign(static_cast<std::size_t>(request.histogram_dim), 0.0);
  report.per_epoch = statuses;
  for (const auto& [e, imps] : outcome.per_epoch) {
    auto st = statuses.find(e);
    if (st == statuses.end() || !st->second.committed) continue;
    for (const auto& imp : imps) {
      if (imp.bucket < 0 || imp.bucket >= request.histogram_dim) {
        throw InvalidRequest("impression bucket out of range for this report");
      }
      report.histogram[static_cast<std::size_t>(imp.bucket)] += imp.value;
    }
  }
  return report;
}

}  // namespace budgetguard
