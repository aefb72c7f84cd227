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

#include "crossreport.hpp"

#include <algorithm>

namespace budgetguard {

const AttributionObject& CrossReportManager::measure_conversion_shared(
    Engine& engine, const ReportRequest& request) {
  request.validate();
  if (objects_.count(request.report_id)) {
    throw DuplicateObject("attribution object already exists for report " +
                          request.report_id);
  }

  AttributionObject obj;
  obj.report_id = request.report_id;
  obj.policy = request.policy;
  obj.noise_scale = request.noise_scale();
  obj.a_max = request.value;

  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  for (EpochId e = request.epoch_start; e <= request.epoch_end; ++e) {
    auto imps = match_impressions(engine.store(), request, e);
    if (imps.empty()) {
      obj.shared_status[e] = {false, NullCause::NoMatch};
      continue;
    }
    matched[e] = std::move(imps);
  }

  AttributionOutcome outcome = attribute(matched, request);

  // Upfront charge per relevant epoch: 2 * a_max / lambda, which equals
  // twice the per-epoch loss. The transaction covers the shared filters
  // only; querier budgets are paid per report in get_report.
  const Epsilon shared_loss =
      request.requested_epsilon.scaled(request.value / request.max_value) * 2;
  for (const auto& [e, imps] : matched) {
    std::map<SiteId, Epsilon> per_site;
    for (const auto& site : outcome.contributing_sites(e)) per_site[site] = shared_loss;
    FilterSet& fs = engine.filters().get_or_init(request.device, e,
                                                 engine.options().quota);
    TxnResult txn = engine.atomic_check_and_consume_shared(
        fs, request.conv_site, request.imp_sites, shared_loss, per_site,
        request.device, e, request.report_id);
    if (txn.ok) {
      obj.shared_status[e] = {true, NullCause::NoMatch};
      obj.frozen[e] = outcome.per_epoch.at(e);
    } else {
      obj.shared_status[e] = {false, txn.cause};
    }
  }

  return objects_.emplace(request.report_id, std::move(obj)).first->second;
}

Report CrossReportManager::get_report(Engine& engine, const ReportRequest& request) {
  request.validate();
  auto it = objects_.find(request.report_id);
  if (it == objects_.end()) {
    throw UnknownObject("no attribution object for report " + request.report_id);
  }
  AttributionObject& obj = it->second;
  if (!request.support) {
    throw InvalidRequest("get_report requires an impression support set");
  }
  const auto& support = *request.support;

  Report report;
  report.histogram.assign(static_cast<std::size_t>(request.histogram_dim), 0.0);
  for (EpochId e = request.epoch_start; e <= request.epoch_end; ++e) {
    report.per_epoch[e] = {false, NullCause::NoMatch};
  }

  // Null report when inconsistent with the object: overlapping support,
  // different noise scale, or different attribution policy. No state change.
  bool overlaps = std::any_of(support.begin(), support.end(), [&](const auto& k) {
    return obj.consumed_support.count(k) > 0;
  });
  if (overlaps || request.noise_scale() != obj.noise_scale ||
      request.policy != obj.policy) {
    return report;
  }

  const Epsilon querier_loss =
      request.requested_epsilon.scaled(request.value / request.max_value);
  for (EpochId e = request.epoch_start; e <= request.epoch_end; ++e) {
    auto fe = obj.frozen.find(e);
    if (fe == obj.frozen.end()) continue;
    std::vector<const AttributedImpression*> in_support;
    for (const auto& imp : fe->second) {
      if (support.count(ImpressionKey{imp.epoch, imp.site, imp.ad_key, imp.seq})) {
        in_support.push_back(&imp);
      }
    }
    if (in_support.empty()) continue;  // epoch irrelevant to this support

    FilterSet& fs =
        engine.filters().get_or_init(request.device, e, engine.options().quota);
    Filter& qf = fs.querier(request.querier, engine.options().quota);
    if (!qf.try_consume(querier_loss)) {
      report.per_epoch[e] = {false, NullCause::QuerierBudget};
      continue;
    }
    engine.mutable_ledger().append({request.device, e, request.report_id,
                                    FilterKind::Querier, request.querier,
                                    querier_loss, true});
    report.per_epoch[e] = {true, NullCause::NoMatch};
    for (const auto* imp : in_support) {
      report.histogram[static_cast<std::size_t>(imp->bucket)] += imp->value;
    }
  }

  obj.consumed_support.insert(support.begin(), support.end());
  return report;
}

}  // namespace budgetguard
