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

#include "engine.hpp"

namespace budgetguard {

const char* engine_variant_name(EngineVariant v) {
  switch (v) {
    case EngineVariant::Full:
      return "full";
    case EngineVariant::GlobalOnly:
      return "global_only";
    case EngineVariant::QuerierOnly:
      return "querier_only";
  }
  return "unknown";
}

EngineVariant engine_variant_from_name(const std::string& name) {
  if (name == "full") return EngineVariant::Full;
  if (name == "global_only") return EngineVariant::GlobalOnly;
  if (name == "querier_only") return EngineVariant::QuerierOnly;
  throw ConfigError("unknown engine variant: " + name);
}

Engine::Engine(EngineOptions options)
    : options_(std::move(options)), store_(options_.epoch_length) {
  options_.quota.validate();
}

UaCtxId Engine::on_user_action(const DeviceId& device, const SiteId& site) {
  (void)site;  // the triggering site is informational; cap state starts empty
  return "ua" + std::to_string(next_ua_++) + "@" + device;
}

bool Engine::quota_count_check(const DeviceId& device, const UaCtxId& ua_ctx,
                               EpochId epoch, const SiteId& site) const {
  return ua_state_.check(device, ua_ctx, epoch, site, options_.quota.kappa_action);
}

SaveResult Engine::save_impression(const DeviceId& device, const UaCtxId& ua_ctx,
                                   ImpressionEvent impression) {
  if (impression.device != device) {
    throw InvalidEvent("impression device does not match the calling device");
  }
  impression.ua_ctx = ua_ctx;
  if (cap_enabled()) {
    if (!quota_count_check(device, ua_ctx, impression.epoch, impression.site)) {
      return SaveResult::Rejected;
    }
    ua_state_.add(device, ua_ctx, impression.epoch, impression.site);
  }
  store_.append(std::move(impression));
  return SaveResult::Stored;
}

void Engine::record_conversion(ConversionEvent conversion) {
  store_.append(std::move(conversion));
}

  // Phase-1 check that leaves absent map entries absent: an untouched
  // filter holds its full configured capacity.
namespace {
bool can_consume_entry(const std::map<std::string, Filter>& filters,
                       const std::string& key, Epsilon loss, Epsilon capacity) {
  auto it = filters.find(key);
  return it == filters.end() ? loss <= capacity : it->second.can_consume(loss);
}
}  // namespace

TxnResult Engine::txn_impl(FilterSet& fs, const QuerierId* querier,
                           const SiteId& conv_site, const std::set<SiteId>& imp_sites,
                           Epsilon epoch_loss,
                           const std::map<SiteId, Epsilon>& per_site_loss,
                           const DeviceId& device, EpochId epoch,
                           const std::string& report_id) {
  // An all-zero transaction always fits and must not touch any state.
  bool any_site_loss = false;
  for (const auto& [site, loss] : per_site_loss) any_site_loss |= !loss.is_zero();
  if (epoch_loss.is_zero() && !any_site_loss) return {true, NullCause::NoMatch, {}};

  // Phase 1: check every filter in order without mutating anything; a
  // rejected transaction must leave the filter set snapshot-identical.
  // Sites with zero loss are skipped so that impression sites that matched
  // nothing never create or consume quota state.
  if (querier && !can_consume_entry(fs.per_querier, *querier, epoch_loss,
                                    options_.quota.eps_querier)) {
    return {false, NullCause::QuerierBudget, {}};
  }
  if (global_enabled() && !fs.global.can_consume(epoch_loss)) {
    return {false, NullCause::GlobalBudget, {}};
  }
  if (quotas_enabled()) {
    if (!can_consume_entry(fs.conv_quota, conv_site, epoch_loss,
                           options_.quota.eps_conv_quota)) {
      return {false, NullCause::ConvQuota, {}};
    }
    for (const auto& site : imp_sites) {
      auto it = per_site_loss.find(site);
      if (it == per_site_loss.end() || it->second.is_zero()) continue;
      if (!can_consume_entry(fs.imp_quota, site, it->second,
                             options_.quota.eps_imp_quota)) {
        return {false, NullCause::ImpQuota, site};
      }
    }
  }

  // Phase 2: deduct from all filters and record the deductions.
  if (querier) {
    fs.querier(*querier, options_.quota).try_consume(epoch_loss);
    ledger_.append(
        {device, epoch, report_id, FilterKind::Querier, *querier, epoch_loss, true});
  }
  if (global_enabled()) {
    fs.global.try_consume(epoch_loss);
    ledger_.append({device, epoch, report_id, FilterKind::Global, "", epoch_loss, true});
  }
  if (quotas_enabled()) {
    fs.conv(conv_site, options_.quota).try_consume(epoch_loss);
    ledger_.append(
        {device, epoch, report_id, FilterKind::ConvQuota, conv_site, epoch_loss, true});
    for (const auto& site : imp_sites) {
      auto it = per_site_loss.find(site);
      if (it == per_site_loss.end() || it->second.is_zero()) continue;
      fs.imp(site, options_.quota).try_consume(it->second);
      ledger_.append(
          {device, epoch, report_id, FilterKind::ImpQuota, site, it->second, true});
    }
  }
  return {true, NullCause::NoMatch, {}};
}

TxnResult Engine::atomic_check_and_consume(
    FilterSet& fs, const QuerierId& querier, const SiteId& conv_site,
    const std::set<SiteId>& imp_sites, Epsilon epoch_loss,
    const std::map<SiteId, Epsilon>& per_site_loss, const DeviceId& device,
    EpochId epoch, const std::string& report_id) {
  return txn_impl(fs, &querier, conv_site, imp_sites, epoch_loss, per_site_loss,
                  device, epoch, report_id);
}

TxnResult Engine::atomic_check_and_consume_shared(
    FilterSet& fs, const SiteId& conv_site, const std::set<SiteId>& imp_sites,
    Epsilon epoch_loss, const std::map<SiteId, Epsilon>& per_site_loss,
    const DeviceId& device, EpochId epoch, const std::string& report_id) {
  return txn_impl(fs, nullptr, conv_site, imp_sites, epoch_loss, per_site_loss,
                  device, epoch, report_id);
}

Report Engine::measure_conversion(const ReportRequest& request) {
  request.validate();

  // Resolve the per-action domain cap for every epoch first: epochs blocked
  // by the cap contribute no data to attribution at all.
  std::map<EpochId, EpochStatus> statuses;
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  for (EpochId e = request.epoch_start; e <= request.epoch_end; ++e) {
    if (cap_enabled()) {
      if (!quota_count_check(request.device, request.ua_ctx, e, request.conv_site)) {
        statuses[e] = {false, NullCause::DomainCap};
        continue;
      }
      ua_state_.add(request.device, request.ua_ctx, e, request.conv_site);
    }
    auto imps = match_impressions(store_, request, e);
    if (request.support) {
      std::erase_if(imps, [&](const ImpressionEvent& imp) {
        return !request.support->count(key_of(imp));
      });
    }
    if (imps.empty()) {
      statuses[e] = {false, NullCause::NoMatch};
      continue;
    }
    matched[e] = std::move(imps);
  }

  AttributionOutcome outcome = attribute(matched, request);

  std::map<EpochId, Epsilon> losses;
  for (const auto& [e, imps] : matched) {
    Epsilon loss = epoch_budget(outcome, request, e);
    losses[e] = loss;
    if (replay_only_) {
      statuses[e] = {true, NullCause::NoMatch};
      continue;
    }
    auto per_site = imp_site_budgets(outcome, request, e, options_.imp_site_mode);
    FilterSet& fs = filters_.get_or_init(request.device, e, options_.quota);
    TxnResult txn =
        atomic_check_and_consume(fs, request.querier, request.conv_site,
                                 request.imp_sites, loss, per_site, request.device, e,
                                 request.report_id);
    statuses[e] = txn.ok ? EpochStatus{true, NullCause::NoMatch}
                         : EpochStatus{false, txn.cause};
  }

  for (const auto& [e, st] : statuses) {
    auto it = losses.find(e);
    report_log_.push_back({request.report_id, request.device, e, st,
                           it == losses.end() ? Epsilon() : it->second});
  }

  return build_histogram(outcome, request, statuses);
}

Epsilon Engine::remaining(const DeviceId& device, EpochId epoch, FilterKind kind,
                          const std::string& key) const {
  const FilterSet* fs = filters_.find(device, epoch);
  if (!fs) {
    switch (kind) {
      case FilterKind::Global:
        return options_.quota.eps_global;
      case FilterKind::Querier:
        return options_.quota.eps_querier;
      case FilterKind::ConvQuota:
        return options_.quota.eps_conv_quota;
      case FilterKind::ImpQuota:
        return options_.quota.eps_imp_quota;
    }
  }
  switch (kind) {
    case FilterKind::Global:
      return fs->global.remaining();
    case FilterKind::Querier: {
      auto it = fs->per_querier.find(key);
      return it == fs->per_querier.end() ? options_.quota.eps_querier
                                         : it->second.remaining();
    }
    case FilterKind::ConvQuota: {
      auto it = fs->conv_quota.find(key);
      return it == fs->conv_quota.end() ? options_.quota.eps_conv_quota
                                        : it->second.remaining();
    }
    case FilterKind::ImpQuota: {
      auto it = fs->imp_quota.find(key);
      return it == fs->imp_quota.end() ? options_.quota.eps_imp_quota
                                       : it->second.remaining();
    }
  }
  return Epsilon();
}

}  // namespace budgetguard
