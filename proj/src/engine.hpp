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

#ifndef BUDGETGUARD_ENGINE_HPP
#define BUDGETGUARD_ENGINE_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "accounting.hpp"
#include "event_store.hpp"
#include "filter.hpp"
#include "quota_config.hpp"

namespace budgetguard {

// Enforcement stack. `Full` runs the complete mechanism: per-querier and
// global filters, per-site quotas, and the per-action domain cap.
// `GlobalOnly` keeps the shared global filter but drops quotas and the cap;
// `QuerierOnly` enforces per-querier budgets alone.
enum class EngineVariant { Full, GlobalOnly, QuerierOnly };

const char* engine_variant_name(EngineVariant v);
EngineVariant engine_variant_from_name(const std::string& name);

// Per-user-action bookkeeping: the distinct sites that have activated
// quota state under each (device, uaCtx, epoch). Bounded by kappa_action.
class UaState {
 public:
  bool check(const DeviceId& d, const UaCtxId& u, EpochId e, const SiteId& s,
             int kappa) const {
    auto it = accessed_.find({d, u, e});
    if (it == accessed_.end()) return 1 <= kappa;
    const auto& sites = it->second;
    if (sites.count(s)) return true;
    return static_cast<int>(sites.size()) + 1 <= kappa;
  }

  void add(const DeviceId& d, const UaCtxId& u, EpochId e, const SiteId& s) {
    accessed_[{d, u, e}].insert(s);
  }

  const std::set<SiteId>* find(const DeviceId& d, const UaCtxId& u, EpochId e) const {
    auto it = accessed_.find({d, u, e});
    return it == accessed_.end() ? nullptr : &it->second;
  }

  std::size_t max_sites_per_action_epoch() const {
    std::size_t m = 0;
    for (const auto& [k, v] : accessed_) m = std::max(m, v.size());
    return m;
  }

 private:
  std::map<std::tuple<DeviceId, UaCtxId, EpochId>, std::set<SiteId>> accessed_;
};

struct LedgerEntry {
  DeviceId device;
  EpochId epoch = 0;
  std::string report_id;
  FilterKind kind = FilterKind::Global;
  std::string key;  // querier or site id; empty for global
  Epsilon amount;
  bool committed = true;
};

// Audit record of every committed budget deduction. Entries are appended
// only for transactions that committed.
class Ledger {
 public:
  void append(LedgerEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<LedgerEntry> entries_;
};

struct TxnResult {
  bool ok = false;
  NullCause cause = NullCause::NoMatch;  // first failing check, in check order
  SiteId failing_site;                   // set for ImpQuota failures
};

enum class SaveResult { Stored, Rejected };

struct ReportLogEntry {
  std::string report_id;
  DeviceId device;
  EpochId epoch = 0;
  EpochStatus status;
  Epsilon epoch_loss;
};

struct EngineOptions {
  QuotaConfig quota;
  int64_t epoch_length = kDefaultEpochLengthSeconds;
  EngineVariant variant = EngineVariant::Full;
  ImpSiteBudgetMode imp_site_mode = ImpSiteBudgetMode::UniformHeuristic;
};

// On-device budget manager. Impressions are stored free of charge behind the
// per-action domain cap; privacy accounting happens in measure_conversion,
// which decides each epoch of the attribution window independently and
// deducts all budgets of an epoch in one atomic transaction.
//
// Operations for a given device must be externally serialized; distinct
// devices may be driven from different threads only with external locking of
// the shared engine.
class Engine {
 public:
  explicit Engine(EngineOptions options);

  const EngineOptions& options() const { return options_; }

  // Mints a fresh user-action context for the device. Per-action domain cap
  // state starts empty.
  UaCtxId on_user_action(const DeviceId& device, const SiteId& site);

  // True iff adding `site` keeps the action's accessed-site set within the
  // per-action domain cap. Pure check, no mutation.
  bool quota_count_check(const DeviceId& device, const UaCtxId& ua_ctx, EpochId epoch,
                         const SiteId& site) const;

  // Stores the impression unless the per-action domain cap rejects the
  // site. Consumes no privacy budget either way.
  SaveResult save_impression(const DeviceId& device, const UaCtxId& ua_ctx,
                             ImpressionEvent impression);

  void record_conversion(ConversionEvent conversion);

  // Two-phase transaction over one epoch's filters: phase 1 checks the
  // querier, global, and conversion-site filters with `epoch_loss` and each
  // impression-site quota with its per-site loss, in that order; phase 2
  // deducts from all of them and appends committed ledger entries. A failed
  // check leaves every filter untouched and reports the first failure.
  TxnResult atomic_check_and_consume(FilterSet& fs, const QuerierId& querier,
                                     const SiteId& conv_site,
                                     const std::set<SiteId>& imp_sites,
                                     Epsilon epoch_loss,
                                     const std::map<SiteId, Epsilon>& per_site_loss,
                                     const DeviceId& device, EpochId epoch,
                                     const std::string& report_id);

  // Same transaction with the querier filter left out of the commit; used by
  // the cross-report path, which pays querier budgets per report.
  TxnResult atomic_check_and_consume_shared(
      FilterSet& fs, const SiteId& conv_site, const std::set<SiteId>& imp_sites,
      Epsilon epoch_loss, const std::map<SiteId, Epsilon>& per_site_loss,
      const DeviceId& device, EpochId epoch, const std::string& report_id);

  // Generates the attribution report for the request. Each epoch in the
  // window is resolved independently: domain cap check, impression matching,
  // loss computation, atomic deduction. Nulled epochs contribute nothing to
  // the histogram.
  Report measure_conversion(const ReportRequest& request);

  const EventStore& store() const { return store_; }
  EventStore& store() { return store_; }
  const Ledger& ledger() const { return ledger_; }
  Ledger& mutable_ledger() { return ledger_; }
  const FilterRegistry& filters() const { return filters_; }
  FilterRegistry& filters() { return filters_; }
  const UaState& ua_state() const { return ua_state_; }
  const std::vector<ReportLogEntry>& report_log() const { return report_log_; }

  // Remaining budget on one filter; full capacity if never touched.
  Epsilon remaining(const DeviceId& device, EpochId epoch, FilterKind kind,
                    const std::string& key) const;

  // When set, measure_conversion replays cap bookkeeping and matching but
  // skips all filter access, and save_impression behaves normally. Used to
  // rebuild event and user-action state up to a snapshot cut.
  void set_replay_only(bool replay_only) { replay_only_ = replay_only; }

 private:
  TxnResult txn_impl(FilterSet& fs, const QuerierId* querier, const SiteId& conv_site,
                     const std::set<SiteId>& imp_sites, Epsilon epoch_loss,
                     const std::map<SiteId, Epsilon>& per_site_loss,
                     const DeviceId& device, EpochId epoch,
                     const std::string& report_id);

  bool cap_enabled() const { return options_.variant == EngineVariant::Full; }
  bool quotas_enabled() const { return options_.variant == EngineVariant::Full; }
  bool global_enabled() const { return options_.variant != EngineVariant::QuerierOnly; }

  EngineOptions options_;
  EventStore store_;
  FilterRegistry filters_;
  UaState ua_state_;
  Ledger ledger_;
  std::vector<ReportLogEntry> report_log_;
  uint64_t next_ua_ = 0;
  bool replay_only_ = false;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_ENGINE_HPP
