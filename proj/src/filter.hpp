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

#ifndef BUDGETGUARD_FILTER_HPP
#define BUDGETGUARD_FILTER_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <utility>

#include "epsilon.hpp"
#include "quota_config.hpp"
#include "types.hpp"

namespace budgetguard {

// A pure-DP privacy filter: a budget with fixed capacity that accepts an
// adaptively chosen sequence of losses as long as their sum stays within
// capacity. `consumed` never decreases and never exceeds `capacity`.
class Filter {
 public:
  Filter() = default;
  explicit Filter(Epsilon capacity) : capacity_(capacity) {}
  Filter(Epsilon capacity, Epsilon consumed) : capacity_(capacity), consumed_(consumed) {
    if (consumed > capacity) throw InvalidParams("filter consumed exceeds capacity");
  }

  bool can_consume(Epsilon loss) const { return consumed_ + loss <= capacity_; }

  // Deducts `loss` if it fits; otherwise leaves the state unchanged.
  bool try_consume(Epsilon loss) {
    if (!can_consume(loss)) return false;
    consumed_ += loss;
    return true;
  }

  Epsilon capacity() const { return capacity_; }
  Epsilon consumed() const { return consumed_; }
  Epsilon remaining() const { return capacity_ - consumed_; }

  bool operator==(const Filter&) const = default;

 private:
  Epsilon capacity_;
  Epsilon consumed_;
};

enum class FilterKind { Global, Querier, ConvQuota, ImpQuota };

const char* filter_kind_name(FilterKind kind);
FilterKind filter_kind_from_name(const std::string& name);

// All filters of one device-epoch: the global filter plus lazily created
// per-querier filters and per-site quota filters. Map entries are created on
// first touch with the configured capacity and never recreated.
struct FilterSet {
  Filter global;
  std::map<QuerierId, Filter> per_querier;
  std::map<SiteId, Filter> conv_quota;
  std::map<SiteId, Filter> imp_quota;

  Filter& querier(const QuerierId& q, const QuotaConfig& cfg) {
    return per_querier.try_emplace(q, Filter(cfg.eps_querier)).first->second;
  }
  Filter& conv(const SiteId& c, const QuotaConfig& cfg) {
    return conv_quota.try_emplace(c, Filter(cfg.eps_conv_quota)).first->second;
  }
  Filter& imp(const SiteId& i, const QuotaConfig& cfg) {
    return imp_quota.try_emplace(i, Filter(cfg.eps_imp_quota)).first->second;
  }

  bool operator==(const FilterSet&) const = default;
};

// Filter state for all device-epochs touched so far. Mutation of one
// device-epoch never affects another.
class FilterRegistry {
 public:
  // Idempotent: the first call creates the set with the configured global
  // capacity; later calls return the existing state.
  FilterSet& get_or_init(const DeviceId& d, EpochId e, const QuotaConfig& cfg) {
    auto [it, inserted] = sets_.try_emplace({d, e});
    if (inserted) it->second.global = Filter(cfg.eps_global);
    return it->second;
  }

  const FilterSet* find(const DeviceId& d, EpochId e) const {
    auto it = sets_.find({d, e});
    return it == sets_.end() ? nullptr : &it->second;
  }

  const std::map<std::pair<DeviceId, EpochId>, FilterSet>& all() const { return sets_; }
  bool empty() const { return sets_.empty(); }

  // Line-delimited snapshot:
  //   device,epoch,filter_kind,key,capacity_microeps,consumed_microeps
  // Records are emitted in deterministic order; `key` is empty for the
  // global filter. A snapshot can be loaded back to resume a scenario.
  void write_snapshot(std::ostream& out) const;
  void load_snapshot(std::istream& in);

 private:
  std::map<std::pair<DeviceId, EpochId>, FilterSet> sets_;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_FILTER_HPP
