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

#include "quota_config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace budgetguard {

void QuotaConfig::validate() const {
  if (kappa_action < 1) throw InvalidParams("kappa_action must be at least 1");
  if (eps_querier > eps_conv_quota) {
    throw InvalidParams("eps_querier must not exceed eps_conv_quota");
  }
  if (eps_conv_quota > eps_imp_quota) {
    throw InvalidParams("eps_conv_quota must not exceed eps_imp_quota");
  }
  if (eps_imp_quota > eps_global) {
    throw InvalidParams("eps_imp_quota must not exceed eps_global");
  }
}

QuotaConfig derive_capacities(Epsilon eps_querier, const WorkloadParams& params,
                              int kappa_action) {
  if (params.conv_sites_per_epoch <= 0 || params.imp_sites_per_epoch <= 0 ||
      params.conv_sites_per_imp_site <= 0) {
    throw InvalidParams("workload parameters N, M, n must all be positive");
  }
  if (params.intermediary_fraction < 0.0) {
    throw InvalidParams("intermediary fraction r must be non-negative");
  }
  const double one_plus_r = 1.0 + params.intermediary_fraction;
  const Epsilon base = eps_querier.scaled(one_plus_r);

  QuotaConfig cfg;
  cfg.eps_querier = eps_querier;
  cfg.eps_conv_quota = base;
  cfg.eps_imp_quota = base * params.conv_sites_per_imp_site;
  cfg.eps_global = base * std::max(params.conv_sites_per_epoch,
                                   params.conv_sites_per_imp_site *
                                       params.imp_sites_per_epoch);
  cfg.kappa_action = kappa_action;
  cfg.validate();
  return cfg;
}

namespace {

int64_t nearest_rank(std::vector<int64_t>& values, double percentile) {
  std::sort(values.begin(), values.end());
  auto k = static_cast<std::size_t>(
      std::ceil(percentile * static_cast<double>(values.size())));
  if (k < 1) k = 1;
  if (k > values.size()) k = values.size();
  return values[k - 1];
}

}  // namespace

WorkloadParams estimate_workload_params(const EventStore& store, double percentile) {
  if (store.empty()) throw EmptyStore("cannot estimate workload parameters from an empty store");
  if (!(percentile > 0.0) || percentile > 1.0) {
    throw InvalidParams("percentile must lie in (0, 1]");
  }

  std::vector<int64_t> conv_counts;   // N~ per device-epoch
  std::vector<int64_t> imp_counts;    // M~ per device-epoch
  std::vector<int64_t> fanout_counts; // n~ per device-epoch

  for (const auto& [device, epoch] : store.device_epochs()) {
    std::set<SiteId> imp_sites;
    for (const auto& imp : store.impressions(device, epoch)) imp_sites.insert(imp.site);
    std::set<SiteId> conv_sites;
    for (const auto& conv : store.conversions(device, epoch)) conv_sites.insert(conv.conv_site);

    imp_counts.push_back(static_cast<int64_t>(imp_sites.size()));
    conv_counts.push_back(static_cast<int64_t>(conv_sites.size()));
    // The event stream does not record which impression sites each request
    // registered, so the fan-out is approximated by co-occurrence: every
    // conversion site active in the device-epoch is assumed to have queried
    // every impression site present there. This keeps the estimate an upper
    // bound on the true fan-out.
    fanout_counts.push_back(imp_sites.empty()
                                ? 0
                                : static_cast<int64_t>(conv_sites.size()));
  }

  WorkloadParams params;
  params.conv_sites_per_epoch = nearest_rank(conv_counts, percentile);
  params.imp_sites_per_epoch = nearest_rank(imp_counts, percentile);
  params.conv_sites_per_imp_site = nearest_rank(fanout_counts, percentile);
  params.intermediary_fraction = 0.0;
  return params;
}

}  // namespace budgetguard
