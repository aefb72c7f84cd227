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

#ifndef BUDGETGUARD_CROSSREPORT_HPP
#define BUDGETGUARD_CROSSREPORT_HPP

#include <map>
#include <set>
#include <string>

#include "engine.hpp"

namespace budgetguard {

// Stateful attribution object for one conversion's report identifier. The
// shared budgets (global, conversion-site quota, impression-site quotas) are
// paid once, upfront, when the object is created; each querier then pays
// only its own per-querier budget when it fetches a report over a support
// set disjoint from everything served before.
struct AttributionObject {
  std::string report_id;
  AttributionPolicy policy = AttributionPolicy::UniformSplit;
  double noise_scale = 0.0;  // lambda, fixed at creation
  double a_max = 0.0;
  // Frozen attribution over the matched impressions of epochs that passed
  // the shared transaction; nulled epochs hold no data.
  std::map<EpochId, std::vector<AttributedImpression>> frozen;
  std::map<EpochId, EpochStatus> shared_status;
  std::set<ImpressionKey> consumed_support;  // grows, never shrinks
};

class CrossReportManager {
 public:
  // Charges the shared filters of every relevant epoch with 2*a_max/lambda
  // through a querier-less atomic transaction and freezes the attribution.
  // Throws DuplicateObject if the report id was already initialized.
  const AttributionObject& measure_conversion_shared(Engine& engine,
                                                     const ReportRequest& request);

  // Serves one querier's report from the frozen attribution, restricted to
  // request.support. Inconsistent parameters or an overlapping support yield
  // a null report with no state change; otherwise only the querier filter is
  // charged per epoch. Throws UnknownObject for an unknown report id.
  Report get_report(Engine& engine, const ReportRequest& request);

  const AttributionObject* find(const std::string& report_id) const {
    auto it = objects_.find(report_id);
    return it == objects_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, AttributionObject> objects_;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_CROSSREPORT_HPP
