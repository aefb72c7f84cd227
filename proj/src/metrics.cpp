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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>

namespace budgetguard {

std::vector<double> aggregate_and_noise(const std::vector<std::vector<double>>& reports,
                                        double lambda, Rng& rng, int dim) {
  if (!(lambda > 0.0)) throw InvalidParams("noise scale must be positive");
  if (reports.empty() && dim < 0) {
    throw DimensionMismatch("empty report set needs an explicit dimension");
  }
  std::size_t m = reports.empty() ? static_cast<std::size_t>(dim)
                                  : reports.front().size();
  for (const auto& r : reports) {
    if (r.size() != m) throw DimensionMismatch("reports have differing dimensions");
  }
  std::vector<double> out(m, 0.0);
  for (const auto& r : reports) {
    for (std::size_t j = 0; j < m; ++j) out[j] += r[j];
  }
  for (std::size_t j = 0; j < m; ++j) out[j] += rng.laplace(lambda);
  return out;
}

double rmsre_tau(const std::vector<double>& true_hist,
                 const std::vector<double>& est_hist, double tau, int batch_size) {
  if (true_hist.size() != est_hist.size()) {
    throw DimensionMismatch("histogram dimensions differ");
  }
  if (true_hist.empty()) throw DimensionMismatch("histograms are empty");
  if (batch_size <= 0) throw InvalidParams("batch size must be positive");
  const double clip = tau * static_cast<double>(batch_size);
  double sum = 0.0;
  for (std::size_t j = 0; j < true_hist.size(); ++j) {
    double denom = std::max(true_hist[j], clip);
    double rel = (est_hist[j] - true_hist[j]) / denom;
    sum += rel * rel;
  }
  return std::sqrt(sum / static_cast<double>(true_hist.size()));
}

std::map<std::string, double> cause_breakdown(const std::vector<ReportLogEntry>& log) {
  std::map<std::string, double> fractions;
  fractions["committed"] = 0.0;
  if (log.empty()) return fractions;
  std::map<std::string, std::size_t> counts;
  for (const auto& entry : log) {
    if (entry.status.committed) {
      ++counts["committed"];
    } else {
      ++counts[null_cause_name(entry.status.cause)];
    }
  }
  for (const auto& [k, c] : counts) {
    fractions[k] = static_cast<double>(c) / static_cast<double>(log.size());
  }
  return fractions;
}

namespace {

struct PerDeviceEpoch {
  int64_t global_micros = 0;
  int64_t adv_global_micros = 0;
  std::set<SiteId> adv_imp_sites;   // adversarial imp-quota filters with consumption
  std::set<SiteId> adv_conv_sites;  // adversarial conv-quota filters with consumption
};

}  // namespace

std::vector<AuditViolation> ledger_audit(const Ledger& ledger, const QuotaConfig& config,
                                         const AdversaryInfo& adversary,
                                         EngineVariant variant) {
  std::vector<AuditViolation> violations;

  // Reports whose conversion-site quota entry names an adversarial site are
  // adversarial; their global entries are joined by report id.
  std::map<std::pair<DeviceId, EpochId>, std::set<std::string>> adv_reports;
  for (const auto& e : ledger.entries()) {
    if (!e.committed) continue;
    if (e.kind == FilterKind::ConvQuota && adversary.sites.count(e.key)) {
      adv_reports[{e.device, e.epoch}].insert(e.report_id);
    }
    // Without quota entries (baseline variants), fall back to the querier id.
    if (e.kind == FilterKind::Querier && adversary.sites.count(e.key)) {
      adv_reports[{e.device, e.epoch}].insert(e.report_id);
    }
  }

  std::map<std::pair<DeviceId, EpochId>, PerDeviceEpoch> state;
  for (const auto& e : ledger.entries()) {
    if (!e.committed) continue;
    auto& s = state[{e.device, e.epoch}];
    bool adversarial = adv_reports[{e.device, e.epoch}].count(e.report_id) > 0;
    switch (e.kind) {
      case FilterKind::Global:
        s.global_micros += e.amount.micros();
        if (adversarial) s.adv_global_micros += e.amount.micros();
        break;
      case FilterKind::ImpQuota:
        if (adversary.sites.count(e.key) && !e.amount.is_zero()) {
          s.adv_imp_sites.insert(e.key);
        }
        break;
      case FilterKind::ConvQuota:
        if (adversary.sites.count(e.key) && !e.amount.is_zero()) {
          s.adv_conv_sites.insert(e.key);
        }
        break;
      case FilterKind::Querier:
        break;
    }
  }

  const bool has_global = variant != EngineVariant::QuerierOnly;
  const bool has_quotas = variant == EngineVariant::Full;

  for (const auto& [key, s] : state) {
    const auto& [device, epoch] = key;
    if (has_global && s.global_micros > config.eps_global.micros()) {
      violations.push_back({"global deductions exceed eps_global: " +
                                std::to_string(s.global_micros) + " > " +
                                std::to_string(config.eps_global.micros()),
                            device, epoch});
    }
    if (!has_quotas) continue;

    int64_t stock_bound = static_cast<int64_t>(s.adv_imp_sites.size()) *
                          config.eps_imp_quota.micros();
    int64_t flow_bound = static_cast<int64_t>(s.adv_conv_sites.size()) *
                         config.eps_conv_quota.micros();
    if (s.adv_global_micros > std::min(stock_bound, flow_bound)) {
      violations.push_back(
          {"adversarial global consumption exceeds min(M_adv*eps_imp, N_adv*eps_conv): " +
               std::to_string(s.adv_global_micros) + " > min(" +
               std::to_string(stock_bound) + ", " + std::to_string(flow_bound) + ")",
           device, epoch});
    }

    auto ua = adversary.user_actions.find(device);
    if (ua != adversary.user_actions.end()) {
      // (1+r) * eps_querier is exactly the conversion-site quota capacity
      // under the capacity table, so the bound stays in integer micro-eps.
      int64_t action_bound = config.eps_conv_quota.micros() *
                             static_cast<int64_t>(config.kappa_action) * ua->second;
      if (s.adv_global_micros > action_bound) {
        violations.push_back(
            {"adversarial global consumption exceeds (1+r)*eps_querier*kappa*U_adv: " +
                 std::to_string(s.adv_global_micros) + " > " +
                 std::to_string(action_bound),
             device, epoch});
      }
    }
  }

  return violations;
}

}  // namespace budgetguard
