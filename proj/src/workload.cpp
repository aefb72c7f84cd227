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

#include "workload.hpp"

#include <algorithm>
#include <cmath>

namespace budgetguard {

namespace {

double percentile_of(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  if (k < 1) k = 1;
  if (k > values.size()) k = values.size();
  return values[k - 1];
}

}  // namespace

void BenignSpec::validate() const {
  if (devices <= 0 || epochs <= 0 || advertisers <= 0 || publishers <= 0) {
    throw InvalidParams("benign workload dimensions must be positive");
  }
  if (controlled_sites < 0) throw InvalidParams("controlled site count must be >= 0");
  if (batch_size <= 0) throw InvalidParams("batch size must be positive");
  if (conversion_rate < 0.0 || conversion_rate > 1.0 || impression_rate < 0.0 ||
      impression_rate > 1.0 || extra_controlled_action_prob < 0.0 ||
      extra_controlled_action_prob > 1.0) {
    throw InvalidParams("benign workload rates must lie in [0, 1]");
  }
  if (!(epsilon > 0.0) || !(max_value > 0.0)) {
    throw InvalidParams("benign epsilon and max_value must be positive");
  }
  if (window <= 0 || histogram_dim <= 0) {
    throw InvalidParams("window and histogram dimension must be positive");
  }
}

void AttackerSpec::validate() const {
  if (strategy == Strategy::None) return;
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw InvalidParams("attacker fraction must lie in (0, 1]");
  }
  if (sybils <= 0 || chain <= 0 || lookback <= 0) {
    throw InvalidParams("attacker pool, chain, and lookback must be positive");
  }
}

AttackerSpec::Strategy attacker_strategy_from_name(const std::string& name) {
  if (name == "none") return AttackerSpec::Strategy::None;
  if (name == "naive") return AttackerSpec::Strategy::Naive;
  if (name == "random") return AttackerSpec::Strategy::Random;
  if (name == "omniscient") return AttackerSpec::Strategy::Omniscient;
  throw ConfigError("unknown attacker strategy: " + name);
}

const char* attacker_strategy_name(AttackerSpec::Strategy s) {
  switch (s) {
    case AttackerSpec::Strategy::None:
      return "none";
    case AttackerSpec::Strategy::Naive:
      return "naive";
    case AttackerSpec::Strategy::Random:
      return "random";
    case AttackerSpec::Strategy::Omniscient:
      return "omniscient";
  }
  return "unknown";
}

double RunArtifacts::median_rmsre() const {
  std::vector<double> values;
  for (const auto& q : queries) values.push_back(q.rmsre);
  return percentile_of(values, 0.5);
}

double RunArtifacts::p95_rmsre() const {
  std::vector<double> values;
  for (const auto& q : queries) values.push_back(q.rmsre);
  return percentile_of(values, 0.95);
}

WorkloadDriver::WorkloadDriver(BenignSpec benign, AttackerSpec attacker,
                               uint64_t master_seed)
    : benign_(benign), attacker_(attacker), master_seed_(master_seed) {
  benign_.validate();
  attacker_.validate();
  generate_actions();
}

SiteId WorkloadDriver::advertiser_site(int a) const {
  return "adv" + std::to_string(a) + ".ex";
}
SiteId WorkloadDriver::publisher_site(int p) const {
  return "pub" + std::to_string(p) + ".ex";
}
SiteId WorkloadDriver::controlled_site(int c) const {
  return "ctrl" + std::to_string(c) + ".ex";
}
SiteId WorkloadDriver::sybil_site(int s) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "syb%03d.ex", s);
  return buf;
}
std::set<SiteId> WorkloadDriver::sybil_pool() const {
  std::set<SiteId> pool;
  for (int s = 0; s < attacker_.sybils; ++s) pool.insert(sybil_site(s));
  return pool;
}

void WorkloadDriver::generate_actions() {
  Rng rng = Rng::substream(master_seed_, "benign");
  actions_.clear();
  for (int e = 0; e < benign_.epochs; ++e) {
    const int64_t day = static_cast<int64_t>(e) * kDefaultEpochLengthSeconds;
    for (int d = 0; d < benign_.devices; ++d) {
      DeviceId device = "d" + std::to_string(d);
      int64_t slot = 0;
      for (int v = 0; v < benign_.pub_visits_per_epoch; ++v) {
        Action a;
        a.epoch = e;
        a.ts = day + slot++;
        a.device = device;
        a.kind = Action::Kind::PubVisit;
        a.site = publisher_site(static_cast<int>(
            rng.below(static_cast<uint64_t>(benign_.publishers))));
        a.impression = rng.bernoulli(benign_.impression_rate);
        a.advertiser = static_cast<int>(
            rng.below(static_cast<uint64_t>(benign_.advertisers)));
        a.bucket = static_cast<int>(
            rng.below(static_cast<uint64_t>(benign_.histogram_dim)));
        actions_.push_back(a);
      }
      int controlled_actions = benign_.controlled_sites > 0
                                   ? 1 + (rng.bernoulli(benign_.extra_controlled_action_prob) ? 1 : 0)
                                   : 0;
      for (int v = 0; v < controlled_actions; ++v) {
        Action a;
        a.epoch = e;
        a.ts = day + 1000 + slot++;
        a.device = device;
        a.kind = Action::Kind::CtrlVisit;
        a.site = controlled_site(static_cast<int>(
            rng.below(static_cast<uint64_t>(benign_.controlled_sites))));
        actions_.push_back(a);
      }
      for (int adv = 0; adv < benign_.advertisers; ++adv) {
        if (!rng.bernoulli(benign_.conversion_rate)) continue;
        Action a;
        a.epoch = e;
        a.ts = day + 2000 + slot++;
        a.device = device;
        a.kind = Action::Kind::Conversion;
        a.advertiser = adv;
        a.site = advertiser_site(adv);
        actions_.push_back(a);
      }
    }
  }
}

std::vector<double> WorkloadDriver::true_attribution(
    const Engine& engine, const ReportRequest& request) const {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  for (EpochId e = request.epoch_start; e <= request.epoch_end; ++e) {
    auto imps = match_impressions(engine.store(), request, e);
    if (!imps.empty()) matched[e] = std::move(imps);
  }
  AttributionOutcome outcome = attribute(matched, request);
  std::vector<double> hist(static_cast<std::size_t>(request.histogram_dim), 0.0);
  for (const auto& [e, imps] : outcome.per_epoch) {
    for (const auto& imp : imps) {
      hist[static_cast<std::size_t>(imp.bucket)] += imp.value;
    }
  }
  return hist;
}

void WorkloadDriver::run_attack_chain(Engine& engine, const Action& action,
                                      const UaCtxId& ua, RunArtifacts& artifacts,
                                      Rng& attack_rng) {
  const Epsilon loss = engine.options().quota.eps_querier;
  const double eps_value = loss.value();
  auto& dev = attack_state_[action.device];
  artifacts.adversary.user_actions[action.device] += 1;

  // Redirection chain: each visited sybil saves one fresh impression in the
  // current epoch and then requests single-epoch reports against recent
  // epochs that hold attacker stock.
  std::vector<SiteId> chain_sites;
  for (int j = 0; j < attacker_.chain; ++j) {
    chain_sites.push_back(sybil_site((dev.rotation + j) % attacker_.sybils));
  }
  dev.rotation = (dev.rotation + attacker_.chain) % attacker_.sybils;

  // Impressions saved under this very action are invisible to its own
  // reports (same-action matching exclusion), so targeting works against
  // the stock as it was before this chain ran.
  const std::map<EpochId, std::set<SiteId>> pre_stock = dev.stock;

  for (const auto& sybil : chain_sites) {
    ImpressionEvent imp;
    imp.device = action.device;
    imp.epoch = action.epoch;
    imp.site = sybil;
    imp.ad_key = "syb";
    imp.bucket = 0;
    imp.timestamp = action.ts;
    SaveResult saved = engine.save_impression(action.device, ua, imp);
    artifacts.attacker_calls.push_back(
        {AttackerCall::Kind::Save, action.device, sybil, action.epoch, false});
    if (saved == SaveResult::Stored) {
      dev.stock[action.epoch].insert(sybil);
    }
  }

  const EpochId oldest = std::max<EpochId>(0, action.epoch - attacker_.lookback + 1);
  for (const auto& sybil : chain_sites) {
    for (EpochId target = action.epoch; target >= oldest; --target) {
      auto stock_it = pre_stock.find(target);
      if (stock_it == pre_stock.end() || stock_it->second.empty()) continue;
      if (dev.attempted.count({sybil, target})) continue;

      std::set<SiteId> registered;
      switch (attacker_.strategy) {
        case AttackerSpec::Strategy::Naive:
          registered = sybil_pool();
          break;
        case AttackerSpec::Strategy::Random: {
          auto want = static_cast<std::size_t>(
              std::ceil(attacker_.fraction * attacker_.sybils));
          if (want >= static_cast<std::size_t>(attacker_.sybils)) {
            registered = sybil_pool();
          } else {
            std::vector<int> ids(static_cast<std::size_t>(attacker_.sybils));
            for (int s = 0; s < attacker_.sybils; ++s) ids[static_cast<std::size_t>(s)] = s;
            for (std::size_t i = 0; i < want; ++i) {
              std::size_t j = i + static_cast<std::size_t>(
                                      attack_rng.below(ids.size() - i));
              std::swap(ids[i], ids[j]);
              registered.insert(sybil_site(ids[i]));
            }
          }
          break;
        }
        case AttackerSpec::Strategy::Omniscient: {
          // Perfect knowledge of remaining quotas: register exactly one
          // stocked site that can absorb the full loss, never triggering an
          // atomic rejection. Lowest site id wins ties.
          if (engine.remaining(action.device, target, FilterKind::Querier, sybil) < loss ||
              engine.remaining(action.device, target, FilterKind::ConvQuota, sybil) < loss ||
              engine.remaining(action.device, target, FilterKind::Global, "") < loss ||
              !engine.quota_count_check(action.device, ua, target, sybil)) {
            continue;
          }
          for (const auto& site : stock_it->second) {
            if (engine.remaining(action.device, target, FilterKind::ImpQuota, site) >=
                loss) {
              registered = {site};
              break;
            }
          }
          if (registered.empty()) continue;
          break;
        }
        case AttackerSpec::Strategy::None:
          return;
      }

      dev.attempted.insert({sybil, target});
      ReportRequest req;
      req.report_id = "atk:" + std::to_string(artifacts.attacker_calls.size());
      req.device = action.device;
      req.querier = sybil;
      req.conv_site = sybil;
      req.imp_sites = registered;
      req.epoch_start = target;
      req.epoch_end = target;
      req.requested_epsilon = Epsilon::from_double(eps_value);
      req.value = 1.0;
      req.max_value = 1.0;
      req.histogram_dim = 1;
      req.match_ad_key = "syb";
      req.ua_ctx = ua;
      Report rep = engine.measure_conversion(req);
      bool committed = false;
      for (const auto& [e, st] : rep.per_epoch) committed |= st.committed;
      artifacts.attacker_calls.push_back(
          {AttackerCall::Kind::Report, action.device, sybil, target, committed});
    }
  }
}

RunArtifacts WorkloadDriver::run(Engine& engine, int64_t stop_after_actions,
                                 int64_t replay_actions) {
  RunArtifacts artifacts;
  artifacts.adversary.sites = attacker_.strategy == AttackerSpec::Strategy::None
                                  ? std::set<SiteId>{}
                                  : sybil_pool();
  artifacts.adversary.intermediary_fraction = 0.0;
  attack_state_.clear();

  Rng attack_rng = Rng::substream(master_seed_, "attacker");
  Rng noise_rng = Rng::substream(master_seed_, "noise");

  std::set<SiteId> benign_imp_sites;
  for (int p = 0; p < benign_.publishers; ++p) benign_imp_sites.insert(publisher_site(p));

  struct AdvBatches {
    std::vector<std::vector<double>> true_hists;
    std::vector<std::vector<double>> reports;
    std::vector<std::map<EpochId, EpochStatus>> statuses;
  };
  std::vector<AdvBatches> per_adv(static_cast<std::size_t>(benign_.advertisers));
  std::set<std::string> benign_report_ids;

  int64_t action_index = 0;
  bool truncated = false;
  for (const auto& action : actions_) {
    if (stop_after_actions >= 0 && action_index >= stop_after_actions) {
      truncated = true;
      break;
    }
    engine.set_replay_only(action_index < replay_actions);
    ++action_index;
    ++artifacts.total_actions;

    UaCtxId ua = engine.on_user_action(action.device, action.site);
    switch (action.kind) {
      case Action::Kind::PubVisit: {
        if (action.impression) {
          ImpressionEvent imp;
          imp.device = action.device;
          imp.epoch = action.epoch;
          imp.site = action.site;
          imp.ad_key = "ad:" + advertiser_site(action.advertiser);
          imp.bucket = action.bucket;
          imp.timestamp = action.ts;
          engine.save_impression(action.device, ua, imp);
        }
        break;
      }
      case Action::Kind::CtrlVisit: {
        if (attacker_.strategy != AttackerSpec::Strategy::None) {
          run_attack_chain(engine, action, ua, artifacts, attack_rng);
        }
        break;
      }
      case Action::Kind::Conversion: {
        ConversionEvent conv;
        conv.device = action.device;
        conv.epoch = action.epoch;
        conv.ua_ctx = ua;
        conv.conv_site = action.site;
        conv.queriers = {action.site};
        conv.value = benign_.max_value;
        conv.max_value = benign_.max_value;
        conv.timestamp = action.ts;
        engine.record_conversion(conv);

        ReportRequest req;
        req.report_id = "bq:" + std::to_string(artifacts.benign_reports++);
        req.device = action.device;
        req.querier = action.site;
        req.conv_site = action.site;
        req.imp_sites = benign_imp_sites;
        req.epoch_end = action.epoch;
        req.epoch_start = std::max<EpochId>(0, action.epoch - benign_.window + 1);
        req.requested_epsilon = Epsilon::from_double(benign_.epsilon);
        req.value = benign_.max_value;
        req.max_value = benign_.max_value;
        req.histogram_dim = benign_.histogram_dim;
        req.match_ad_key = "ad:" + advertiser_site(action.advertiser);
        req.ua_ctx = ua;

        auto truth = true_attribution(engine, req);
        Report rep = engine.measure_conversion(req);
        auto& batches = per_adv[static_cast<std::size_t>(action.advertiser)];
        batches.true_hists.push_back(std::move(truth));
        batches.reports.push_back(std::move(rep.histogram));
        batches.statuses.push_back(std::move(rep.per_epoch));
        benign_report_ids.insert(req.report_id);
        break;
      }
    }
  }
  engine.set_replay_only(false);

  if (truncated) return artifacts;

  // Aggregate per advertiser in batches; one Laplace draw per bucket.
  const double lambda = benign_.max_value / benign_.epsilon;
  for (int adv = 0; adv < benign_.advertisers; ++adv) {
    auto& batches = per_adv[static_cast<std::size_t>(adv)];
    std::size_t total = batches.reports.size();
    for (std::size_t start = 0; start < total;
         start += static_cast<std::size_t>(benign_.batch_size)) {
      std::size_t end = std::min(total, start + static_cast<std::size_t>(benign_.batch_size));
      std::vector<std::vector<double>> rep_slice(batches.reports.begin() + start,
                                                 batches.reports.begin() + end);
      std::vector<double> true_sum(static_cast<std::size_t>(benign_.histogram_dim), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        for (std::size_t j = 0; j < true_sum.size(); ++j) {
          true_sum[j] += batches.true_hists[i][j];
        }
      }
      QueryResult qr;
      qr.query_id = advertiser_site(adv) + "#" + std::to_string(start);
      qr.noisy_estimate = aggregate_and_noise(rep_slice, lambda, noise_rng);
      qr.true_histogram = std::move(true_sum);
      qr.batch_size = static_cast<int>(end - start);
      qr.tau = benign_.tau;
      qr.rmsre = rmsre_tau(qr.true_histogram, qr.noisy_estimate, qr.tau, qr.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        for (const auto& [e, st] : batches.statuses[i]) {
          ++qr.cause_counts[st.committed ? "committed" : null_cause_name(st.cause)];
        }
      }
      artifacts.queries.push_back(std::move(qr));
    }
  }

  std::vector<ReportLogEntry> benign_log;
  for (const auto& entry : engine.report_log()) {
    if (benign_report_ids.count(entry.report_id)) benign_log.push_back(entry);
  }
  artifacts.benign_breakdown = cause_breakdown(benign_log);
  return artifacts;
}

}  // namespace budgetguard
