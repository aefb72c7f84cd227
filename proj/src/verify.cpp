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

#include "verify.hpp"

#include <algorithm>

#include "engine.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace budgetguard {

namespace {

QuotaConfig random_quota_config(Rng& rng) {
  WorkloadParams params;
  params.conv_sites_per_epoch = 1 + static_cast<int64_t>(rng.below(5));
  params.imp_sites_per_epoch = 1 + static_cast<int64_t>(rng.below(5));
  params.conv_sites_per_imp_site = 1 + static_cast<int64_t>(rng.below(5));
  params.intermediary_fraction = 0.25 * static_cast<double>(rng.below(3));
  Epsilon eps_querier = Epsilon::from_micros(100000 + static_cast<int64_t>(rng.below(20)) * 100000);
  int kappa = 1 + static_cast<int>(rng.below(3));
  return derive_capacities(eps_querier, params, kappa);
}

std::string describe(const DeviceId& d, EpochId e, const std::string& what) {
  return what + " at (" + d + ", " + std::to_string(e) + ")";
}

}  // namespace

VerifyReport atomicity_fuzz(uint64_t seed, int64_t trials) {
  VerifyReport report;
  report.trials = trials;
  Rng rng(splitmix64(seed ^ 0x61746f6d69636974ULL));

  const std::vector<QuerierId> queriers = {"q0.ex", "q1.ex", "q2.ex"};
  const std::vector<SiteId> conv_sites = {"c0.ex", "c1.ex", "c2.ex"};
  const std::vector<SiteId> imp_sites = {"i0.ex", "i1.ex", "i2.ex", "i3.ex"};

  for (int64_t t = 0; t < trials; ++t) {
    EngineOptions opts;
    opts.quota = random_quota_config(rng);
    Engine engine(opts);
    FilterSet& fs = engine.filters().get_or_init("dev", 0, opts.quota);

    int steps = 4 + static_cast<int>(rng.below(10));
    for (int s = 0; s < steps; ++s) {
      const QuerierId& q = queriers[rng.below(queriers.size())];
      const SiteId& c = conv_sites[rng.below(conv_sites.size())];
      Epsilon loss = Epsilon::from_micros(
          static_cast<int64_t>(rng.below(static_cast<uint64_t>(
              opts.quota.eps_querier.micros() * 3 / 2 + 1))));
      std::set<SiteId> registered;
      std::map<SiteId, Epsilon> per_site;
      for (const auto& site : imp_sites) {
        if (!rng.bernoulli(0.6)) continue;
        registered.insert(site);
        if (rng.bernoulli(0.8)) {
          per_site[site] = Epsilon::from_micros(static_cast<int64_t>(rng.below(
              static_cast<uint64_t>(opts.quota.eps_imp_quota.micros() * 3 / 2 + 1))));
        }
      }

      FilterSet before = fs;
      TxnResult txn = engine.atomic_check_and_consume(
          fs, q, c, registered, loss, per_site, "dev", 0, "fuzz:" + std::to_string(s));
      if (!txn.ok) {
        if (!(fs == before)) {
          report.violations.push_back("rejected transaction mutated filter state");
        }
        continue;
      }
      // Reconstruct the exact expected state: entries for the touched
      // querier, conversion site, and nonzero impression sites are created
      // on demand and deduct precisely the requested amounts; nothing else
      // may change. An all-zero transaction is a no-op.
      FilterSet expected = before;
      bool any_site_loss = false;
      for (const auto& [site, site_loss] : per_site) {
        any_site_loss |= !site_loss.is_zero();
      }
      if (!loss.is_zero() || any_site_loss) {
        expected.querier(q, opts.quota).try_consume(loss);
        expected.global.try_consume(loss);
        expected.conv(c, opts.quota).try_consume(loss);
        for (const auto& [site, site_loss] : per_site) {
          if (site_loss.is_zero()) continue;
          expected.imp(site, opts.quota).try_consume(site_loss);
        }
      }
      if (!(fs == expected)) {
        report.violations.push_back("accepted transaction deducted wrong amounts");
      }
    }
  }
  return report;
}

VerifyReport resilience_fuzz(uint64_t seed, int64_t trials) {
  VerifyReport report;
  report.trials = trials;
  Rng rng(splitmix64(seed ^ 0x726573696c69656eULL));

  for (int64_t t = 0; t < trials; ++t) {
    EngineOptions opts;
    opts.quota = random_quota_config(rng);
    opts.imp_site_mode = rng.bernoulli(0.5) ? ImpSiteBudgetMode::UniformHeuristic
                                            : ImpSiteBudgetMode::TwoDeltaBound;
    Engine engine(opts);

    const DeviceId device = "dev";
    const int pool = 1 + static_cast<int>(rng.below(8));
    std::vector<SiteId> sybils;
    AdversaryInfo adversary;
    for (int s = 0; s < pool; ++s) {
      sybils.push_back("syb" + std::to_string(s) + ".ex");
      adversary.sites.insert(sybils.back());
    }
    const int epochs = 1 + static_cast<int>(rng.below(3));
    const int64_t actions = 1 + static_cast<int64_t>(rng.below(10));
    const double eps_q = opts.quota.eps_querier.value();

    // A benign site mixes into the trace; its consumption must never be
    // attributed to the adversary.
    {
      UaCtxId ua = engine.on_user_action(device, "good.ex");
      ImpressionEvent imp;
      imp.device = device;
      imp.epoch = 0;
      imp.site = "good.ex";
      imp.ad_key = "ad";
      imp.timestamp = 0;
      engine.save_impression(device, ua, imp);
    }

    int64_t report_counter = 0;
    for (int64_t a = 0; a < actions; ++a) {
      EpochId now = static_cast<EpochId>(a) % epochs;
      UaCtxId ua = engine.on_user_action(device, sybils[rng.below(sybils.size())]);
      adversary.user_actions[device] += 1;

      // Greedy chain: the attacker may attempt more sites than the cap and
      // must live with the rejections.
      int chain = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(pool)));
      for (int j = 0; j < chain; ++j) {
        ImpressionEvent imp;
        imp.device = device;
        imp.epoch = now;
        imp.site = sybils[static_cast<std::size_t>(j)];
        imp.ad_key = "syb";
        imp.timestamp = now * kDefaultEpochLengthSeconds + a;
        engine.save_impression(device, ua, imp);
      }
      int reports = static_cast<int>(rng.below(4));
      for (int q = 0; q < reports; ++q) {
        const SiteId& sybil = sybils[rng.below(sybils.size())];
        ReportRequest req;
        req.report_id = "fz:" + std::to_string(report_counter++);
        req.device = device;
        req.querier = sybil;
        req.conv_site = sybil;
        for (const auto& site : sybils) {
          if (rng.bernoulli(0.5)) req.imp_sites.insert(site);
        }
        req.imp_sites.insert(sybil);
        req.epoch_start = static_cast<EpochId>(rng.below(static_cast<uint64_t>(now + 1)));
        req.epoch_end = req.epoch_start;
        req.requested_epsilon =
            Epsilon::from_double(eps_q * (0.2 + 0.8 * rng.uniform01()));
        req.value = 1.0;
        req.max_value = 1.0;
        req.histogram_dim = 1;
        req.match_ad_key = "syb";
        req.ua_ctx = ua;
        engine.measure_conversion(req);
      }

      // Interleave a benign report; registered sites are benign only.
      if (rng.bernoulli(0.3)) {
        UaCtxId bua = engine.on_user_action(device, "shop.ex");
        ReportRequest req;
        req.report_id = "good:" + std::to_string(report_counter++);
        req.device = device;
        req.querier = "shop.ex";
        req.conv_site = "shop.ex";
        req.imp_sites = {"good.ex"};
        req.epoch_start = 0;
        req.epoch_end = now;
        req.requested_epsilon = Epsilon::from_double(eps_q * 0.5);
        req.value = 1.0;
        req.max_value = 2.0;
        req.histogram_dim = 1;
        req.match_ad_key = "ad";
        req.ua_ctx = bua;
        engine.measure_conversion(req);
      }
    }

    auto violations =
        ledger_audit(engine.ledger(), opts.quota, adversary, EngineVariant::Full);
    for (const auto& v : violations) {
      report.violations.push_back(describe(v.device, v.epoch, v.what));
      if (report.violations.size() > 20) return report;
    }
  }
  return report;
}

}  // namespace budgetguard
