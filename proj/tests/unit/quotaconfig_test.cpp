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

#include "doctest.h"
#include "quota_config.hpp"
#include "rng.hpp"

using namespace budgetguard;

namespace {

WorkloadParams params(int64_t n_conv, int64_t m_imp, int64_t fanout, double r = 0.0) {
  WorkloadParams p;
  p.conv_sites_per_epoch = n_conv;
  p.imp_sites_per_epoch = m_imp;
  p.conv_sites_per_imp_site = fanout;
  p.intermediary_fraction = r;
  return p;
}

void add_imp(EventStore& store, const DeviceId& d, EpochId e, const SiteId& site) {
  ImpressionEvent ev;
  ev.device = d;
  ev.epoch = e;
  ev.site = site;
  ev.timestamp = e * kDefaultEpochLengthSeconds;
  store.append(ev);
}

void add_conv(EventStore& store, const DeviceId& d, EpochId e, const SiteId& site) {
  ConversionEvent ev;
  ev.device = d;
  ev.epoch = e;
  ev.conv_site = site;
  ev.value = 1;
  ev.max_value = 1;
  ev.timestamp = e * kDefaultEpochLengthSeconds;
  store.append(ev);
}

}  // namespace

TEST_CASE("capacity table rows") {
  const Epsilon one = Epsilon::from_double(1.0);
  struct Row {
    int64_t n_conv, m_imp, fanout;
    double global, imp;
  };
  // Percentile rows of the reference workload: p50, p80, p85, p90, p95, p99.
  const Row rows[] = {
      {2, 1, 2, 2, 2}, {4, 2, 2, 4, 2},  {4, 2, 4, 8, 4},
      {4, 3, 4, 12, 4}, {6, 3, 4, 12, 4}, {8, 4, 8, 32, 8},
  };
  for (const Row& row : rows) {
    QuotaConfig cfg = derive_capacities(one, params(row.n_conv, row.m_imp, row.fanout), 2);
    CHECK(cfg.eps_global == Epsilon::from_double(row.global));
    CHECK(cfg.eps_imp_quota == Epsilon::from_double(row.imp));
    CHECK(cfg.eps_conv_quota == one);
    CHECK(cfg.eps_querier == one);
    CHECK(cfg.kappa_action == 2);
  }
  QuotaConfig degenerate = derive_capacities(one, params(1, 1, 1), 1);
  CHECK(degenerate.eps_global == one);
  CHECK(degenerate.eps_imp_quota == one);
  CHECK(degenerate.eps_conv_quota == one);
}

TEST_CASE("derivation rejects zero workload parameters") {
  const Epsilon one = Epsilon::from_double(1.0);
  CHECK_THROWS_AS(derive_capacities(one, params(0, 1, 1), 2), InvalidParams);
  CHECK_THROWS_AS(derive_capacities(one, params(1, 0, 1), 2), InvalidParams);
  CHECK_THROWS_AS(derive_capacities(one, params(1, 1, 0), 2), InvalidParams);
}

TEST_CASE("derivation with an intermediary fraction") {
  QuotaConfig cfg = derive_capacities(Epsilon::from_double(1.0), params(2, 1, 2, 0.5), 2);
  CHECK(cfg.eps_conv_quota == Epsilon::from_double(1.5));
  CHECK(cfg.eps_imp_quota == Epsilon::from_double(3.0));
  CHECK(cfg.eps_global == Epsilon::from_double(3.0));
}

TEST_CASE("derived capacities are monotone in every input") {
  Rng rng(64);
  for (int trial = 0; trial < 200; ++trial) {
    int64_t n = 1 + static_cast<int64_t>(rng.below(6));
    int64_t m = 1 + static_cast<int64_t>(rng.below(6));
    int64_t f = 1 + static_cast<int64_t>(rng.below(6));
    double r = 0.25 * static_cast<double>(rng.below(3));
    Epsilon q = Epsilon::from_micros(100000 + static_cast<int64_t>(rng.below(2000000)));
    QuotaConfig base = derive_capacities(q, params(n, m, f, r), 2);

    auto leq = [](const QuotaConfig& a, const QuotaConfig& b) {
      return a.eps_querier <= b.eps_querier && a.eps_global <= b.eps_global &&
             a.eps_imp_quota <= b.eps_imp_quota && a.eps_conv_quota <= b.eps_conv_quota;
    };
    CHECK(leq(base, derive_capacities(q, params(n + 1, m, f, r), 2)));
    CHECK(leq(base, derive_capacities(q, params(n, m + 1, f, r), 2)));
    CHECK(leq(base, derive_capacities(q, params(n, m, f + 1, r), 2)));
    CHECK(leq(base, derive_capacities(q, params(n, m, f, r + 0.25), 2)));
    CHECK(leq(base, derive_capacities(q + Epsilon::from_micros(1000),
                                      params(n, m, f, r), 2)));
  }
}

TEST_CASE("workload estimation counts per device-epoch site activity") {
  EventStore store;
  // Single device-epoch: one impression site, two conversion sites.
  add_imp(store, "d1", 0, "pub.ex");
  add_conv(store, "d1", 0, "shopA.ex");
  add_conv(store, "d1", 0, "shopB.ex");
  WorkloadParams est = estimate_workload_params(store, 0.5);
  CHECK(est.conv_sites_per_epoch == 2);
  CHECK(est.imp_sites_per_epoch == 1);
  CHECK(est.conv_sites_per_imp_site == 2);
  est = estimate_workload_params(store, 1.0);
  CHECK(est.conv_sites_per_epoch == 2);

  // A store with impressions only estimates zero conversion sites, which
  // derivation then rejects.
  EventStore imps_only;
  add_imp(imps_only, "d1", 0, "pub.ex");
  WorkloadParams zero = estimate_workload_params(imps_only, 1.0);
  CHECK(zero.conv_sites_per_epoch == 0);
  CHECK_THROWS_AS(derive_capacities(Epsilon::from_double(1.0), zero, 2), InvalidParams);

  CHECK_THROWS_AS(estimate_workload_params(EventStore(), 0.5), EmptyStore);
  CHECK_THROWS_AS(estimate_workload_params(store, 0.0), InvalidParams);
  CHECK_THROWS_AS(estimate_workload_params(store, 1.5), InvalidParams);
}

TEST_CASE("percentile 1.0 returns the maximum over device-epochs") {
  EventStore store;
  add_imp(store, "d1", 0, "a.ex");
  add_conv(store, "d1", 0, "c1.ex");
  add_imp(store, "d2", 0, "a.ex");
  add_imp(store, "d2", 0, "b.ex");
  add_conv(store, "d2", 0, "c1.ex");
  add_conv(store, "d2", 0, "c2.ex");
  add_conv(store, "d2", 0, "c3.ex");
  WorkloadParams est = estimate_workload_params(store, 1.0);
  CHECK(est.imp_sites_per_epoch == 2);
  CHECK(est.conv_sites_per_epoch == 3);
  // The median device-epoch is smaller.
  WorkloadParams p50 = estimate_workload_params(store, 0.5);
  CHECK(p50.imp_sites_per_epoch == 1);
  CHECK(p50.conv_sites_per_epoch == 1);
}

TEST_CASE("estimates dominate the generating ground truth") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    // Ground truth: each device-epoch gets at most M imp sites and at most
    // N conv sites.
    int64_t true_m = 1 + static_cast<int64_t>(rng.below(3));
    int64_t true_n = 1 + static_cast<int64_t>(rng.below(3));
    EventStore store;
    for (int d = 0; d < 6; ++d) {
      for (EpochId e = 0; e < 3; ++e) {
        DeviceId dev = "d" + std::to_string(d);
        int64_t m = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(true_m)));
        int64_t n = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(true_n)));
        for (int64_t i = 0; i < m; ++i) {
          add_imp(store, dev, e, "pub" + std::to_string(i) + ".ex");
        }
        for (int64_t i = 0; i < n; ++i) {
          add_conv(store, dev, e, "shop" + std::to_string(i) + ".ex");
        }
      }
    }
    WorkloadParams est = estimate_workload_params(store, 1.0);
    CHECK(est.imp_sites_per_epoch <= true_m);   // counts can't exceed the cap
    CHECK(est.conv_sites_per_epoch <= true_n);
    // Dominance: the p100 estimate upper-bounds every device-epoch truth.
    for (const auto& [dev, epoch] : store.device_epochs()) {
      std::set<SiteId> imp_sites, conv_sites;
      for (const auto& imp : store.impressions(dev, epoch)) imp_sites.insert(imp.site);
      for (const auto& conv : store.conversions(dev, epoch)) {
        conv_sites.insert(conv.conv_site);
      }
      CHECK(est.imp_sites_per_epoch >= static_cast<int64_t>(imp_sites.size()));
      CHECK(est.conv_sites_per_epoch >= static_cast<int64_t>(conv_sites.size()));
    }
  }
}
