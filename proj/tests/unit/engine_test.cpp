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

#include <map>

#include "doctest.h"
#include "engine.hpp"
#include "rng.hpp"

using namespace budgetguard;

namespace {

QuotaConfig worked_example_config() {
  QuotaConfig cfg;
  cfg.eps_querier = Epsilon::from_double(0.5);
  cfg.eps_global = Epsilon::from_double(4.0);
  cfg.eps_imp_quota = Epsilon::from_double(2.0);
  cfg.eps_conv_quota = Epsilon::from_double(0.75);
  cfg.kappa_action = 2;
  return cfg;
}

Engine make_engine(QuotaConfig cfg, EngineVariant variant = EngineVariant::Full) {
  EngineOptions opts;
  opts.quota = cfg;
  opts.variant = variant;
  return Engine(std::move(opts));
}

ImpressionEvent make_imp(const DeviceId& d, EpochId e, const SiteId& site,
                         int bucket = 0, const std::string& ad_key = "ad") {
  ImpressionEvent ev;
  ev.device = d;
  ev.epoch = e;
  ev.site = site;
  ev.ad_key = ad_key;
  ev.bucket = bucket;
  ev.timestamp = e * kDefaultEpochLengthSeconds;
  return ev;
}

// Saves one ad impression under its own user action.
void seed_impression(Engine& engine, const DeviceId& d, EpochId e, const SiteId& site,
                     int bucket = 0) {
  UaCtxId ua = engine.on_user_action(d, site);
  REQUIRE(engine.save_impression(d, ua, make_imp(d, e, site, bucket)) ==
          SaveResult::Stored);
}

ReportRequest example_request(const std::string& id, const QuerierId& querier,
                              const UaCtxId& ua) {
  ReportRequest req;
  req.report_id = id;
  req.device = "d1";
  req.querier = querier;
  req.conv_site = "shoes.ex";
  req.imp_sites = {"news.ex", "blog.ex"};
  req.epoch_start = 1;
  req.epoch_end = 3;  // conversion epoch has no impressions
  req.requested_epsilon = Epsilon::from_double(0.2);
  req.value = 75;
  req.max_value = 150;
  req.histogram_dim = 5;
  req.match_ad_key = "ad";
  req.ua_ctx = ua;
  return req;
}

}  // namespace

TEST_CASE("user action contexts are unique and start empty") {
  Engine engine = make_engine(worked_example_config());
  UaCtxId a = engine.on_user_action("d1", "news.ex");
  UaCtxId b = engine.on_user_action("d1", "news.ex");
  UaCtxId c = engine.on_user_action("d2", "news.ex");
  CHECK(a != b);
  CHECK(a != c);
  CHECK(engine.quota_count_check("d1", a, 0, "news.ex"));
}

TEST_CASE("quota count check uses set semantics") {
  Engine engine = make_engine(worked_example_config());  // kappa = 2
  UaCtxId ua = engine.on_user_action("d1", "a.ex");
  CHECK(engine.save_impression("d1", ua, make_imp("d1", 0, "a.ex")) ==
        SaveResult::Stored);
  CHECK(engine.quota_count_check("d1", ua, 0, "a.ex"));  // already present
  CHECK(engine.save_impression("d1", ua, make_imp("d1", 0, "b.ex")) ==
        SaveResult::Stored);
  CHECK_FALSE(engine.quota_count_check("d1", ua, 0, "c.ex"));
  CHECK(engine.quota_count_check("d1", ua, 0, "b.ex"));

  // Third distinct site under the same action and epoch is rejected; the
  // same site twice is fine.
  CHECK(engine.save_impression("d1", ua, make_imp("d1", 0, "c.ex")) ==
        SaveResult::Rejected);
  CHECK(engine.save_impression("d1", ua, make_imp("d1", 0, "a.ex")) ==
        SaveResult::Stored);
  CHECK(engine.store().impressions("d1", 0).size() == 3);

  // A different epoch under the same action has its own budget of sites.
  CHECK(engine.quota_count_check("d1", ua, 1, "c.ex"));
}

TEST_CASE("rejected saves consume no budget and leave no filter state") {
  Engine engine = make_engine(worked_example_config());
  UaCtxId ua = engine.on_user_action("d1", "a.ex");
  engine.save_impression("d1", ua, make_imp("d1", 0, "a.ex"));
  engine.save_impression("d1", ua, make_imp("d1", 0, "b.ex"));
  engine.save_impression("d1", ua, make_imp("d1", 0, "c.ex"));
  CHECK(engine.filters().empty());
  CHECK(engine.ledger().size() == 0);
}

TEST_CASE("atomic transaction commits all or nothing") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  FilterSet& fs = engine.filters().get_or_init("d1", 1, cfg);

  SUBCASE("all capacities sufficient: every filter reduced by its loss") {
    std::map<SiteId, Epsilon> per_site{{"news.ex", Epsilon::from_double(0.1)}};
    TxnResult txn = engine.atomic_check_and_consume(
        fs, "shoes.ex", "shoes.ex", {"news.ex", "blog.ex"},
        Epsilon::from_double(0.1), per_site, "d1", 1, "r1");
    CHECK(txn.ok);
    CHECK(fs.per_querier.at("shoes.ex").consumed() == Epsilon::from_double(0.1));
    CHECK(fs.global.consumed() == Epsilon::from_double(0.1));
    CHECK(fs.conv_quota.at("shoes.ex").consumed() == Epsilon::from_double(0.1));
    CHECK(fs.imp_quota.at("news.ex").consumed() == Epsilon::from_double(0.1));
    CHECK(fs.imp_quota.count("blog.ex") == 0);  // zero loss: never touched
  }

  SUBCASE("one impression quota short: snapshot-equal state") {
    fs.imp("news.ex", cfg).try_consume(Epsilon::from_double(2.0));
    FilterSet before = fs;
    std::map<SiteId, Epsilon> per_site{{"news.ex", Epsilon::from_double(0.1)},
                                       {"blog.ex", Epsilon::from_double(0.1)}};
    TxnResult txn = engine.atomic_check_and_consume(
        fs, "shoes.ex", "shoes.ex", {"blog.ex", "news.ex"},
        Epsilon::from_double(0.1), per_site, "d1", 1, "r2");
    CHECK_FALSE(txn.ok);
    CHECK(txn.cause == NullCause::ImpQuota);
    CHECK(txn.failing_site == "news.ex");
    CHECK(fs == before);
  }

  SUBCASE("zero losses always pass with no state change") {
    FilterSet before = fs;
    TxnResult txn = engine.atomic_check_and_consume(fs, "shoes.ex", "shoes.ex", {},
                                                    Epsilon(), {}, "d1", 1, "r3");
    CHECK(txn.ok);
    CHECK(fs.global == before.global);
  }
}

TEST_CASE("nulled cause follows the check order") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  FilterSet& fs = engine.filters().get_or_init("d1", 1, cfg);
  // Exhaust querier and global; the reported cause must be the querier,
  // which is checked first.
  fs.querier("q.ex", cfg).try_consume(Epsilon::from_double(0.5));
  fs.global.try_consume(Epsilon::from_double(4.0));
  TxnResult txn = engine.atomic_check_and_consume(fs, "q.ex", "c.ex", {},
                                                  Epsilon::from_double(0.1), {},
                                                  "d1", 1, "r");
  CHECK_FALSE(txn.ok);
  CHECK(txn.cause == NullCause::QuerierBudget);
}

TEST_CASE("worked example: two reports over epochs one and two") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  seed_impression(engine, "d1", 1, "news.ex", 0);
  seed_impression(engine, "d1", 2, "blog.ex", 1);

  ConversionEvent conv;
  conv.device = "d1";
  conv.epoch = 3;
  conv.conv_site = "shoes.ex";
  conv.queriers = {"shoes.ex", "adtech.ex"};
  conv.value = 75;
  conv.max_value = 150;
  conv.timestamp = 3 * kDefaultEpochLengthSeconds;
  UaCtxId ua = engine.on_user_action("d1", "shoes.ex");
  conv.ua_ctx = ua;
  engine.record_conversion(conv);

  Report ri = engine.measure_conversion(example_request("ri", "shoes.ex", ua));
  Report rj = engine.measure_conversion(example_request("rj", "adtech.ex", ua));

  for (const Report* rep : {&ri, &rj}) {
    CHECK(rep->per_epoch.at(1).committed);
    CHECK(rep->per_epoch.at(2).committed);
    CHECK_FALSE(rep->per_epoch.at(3).committed);
    CHECK(rep->per_epoch.at(3).cause == NullCause::NoMatch);
    // Uniform split of 75 across the two matched impressions.
    CHECK(rep->histogram[0] == doctest::Approx(37.5));
    CHECK(rep->histogram[1] == doctest::Approx(37.5));
  }

  for (EpochId e : {1, 2}) {
    const SiteId imp_site = e == 1 ? "news.ex" : "blog.ex";
    const SiteId other = e == 1 ? "blog.ex" : "news.ex";
    CHECK(engine.remaining("d1", e, FilterKind::Querier, "shoes.ex") ==
          Epsilon::from_double(0.4));
    CHECK(engine.remaining("d1", e, FilterKind::Querier, "adtech.ex") ==
          Epsilon::from_double(0.4));
    CHECK(engine.remaining("d1", e, FilterKind::Global, "") ==
          Epsilon::from_double(3.8));
    CHECK(engine.remaining("d1", e, FilterKind::ImpQuota, imp_site) ==
          Epsilon::from_double(1.8));
    CHECK(engine.remaining("d1", e, FilterKind::ImpQuota, other) ==
          Epsilon::from_double(2.0));
    CHECK(engine.remaining("d1", e, FilterKind::ConvQuota, "shoes.ex") ==
          Epsilon::from_double(0.55));
  }
  // The conversion epoch was never charged and holds no filter state.
  CHECK(engine.filters().find("d1", 3) == nullptr);
}

TEST_CASE("epochs with no matching impressions consume nothing") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  UaCtxId ua = engine.on_user_action("d1", "shoes.ex");
  Report rep = engine.measure_conversion(example_request("r", "shoes.ex", ua));
  for (const auto& [e, st] : rep.per_epoch) {
    CHECK_FALSE(st.committed);
    CHECK(st.cause == NullCause::NoMatch);
  }
  for (double v : rep.histogram) CHECK(v == 0.0);
  CHECK(engine.ledger().size() == 0);
  CHECK(engine.filters().empty());
}

TEST_CASE("per-epoch independence: a depleted epoch nullifies only itself") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  seed_impression(engine, "d1", 1, "news.ex");
  seed_impression(engine, "d1", 2, "blog.ex");
  engine.filters().get_or_init("d1", 1, cfg).global.try_consume(
      Epsilon::from_double(4.0));

  UaCtxId ua = engine.on_user_action("d1", "shoes.ex");
  Report rep = engine.measure_conversion(example_request("r", "shoes.ex", ua));
  CHECK_FALSE(rep.per_epoch.at(1).committed);
  CHECK(rep.per_epoch.at(1).cause == NullCause::GlobalBudget);
  CHECK(rep.per_epoch.at(2).committed);

  // Oracle: the same epochs as separate single-epoch requests agree.
  Engine oracle = make_engine(cfg);
  seed_impression(oracle, "d1", 1, "news.ex");
  seed_impression(oracle, "d1", 2, "blog.ex");
  oracle.filters().get_or_init("d1", 1, cfg).global.try_consume(
      Epsilon::from_double(4.0));
  UaCtxId ua2 = oracle.on_user_action("d1", "shoes.ex");
  for (EpochId e : {1, 2}) {
    ReportRequest req = example_request("r" + std::to_string(e), "shoes.ex", ua2);
    req.epoch_start = req.epoch_end = e;
    Report single = oracle.measure_conversion(req);
    CHECK(single.per_epoch.at(e).committed == rep.per_epoch.at(e).committed);
  }
}

TEST_CASE("per-epoch independence holds under sibling-epoch mutations") {
  QuotaConfig cfg = worked_example_config();
  Rng rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    // Epoch 2 is sometimes healthy and sometimes depleted; its status must
    // never depend on how epoch 1's data is mutated.
    bool deplete_e2 = rng.bernoulli(0.5);

    auto status_of_e2 = [&](bool sibling_data, int extra_imps) {
      Engine engine = make_engine(cfg);
      if (sibling_data) {
        seed_impression(engine, "d1", 1, "news.ex");
        for (int i = 0; i < extra_imps; ++i) seed_impression(engine, "d1", 1, "blog.ex");
      }
      seed_impression(engine, "d1", 2, "blog.ex");
      if (deplete_e2) {
        engine.filters().get_or_init("d1", 2, cfg).global.try_consume(
            Epsilon::from_double(4.0));
      }
      UaCtxId ua = engine.on_user_action("d1", "shoes.ex");
      Report rep = engine.measure_conversion(example_request("r", "shoes.ex", ua));
      return rep.per_epoch.at(2);
    };

    EpochStatus base = status_of_e2(true, 1);
    CHECK(base.committed == !deplete_e2);
    for (auto [sibling, extra] : {std::pair{false, 0}, {true, 0}, {true, 2}}) {
      EpochStatus mutated = status_of_e2(sibling, extra);
      CHECK(mutated.committed == base.committed);
      if (!base.committed) CHECK(mutated.cause == base.cause);
    }
  }
}

TEST_CASE("domain cap nulls an epoch before any filter access") {
  QuotaConfig cfg = worked_example_config();
  cfg.kappa_action = 1;
  Engine engine = make_engine(cfg);
  seed_impression(engine, "d1", 1, "news.ex");

  UaCtxId ua = engine.on_user_action("d1", "x.ex");
  // The action already touched another site in epoch 1.
  REQUIRE(engine.save_impression("d1", ua, make_imp("d1", 1, "other.ex")) ==
          SaveResult::Stored);
  ReportRequest req = example_request("r", "shoes.ex", ua);
  req.epoch_start = req.epoch_end = 1;
  Report rep = engine.measure_conversion(req);
  CHECK_FALSE(rep.per_epoch.at(1).committed);
  CHECK(rep.per_epoch.at(1).cause == NullCause::DomainCap);
  CHECK(engine.ledger().size() == 0);
  CHECK(engine.filters().empty());
}

TEST_CASE("ledger bound and consistency hold under a random trace") {
  QuotaConfig cfg = worked_example_config();
  Engine engine = make_engine(cfg);
  Rng rng(404);
  const std::vector<SiteId> sites = {"news.ex", "blog.ex", "feed.ex"};
  for (int day = 0; day < 6; ++day) {
    for (const auto& site : sites) {
      if (rng.bernoulli(0.8)) seed_impression(engine, "d1", day, site);
    }
    for (int r = 0; r < 3; ++r) {
      UaCtxId ua = engine.on_user_action("d1", "shoes.ex");
      ReportRequest req;
      req.report_id = "t" + std::to_string(day * 3 + r);
      req.device = "d1";
      req.querier = rng.bernoulli(0.5) ? "shoes.ex" : "adtech.ex";
      req.conv_site = "shoes.ex";
      req.imp_sites = {sites.begin(), sites.end()};
      req.epoch_start = std::max(0, day - 2);
      req.epoch_end = day;
      req.requested_epsilon = Epsilon::from_double(0.1 + rng.uniform01() * 0.4);
      req.value = 50 + rng.uniform01() * 100;
      req.max_value = 150;
      req.histogram_dim = 5;
      req.match_ad_key = "ad";
      req.ua_ctx = ua;
      engine.measure_conversion(req);
    }
  }

  // Privacy bound: committed global deductions per epoch never exceed the
  // capacity, exactly.
  std::map<EpochId, int64_t> global_sums;
  std::map<std::pair<std::string, EpochId>, std::map<FilterKind, int64_t>> per_report;
  for (const auto& e : engine.ledger().entries()) {
    REQUIRE(e.committed);
    if (e.kind == FilterKind::Global) global_sums[e.epoch] += e.amount.micros();
    if (e.kind != FilterKind::ImpQuota) {
      per_report[{e.report_id, e.epoch}][e.kind] += e.amount.micros();
    }
  }
  for (const auto& [e, total] : global_sums) {
    CHECK(total <= cfg.eps_global.micros());
  }
  // Consistency: querier, global, and conv-quota deductions agree per
  // (report, epoch).
  for (const auto& [key, kinds] : per_report) {
    REQUIRE(kinds.count(FilterKind::Querier));
    CHECK(kinds.at(FilterKind::Querier) == kinds.at(FilterKind::Global));
    CHECK(kinds.at(FilterKind::Querier) == kinds.at(FilterKind::ConvQuota));
  }
  // Cap bound over everything that ran.
  CHECK(engine.ua_state().max_sites_per_action_epoch() <=
        static_cast<std::size_t>(cfg.kappa_action));
}

TEST_CASE("baseline variants skip the quota machinery") {
  QuotaConfig cfg = worked_example_config();
  Engine global_only = make_engine(cfg, EngineVariant::GlobalOnly);
  seed_impression(global_only, "d1", 1, "news.ex");
  UaCtxId ua = global_only.on_user_action("d1", "shoes.ex");
  ReportRequest req = example_request("r", "shoes.ex", ua);
  req.epoch_start = req.epoch_end = 1;
  Report rep = global_only.measure_conversion(req);
  CHECK(rep.per_epoch.at(1).committed);
  const FilterSet* fs = global_only.filters().find("d1", 1);
  REQUIRE(fs != nullptr);
  CHECK(fs->conv_quota.empty());
  CHECK(fs->imp_quota.empty());
  CHECK(fs->global.consumed() == Epsilon::from_double(0.1));

  Engine querier_only = make_engine(cfg, EngineVariant::QuerierOnly);
  seed_impression(querier_only, "d1", 1, "news.ex");
  UaCtxId ua2 = querier_only.on_user_action("d1", "shoes.ex");
  ReportRequest req2 = example_request("r", "shoes.ex", ua2);
  req2.epoch_start = req2.epoch_end = 1;
  querier_only.measure_conversion(req2);
  const FilterSet* fs2 = querier_only.filters().find("d1", 1);
  REQUIRE(fs2 != nullptr);
  CHECK(fs2->global.consumed().is_zero());
  CHECK(fs2->per_querier.at("shoes.ex").consumed() == Epsilon::from_double(0.1));
}

TEST_CASE("invalid requests are rejected up front") {
  Engine engine = make_engine(worked_example_config());
  UaCtxId ua = engine.on_user_action("d1", "s.ex");
  ReportRequest req = example_request("r", "shoes.ex", ua);
  req.value = 200;  // above maxValue
  CHECK_THROWS_AS(engine.measure_conversion(req), InvalidRequest);
  req = example_request("r", "shoes.ex", ua);
  req.epoch_end = 0;  // empty window
  CHECK_THROWS_AS(engine.measure_conversion(req), InvalidRequest);
}
