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

#include <cmath>
#include <numeric>

#include "accounting.hpp"
#include "doctest.h"
#include "rng.hpp"

using namespace budgetguard;

namespace {

ImpressionEvent make_imp(EpochId e, const SiteId& site, const UaCtxId& ua,
                         const std::string& ad_key = "ad", int bucket = 0) {
  ImpressionEvent ev;
  ev.device = "d1";
  ev.epoch = e;
  ev.ua_ctx = ua;
  ev.site = site;
  ev.ad_key = ad_key;
  ev.bucket = bucket;
  ev.timestamp = e * kDefaultEpochLengthSeconds;
  return ev;
}

ReportRequest make_request(double value, double max_value, double eps,
                           EpochId start, EpochId end) {
  ReportRequest req;
  req.report_id = "r1";
  req.device = "d1";
  req.querier = "shoes.ex";
  req.conv_site = "shoes.ex";
  req.imp_sites = {"news.ex", "blog.ex"};
  req.epoch_start = start;
  req.epoch_end = end;
  req.requested_epsilon = Epsilon::from_double(eps);
  req.value = value;
  req.max_value = max_value;
  req.histogram_dim = 5;
  req.ua_ctx = "ua-conv";
  return req;
}

double l1(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += std::abs(x);
  return s;
}

}  // namespace

TEST_CASE("match_impressions filters by site, predicate, and user action") {
  EventStore store;
  store.append(make_imp(1, "news.ex", "ua-old"));
  store.append(make_imp(1, "other.ex", "ua-old"));   // unregistered site
  store.append(make_imp(1, "blog.ex", "ua-conv"));   // same action as the report
  store.append(make_imp(1, "news.ex", "ua-old", "wrong-key"));

  ReportRequest req = make_request(75, 150, 0.2, 1, 2);
  req.match_ad_key = "ad";
  auto matched = match_impressions(store, req, 1);
  REQUIRE(matched.size() == 1);
  CHECK(matched[0].site == "news.ex");
  CHECK(match_impressions(store, req, 2).empty());
}

TEST_CASE("uniform attribution splits the value across all matched impressions") {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  matched[1] = {make_imp(1, "news.ex", "u1", "ad", 0)};
  matched[2] = {make_imp(2, "blog.ex", "u2", "ad", 1)};
  ReportRequest req = make_request(60, 120, 0.2, 1, 2);
  auto outcome = attribute(matched, req);
  CHECK(outcome.a_max == 60);
  CHECK(outcome.per_epoch.at(1)[0].value == doctest::Approx(30.0));
  CHECK(outcome.per_epoch.at(2)[0].value == doctest::Approx(30.0));

  matched[2].push_back(make_imp(2, "blog.ex", "u3", "ad", 2));
  req.value = 75;
  outcome = attribute(matched, req);
  double total = 0;
  for (const auto& [e, imps] : outcome.per_epoch) {
    for (const auto& i : imps) {
      CHECK(i.value == doctest::Approx(25.0));
      total += i.value;
    }
  }
  CHECK(total == doctest::Approx(75.0));

  auto empty = attribute({}, req);
  CHECK(empty.per_epoch.empty());
}

TEST_CASE("last-touch attribution gives the full value to the newest impression") {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  auto early = make_imp(1, "news.ex", "u1");
  auto late = make_imp(2, "blog.ex", "u2");
  late.timestamp = 2 * kDefaultEpochLengthSeconds + 100;
  matched[1] = {early};
  matched[2] = {late};
  ReportRequest req = make_request(40, 80, 0.2, 1, 2);
  req.policy = AttributionPolicy::LastTouch;
  auto outcome = attribute(matched, req);
  CHECK(outcome.per_epoch.at(1)[0].value == 0.0);
  CHECK(outcome.per_epoch.at(2)[0].value == doctest::Approx(40.0));
}

TEST_CASE("epoch budget follows the value-scaled rule with zero for no match") {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  matched[1] = {make_imp(1, "news.ex", "u1")};
  ReportRequest req = make_request(75, 150, 0.2, 1, 2);
  auto outcome = attribute(matched, req);
  CHECK(epoch_budget(outcome, req, 1) == Epsilon::from_double(0.1));
  CHECK(epoch_budget(outcome, req, 2).is_zero());

  req = make_request(150, 150, 1.0, 1, 1);
  matched[1] = {make_imp(1, "news.ex", "u1")};
  outcome = attribute(matched, req);
  CHECK(epoch_budget(outcome, req, 1) == Epsilon::from_double(1.0));
}

TEST_CASE("impression-site budgets: uniform heuristic and the 2-delta bound") {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  matched[1] = {make_imp(1, "news.ex", "u1")};
  ReportRequest req = make_request(75, 150, 0.2, 1, 2);
  auto outcome = attribute(matched, req);

  CHECK(epoch_imp_site_budget(outcome, req, 1, "news.ex",
                              ImpSiteBudgetMode::UniformHeuristic) ==
        Epsilon::from_double(0.1));
  CHECK(epoch_imp_site_budget(outcome, req, 1, "blog.ex",
                              ImpSiteBudgetMode::UniformHeuristic)
            .is_zero());
  CHECK_THROWS_AS(epoch_imp_site_budget(outcome, req, 1, "stranger.ex",
                                        ImpSiteBudgetMode::UniformHeuristic),
                  SiteNotRegistered);

  matched[1].push_back(make_imp(1, "blog.ex", "u2"));
  outcome = attribute(matched, req);
  CHECK(epoch_imp_site_budget(outcome, req, 1, "news.ex",
                              ImpSiteBudgetMode::UniformHeuristic) ==
        Epsilon::from_double(0.05));
  CHECK(epoch_imp_site_budget(outcome, req, 1, "blog.ex",
                              ImpSiteBudgetMode::UniformHeuristic) ==
        Epsilon::from_double(0.05));

  // Multi-epoch window: the conservative bound doubles the epoch loss.
  CHECK(epoch_imp_site_budget(outcome, req, 1, "news.ex",
                              ImpSiteBudgetMode::TwoDeltaBound) ==
        Epsilon::from_double(0.2));

  // Single-epoch, single-site: the bound collapses to the epoch loss.
  ReportRequest single = make_request(75, 150, 0.2, 1, 1);
  std::map<EpochId, std::vector<ImpressionEvent>> one;
  one[1] = {make_imp(1, "news.ex", "u1")};
  auto outcome1 = attribute(one, single);
  CHECK(epoch_imp_site_budget(outcome1, single, 1, "news.ex",
                              ImpSiteBudgetMode::TwoDeltaBound) ==
        Epsilon::from_double(0.1));
}

TEST_CASE("allocation consistency: site budgets cover the epoch budget") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    ReportRequest req = make_request(1 + rng.uniform01() * 99, 100,
                                     0.05 + rng.uniform01(), 0,
                                     static_cast<EpochId>(rng.below(3)));
    req.imp_sites = {"a.ex", "b.ex", "c.ex"};
    std::map<EpochId, std::vector<ImpressionEvent>> matched;
    for (EpochId e = req.epoch_start; e <= req.epoch_end; ++e) {
      int k = static_cast<int>(rng.below(4));
      for (int i = 0; i < k; ++i) {
        SiteId site = i == 0 ? "a.ex" : (i == 1 ? "b.ex" : "c.ex");
        matched[e].push_back(make_imp(e, site, "u" + std::to_string(i)));
      }
      if (matched[e].empty()) matched.erase(e);
    }
    auto outcome = attribute(matched, req);
    for (EpochId e = req.epoch_start; e <= req.epoch_end; ++e) {
      for (auto mode :
           {ImpSiteBudgetMode::UniformHeuristic, ImpSiteBudgetMode::TwoDeltaBound}) {
        auto budgets = imp_site_budgets(outcome, req, e, mode);
        int64_t total = 0;
        for (const auto& [site, eps] : budgets) total += eps.micros();
        CHECK(total >= epoch_budget(outcome, req, e).micros());
      }
      // Sparsity: zero budget exactly when nothing matched.
      CHECK(epoch_budget(outcome, req, e).is_zero() == !outcome.epoch_relevant(e));
    }
  }
}

TEST_CASE("histogram respects statuses and the clipping invariant") {
  std::map<EpochId, std::vector<ImpressionEvent>> matched;
  matched[1] = {make_imp(1, "news.ex", "u1", "ad", 0)};
  matched[2] = {make_imp(2, "blog.ex", "u2", "ad", 1)};
  ReportRequest req = make_request(60, 120, 0.2, 1, 2);
  auto outcome = attribute(matched, req);

  std::map<EpochId, EpochStatus> statuses{{1, {true, NullCause::NoMatch}},
                                          {2, {true, NullCause::NoMatch}}};
  Report rep = build_histogram(outcome, req, statuses);
  CHECK(rep.histogram[0] == doctest::Approx(30.0));
  CHECK(rep.histogram[1] == doctest::Approx(30.0));
  CHECK(rep.histogram[2] == 0.0);

  statuses[2] = {false, NullCause::GlobalBudget};
  rep = build_histogram(outcome, req, statuses);
  CHECK(rep.histogram[0] == doctest::Approx(30.0));
  CHECK(rep.histogram[1] == 0.0);

  statuses[1] = {false, NullCause::QuerierBudget};
  rep = build_histogram(outcome, req, statuses);
  CHECK(l1(rep.histogram) == 0.0);
}

TEST_CASE("clipping fuzz: attributed mass never exceeds a_max") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    double value = rng.uniform01() * 200;
    ReportRequest req = make_request(value, 200, 0.3, 0, 2);
    req.imp_sites = {"a.ex", "b.ex"};
    std::map<EpochId, std::vector<ImpressionEvent>> matched;
    std::map<EpochId, EpochStatus> statuses;
    for (EpochId e = 0; e <= 2; ++e) {
      statuses[e] = {rng.bernoulli(0.7), NullCause::GlobalBudget};
      int k = static_cast<int>(rng.below(4));
      for (int i = 0; i < k; ++i) {
        matched[e].push_back(make_imp(e, rng.bernoulli(0.5) ? "a.ex" : "b.ex",
                                      "u" + std::to_string(i), "ad",
                                      static_cast<int>(rng.below(5))));
      }
      if (matched[e].empty()) matched.erase(e);
    }
    auto outcome = attribute(matched, req);
    Report rep = build_histogram(outcome, req, statuses);
    CHECK(l1(rep.histogram) <= outcome.a_max + 1e-9);
  }
}

TEST_CASE("brute-force histogram sensitivity stays within twice a_max") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    double value = 1 + rng.uniform01() * 99;
    ReportRequest req = make_request(value, 100, 0.5, 0, 2);
    req.imp_sites = {"a.ex", "b.ex"};
    req.policy = rng.bernoulli(0.5) ? AttributionPolicy::UniformSplit
                                    : AttributionPolicy::LastTouch;
    std::map<EpochId, std::vector<ImpressionEvent>> matched;
    for (EpochId e = 0; e <= 2; ++e) {
      int k = static_cast<int>(rng.below(4));
      for (int i = 0; i < k; ++i) {
        matched[e].push_back(make_imp(e, rng.bernoulli(0.5) ? "a.ex" : "b.ex",
                                      "u" + std::to_string(i), "ad",
                                      static_cast<int>(rng.below(5))));
      }
      if (matched[e].empty()) matched.erase(e);
    }
    std::map<EpochId, EpochStatus> all_committed;
    for (EpochId e = 0; e <= 2; ++e) all_committed[e] = {true, NullCause::NoMatch};

    auto base = build_histogram(attribute(matched, req), req, all_committed);
    for (EpochId removed = 0; removed <= 2; ++removed) {
      auto mutated = matched;
      mutated.erase(removed);
      auto alt = build_histogram(attribute(mutated, req), req, all_committed);
      double diff = 0;
      for (std::size_t j = 0; j < base.histogram.size(); ++j) {
        diff += std::abs(base.histogram[j] - alt.histogram[j]);
      }
      CHECK(diff <= 2 * value + 1e-9);
    }
  }
}
