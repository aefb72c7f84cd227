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
#include "event_store.hpp"
#include "rng.hpp"

using namespace budgetguard;

namespace {

ImpressionEvent imp(const DeviceId& d, EpochId e, const SiteId& site,
                    int64_t epoch_length = kDefaultEpochLengthSeconds) {
  ImpressionEvent ev;
  ev.device = d;
  ev.epoch = e;
  ev.site = site;
  ev.ad_key = "ad";
  ev.timestamp = e * epoch_length;
  return ev;
}

}  // namespace

TEST_CASE("epoch_of floor arithmetic") {
  CHECK(epoch_of(0, 86400) == 0);
  CHECK(epoch_of(86400, 86400) == 1);
  CHECK(epoch_of(172799, 86400) == 1);  // last second of day two
  CHECK(epoch_of(172800, 86400) == 2);

  // Monotone in the timestamp.
  Rng rng(99);
  int64_t prev_ts = 0;
  EpochId prev_epoch = epoch_of(0, 3600);
  for (int i = 0; i < 1000; ++i) {
    prev_ts += static_cast<int64_t>(rng.below(10000));
    EpochId e = epoch_of(prev_ts, 3600);
    CHECK(e >= prev_epoch);
    prev_epoch = e;
  }
}

TEST_CASE("store append and lookup") {
  EventStore store;
  store.append(imp("d1", 1, "news.ex"));
  CHECK(store.impressions("d1", 1).size() == 1);
  CHECK(store.impressions("d1", 2).empty());
  CHECK(store.size() == 1);

  ConversionEvent conv;
  conv.device = "d1";
  conv.epoch = 1;
  conv.conv_site = "shoes.ex";
  conv.value = 200;
  conv.max_value = 150;
  conv.timestamp = 86400;
  CHECK_THROWS_AS(store.append(conv), InvalidEvent);

  conv.value = 100;
  store.append(conv);
  CHECK(store.count("d1", 1) == 2);
}

TEST_CASE("store rejects epoch/timestamp mismatch") {
  EventStore store;
  ImpressionEvent ev = imp("d1", 3, "news.ex");
  ev.timestamp = 0;  // belongs to epoch 0
  CHECK_THROWS_AS(store.append(ev), InvalidEvent);
}

TEST_CASE("epoch grouping partitions events with no overlap or loss") {
  Rng rng(7);
  const int64_t epoch_length = 1000;
  EventStore store(epoch_length);
  std::map<EpochId, int> expected;
  for (int i = 0; i < 500; ++i) {
    int64_t ts = static_cast<int64_t>(rng.below(20000));
    EpochId e = epoch_of(ts, epoch_length);
    ImpressionEvent ev;
    ev.device = "d";
    ev.epoch = e;
    ev.site = "s.ex";
    ev.timestamp = ts;
    store.append(ev);
    expected[e]++;
  }
  std::size_t total = 0;
  for (const auto& [e, count] : expected) {
    CHECK(store.impressions("d", e).size() == static_cast<std::size_t>(count));
    total += static_cast<std::size_t>(count);
  }
  CHECK(total == store.size());
}

TEST_CASE("lookup returns exactly k events after k appends to the key") {
  EventStore store;
  for (int k = 0; k < 17; ++k) {
    CHECK(store.impressions("d1", 4).size() == static_cast<std::size_t>(k));
    store.append(imp("d1", 4, "s.ex"));
  }
  CHECK(store.impressions("d2", 4).empty());
}
