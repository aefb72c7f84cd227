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

#include <sstream>
#include <vector>

#include "doctest.h"
#include "filter.hpp"
#include "rng.hpp"

using namespace budgetguard;

namespace {

QuotaConfig test_config() {
  QuotaConfig cfg;
  cfg.eps_querier = Epsilon::from_double(1.0);
  cfg.eps_global = Epsilon::from_double(8.0);
  cfg.eps_imp_quota = Epsilon::from_double(2.0);
  cfg.eps_conv_quota = Epsilon::from_double(1.0);
  cfg.kappa_action = 2;
  return cfg;
}

}  // namespace

TEST_CASE("can_consume boundary is an exact integer-unit inequality") {
  Filter f(Epsilon::from_double(4.0), Epsilon::from_double(3.8));
  CHECK(f.can_consume(Epsilon::from_double(0.2)));
  // One micro-eps over the remaining budget does not fit.
  CHECK_FALSE(f.can_consume(Epsilon::from_micros(200001)));
  CHECK_FALSE(f.can_consume(Epsilon::from_double(0.200001)));
  CHECK(f.can_consume(Epsilon()));  // zero loss always fits

  // Sub-micro inputs round to the nearest representable unit at the API
  // boundary; 0.2000001 is 0.2 after conversion.
  CHECK(Epsilon::from_double(0.2000001).micros() == 200000);
}

TEST_CASE("try_consume deducts on success and holds state on failure") {
  Filter f(Epsilon::from_double(1.0));
  CHECK(f.try_consume(Epsilon::from_double(0.1)));
  CHECK(f.consumed() == Epsilon::from_double(0.1));

  Filter g(Epsilon::from_double(0.5), Epsilon::from_double(0.4));
  CHECK_FALSE(g.try_consume(Epsilon::from_double(0.2)));
  CHECK(g.consumed() == Epsilon::from_double(0.4));

  Filter h(Epsilon::from_double(0.5));
  for (int i = 0; i < 5; ++i) CHECK(h.try_consume(Epsilon::from_double(0.1)));
  CHECK_FALSE(h.try_consume(Epsilon::from_double(0.1)));
}

TEST_CASE("registry get_or_init is idempotent and per-epoch") {
  FilterRegistry registry;
  QuotaConfig cfg = test_config();
  FilterSet& fs = registry.get_or_init("d", 1, cfg);
  CHECK(fs.global.remaining() == Epsilon::from_double(8.0));
  fs.global.try_consume(Epsilon::from_double(0.1));
  FilterSet& again = registry.get_or_init("d", 1, cfg);
  CHECK(again.global.remaining() == Epsilon::from_double(7.9));

  FilterSet& other = registry.get_or_init("d", 2, cfg);
  CHECK(other.global.remaining() == Epsilon::from_double(8.0));
}

TEST_CASE("monotonicity and exactness under random loss sequences") {
  Rng rng(31337);
  for (int trial = 0; trial < 200; ++trial) {
    Filter f(Epsilon::from_micros(static_cast<int64_t>(rng.below(4000000)) + 1));
    int64_t accepted_sum = 0;
    int64_t prev_consumed = 0;
    for (int step = 0; step < 40; ++step) {
      Epsilon loss = Epsilon::from_micros(static_cast<int64_t>(rng.below(400000)));
      bool ok = f.try_consume(loss);
      if (ok) accepted_sum += loss.micros();
      CHECK(f.consumed().micros() >= prev_consumed);
      CHECK(f.consumed() <= f.capacity());
      prev_consumed = f.consumed().micros();
    }
    CHECK(f.consumed().micros() == accepted_sum);
  }
}

TEST_CASE("operations on one device-epoch never touch another") {
  FilterRegistry registry;
  QuotaConfig cfg = test_config();
  registry.get_or_init("d", 1, cfg).querier("q.ex", cfg).try_consume(
      Epsilon::from_double(0.5));
  registry.get_or_init("d", 2, cfg);
  registry.get_or_init("e", 1, cfg);

  const FilterSet* other_epoch = registry.find("d", 2);
  const FilterSet* other_device = registry.find("e", 1);
  REQUIRE(other_epoch != nullptr);
  REQUIRE(other_device != nullptr);
  CHECK(other_epoch->per_querier.empty());
  CHECK(other_device->per_querier.empty());
  CHECK(other_epoch->global.consumed().is_zero());
}

TEST_CASE("snapshot round-trips arbitrary registry state") {
  Rng rng(5);
  FilterRegistry registry;
  QuotaConfig cfg = test_config();
  for (int i = 0; i < 20; ++i) {
    DeviceId d = "d" + std::to_string(rng.below(4));
    EpochId e = static_cast<EpochId>(rng.below(5));
    FilterSet& fs = registry.get_or_init(d, e, cfg);
    fs.global.try_consume(Epsilon::from_micros(static_cast<int64_t>(rng.below(500000))));
    fs.querier("q" + std::to_string(rng.below(3)), cfg)
        .try_consume(Epsilon::from_micros(static_cast<int64_t>(rng.below(300000))));
    fs.conv("c.ex", cfg).try_consume(
        Epsilon::from_micros(static_cast<int64_t>(rng.below(300000))));
    fs.imp("i" + std::to_string(rng.below(3)), cfg)
        .try_consume(Epsilon::from_micros(static_cast<int64_t>(rng.below(600000))));
  }

  std::stringstream buf;
  registry.write_snapshot(buf);
  FilterRegistry loaded;
  loaded.load_snapshot(buf);
  CHECK(loaded.all() == registry.all());

  std::stringstream again;
  loaded.write_snapshot(again);
  CHECK(again.str() == buf.str());
}
