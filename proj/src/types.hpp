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

#ifndef BUDGETGUARD_TYPES_HPP
#define BUDGETGUARD_TYPES_HPP

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace budgetguard {

using DeviceId = std::string;
using SiteId = std::string;     // eTLD+1 analog
using QuerierId = SiteId;       // queriers are identified by their site
using UaCtxId = std::string;    // opaque user-action context token
using EpochId = int64_t;        // days (or configured units) since scenario start

constexpr int64_t kDefaultEpochLengthSeconds = 86400;

// Non-overlapping epoch assignment: floor(timestamp / epoch_length).
inline EpochId epoch_of(int64_t timestamp_seconds, int64_t epoch_length_seconds) {
  int64_t q = timestamp_seconds / epoch_length_seconds;
  int64_t r = timestamp_seconds % epoch_length_seconds;
  if (r != 0 && ((r < 0) != (epoch_length_seconds < 0))) --q;
  return q;
}

struct ImpressionEvent {
  DeviceId device;
  EpochId epoch = 0;
  UaCtxId ua_ctx;
  SiteId site;          // impression site
  std::string ad_key;   // opaque key used by report matching
  int bucket = 0;       // histogram bucket in [0, m)
  int64_t timestamp = 0;
  uint64_t seq = 0;     // assigned by the store, unique per store
};

struct ConversionEvent {
  DeviceId device;
  EpochId epoch = 0;
  UaCtxId ua_ctx;
  SiteId conv_site;
  std::set<QuerierId> queriers;
  double value = 0.0;
  double max_value = 0.0;
  int64_t timestamp = 0;
  uint64_t seq = 0;
};

// Identity of one stored impression, used by cross-report support sets.
struct ImpressionKey {
  EpochId epoch = 0;
  SiteId site;
  std::string ad_key;
  uint64_t seq = 0;

  auto operator<=>(const ImpressionKey&) const = default;
};

inline ImpressionKey key_of(const ImpressionEvent& ev) {
  return ImpressionKey{ev.epoch, ev.site, ev.ad_key, ev.seq};
}

}  // namespace budgetguard

#endif  // BUDGETGUARD_TYPES_HPP
