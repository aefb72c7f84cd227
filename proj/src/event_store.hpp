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

#ifndef BUDGETGUARD_EVENT_STORE_HPP
#define BUDGETGUARD_EVENT_STORE_HPP

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace budgetguard {

// Append-only per-device, per-epoch event log. Single writer; reads across
// devices are safe once writes for those devices have completed.
class EventStore {
 public:
  explicit EventStore(int64_t epoch_length_seconds = kDefaultEpochLengthSeconds)
      : epoch_length_(epoch_length_seconds) {
    if (epoch_length_ <= 0) throw InvalidParams("epoch length must be positive");
  }

  int64_t epoch_length() const { return epoch_length_; }

  // Validates the type invariants and appends. The store assigns `seq`.
  void append(ImpressionEvent ev) {
    check_epoch(ev.device, ev.epoch, ev.timestamp);
    if (ev.bucket < 0) throw InvalidEvent("impression bucket must be non-negative");
    ev.seq = next_seq_++;
    slot(ev.device, ev.epoch).impressions.push_back(std::move(ev));
    ++size_;
  }

  void append(ConversionEvent ev) {
    check_epoch(ev.device, ev.epoch, ev.timestamp);
    if (ev.max_value <= 0.0) throw InvalidEvent("conversion maxValue must be positive");
    if (ev.value < 0.0 || ev.value > ev.max_value) {
      throw InvalidEvent("conversion value must lie in [0, maxValue]");
    }
    ev.seq = next_seq_++;
    slot(ev.device, ev.epoch).conversions.push_back(std::move(ev));
    ++size_;
  }

  const std::vector<ImpressionEvent>& impressions(const DeviceId& d, EpochId e) const {
    auto it = by_key_.find({d, e});
    return it == by_key_.end() ? empty_imps_ : it->second.impressions;
  }

  const std::vector<ConversionEvent>& conversions(const DeviceId& d, EpochId e) const {
    auto it = by_key_.find({d, e});
    return it == by_key_.end() ? empty_convs_ : it->second.conversions;
  }

  std::size_t count(const DeviceId& d, EpochId e) const {
    auto it = by_key_.find({d, e});
    if (it == by_key_.end()) return 0;
    return it->second.impressions.size() + it->second.conversions.size();
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  // Device-epoch keys with at least one event, in (device, epoch) order.
  std::vector<std::pair<DeviceId, EpochId>> device_epochs() const {
    std::vector<std::pair<DeviceId, EpochId>> keys;
    keys.reserve(by_key_.size());
    for (const auto& [k, v] : by_key_) keys.push_back(k);
    return keys;
  }

 private:
  struct Slot {
    std::vector<ImpressionEvent> impressions;
    std::vector<ConversionEvent> conversions;
  };

  void check_epoch(const DeviceId& d, EpochId e, int64_t ts) const {
    if (d.empty()) throw InvalidEvent("device id must be non-empty");
    if (e != epoch_of(ts, epoch_length_)) {
      throw InvalidEvent("event epoch does not match its timestamp");
    }
    if (e < 0) throw InvalidEvent("event epoch must be non-negative");
  }

  Slot& slot(const DeviceId& d, EpochId e) { return by_key_[{d, e}]; }

  int64_t epoch_length_;
  std::map<std::pair<DeviceId, EpochId>, Slot> by_key_;
  std::size_t size_ = 0;
  uint64_t next_seq_ = 0;

  inline static const std::vector<ImpressionEvent> empty_imps_{};
  inline static const std::vector<ConversionEvent> empty_convs_{};
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_EVENT_STORE_HPP
