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

#include "filter.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "errors.hpp"

namespace budgetguard {

const char* filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::Global:
      return "global";
    case FilterKind::Querier:
      return "querier";
    case FilterKind::ConvQuota:
      return "conv_quota";
    case FilterKind::ImpQuota:
      return "imp_quota";
  }
  return "unknown";
}

FilterKind filter_kind_from_name(const std::string& name) {
  if (name == "global") return FilterKind::Global;
  if (name == "querier") return FilterKind::Querier;
  if (name == "conv_quota") return FilterKind::ConvQuota;
  if (name == "imp_quota") return FilterKind::ImpQuota;
  throw InvalidParams("unknown filter kind: " + name);
}

namespace {

void write_line(std::ostream& out, const DeviceId& d, EpochId e, FilterKind kind,
                const std::string& key, const Filter& f) {
  out << d << ',' << e << ',' << filter_kind_name(kind) << ',' << key << ','
      << f.capacity().micros() << ',' << f.consumed().micros() << '\n';
}

std::vector<std::string> split_fields(const std::string& line, std::size_t expected,
                                      long line_no) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  if (fields.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " fields", line_no);
  }
  return fields;
}

}  // namespace

void FilterRegistry::write_snapshot(std::ostream& out) const {
  for (const auto& [key, set] : sets_) {
    const auto& [device, epoch] = key;
    write_line(out, device, epoch, FilterKind::Global, "", set.global);
    for (const auto& [q, f] : set.per_querier) {
      write_line(out, device, epoch, FilterKind::Querier, q, f);
    }
    for (const auto& [c, f] : set.conv_quota) {
      write_line(out, device, epoch, FilterKind::ConvQuota, c, f);
    }
    for (const auto& [i, f] : set.imp_quota) {
      write_line(out, device, epoch, FilterKind::ImpQuota, i, f);
    }
  }
}

void FilterRegistry::load_snapshot(std::istream& in) {
  sets_.clear();
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line, 6, line_no);
    try {
      DeviceId device = fields[0];
      EpochId epoch = std::stoll(fields[1]);
      FilterKind kind = filter_kind_from_name(fields[2]);
      Filter f(Epsilon::from_micros(std::stoll(fields[4])),
               Epsilon::from_micros(std::stoll(fields[5])));
      FilterSet& set = sets_[{device, epoch}];
      switch (kind) {
        case FilterKind::Global:
          set.global = f;
          break;
        case FilterKind::Querier:
          set.per_querier[fields[3]] = f;
          break;
        case FilterKind::ConvQuota:
          set.conv_quota[fields[3]] = f;
          break;
        case FilterKind::ImpQuota:
          set.imp_quota[fields[3]] = f;
          break;
      }
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(std::string("bad snapshot record: ") + e.what(), line_no);
    }
  }
}

}  // namespace budgetguard
