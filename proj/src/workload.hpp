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

#ifndef BUDGETGUARD_WORKLOAD_HPP
#define BUDGETGUARD_WORKLOAD_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "engine.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace budgetguard {

// Synthetic single-advertiser measurement workload: devices browse publisher
// sites, see ads, and convert on advertiser sites; each advertiser's
// conversions are batched into DP histogram queries over m contextual
// buckets. Controlled sites are content sites with real user traffic but no
// ad inventory; when an attacker is configured it piggybacks on their
// actions.
struct BenignSpec {
  int devices = 256;
  int epochs = 15;
  int advertisers = 4;
  int publishers = 4;
  int controlled_sites = 2;
  int pub_visits_per_epoch = 2;
  double impression_rate = 0.9;
  double extra_controlled_action_prob = 0.35;
  double conversion_rate = 0.2;
  double epsilon = 0.2;   // requested per report
  double max_value = 1.0; // conversions use value == maxValue
  int window = 7;         // attribution lookback, epochs
  int histogram_dim = 5;
  int batch_size = 1 << 20;
  double tau = 0.05;

  void validate() const;
};

struct AttackerSpec {
  enum class Strategy { None, Naive, Random, Omniscient };
  Strategy strategy = Strategy::None;
  double fraction = 0.35;  // Random: share of the pool registered per report
  int sybils = 25;
  int chain = 2;           // sybil domains visited per user action
  int lookback = 7;        // epochs a sybil targets per action

  void validate() const;
};

AttackerSpec::Strategy attacker_strategy_from_name(const std::string& name);
const char* attacker_strategy_name(AttackerSpec::Strategy s);

// One attacker API call, recorded for inspection by tests.
struct AttackerCall {
  enum class Kind { Save, Report } kind = Kind::Save;
  DeviceId device;
  SiteId sybil;
  EpochId target_epoch = 0;
  bool committed_any = false;  // a report deducted budget somewhere
};

struct RunArtifacts {
  std::vector<QueryResult> queries;             // per advertiser batch
  std::map<std::string, double> benign_breakdown;
  AdversaryInfo adversary;
  std::vector<AttackerCall> attacker_calls;
  uint64_t total_actions = 0;
  uint64_t benign_reports = 0;

  double median_rmsre() const;
  double p95_rmsre() const;
};

// Deterministic generator + executor. The benign action stream is generated
// upfront from the benign substream of the master seed; attacker decisions
// are made online because the omniscient strategy consults engine state.
class WorkloadDriver {
 public:
  WorkloadDriver(BenignSpec benign, AttackerSpec attacker, uint64_t master_seed);

  // Executes the workload against the engine. `stop_after_actions` truncates
  // the run after that many user actions (-1: run all, including the final
  // aggregation). `replay_actions` re-applies the first k actions in replay
  // mode (event and cap state only, no filter access) to resume from a
  // snapshot.
  RunArtifacts run(Engine& engine, int64_t stop_after_actions = -1,
                   int64_t replay_actions = 0);

  const BenignSpec& benign() const { return benign_; }
  const AttackerSpec& attacker() const { return attacker_; }

  SiteId advertiser_site(int a) const;
  SiteId publisher_site(int p) const;
  SiteId controlled_site(int c) const;
  SiteId sybil_site(int s) const;
  std::set<SiteId> sybil_pool() const;

 private:
  struct Action {
    EpochId epoch = 0;
    int64_t ts = 0;
    DeviceId device;
    enum class Kind { PubVisit, CtrlVisit, Conversion } kind = Kind::PubVisit;
    SiteId site;
    bool impression = false;  // PubVisit: an ad was shown
    int advertiser = 0;       // ad or conversion target
    int bucket = 0;
  };

  struct DeviceAttackState {
    int rotation = 0;
    std::map<EpochId, std::set<SiteId>> stock;       // sybil sites with impressions
    std::set<std::pair<SiteId, EpochId>> attempted;  // (querier, epoch) pairs fired
  };

  void generate_actions();
  void run_attack_chain(Engine& engine, const Action& action, const UaCtxId& ua,
                        RunArtifacts& artifacts, Rng& attack_rng);
  std::vector<double> true_attribution(const Engine& engine,
                                       const ReportRequest& request) const;

  BenignSpec benign_;
  AttackerSpec attacker_;
  uint64_t master_seed_;
  std::vector<Action> actions_;
  std::map<DeviceId, DeviceAttackState> attack_state_;
};

}  // namespace budgetguard

#endif  // BUDGETGUARD_WORKLOAD_HPP
