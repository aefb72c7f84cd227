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

#ifndef BUDGETGUARD_SCENARIO_HPP
#define BUDGETGUARD_SCENARIO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engine.hpp"
#include "workload.hpp"

namespace budgetguard {

// Flat key=value scenario configuration with dotted section keys. Exactly
// one of the explicit quota group (quota.*) or the derivation group
// (derive.*) must be present.
struct ScenarioConfig {
  uint64_t seed = 1;
  int64_t epoch_length = kDefaultEpochLengthSeconds;
  EngineVariant variant = EngineVariant::Full;
  ImpSiteBudgetMode imp_site_mode = ImpSiteBudgetMode::UniformHeuristic;

  std::optional<QuotaConfig> quota;

  struct Derivation {
    Epsilon eps_querier;
    int kappa = 2;
    double r = 0.0;
    double slack = 1.0;             // multiplies the derived global capacity
    std::optional<double> percentile;      // estimate params from the event stream
    std::optional<WorkloadParams> params;  // or take them directly
  };
  std::optional<Derivation> derive;

  BenignSpec benign;
  AttackerSpec attacker;
  std::string output_dir = "out";

  std::string canonical_text;  // normalized key=value dump, hashed for outputs

  static ScenarioConfig parse_file(const std::string& path);
  static ScenarioConfig parse_text(const std::string& text);
  uint64_t config_hash() const { return fnv1a64(canonical_text); }
};

struct RunOptions {
  int64_t stop_after_actions = -1;   // truncate and snapshot-only
  std::string resume_snapshot;       // filter snapshot to resume from
  int64_t resume_skip_actions = 0;   // actions already covered by the snapshot
  std::string output_dir_override;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 audit violation, 2 config error, 3 io error
  std::vector<AuditViolation> violations;
  RunArtifacts artifacts;
  std::string snapshot_path;
  std::string metrics_path;
};

// Full scenario execution: generation, engine, aggregation, metrics, audit.
// Writes metrics CSV, report log, ledger, and the final filter snapshot
// under the output directory.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// Event CSV schema, one row per event:
//   timestamp,device_id,event_type,site,ua_ctx,ad_key,bucket,conv_value,
//   conv_max_value,queriers
// with event_type in {imp, conv}, empty fields for inapplicable columns, and
// queriers a |-separated list. Malformed rows raise ParseError with the
// offending line number.
EventStore ingest_events(const std::string& path, int64_t epoch_length);
void write_events_csv(const EventStore& store, const std::string& path);

// Replays an ingested event stream against the configured engine:
// conversions trigger one report per querier listed on the event.
RunResult replay_events(const std::string& events_path, const ScenarioConfig& config);

// derive-quotas entry point: estimate workload parameters from an event CSV
// and derive capacities.
QuotaConfig derive_quotas_from_csv(const std::string& events_path,
                                   double percentile, Epsilon eps_querier, int kappa,
                                   double r, int64_t epoch_length);

// Seed override hook: the BUDGETGUARD_SEED environment variable, when set,
// replaces the configured seed.
uint64_t effective_seed(const ScenarioConfig& config);

}  // namespace budgetguard

#endif  // BUDGETGUARD_SCENARIO_HPP
