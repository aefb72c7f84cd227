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

// Command-line front end. Everything goes through the public C API; this
// translation unit deliberately includes only the shared-library header.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "budgetguard/budgetguard.h"

namespace {

int exit_code_for(int rc) {
  switch (rc) {
    case BG_OK:
      return 0;
    case BG_ERR_AUDIT:
      return 1;
    case BG_ERR_CONFIG:
      return 2;
    default:
      return 3;
  }
}

int finish(int rc) {
  if (rc != BG_OK) std::fprintf(stderr, "error: %s\n", bg_last_error());
  return exit_code_for(rc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BudgetGuard: on-device privacy budget manager and simulation harness"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "run a scenario config");
  sim->add_option("config", sim_config, "scenario config file")->required();
  sim->add_option("--out", sim_out, "override the output directory");

  // replay
  std::string rp_events, rp_config;
  auto* rp = app.add_subcommand("replay", "replay an event CSV through a config");
  rp->add_option("events", rp_events, "events CSV")->required();
  rp->add_option("config", rp_config, "scenario config file")->required();

  // verify-bounds
  std::string vb_config;
  int64_t vb_atomicity = 10000;
  int64_t vb_resilience = 1000;
  auto* vb = app.add_subcommand("verify-bounds",
                                "run the atomicity, audit, and resilience suites");
  vb->add_option("config", vb_config, "scenario config file")->required();
  vb->add_option("--atomicity-trials", vb_atomicity, "atomicity fuzz trials");
  vb->add_option("--resilience-trials", vb_resilience, "resilience fuzz trials");

  // demo-counterexample
  std::string cx_which;
  bool cx_idp = false;
  double cx_eps = 1.0;
  int32_t cx_n = -1;
  int64_t cx_trials = 1000000;
  double cx_eps_global = 0.0;
  uint64_t cx_seed = 1;
  auto* cx = app.add_subcommand("demo-counterexample",
                                "estimate a per-querier unsoundness construction");
  cx->add_option("theorem", cx_which, "thm1 or thm2")->required();
  cx->add_flag("--idp", cx_idp, "thm2: individual-DP filter variant");
  cx->add_option("--eps", cx_eps, "per-querier capacity");
  cx->add_option("--n", cx_n, "helper querier count (default depends on theorem)");
  cx->add_option("--trials", cx_trials, "Monte Carlo trials per world");
  cx->add_option("--eps-global", cx_eps_global, "shared filter capacity (thm2)");
  cx->add_option("--seed", cx_seed, "random seed");

  // derive-quotas
  std::string dq_events;
  double dq_percentile = 0.85;
  double dq_eps_querier = 1.0;
  int32_t dq_kappa = 2;
  double dq_r = 0.0;
  int64_t dq_epoch_length = 86400;
  auto* dq = app.add_subcommand("derive-quotas",
                                "estimate workload parameters and derive capacities");
  dq->add_option("events", dq_events, "events CSV")->required();
  dq->add_option("--percentile", dq_percentile, "nearest-rank percentile in (0, 1]");
  dq->add_option("--eps-querier", dq_eps_querier, "per-querier capacity");
  dq->add_option("--kappa", dq_kappa, "per-action domain cap");
  dq->add_option("--r", dq_r, "intermediary budget fraction");
  dq->add_option("--epoch-length", dq_epoch_length, "epoch length in seconds");

  // snapshot / restore
  std::string sn_config, sn_out;
  int64_t sn_actions = 0;
  auto* sn = app.add_subcommand("snapshot",
                                "run a prefix of a scenario and write the filter snapshot");
  sn->add_option("config", sn_config, "scenario config file")->required();
  sn->add_option("--actions", sn_actions, "user actions to process")->required();
  sn->add_option("--out", sn_out, "override the output directory");

  std::string rs_config, rs_from, rs_out;
  int64_t rs_skip = 0;
  auto* rs = app.add_subcommand("restore", "resume a scenario from a filter snapshot");
  rs->add_option("config", rs_config, "scenario config file")->required();
  rs->add_option("--from", rs_from, "snapshot file")->required();
  rs->add_option("--skip", rs_skip, "user actions already covered by the snapshot")
      ->required();
  rs->add_option("--out", rs_out, "override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (sim->parsed()) {
    bg_run_options opts{-1, nullptr, 0, sim_out.empty() ? nullptr : sim_out.c_str()};
    return finish(bg_run_scenario(sim_config.c_str(), &opts));
  }

  if (rp->parsed()) {
    uint64_t rows = 0;
    int rc = bg_ingest_count(rp_events.c_str(), 86400, &rows);
    if (rc != BG_OK) return finish(rc);
    std::printf("ingested %llu event(s)\n", static_cast<unsigned long long>(rows));
    if (rows == 0) std::fprintf(stderr, "warning: event file is empty\n");
    return finish(bg_replay_events(rp_events.c_str(), rp_config.c_str()));
  }

  if (vb->parsed()) {
    uint64_t violations = 0;
    int rc = bg_verify_bounds(vb_config.c_str(), vb_atomicity, vb_resilience,
                              &violations);
    std::printf("verify-bounds: %llu violation(s)\n",
                static_cast<unsigned long long>(violations));
    return finish(rc);
  }

  if (cx->parsed()) {
    int theorem;
    if (cx_which == "thm1") {
      theorem = BG_CX_THM1;
    } else if (cx_which == "thm2") {
      theorem = BG_CX_THM2;
    } else {
      std::fprintf(stderr, "error: theorem must be thm1 or thm2\n");
      return 2;
    }
    if (cx_n < 0) {
      if (theorem == BG_CX_THM1) {
        cx_n = 20;
      } else {
        double denom = 1.0 - std::exp(-cx_eps / 2.0);
        cx_n = static_cast<int32_t>(std::ceil(4.0 * std::log(2.0) / (denom * denom)));
      }
    }
    bg_cx_params params{cx_eps, cx_n, cx_trials, cx_eps_global, 0.0,
                        cx_idp ? 1 : 0, cx_seed};
    bg_cx_result result{};
    int rc = bg_counterexample(theorem, &params, &result);
    if (rc == BG_OK) {
      std::printf("theorem,eps,n,trials,estimate,stderr,closed_form\n");
      std::printf("%s%s,%.9g,%d,%lld,%.9g,%.9g,%.9g\n", cx_which.c_str(),
                  cx_idp ? "-idp" : "", cx_eps, cx_n,
                  static_cast<long long>(result.trials), result.estimate,
                  result.stderr_est, result.closed_form);
    }
    return finish(rc);
  }

  if (dq->parsed()) {
    bg_quota_config out{};
    int rc = bg_derive_quotas(dq_events.c_str(), dq_percentile,
                              static_cast<int64_t>(std::llround(dq_eps_querier * 1e6)),
                              dq_kappa, dq_r, dq_epoch_length, &out);
    if (rc == BG_OK) {
      std::printf("quota.eps_querier = %.6g\n", out.eps_querier_micro / 1e6);
      std::printf("quota.eps_global = %.6g\n", out.eps_global_micro / 1e6);
      std::printf("quota.eps_imp = %.6g\n", out.eps_imp_quota_micro / 1e6);
      std::printf("quota.eps_conv = %.6g\n", out.eps_conv_quota_micro / 1e6);
      std::printf("quota.kappa = %d\n", out.kappa_action);
    }
    return finish(rc);
  }

  if (sn->parsed()) {
    bg_run_options opts{sn_actions, nullptr, 0,
                        sn_out.empty() ? nullptr : sn_out.c_str()};
    return finish(bg_run_scenario(sn_config.c_str(), &opts));
  }

  if (rs->parsed()) {
    bg_run_options opts{-1, rs_from.c_str(), rs_skip,
                        rs_out.empty() ? nullptr : rs_out.c_str()};
    return finish(bg_run_scenario(rs_config.c_str(), &opts));
  }

  return 2;
}
