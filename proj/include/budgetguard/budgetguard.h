/* Copyright 2025 The BudgetGuard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* BudgetGuard: a privacy-budget manager for on-device ad attribution.
 *
 * Every device-epoch owns a set of pure-DP filters: one global budget shared
 * by all queriers, one budget per querier, and per-site quotas that protect
 * the global budget from depletion by cheap throwaway domains. Impressions
 * are stored free of charge behind a per-user-action domain cap; conversion
 * measurement charges all relevant filters of an epoch in a single atomic
 * transaction and nullifies only that epoch's contribution when a check
 * fails.
 *
 * All functions return BG_OK (0) on success or an error code; details of the
 * most recent failure on the calling thread are available from
 * bg_last_error(). Handles are opaque and must be released with the matching
 * free function. A bg_engine must be used from one thread at a time.
 */

#ifndef BUDGETGUARD_BUDGETGUARD_H
#define BUDGETGUARD_BUDGETGUARD_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define BG_OK 0
#define BG_ERR_AUDIT 1       /* scenario completed but audit found violations */
#define BG_ERR_CONFIG 2      /* invalid configuration or arguments */
#define BG_ERR_IO 3          /* file could not be read or written */
#define BG_ERR_PARSE 4       /* malformed input data */
#define BG_ERR_REJECTED 5    /* request refused by enforcement (not an error state) */
#define BG_ERR_DUPLICATE 6   /* object already exists */
#define BG_ERR_NOT_FOUND 7   /* unknown object */
#define BG_ERR_TAIL_MASS 8   /* Monte Carlo estimate needs more trials */
#define BG_ERR_INTERNAL 9

/* Message for the most recent error on this thread. */
const char* bg_last_error(void);

const char* bg_version(void);

/* ------------------------------------------------------------------ */
/* Engine: on-device budget management                                  */

typedef struct bg_engine bg_engine;

typedef struct bg_quota_config {
  int64_t eps_querier_micro;
  int64_t eps_global_micro;
  int64_t eps_imp_quota_micro;
  int64_t eps_conv_quota_micro;
  int32_t kappa_action;
} bg_quota_config;

/* Enforcement stacks. */
#define BG_VARIANT_FULL 0
#define BG_VARIANT_GLOBAL_ONLY 1
#define BG_VARIANT_QUERIER_ONLY 2

/* Per-impression-site charge rules. */
#define BG_IMP_SITE_UNIFORM 0
#define BG_IMP_SITE_TWO_DELTA 1

int bg_engine_new(const bg_quota_config* quota, int64_t epoch_length_seconds,
                  int variant, int imp_site_mode, bg_engine** out);
void bg_engine_free(bg_engine* engine);

/* Mints a fresh user-action context token into `ua_out` (NUL-terminated). */
int bg_engine_on_user_action(bg_engine* engine, const char* device,
                             const char* site, char* ua_out, size_t ua_cap);

/* Stores an impression. `*stored_out` is 1 when stored, 0 when the
 * per-action domain cap rejected the site. */
int bg_engine_save_impression(bg_engine* engine, const char* device,
                              const char* ua_ctx, const char* site,
                              const char* ad_key, int32_t bucket,
                              int64_t timestamp, int* stored_out);

/* Records a conversion event (queriers: array of site ids). */
int bg_engine_record_conversion(bg_engine* engine, const char* device,
                                const char* ua_ctx, const char* conv_site,
                                const char* const* queriers, size_t n_queriers,
                                double value, double max_value, int64_t timestamp);

/* Epoch outcome codes in bg_measure_result.epoch_status. */
#define BG_EPOCH_COMMITTED 0
#define BG_EPOCH_NULLED_QUERIER 1
#define BG_EPOCH_NULLED_GLOBAL 2
#define BG_EPOCH_NULLED_CONV_QUOTA 3
#define BG_EPOCH_NULLED_IMP_QUOTA 4
#define BG_EPOCH_NULLED_DOMAIN_CAP 5
#define BG_EPOCH_NO_MATCH 6

typedef struct bg_report_request {
  const char* report_id;
  const char* device;
  const char* querier;
  const char* conv_site;
  const char* const* imp_sites;
  size_t n_imp_sites;
  int64_t epoch_start;
  int64_t epoch_end; /* inclusive */
  int64_t requested_epsilon_micro;
  double value;
  double max_value;
  int32_t histogram_dim;
  const char* match_ad_key; /* NULL: match any key */
  const char* ua_ctx;
} bg_report_request;

typedef struct bg_measure_result {
  /* Caller-owned buffers. histogram must hold histogram_dim doubles;
   * epoch_status must hold (epoch_end - epoch_start + 1) ints. */
  double* histogram;
  int* epoch_status;
} bg_measure_result;

int bg_engine_measure_conversion(bg_engine* engine, const bg_report_request* request,
                                 bg_measure_result* result);

/* Filter kinds for budget introspection. */
#define BG_FILTER_GLOBAL 0
#define BG_FILTER_QUERIER 1
#define BG_FILTER_CONV_QUOTA 2
#define BG_FILTER_IMP_QUOTA 3

/* Remaining budget in micro-epsilon; untouched filters report their full
 * configured capacity. `key` is ignored for the global filter. */
int bg_engine_remaining(const bg_engine* engine, const char* device, int64_t epoch,
                        int filter_kind, const char* key, int64_t* remaining_out);

int bg_engine_snapshot_save(const bg_engine* engine, const char* path);
int bg_engine_snapshot_load(bg_engine* engine, const char* path);

int bg_engine_ledger_size(const bg_engine* engine, size_t* out);

/* ------------------------------------------------------------------ */
/* Scenario harness                                                     */

typedef struct bg_run_options {
  int64_t stop_after_actions;  /* -1: run to completion */
  const char* resume_snapshot; /* NULL: fresh run */
  int64_t resume_skip_actions;
  const char* output_dir; /* NULL: use the config's output.dir */
} bg_run_options;

/* Executes a scenario config. Returns BG_OK, BG_ERR_AUDIT when the ledger
 * audit found violations, or a config/io error. */
int bg_run_scenario(const char* config_path, const bg_run_options* options);

/* Replays an event CSV through the configured engine. */
int bg_replay_events(const char* events_csv, const char* config_path);

/* Validates and counts an event CSV. */
int bg_ingest_count(const char* events_csv, int64_t epoch_length_seconds,
                    uint64_t* rows_out);

/* Runs the property suites: atomicity fuzz, a scenario ledger audit, and
 * the resilience fuzz. Violation counts are written to the out params. */
int bg_verify_bounds(const char* config_path, int64_t atomicity_trials,
                     int64_t resilience_trials, uint64_t* violations_out);

/* Estimates workload parameters from an event CSV at the given percentile
 * and derives quota capacities. */
int bg_derive_quotas(const char* events_csv, double percentile,
                     int64_t eps_querier_micro, int32_t kappa, double r,
                     int64_t epoch_length_seconds, bg_quota_config* out);

/* ------------------------------------------------------------------ */
/* Per-querier unsoundness demonstrations                               */

#define BG_CX_THM1 1
#define BG_CX_THM2 2

typedef struct bg_cx_params {
  double eps;
  int32_t n;
  int64_t trials;
  double eps_global; /* <= 0: default */
  double eps0;       /* <= 0: default eps/2 */
  int32_t idp;       /* theorem 2 only: 1 = individual-DP filter variant */
  uint64_t seed;
} bg_cx_params;

typedef struct bg_cx_result {
  double estimate;
  double stderr_est;
  double closed_form;
  double lower_bound;
  int64_t trials;
} bg_cx_result;

int bg_counterexample(int theorem, const bg_cx_params* params, bg_cx_result* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BUDGETGUARD_BUDGETGUARD_H */
