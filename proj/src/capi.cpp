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

#include "budgetguard/budgetguard.h"

#include <cstring>
#include <fstream>

#include "counterexamples.hpp"
#include "engine.hpp"
#include "scenario.hpp"
#include "verify.hpp"

using namespace budgetguard;

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    return set_error(BG_ERR_CONFIG, e.what());
  } catch (const InvalidParams& e) {
    return set_error(BG_ERR_CONFIG, e.what());
  } catch (const InvalidRequest& e) {
    return set_error(BG_ERR_CONFIG, e.what());
  } catch (const InvalidEvent& e) {
    return set_error(BG_ERR_CONFIG, e.what());
  } catch (const SiteNotRegistered& e) {
    return set_error(BG_ERR_CONFIG, e.what());
  } catch (const DuplicateObject& e) {
    return set_error(BG_ERR_DUPLICATE, e.what());
  } catch (const UnknownObject& e) {
    return set_error(BG_ERR_NOT_FOUND, e.what());
  } catch (const InsufficientTailMass& e) {
    return set_error(BG_ERR_TAIL_MASS, e.what());
  } catch (const ParseError& e) {
    return set_error(BG_ERR_PARSE,
                     std::string(e.what()) + " (line " + std::to_string(e.line()) + ")");
  } catch (const IoError& e) {
    return set_error(BG_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return set_error(BG_ERR_INTERNAL, e.what());
  }
}

QuotaConfig to_quota(const bg_quota_config& q) {
  QuotaConfig cfg;
  cfg.eps_querier = Epsilon::from_micros(q.eps_querier_micro);
  cfg.eps_global = Epsilon::from_micros(q.eps_global_micro);
  cfg.eps_imp_quota = Epsilon::from_micros(q.eps_imp_quota_micro);
  cfg.eps_conv_quota = Epsilon::from_micros(q.eps_conv_quota_micro);
  cfg.kappa_action = q.kappa_action;
  return cfg;
}

int require(bool ok, const char* what) {
  if (ok) return BG_OK;
  return set_error(BG_ERR_CONFIG, std::string("null argument: ") + what);
}

}  // namespace

struct bg_engine {
  Engine impl;
  explicit bg_engine(EngineOptions opts) : impl(std::move(opts)) {}
};

extern "C" {

const char* bg_last_error(void) { return g_last_error.c_str(); }

const char* bg_version(void) { return "1.0.0"; }

int bg_engine_new(const bg_quota_config* quota, int64_t epoch_length_seconds,
                  int variant, int imp_site_mode, bg_engine** out) {
  if (int rc = require(quota && out, "quota/out")) return rc;
  return guarded([&] {
    EngineOptions opts;
    opts.quota = to_quota(*quota);
    opts.epoch_length = epoch_length_seconds;
    switch (variant) {
      case BG_VARIANT_FULL:
        opts.variant = EngineVariant::Full;
        break;
      case BG_VARIANT_GLOBAL_ONLY:
        opts.variant = EngineVariant::GlobalOnly;
        break;
      case BG_VARIANT_QUERIER_ONLY:
        opts.variant = EngineVariant::QuerierOnly;
        break;
      default:
        throw ConfigError("unknown engine variant code");
    }
    switch (imp_site_mode) {
      case BG_IMP_SITE_UNIFORM:
        opts.imp_site_mode = ImpSiteBudgetMode::UniformHeuristic;
        break;
      case BG_IMP_SITE_TWO_DELTA:
        opts.imp_site_mode = ImpSiteBudgetMode::TwoDeltaBound;
        break;
      default:
        throw ConfigError("unknown impression-site budget mode");
    }
    *out = new bg_engine(std::move(opts));
    return BG_OK;
  });
}

void bg_engine_free(bg_engine* engine) { delete engine; }

int bg_engine_on_user_action(bg_engine* engine, const char* device, const char* site,
                             char* ua_out, size_t ua_cap) {
  if (int rc = require(engine && device && site && ua_out, "engine/device/site/ua_out"))
    return rc;
  return guarded([&] {
    UaCtxId ua = engine->impl.on_user_action(device, site);
    if (ua.size() + 1 > ua_cap) {
      throw ConfigError("ua_out buffer too small; need " +
                        std::to_string(ua.size() + 1) + " bytes");
    }
    std::memcpy(ua_out, ua.c_str(), ua.size() + 1);
    return BG_OK;
  });
}

int bg_engine_save_impression(bg_engine* engine, const char* device,
                              const char* ua_ctx, const char* site, const char* ad_key,
                              int32_t bucket, int64_t timestamp, int* stored_out) {
  if (int rc = require(engine && device && ua_ctx && site && stored_out,
                       "engine/device/ua_ctx/site/stored_out"))
    return rc;
  return guarded([&] {
    ImpressionEvent ev;
    ev.device = device;
    ev.site = site;
    ev.ad_key = ad_key ? ad_key : "";
    ev.bucket = bucket;
    ev.timestamp = timestamp;
    ev.epoch = epoch_of(timestamp, engine->impl.options().epoch_length);
    SaveResult r = engine->impl.save_impression(device, ua_ctx, std::move(ev));
    *stored_out = r == SaveResult::Stored ? 1 : 0;
    return BG_OK;
  });
}

int bg_engine_record_conversion(bg_engine* engine, const char* device,
                                const char* ua_ctx, const char* conv_site,
                                const char* const* queriers, size_t n_queriers,
                                double value, double max_value, int64_t timestamp) {
  if (int rc = require(engine && device && ua_ctx && conv_site,
                       "engine/device/ua_ctx/conv_site"))
    return rc;
  return guarded([&] {
    ConversionEvent ev;
    ev.device = device;
    ev.ua_ctx = ua_ctx;
    ev.conv_site = conv_site;
    for (size_t i = 0; i < n_queriers; ++i) ev.queriers.insert(queriers[i]);
    ev.value = value;
    ev.max_value = max_value;
    ev.timestamp = timestamp;
    ev.epoch = epoch_of(timestamp, engine->impl.options().epoch_length);
    engine->impl.record_conversion(std::move(ev));
    return BG_OK;
  });
}

int bg_engine_measure_conversion(bg_engine* engine, const bg_report_request* request,
                                 bg_measure_result* result) {
  if (int rc = require(engine && request && result && result->histogram &&
                           result->epoch_status,
                       "engine/request/result buffers"))
    return rc;
  return guarded([&] {
    ReportRequest req;
    req.report_id = request->report_id ? request->report_id : "";
    req.device = request->device ? request->device : "";
    req.querier = request->querier ? request->querier : "";
    req.conv_site = request->conv_site ? request->conv_site : "";
    for (size_t i = 0; i < request->n_imp_sites; ++i) {
      req.imp_sites.insert(request->imp_sites[i]);
    }
    req.epoch_start = request->epoch_start;
    req.epoch_end = request->epoch_end;
    req.requested_epsilon = Epsilon::from_micros(request->requested_epsilon_micro);
    req.value = request->value;
    req.max_value = request->max_value;
    req.histogram_dim = request->histogram_dim;
    if (request->match_ad_key) req.match_ad_key = request->match_ad_key;
    req.ua_ctx = request->ua_ctx ? request->ua_ctx : "";

    Report rep = engine->impl.measure_conversion(req);
    for (int j = 0; j < request->histogram_dim; ++j) {
      result->histogram[j] = rep.histogram[static_cast<std::size_t>(j)];
    }
    int64_t idx = 0;
    for (EpochId e = req.epoch_start; e <= req.epoch_end; ++e, ++idx) {
      const EpochStatus& st = rep.per_epoch.at(e);
      int code = BG_EPOCH_COMMITTED;
      if (!st.committed) {
        switch (st.cause) {
          case NullCause::QuerierBudget:
            code = BG_EPOCH_NULLED_QUERIER;
            break;
          case NullCause::GlobalBudget:
            code = BG_EPOCH_NULLED_GLOBAL;
            break;
          case NullCause::ConvQuota:
            code = BG_EPOCH_NULLED_CONV_QUOTA;
            break;
          case NullCause::ImpQuota:
            code = BG_EPOCH_NULLED_IMP_QUOTA;
            break;
          case NullCause::DomainCap:
            code = BG_EPOCH_NULLED_DOMAIN_CAP;
            break;
          case NullCause::NoMatch:
            code = BG_EPOCH_NO_MATCH;
            break;
        }
      }
      result->epoch_status[idx] = code;
    }
    return BG_OK;
  });
}

int bg_engine_remaining(const bg_engine* engine, const char* device, int64_t epoch,
                        int filter_kind, const char* key, int64_t* remaining_out) {
  if (int rc = require(engine && device && remaining_out, "engine/device/remaining_out"))
    return rc;
  return guarded([&] {
    FilterKind kind;
    switch (filter_kind) {
      case BG_FILTER_GLOBAL:
        kind = FilterKind::Global;
        break;
      case BG_FILTER_QUERIER:
        kind = FilterKind::Querier;
        break;
      case BG_FILTER_CONV_QUOTA:
        kind = FilterKind::ConvQuota;
        break;
      case BG_FILTER_IMP_QUOTA:
        kind = FilterKind::ImpQuota;
        break;
      default:
        throw ConfigError("unknown filter kind code");
    }
    *remaining_out =
        engine->impl.remaining(device, epoch, kind, key ? key : "").micros();
    return BG_OK;
  });
}

int bg_engine_snapshot_save(const bg_engine* engine, const char* path) {
  if (int rc = require(engine && path, "engine/path")) return rc;
  return guarded([&] {
    std::ofstream out(path);
    if (!out) throw IoError(std::string("cannot write ") + path);
    engine->impl.filters().write_snapshot(out);
    return BG_OK;
  });
}

int bg_engine_snapshot_load(bg_engine* engine, const char* path) {
  if (int rc = require(engine && path, "engine/path")) return rc;
  return guarded([&] {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + path);
    engine->impl.filters().load_snapshot(in);
    return BG_OK;
  });
}

int bg_engine_ledger_size(const bg_engine* engine, size_t* out) {
  if (int rc = require(engine && out, "engine/out")) return rc;
  *out = engine->impl.ledger().size();
  return BG_OK;
}

int bg_run_scenario(const char* config_path, const bg_run_options* options) {
  if (int rc = require(config_path, "config_path")) return rc;
  return guarded([&] {
    ScenarioConfig config = ScenarioConfig::parse_file(config_path);
    RunOptions opts;
    if (options) {
      opts.stop_after_actions = options->stop_after_actions;
      if (options->resume_snapshot) opts.resume_snapshot = options->resume_snapshot;
      opts.resume_skip_actions = options->resume_skip_actions;
      if (options->output_dir) opts.output_dir_override = options->output_dir;
    }
    RunResult result = run_scenario(config, opts);
    if (result.exit_code == 1) {
      return set_error(BG_ERR_AUDIT, "ledger audit reported " +
                                         std::to_string(result.violations.size()) +
                                         " violation(s)");
    }
    return BG_OK;
  });
}

int bg_replay_events(const char* events_csv, const char* config_path) {
  if (int rc = require(events_csv && config_path, "events_csv/config_path")) return rc;
  return guarded([&] {
    ScenarioConfig config = ScenarioConfig::parse_file(config_path);
    RunResult result = replay_events(events_csv, config);
    if (result.exit_code == 1) {
      return set_error(BG_ERR_AUDIT, "ledger audit reported " +
                                         std::to_string(result.violations.size()) +
                                         " violation(s)");
    }
    return BG_OK;
  });
}

int bg_ingest_count(const char* events_csv, int64_t epoch_length_seconds,
                    uint64_t* rows_out) {
  if (int rc = require(events_csv && rows_out, "events_csv/rows_out")) return rc;
  return guarded([&] {
    EventStore store = ingest_events(events_csv, epoch_length_seconds);
    *rows_out = store.size();
    return BG_OK;
  });
}

int bg_verify_bounds(const char* config_path, int64_t atomicity_trials,
                     int64_t resilience_trials, uint64_t* violations_out) {
  if (int rc = require(config_path && violations_out, "config_path/violations_out"))
    return rc;
  return guarded([&] {
    ScenarioConfig config = ScenarioConfig::parse_file(config_path);
    uint64_t seed = effective_seed(config);
    uint64_t total = 0;
    total += atomicity_fuzz(seed, atomicity_trials).violations.size();
    RunResult run = run_scenario(config, {});
    total += run.violations.size();
    total += resilience_fuzz(seed, resilience_trials).violations.size();
    *violations_out = total;
    return total == 0 ? BG_OK : set_error(BG_ERR_AUDIT, "property suites failed");
  });
}

int bg_derive_quotas(const char* events_csv, double percentile,
                     int64_t eps_querier_micro, int32_t kappa, double r,
                     int64_t epoch_length_seconds, bg_quota_config* out) {
  if (int rc = require(events_csv && out, "events_csv/out")) return rc;
  return guarded([&] {
    QuotaConfig cfg = derive_quotas_from_csv(events_csv, percentile,
                                             Epsilon::from_micros(eps_querier_micro),
                                             kappa, r, epoch_length_seconds);
    out->eps_querier_micro = cfg.eps_querier.micros();
    out->eps_global_micro = cfg.eps_global.micros();
    out->eps_imp_quota_micro = cfg.eps_imp_quota.micros();
    out->eps_conv_quota_micro = cfg.eps_conv_quota.micros();
    out->kappa_action = cfg.kappa_action;
    return BG_OK;
  });
}

int bg_counterexample(int theorem, const bg_cx_params* params, bg_cx_result* out) {
  if (int rc = require(params && out, "params/out")) return rc;
  return guarded([&] {
    CxParams cx;
    cx.eps = params->eps;
    cx.n = params->n;
    cx.trials = params->trials;
    cx.eps_global = params->eps_global;
    cx.eps0 = params->eps0;
    cx.variant = params->idp ? CxVariant::IDP : CxVariant::DP;
    Rng rng = Rng::substream(params->seed, "counterexample");
    CxResult res;
    if (theorem == BG_CX_THM1) {
      res = thm1_simulate(cx, rng);
    } else if (theorem == BG_CX_THM2) {
      res = thm2_simulate(cx, rng);
    } else {
      throw ConfigError("theorem must be 1 or 2");
    }
    out->estimate = res.estimate;
    out->stderr_est = res.stderr_est;
    out->closed_form = res.closed_form;
    out->lower_bound = res.lower_bound;
    out->trials = res.trials;
    return BG_OK;
  });
}

}  // extern "C"
