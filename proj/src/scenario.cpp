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

#include "scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace budgetguard {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected integer for " + key + ", got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected number for " + key + ", got '" + v + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

ScenarioConfig ScenarioConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

ScenarioConfig ScenarioConfig::parse_text(const std::string& text) {
  ScenarioConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError("empty key or value: " + line);
    if (kv.count(key)) throw ConfigError("duplicate key: " + key);
    kv[key] = value;
  }

  bool has_quota = false;
  bool has_derive = false;
  QuotaConfig quota;
  ScenarioConfig::Derivation derive;
  WorkloadParams derive_params;
  bool has_derive_params = false;

  for (const auto& [key, value] : kv) {
    if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(to_int(value, key));
    } else if (key == "epoch_length") {
      cfg.epoch_length = to_int(value, key);
    } else if (key == "engine.variant") {
      cfg.variant = engine_variant_from_name(value);
    } else if (key == "engine.imp_site_mode") {
      if (value == "uniform") {
        cfg.imp_site_mode = ImpSiteBudgetMode::UniformHeuristic;
      } else if (value == "two_delta") {
        cfg.imp_site_mode = ImpSiteBudgetMode::TwoDeltaBound;
      } else {
        throw ConfigError("unknown imp_site_mode: " + value);
      }
    } else if (key == "quota.eps_querier") {
      quota.eps_querier = Epsilon::from_double(to_double(value, key));
      has_quota = true;
    } else if (key == "quota.eps_global") {
      quota.eps_global = Epsilon::from_double(to_double(value, key));
      has_quota = true;
    } else if (key == "quota.eps_imp") {
      quota.eps_imp_quota = Epsilon::from_double(to_double(value, key));
      has_quota = true;
    } else if (key == "quota.eps_conv") {
      quota.eps_conv_quota = Epsilon::from_double(to_double(value, key));
      has_quota = true;
    } else if (key == "quota.kappa") {
      quota.kappa_action = static_cast<int>(to_int(value, key));
      has_quota = true;
    } else if (key == "derive.eps_querier") {
      derive.eps_querier = Epsilon::from_double(to_double(value, key));
      has_derive = true;
    } else if (key == "derive.kappa") {
      derive.kappa = static_cast<int>(to_int(value, key));
      has_derive = true;
    } else if (key == "derive.r") {
      derive.r = to_double(value, key);
      has_derive = true;
    } else if (key == "derive.slack") {
      derive.slack = to_double(value, key);
      has_derive = true;
    } else if (key == "derive.percentile") {
      derive.percentile = to_double(value, key);
      has_derive = true;
    } else if (key == "derive.n_conv") {
      derive_params.conv_sites_per_epoch = to_int(value, key);
      has_derive_params = true;
      has_derive = true;
    } else if (key == "derive.m_imp") {
      derive_params.imp_sites_per_epoch = to_int(value, key);
      has_derive_params = true;
      has_derive = true;
    } else if (key == "derive.n_fanout") {
      derive_params.conv_sites_per_imp_site = to_int(value, key);
      has_derive_params = true;
      has_derive = true;
    } else if (key == "benign.devices") {
      cfg.benign.devices = static_cast<int>(to_int(value, key));
    } else if (key == "benign.epochs") {
      cfg.benign.epochs = static_cast<int>(to_int(value, key));
    } else if (key == "benign.advertisers") {
      cfg.benign.advertisers = static_cast<int>(to_int(value, key));
    } else if (key == "benign.publishers") {
      cfg.benign.publishers = static_cast<int>(to_int(value, key));
    } else if (key == "benign.visits") {
      cfg.benign.pub_visits_per_epoch = static_cast<int>(to_int(value, key));
    } else if (key == "benign.impression_rate") {
      cfg.benign.impression_rate = to_double(value, key);
    } else if (key == "benign.extra_action_prob") {
      cfg.benign.extra_controlled_action_prob = to_double(value, key);
    } else if (key == "benign.conversion_rate") {
      cfg.benign.conversion_rate = to_double(value, key);
    } else if (key == "benign.epsilon") {
      cfg.benign.epsilon = to_double(value, key);
    } else if (key == "benign.max_value") {
      cfg.benign.max_value = to_double(value, key);
    } else if (key == "benign.window") {
      cfg.benign.window = static_cast<int>(to_int(value, key));
    } else if (key == "benign.histogram_dim") {
      cfg.benign.histogram_dim = static_cast<int>(to_int(value, key));
    } else if (key == "benign.batch_size") {
      cfg.benign.batch_size = static_cast<int>(to_int(value, key));
    } else if (key == "benign.tau") {
      cfg.benign.tau = to_double(value, key);
    } else if (key == "attacker.strategy") {
      cfg.attacker.strategy = attacker_strategy_from_name(value);
    } else if (key == "attacker.fraction") {
      cfg.attacker.fraction = to_double(value, key);
    } else if (key == "attacker.sybils") {
      cfg.attacker.sybils = static_cast<int>(to_int(value, key));
    } else if (key == "attacker.chain") {
      cfg.attacker.chain = static_cast<int>(to_int(value, key));
    } else if (key == "attacker.lookback") {
      cfg.attacker.lookback = static_cast<int>(to_int(value, key));
    } else if (key == "attacker.controlled_sites") {
      cfg.benign.controlled_sites = static_cast<int>(to_int(value, key));
    } else if (key == "output.dir") {
      cfg.output_dir = value;
    } else {
      throw ConfigError("unknown config key: " + key);
    }
  }

  if (has_quota == has_derive) {
    throw ConfigError(
        "exactly one of the quota.* group or the derive.* group must be present");
  }
  if (has_quota) {
    quota.validate();
    cfg.quota = quota;
  } else {
    if (derive.eps_querier.is_zero()) {
      throw ConfigError("derive.eps_querier is required for derivation");
    }
    if (has_derive_params == derive.percentile.has_value()) {
      throw ConfigError(
          "derivation needs either derive.percentile or explicit derive.n_conv/"
          "derive.m_imp/derive.n_fanout");
    }
    if (has_derive_params) {
      derive_params.intermediary_fraction = derive.r;
      derive.params = derive_params;
    }
    cfg.derive = derive;
  }

  // The hash identifies the scenario semantics; where outputs land is not
  // part of that identity.
  std::string canon;
  for (const auto& [key, value] : kv) {
    if (key == "output.dir") continue;
    canon += key + "=" + value + "\n";
  }
  cfg.canonical_text = canon;
  return cfg;
}

uint64_t effective_seed(const ScenarioConfig& config) {
  if (const char* env = std::getenv("BUDGETGUARD_SEED")) {
    return static_cast<uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return config.seed;
}

namespace {

QuotaConfig resolve_quota(const ScenarioConfig& config, uint64_t seed) {
  if (config.quota) return *config.quota;
  const auto& d = *config.derive;
  WorkloadParams params;
  if (d.params) {
    params = *d.params;
  } else {
    // Estimate from the benign event stream the scenario itself would see:
    // generate it once against a throwaway engine with no enforcement bite.
    EngineOptions opts;
    opts.quota = QuotaConfig{Epsilon::from_double(1.0), Epsilon::from_double(1e6),
                             Epsilon::from_double(1e6), Epsilon::from_double(1.0),
                             1000};
    opts.epoch_length = config.epoch_length;
    opts.variant = EngineVariant::QuerierOnly;
    Engine scratch(opts);
    AttackerSpec no_attack;
    WorkloadDriver driver(config.benign, no_attack, seed);
    driver.run(scratch);
    params = estimate_workload_params(scratch.store(), *d.percentile);
    params.intermediary_fraction = d.r;
  }
  QuotaConfig quota = derive_capacities(d.eps_querier, params, d.kappa);
  if (d.slack != 1.0) {
    quota.eps_global = quota.eps_global.scaled(d.slack);
    quota.validate();
  }
  return quota;
}

void write_report_log(const std::vector<ReportLogEntry>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "report_id,device,epoch,status,cause,epoch_loss_microeps\n";
  for (const auto& e : log) {
    out << e.report_id << ',' << e.device << ',' << e.epoch << ','
        << (e.status.committed ? "committed" : "nulled") << ','
        << (e.status.committed ? "" : null_cause_name(e.status.cause)) << ','
        << e.epoch_loss.micros() << '\n';
  }
}

void write_ledger(const Ledger& ledger, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "device,epoch,report_id,filter_kind,key,amount_microeps,committed\n";
  for (const auto& e : ledger.entries()) {
    out << e.device << ',' << e.epoch << ',' << e.report_id << ','
        << filter_kind_name(e.kind) << ',' << e.key << ',' << e.amount.micros() << ','
        << (e.committed ? 1 : 0) << '\n';
  }
}

void write_metrics(const ScenarioConfig& config, uint64_t seed,
                   const RunArtifacts& artifacts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "scenario,config_hash,seed,median_rmsre,p95_rmsre,cause,fraction\n";
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  const std::string median = format_double(artifacts.median_rmsre());
  const std::string p95 = format_double(artifacts.p95_rmsre());
  for (const auto& [cause, fraction] : artifacts.benign_breakdown) {
    out << engine_variant_name(config.variant) << ',' << hash << ',' << seed << ','
        << median << ',' << p95 << ',' << cause << ',' << format_double(fraction)
        << '\n';
  }
}

void write_summary(const ScenarioConfig& config, uint64_t seed,
                   const RunArtifacts& artifacts,
                   const std::vector<AuditViolation>& violations,
                   const std::string& path) {
  nlohmann::json j;
  j["variant"] = engine_variant_name(config.variant);
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["total_actions"] = artifacts.total_actions;
  j["benign_reports"] = artifacts.benign_reports;
  j["queries"] = artifacts.queries.size();
  j["median_rmsre"] = artifacts.median_rmsre();
  j["p95_rmsre"] = artifacts.p95_rmsre();
  j["attacker"] = attacker_strategy_name(config.attacker.strategy);
  j["attacker_calls"] = artifacts.attacker_calls.size();
  j["audit_violations"] = violations.size();
  j["breakdown"] = artifacts.benign_breakdown;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  RunResult result;
  const uint64_t seed = effective_seed(config);

  EngineOptions opts;
  opts.quota = resolve_quota(config, seed);
  opts.epoch_length = config.epoch_length;
  opts.variant = config.variant;
  opts.imp_site_mode = config.imp_site_mode;
  Engine engine(opts);

  const bool resuming = !options.resume_snapshot.empty();
  if (resuming) {
    if (config.attacker.strategy == AttackerSpec::Strategy::Omniscient) {
      throw ConfigError("resume is not supported with the omniscient attacker");
    }
    std::ifstream in(options.resume_snapshot);
    if (!in) throw IoError("cannot open snapshot: " + options.resume_snapshot);
    engine.filters().load_snapshot(in);
  }

  WorkloadDriver driver(config.benign, config.attacker, seed);
  result.artifacts = driver.run(engine, options.stop_after_actions,
                                resuming ? options.resume_skip_actions : 0);

  const std::string out_dir = options.output_dir_override.empty()
                                  ? config.output_dir
                                  : options.output_dir_override;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  result.snapshot_path = out_dir + "/snapshot.csv";
  {
    std::ofstream out(result.snapshot_path);
    if (!out) throw IoError("cannot write " + result.snapshot_path);
    engine.filters().write_snapshot(out);
  }

  const bool truncated = options.stop_after_actions >= 0;
  if (truncated) {
    result.exit_code = 0;
    return result;
  }

  result.violations = ledger_audit(engine.ledger(), opts.quota,
                                   result.artifacts.adversary, config.variant);
  write_report_log(engine.report_log(), out_dir + "/report_log.csv");
  write_ledger(engine.ledger(), out_dir + "/ledger.csv");
  if (!resuming) {
    result.metrics_path = out_dir + "/metrics.csv";
    write_metrics(config, seed, result.artifacts, result.metrics_path);
    write_summary(config, seed, result.artifacts, result.violations,
                  out_dir + "/summary.json");
  }

  result.exit_code = result.violations.empty() ? 0 : 1;
  return result;
}

EventStore ingest_events(const std::string& path, int64_t epoch_length) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open events file: " + path);
  EventStore store(epoch_length);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != 10) {
      throw ParseError("expected 10 fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    try {
      int64_t ts = std::stoll(fields[0]);
      const std::string& device = fields[1];
      const std::string& type = fields[2];
      if (type == "imp") {
        ImpressionEvent ev;
        ev.timestamp = ts;
        ev.epoch = epoch_of(ts, epoch_length);
        ev.device = device;
        ev.site = fields[3];
        ev.ua_ctx = fields[4];
        ev.ad_key = fields[5];
        ev.bucket = static_cast<int>(std::stol(fields[6]));
        store.append(std::move(ev));
      } else if (type == "conv") {
        ConversionEvent ev;
        ev.timestamp = ts;
        ev.epoch = epoch_of(ts, epoch_length);
        ev.device = device;
        ev.conv_site = fields[3];
        ev.ua_ctx = fields[4];
        ev.value = std::stod(fields[7]);
        ev.max_value = std::stod(fields[8]);
        for (const auto& q : split(fields[9], '|')) {
          if (!q.empty()) ev.queriers.insert(q);
        }
        store.append(std::move(ev));
      } else {
        throw InvalidEvent("event_type must be imp or conv, got '" + type + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return store;
}

void write_events_csv(const EventStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  struct Row {
    int64_t ts;
    uint64_t seq;
    std::string text;
  };
  std::vector<Row> rows;
  for (const auto& [device, epoch] : store.device_epochs()) {
    for (const auto& imp : store.impressions(device, epoch)) {
      std::ostringstream s;
      s << imp.timestamp << ',' << device << ",imp," << imp.site << ',' << imp.ua_ctx
        << ',' << imp.ad_key << ',' << imp.bucket << ",,,";
      rows.push_back({imp.timestamp, imp.seq, s.str()});
    }
    for (const auto& conv : store.conversions(device, epoch)) {
      std::ostringstream s;
      std::string queriers;
      for (const auto& q : conv.queriers) {
        if (!queriers.empty()) queriers += '|';
        queriers += q;
      }
      s << conv.timestamp << ',' << device << ",conv," << conv.conv_site << ','
        << conv.ua_ctx << ",,," << format_double(conv.value) << ','
        << format_double(conv.max_value) << ',' << queriers;
      rows.push_back({conv.timestamp, conv.seq, s.str()});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq);
  });
  for (const auto& r : rows) out << r.text << '\n';
}

RunResult replay_events(const std::string& events_path, const ScenarioConfig& config) {
  RunResult result;
  const uint64_t seed = effective_seed(config);
  EventStore staged = ingest_events(events_path, config.epoch_length);

  EngineOptions opts;
  opts.quota = resolve_quota(config, seed);
  opts.epoch_length = config.epoch_length;
  opts.variant = config.variant;
  opts.imp_site_mode = config.imp_site_mode;
  Engine engine(opts);

  std::set<SiteId> imp_sites;
  struct Pending {
    int64_t ts;
    uint64_t seq;
    const ImpressionEvent* imp = nullptr;
    const ConversionEvent* conv = nullptr;
  };
  std::vector<Pending> ordered;
  for (const auto& [device, epoch] : staged.device_epochs()) {
    for (const auto& imp : staged.impressions(device, epoch)) {
      imp_sites.insert(imp.site);
      ordered.push_back({imp.timestamp, imp.seq, &imp, nullptr});
    }
    for (const auto& conv : staged.conversions(device, epoch)) {
      ordered.push_back({conv.timestamp, conv.seq, nullptr, &conv});
    }
  }
  std::sort(ordered.begin(), ordered.end(), [](const Pending& a, const Pending& b) {
    return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq);
  });

  Rng noise_rng = Rng::substream(seed, "noise");
  std::map<QuerierId, std::vector<std::vector<double>>> reports;
  std::map<QuerierId, std::vector<std::vector<double>>> truths;
  std::map<QuerierId, std::vector<std::map<EpochId, EpochStatus>>> statuses;
  int64_t report_counter = 0;
  for (const auto& p : ordered) {
    if (p.imp) {
      ImpressionEvent ev = *p.imp;
      engine.save_impression(ev.device, ev.ua_ctx, ev);
      continue;
    }
    const ConversionEvent& conv = *p.conv;
    engine.record_conversion(conv);
    std::set<QuerierId> queriers = conv.queriers;
    if (queriers.empty()) queriers.insert(conv.conv_site);
    for (const auto& querier : queriers) {
      ReportRequest req;
      req.report_id = "rp:" + std::to_string(report_counter++);
      req.device = conv.device;
      req.querier = querier;
      req.conv_site = conv.conv_site;
      req.imp_sites = imp_sites;
      req.epoch_end = conv.epoch;
      req.epoch_start = std::max<EpochId>(0, conv.epoch - config.benign.window + 1);
      req.requested_epsilon = Epsilon::from_double(config.benign.epsilon);
      req.value = conv.value;
      req.max_value = conv.max_value;
      req.histogram_dim = config.benign.histogram_dim;
      req.ua_ctx = conv.ua_ctx;

      std::map<EpochId, std::vector<ImpressionEvent>> matched;
      for (EpochId e = req.epoch_start; e <= req.epoch_end; ++e) {
        auto imps = match_impressions(engine.store(), req, e);
        if (!imps.empty()) matched[e] = std::move(imps);
      }
      AttributionOutcome truth = attribute(matched, req);
      std::vector<double> true_hist(static_cast<std::size_t>(req.histogram_dim), 0.0);
      for (const auto& [e, imps] : truth.per_epoch) {
        for (const auto& imp : imps) {
          true_hist[static_cast<std::size_t>(imp.bucket)] += imp.value;
        }
      }
      Report rep = engine.measure_conversion(req);
      reports[querier].push_back(std::move(rep.histogram));
      truths[querier].push_back(std::move(true_hist));
      statuses[querier].push_back(std::move(rep.per_epoch));
    }
  }

  RunArtifacts& artifacts = result.artifacts;
  artifacts.benign_reports = static_cast<uint64_t>(report_counter);
  const double lambda = config.benign.max_value / config.benign.epsilon;
  for (auto& [querier, reps] : reports) {
    auto& truth = truths[querier];
    std::size_t total = reps.size();
    auto batch = static_cast<std::size_t>(config.benign.batch_size);
    for (std::size_t start = 0; start < total; start += batch) {
      std::size_t end = std::min(total, start + batch);
      std::vector<std::vector<double>> slice(reps.begin() + start, reps.begin() + end);
      std::vector<double> true_sum(static_cast<std::size_t>(config.benign.histogram_dim),
                                   0.0);
      for (std::size_t i = start; i < end; ++i) {
        for (std::size_t j = 0; j < true_sum.size(); ++j) true_sum[j] += truth[i][j];
      }
      QueryResult qr;
      qr.query_id = querier + "#" + std::to_string(start);
      qr.noisy_estimate = aggregate_and_noise(slice, lambda, noise_rng);
      qr.true_histogram = std::move(true_sum);
      qr.batch_size = static_cast<int>(end - start);
      qr.tau = config.benign.tau;
      qr.rmsre = rmsre_tau(qr.true_histogram, qr.noisy_estimate, qr.tau, qr.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        for (const auto& [e, st] : statuses[querier][i]) {
          ++qr.cause_counts[st.committed ? "committed" : null_cause_name(st.cause)];
        }
      }
      artifacts.queries.push_back(std::move(qr));
    }
  }
  artifacts.benign_breakdown = cause_breakdown(engine.report_log());

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + config.output_dir);
  result.violations = ledger_audit(engine.ledger(), opts.quota, artifacts.adversary,
                                   config.variant);
  result.snapshot_path = config.output_dir + "/snapshot.csv";
  {
    std::ofstream out(result.snapshot_path);
    if (!out) throw IoError("cannot write " + result.snapshot_path);
    engine.filters().write_snapshot(out);
  }
  write_report_log(engine.report_log(), config.output_dir + "/report_log.csv");
  write_ledger(engine.ledger(), config.output_dir + "/ledger.csv");
  result.metrics_path = config.output_dir + "/metrics.csv";
  write_metrics(config, seed, artifacts, result.metrics_path);
  write_summary(config, seed, artifacts, result.violations,
                config.output_dir + "/summary.json");
  result.exit_code = result.violations.empty() ? 0 : 1;
  return result;
}

QuotaConfig derive_quotas_from_csv(const std::string& events_path, double percentile,
                                   Epsilon eps_querier, int kappa, double r,
                                   int64_t epoch_length) {
  EventStore store = ingest_events(events_path, epoch_length);
  WorkloadParams params = estimate_workload_params(store, percentile);
  params.intermediary_fraction = r;
  return derive_capacities(eps_querier, params, kappa);
}

}  // namespace budgetguard
