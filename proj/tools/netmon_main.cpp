// netmon: command-line front end for the monitoring toolkit. Subcommands
// cover dataset synthesis, baseline building, rule-based detection, and the
// geo visit analytics. Machine-readable progress goes to stdout as JSON
// lines; fatal errors go to stderr with a non-zero exit.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "netmon/baseline.hpp"
#include "netmon/detector.hpp"
#include "netmon/geo_analytics.hpp"
#include "netmon/geoip.hpp"
#include "netmon/ingest.hpp"
#include "netmon/run_config.hpp"
#include "netmon/synth.hpp"
#include "netmon/time_util.hpp"
#include "netmon/timeseries.hpp"

namespace {

using nlohmann::json;
using namespace netmon;

void emit(const json& event) { std::cout << event.dump() << "\n"; }

std::int64_t parse_now(const std::string& text) {
  const auto ts = parse_timestamp(text);
  if (!ts) throw std::runtime_error("cannot parse --now value: " + text);
  return *ts;
}

RunConfig config_from(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  return load_run_config(config_path);
}

InputFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? InputFormat::jsonl : InputFormat::csv;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out = "data";
  std::string now;
  int weeks = 8;
  int metrics = 1;
  std::int64_t resolution = 60;
  double base = 1000.0;
  double amplitude = 0.5;
  double phase = 0.0;
  double weekend_damping = 0.7;
  double noise = 0.05;
  std::uint64_t seed = 1;
  std::string prefix = "metric";
  std::vector<std::string> injections;
};

int run_synth(const SynthArgs& args) {
  SyntheticSpec spec;
  spec.weeks = args.weeks;
  spec.resolution = args.resolution;
  spec.end_ts = parse_now(args.now);
  spec.base_level = args.base;
  spec.daily_amplitude = args.amplitude;
  spec.daily_phase = args.phase;
  spec.weekend_damping = args.weekend_damping;
  spec.noise = args.noise;
  spec.metrics = args.metrics;
  spec.metric_prefix = args.prefix;
  spec.seed = args.seed;
  for (const std::string& text : args.injections) {
    const auto parts = split(text, ',');
    if (parts.size() != 4)
      throw std::runtime_error("--inject expects metric,start,duration,multiplier");
    InjectionSpec inj;
    inj.metric_id = parts[0];
    inj.start = std::stoll(parts[1]);
    inj.duration = std::stoll(parts[2]);
    inj.multiplier = std::stod(parts[3]);
    spec.injections.push_back(std::move(inj));
  }

  const SynthSummary summary = write_synth_dataset(spec, args.out);
  emit({{"event", "synth"},
        {"out", args.out},
        {"start", summary.start},
        {"end", summary.end},
        {"records", summary.records},
        {"metrics", summary.metric_ids}});
  return 0;
}

// --- synth-access ----------------------------------------------------------

struct SynthAccessArgs {
  std::string out_access = "access.csv";
  std::string out_geoip = "geoip.csv";
  std::string now;
  int minutes = 120;
  double rate = 60.0;
  std::uint64_t seed = 1;
  std::string service = "web";
  std::vector<std::string> mix;
  std::vector<std::string> bursts;
};

int run_synth_access(const SynthAccessArgs& args) {
  AccessSpec spec;
  spec.end = floor_align(parse_now(args.now), 60);
  spec.start = spec.end - static_cast<std::int64_t>(args.minutes) * 60;
  spec.base_rate = args.rate;
  spec.seed = args.seed;
  spec.service = args.service;

  if (args.mix.empty()) {
    spec.mix = {{"US", 5.0, parse_ipv4("20.0.0.0").value(), 4096},
                {"DE", 3.0, parse_ipv4("30.0.0.0").value(), 2048},
                {"JP", 2.0, parse_ipv4("40.0.0.0").value(), 1024}};
  }
  for (const std::string& text : args.mix) {
    const auto parts = split(text, ',');
    if (parts.size() != 4)
      throw std::runtime_error("--mix expects code,weight,first_ip,count");
    const auto base = parse_ipv4(parts[2]);
    if (!base) throw std::runtime_error("bad --mix address: " + parts[2]);
    spec.mix.push_back({parts[0], std::stod(parts[1]), *base,
                        static_cast<std::uint32_t>(std::stoul(parts[3]))});
  }
  for (const std::string& text : args.bursts) {
    const auto parts = split(text, ',');
    if (parts.size() != 5)
      throw std::runtime_error("--burst expects country,start,minutes,per_minute,ip");
    const auto ip = parse_ipv4(parts[4]);
    if (!ip) throw std::runtime_error("bad --burst address: " + parts[4]);
    GeoBurst b;
    b.country = parts[0];
    b.start = std::stoll(parts[1]);
    b.minutes = std::stoll(parts[2]);
    b.per_minute = std::stoull(parts[3]);
    b.ip = *ip;
    spec.bursts.push_back(std::move(b));
  }

  const AccessSynthSummary summary =
      write_access_dataset(spec, args.out_access, args.out_geoip);
  emit({{"event", "synth_access"},
        {"access", args.out_access},
        {"geoip", args.out_geoip},
        {"records", summary.records},
        {"ranges", summary.ranges}});
  return 0;
}

// --- baseline --------------------------------------------------------------

struct BaselineArgs {
  std::string config;
  std::string now;
  std::string data;       // overrides data_dir
  std::string out;        // overrides baseline_dir
  int weeks = 0;          // 0: keep config
  int window = 0;         // minutes; 0: keep config
  std::vector<std::string> metrics;
};

int run_baseline(const BaselineArgs& args) {
  RunConfig cfg = config_from(args.config);
  if (!args.data.empty()) cfg.data_dir = args.data;
  if (!args.out.empty()) cfg.baseline_dir = args.out;
  if (args.weeks > 0) cfg.weeks_back = args.weeks;
  if (args.window > 0) cfg.window_minutes = args.window;
  const std::int64_t now = floor_align(parse_now(args.now), cfg.resolution_seconds);
  const BaselineConfig bcfg = cfg.baseline_config();

  std::vector<std::string> metrics = args.metrics;
  if (metrics.empty()) metrics = list_partition_metrics(cfg.data_dir);
  if (metrics.empty()) throw std::runtime_error("no metrics found under " +
                                                cfg.data_dir.string());

  int built = 0;
  for (const std::string& metric : metrics) {
    const std::int64_t span_start =
        now - static_cast<std::int64_t>(bcfg.weeks_back) * kSecondsPerWeek;
    const auto records =
        read_metric_partitions(cfg.data_dir, metric, span_start - bcfg.window, now);
    if (records.empty()) {
      emit({{"event", "baseline_skipped"}, {"metric", metric}, {"reason", "no data"}});
      continue;
    }
    std::vector<std::pair<std::int64_t, double>> points;
    points.reserve(records.size());
    for (const MetricRecord& r : records) points.emplace_back(r.ts, r.value);
    const MetricSeries series =
        regularize(std::move(points), metric, bcfg.resolution, GapPolicy::leave_gap);
    const SmoothedSeries smoothed = moving_average(series, bcfg.window);
    const WeeklyBaseline baseline = build_baseline(smoothed, now, bcfg);
    const auto path = cfg.baseline_dir / (metric + ".baseline");
    save_baseline(baseline, path);
    ++built;

    int valid = 0;
    for (const SlotStats& s : baseline.slots())
      if (s.valid) ++valid;
    emit({{"event", "baseline"},
          {"metric", metric},
          {"path", path.string()},
          {"slots", baseline.slots().size()},
          {"valid_slots", valid},
          {"weeks_used", baseline.weeks_used()}});
  }
  return built > 0 ? 0 : 1;
}

// --- detect ----------------------------------------------------------------

struct DetectArgs {
  std::string config;
  std::string now;
  std::string data;
  std::string rules;
  int grace = 0;     // minutes; 0: keep config
  int renotify = 0;  // minutes; 0: keep config
};

int run_detect(const DetectArgs& args) {
  RunConfig cfg = config_from(args.config);
  if (!args.data.empty()) cfg.data_dir = args.data;
  if (!args.rules.empty()) cfg.rules_file = args.rules;
  if (args.grace > 0) cfg.grace_minutes = args.grace;
  if (args.renotify > 0) cfg.renotify_minutes = args.renotify;
  const std::int64_t now = floor_align(parse_now(args.now), cfg.resolution_seconds);

  RuleDefaults defaults;
  defaults.grace_minutes = cfg.grace_minutes;
  defaults.lookback_minutes = cfg.lookback_minutes;
  defaults.renotify_minutes = cfg.renotify_minutes;
  const auto rules = load_rules(cfg.rules_file, cfg.resolution_seconds, defaults);
  if (rules.empty()) throw std::runtime_error("rules file defines no rules");

  std::set<std::string> metrics;
  for (const DetectionRule& rule : rules) {
    rule.condition.collect_metrics(metrics);
    metrics.insert(rule.target);
  }

  // Load whatever baselines exist for the referenced metrics; rules that
  // need a missing one surface that as a per-rule issue.
  std::map<std::string, WeeklyBaseline> baselines;
  std::int64_t max_window = static_cast<std::int64_t>(cfg.window_minutes) * 60;
  for (const std::string& metric : metrics) {
    const auto path = cfg.baseline_dir / (metric + ".baseline");
    if (!std::filesystem::exists(path)) continue;
    WeeklyBaseline baseline = load_baseline(path);
    max_window = std::max(max_window, baseline.config().window);
    baselines.emplace(metric, std::move(baseline));
  }

  std::int64_t max_lookback = 0;
  for (const DetectionRule& rule : rules)
    max_lookback = std::max(max_lookback, rule.lookback);
  const std::int64_t horizon = max_lookback + max_window + kSecondsPerHour;

  RecentStore store(horizon, cfg.resolution_seconds);
  for (const std::string& metric : metrics) {
    const auto records = read_metric_partitions(cfg.data_dir, metric, now - horizon,
                                                now + cfg.resolution_seconds);
    if (!records.empty()) store.ingest(records);
  }

  ContainmentState state = load_containment_state(cfg.state_file);
  const CycleReport report = run_detection_cycle(rules, store, baselines, state, now);
  append_alerts(cfg.alerts_file, report.alerts);
  save_containment_state(state, cfg.state_file);

  for (const Alert& a : report.alerts)
    emit({{"event", "alert"},
          {"rule", a.rule_id},
          {"metric", a.metric_id},
          {"start", a.start},
          {"end", a.end},
          {"peak_value", a.peak_value},
          {"threshold", a.threshold_at_peak},
          {"severity", std::string(severity_name(a.severity))},
          {"notified_at", a.notified_at},
          {"notify_count", a.notify_count}});
  for (const RuleIssue& issue : report.issues)
    emit({{"event", "rule_issue"}, {"rule", issue.rule_id}, {"message", issue.message}});
  emit({{"event", "cycle"},
        {"now", now},
        {"rules", rules.size()},
        {"alerts", report.alerts.size()},
        {"issues", report.issues.size()},
        {"elements", report.elements},
        {"seconds", report.seconds}});
  return 0;
}

// --- geo helpers -----------------------------------------------------------

std::vector<AccessRecord> load_access_records(const std::filesystem::path& path,
                                              const RunConfig& cfg,
                                              std::size_t* whitelisted) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open access log: " + path.string());
  std::vector<AccessRecord> records;
  const ParseStats stats = parse_access_stream(
      in, format_for(path), [&](AccessRecord&& r) { records.push_back(std::move(r)); });
  if (stats.skipped > 0)
    emit({{"event", "access_parse"},
          {"lines", stats.lines},
          {"parsed", stats.parsed},
          {"skipped", stats.skipped}});

  *whitelisted = 0;
  if (!cfg.whitelist_file.empty()) {
    const IpWhitelist whitelist = load_whitelist(cfg.whitelist_file);
    *whitelisted = filter_whitelisted(records, whitelist);
  }
  return records;
}

// --- geo-report --------------------------------------------------------------

struct GeoReportArgs {
  std::string config;
  std::string now;
  std::string access;
  std::string out;
  int minutes = 0;  // 0: keep config geo_live_minutes
  int topk = 0;     // 0: keep config top_k
};

int run_geo_report(const GeoReportArgs& args) {
  RunConfig cfg = config_from(args.config);
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.topk > 0) cfg.top_k = args.topk;
  const int minutes = args.minutes > 0 ? args.minutes : cfg.geo_live_minutes;
  const std::int64_t to = floor_align(parse_now(args.now), 60);
  const std::int64_t from = to - static_cast<std::int64_t>(minutes) * 60;

  const GeoIpTable table = load_geoip(cfg.geoip_file);
  std::size_t whitelisted = 0;
  const auto records = load_access_records(args.access, cfg, &whitelisted);

  const VisitAggregate agg = aggregate_visits(records, table, from, to);
  const auto top = top_k_ips(agg, static_cast<std::size_t>(cfg.top_k));
  const auto rows = build_map_rows(agg, top);
  std::filesystem::create_directories(cfg.out_dir);
  write_map_export(cfg.out_dir / "map.csv", rows, from, to);
  write_ip_ranking(cfg.out_dir / "top_ips.csv", top, table);

  emit({{"event", "geo_report"},
        {"from", from},
        {"to", to},
        {"countries", agg.by_country.size()},
        {"requests", agg.total_requests},
        {"out_of_range", agg.out_of_range},
        {"whitelisted", whitelisted},
        {"map", (cfg.out_dir / "map.csv").string()},
        {"top_ips", (cfg.out_dir / "top_ips.csv").string()}});
  return 0;
}

// --- geo-detect ---------------------------------------------------------------

struct GeoDetectArgs {
  std::string config;
  std::string now;
  std::string access;
  int sustain = 0;      // minutes; 0: keep config
  double quantile = 0;  // 0: keep config
};

int run_geo_detect(const GeoDetectArgs& args) {
  RunConfig cfg = config_from(args.config);
  if (args.sustain > 0) cfg.sustain_minutes = args.sustain;
  if (args.quantile > 0) cfg.quantile = args.quantile;
  cfg.validate();
  const std::int64_t now = floor_align(parse_now(args.now), 60);
  const std::int64_t live_from = now - static_cast<std::int64_t>(cfg.geo_live_minutes) * 60;
  const std::int64_t hist_from =
      live_from - static_cast<std::int64_t>(cfg.geo_history_days) * kSecondsPerDay;

  const GeoIpTable table = load_geoip(cfg.geoip_file);
  std::size_t whitelisted = 0;
  const auto records = load_access_records(args.access, cfg, &whitelisted);

  const VisitAggregate history = aggregate_visits(records, table, hist_from, live_from);
  const VisitAggregate live = aggregate_visits(records, table, live_from, now);
  const auto models = build_country_models(history, cfg.quantile);
  std::filesystem::create_directories(cfg.out_dir);
  write_country_models(cfg.out_dir / "country_models.csv", models);

  const GeoDetectionReport report = detect_anomalous_visits(
      live, models, static_cast<std::int64_t>(cfg.sustain_minutes) * 60);
  append_geo_alerts(cfg.geo_alerts_file, report.alerts);

  for (const GeoAlert& a : report.alerts) {
    json ips = json::array();
    for (const std::uint32_t ip : a.contributing_ips) ips.push_back(format_ipv4(ip));
    emit({{"event", "geo_alert"},
          {"country", a.country},
          {"start", a.start},
          {"end", a.end},
          {"peak_rate", a.peak_rate},
          {"threshold", a.model_threshold},
          {"ips", ips}});
  }
  emit({{"event", "geo_cycle"},
        {"now", now},
        {"countries_live", live.by_country.size()},
        {"countries_modeled", models.size()},
        {"without_model", report.without_model},
        {"alerts", report.alerts.size()},
        {"whitelisted", whitelisted}});
  return 0;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
  std::size_t records = 1000000;
  std::uint64_t seed = 1;
};

int run_bench(const BenchArgs& args) {
  // Shape: 50 gauge metrics on a one-minute grid, several records folding
  // into each bucket, newest last - the usual replay order.
  const int metrics = 50;
  const std::int64_t start = 1700000000 - 1700000000 % 60;
  std::string csv;
  csv.reserve(args.records * 32);
  GaussianSource rng(args.seed);
  char line[96];
  for (std::size_t i = 0; i < args.records; ++i) {
    const std::int64_t ts = start + static_cast<std::int64_t>(i / metrics) * 6;
    std::snprintf(line, sizeof(line), "%lld,bench.%zu,%.6g\n",
                  static_cast<long long>(ts), i % metrics,
                  100.0 + 10.0 * rng.next());
    csv += line;
  }

  const std::int64_t span =
      static_cast<std::int64_t>(args.records / metrics) * 6 + kSecondsPerHour;
  RecentStore store(span, 60);
  std::vector<MetricRecord> batch;
  batch.reserve(10000);
  std::size_t accepted = 0;

  const auto t0 = std::chrono::steady_clock::now();
  std::istringstream in(csv);
  parse_metric_stream(in, InputFormat::csv, [&](MetricRecord&& r) {
    batch.push_back(std::move(r));
    if (batch.size() == batch.capacity()) {
      accepted += store.ingest(batch).accepted;
      batch.clear();
    }
  });
  accepted += store.ingest(batch).accepted;
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

  emit({{"event", "bench"},
        {"records", args.records},
        {"accepted", accepted},
        {"seconds", seconds},
        {"records_per_second", seconds > 0 ? args.records / seconds : 0.0}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-node traffic monitoring: baselines, detection, geo analytics"};
  app.require_subcommand(1);
  int rc = 0;

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic metric dataset");
  synth->add_option("--out", synth_args.out, "dataset root directory");
  synth->add_option("--now", synth_args.now, "end of the generated span")->required();
  synth->add_option("--weeks", synth_args.weeks, "weeks of history");
  synth->add_option("--metrics", synth_args.metrics, "number of metrics");
  synth->add_option("--resolution", synth_args.resolution, "sample spacing, seconds");
  synth->add_option("--base", synth_args.base, "base level");
  synth->add_option("--amplitude", synth_args.amplitude, "daily swing, 0..1");
  synth->add_option("--phase", synth_args.phase, "daily phase, radians");
  synth->add_option("--weekend-damping", synth_args.weekend_damping,
                    "weekend multiplier");
  synth->add_option("--noise", synth_args.noise, "relative noise level");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--prefix", synth_args.prefix, "metric name prefix");
  synth->add_option("--inject", synth_args.injections,
                    "metric,start,duration,multiplier (repeatable)");
  synth->callback([&] { rc = run_synth(synth_args); });

  SynthAccessArgs access_args;
  auto* synth_access =
      app.add_subcommand("synth-access", "generate a synthetic access log");
  synth_access->add_option("--out-access", access_args.out_access, "access CSV path");
  synth_access->add_option("--out-geoip", access_args.out_geoip,
                           "country range CSV path");
  synth_access->add_option("--now", access_args.now, "end of the span")->required();
  synth_access->add_option("--minutes", access_args.minutes, "span length");
  synth_access->add_option("--rate", access_args.rate, "requests per minute");
  synth_access->add_option("--seed", access_args.seed, "generator seed");
  synth_access->add_option("--service", access_args.service, "service name");
  synth_access->add_option("--mix", access_args.mix,
                           "code,weight,first_ip,count (repeatable)");
  synth_access->add_option("--burst", access_args.bursts,
                           "country,start,minutes,per_minute,ip (repeatable)");
  synth_access->callback([&] { rc = run_synth_access(access_args); });

  BaselineArgs baseline_args;
  auto* baseline = app.add_subcommand("baseline", "build weekly baselines");
  baseline->add_option("--config", baseline_args.config, "config file");
  baseline->add_option("--now", baseline_args.now, "build-as-of time")->required();
  baseline->add_option("--data", baseline_args.data, "dataset root override");
  baseline->add_option("--out", baseline_args.out, "baseline directory override");
  baseline->add_option("--weeks", baseline_args.weeks, "weeks of history override");
  baseline->add_option("--window", baseline_args.window,
                       "smoothing window override, minutes");
  baseline->add_option("--metric", baseline_args.metrics, "metric filter (repeatable)");
  baseline->callback([&] { rc = run_baseline(baseline_args); });

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "run one detection cycle");
  detect->add_option("--config", detect_args.config, "config file");
  detect->add_option("--now", detect_args.now, "cycle time")->required();
  detect->add_option("--data", detect_args.data, "dataset root override");
  detect->add_option("--rules", detect_args.rules, "rules file override");
  detect->add_option("--grace", detect_args.grace, "default grace override, minutes");
  detect->add_option("--renotify", detect_args.renotify,
                     "default renotify override, minutes");
  detect->callback([&] { rc = run_detect(detect_args); });

  GeoReportArgs geo_report_args;
  auto* geo_report = app.add_subcommand("geo-report", "country visit report + map export");
  geo_report->add_option("--config", geo_report_args.config, "config file");
  geo_report->add_option("--now", geo_report_args.now, "report end time")->required();
  geo_report->add_option("--access", geo_report_args.access, "access log")->required();
  geo_report->add_option("--out", geo_report_args.out, "output directory override");
  geo_report->add_option("--minutes", geo_report_args.minutes, "report span override");
  geo_report->add_option("--topk", geo_report_args.topk, "ranking size override");
  geo_report->callback([&] { rc = run_geo_report(geo_report_args); });

  GeoDetectArgs geo_detect_args;
  auto* geo_detect =
      app.add_subcommand("geo-detect", "detect anomalous per-country visit rates");
  geo_detect->add_option("--config", geo_detect_args.config, "config file");
  geo_detect->add_option("--now", geo_detect_args.now, "cycle time")->required();
  geo_detect->add_option("--access", geo_detect_args.access, "access log")->required();
  geo_detect->add_option("--sustain", geo_detect_args.sustain,
                         "sustain override, minutes");
  geo_detect->add_option("--quantile", geo_detect_args.quantile, "quantile override");
  geo_detect->callback([&] { rc = run_geo_detect(geo_detect_args); });

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "measure ingest throughput");
  bench->add_option("--records", bench_args.records, "record count");
  bench->add_option("--seed", bench_args.seed, "generator seed");
  bench->callback([&] { rc = run_bench(bench_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
