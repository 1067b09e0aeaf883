#include "netmon/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "netmon/io_util.hpp"
#include "netmon/time_util.hpp"

namespace netmon {

namespace {

constexpr char kStateMagic[] = "netmon-state";
constexpr int kStateVersion = 1;

bool cmp(double value, CmpOp op, double bound) {
  switch (op) {
    case CmpOp::gt: return value > bound;
    case CmpOp::ge: return value >= bound;
    case CmpOp::lt: return value < bound;
    case CmpOp::le: return value <= bound;
    case CmpOp::eq: return value == bound;
  }
  return false;
}

CmpOp op_from_name(std::string_view name) {
  if (name == ">") return CmpOp::gt;
  if (name == ">=") return CmpOp::ge;
  if (name == "<") return CmpOp::lt;
  if (name == "<=") return CmpOp::le;
  if (name == "==") return CmpOp::eq;
  throw std::runtime_error("unknown comparison operator: " + std::string(name));
}

double parse_double_token(const std::string& tok, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size())
    throw std::runtime_error(std::string("malformed ") + what + ": " + tok);
  return v;
}

// Per-metric sample lookup for one evaluation pass.
struct MetricView {
  std::unordered_map<std::int64_t, double> raw;
  std::unordered_map<std::int64_t, double> smoothed;
  const WeeklyBaseline* baseline = nullptr;

  std::optional<double> raw_at(std::int64_t ts) const {
    auto it = raw.find(ts);
    if (it == raw.end()) return std::nullopt;
    return it->second;
  }
  std::optional<double> smoothed_at(std::int64_t ts) const {
    auto it = smoothed.find(ts);
    if (it == smoothed.end()) return std::nullopt;
    return it->second;
  }
};

void collect_smoothed_metrics(const Predicate& p, std::set<std::string>& out) {
  if (p.kind == Predicate::Kind::above_baseline ||
      p.kind == Predicate::Kind::abs_deviation)
    out.insert(p.metric);
  for (const Predicate& c : p.children) collect_smoothed_metrics(c, out);
}

bool find_static_bound(const Predicate& p, const std::string& metric, double& out) {
  if (p.kind == Predicate::Kind::compare && p.metric == metric) {
    out = p.bound;
    return true;
  }
  for (const Predicate& c : p.children)
    if (find_static_bound(c, metric, out)) return true;
  return false;
}

bool eval_predicate(const Predicate& p,
                    const std::map<std::string, MetricView>& views, std::int64_t ts,
                    std::int64_t resolution) {
  switch (p.kind) {
    case Predicate::Kind::above_baseline: {
      const MetricView& v = views.at(p.metric);
      const auto value = v.smoothed_at(ts);
      if (!value) return false;
      const SlotStats& slot = v.baseline->slot_at(ts);
      if (!slot.valid) return false;
      return *value >
             slot.expected + v.baseline->config().deviation_multiplier * slot.deviation;
    }
    case Predicate::Kind::compare: {
      const auto value = views.at(p.metric).raw_at(ts);
      return value && cmp(*value, p.op, p.bound);
    }
    case Predicate::Kind::rate_of_change: {
      const MetricView& v = views.at(p.metric);
      const auto cur = v.raw_at(ts);
      const auto prev = v.raw_at(ts - resolution);
      return cur && prev && cmp(*cur - *prev, p.op, p.bound);
    }
    case Predicate::Kind::ratio: {
      const auto num = views.at(p.metric).raw_at(ts);
      const auto den = views.at(p.denom_metric).raw_at(ts);
      return num && den && *den != 0.0 && cmp(*num / *den, p.op, p.bound);
    }
    case Predicate::Kind::abs_deviation: {
      const MetricView& v = views.at(p.metric);
      const auto value = v.smoothed_at(ts);
      if (!value) return false;
      const SlotStats& slot = v.baseline->slot_at(ts);
      if (!slot.valid) return false;
      return cmp(std::abs(*value - slot.expected), p.op, p.bound);
    }
    case Predicate::Kind::all_of:
      for (const Predicate& c : p.children)
        if (!eval_predicate(c, views, ts, resolution)) return false;
      return true;
    case Predicate::Kind::any_of:
      for (const Predicate& c : p.children)
        if (eval_predicate(c, views, ts, resolution)) return true;
      return false;
  }
  return false;
}

}  // namespace

Predicate Predicate::above_baseline(std::string metric) {
  Predicate p;
  p.kind = Kind::above_baseline;
  p.metric = std::move(metric);
  return p;
}

Predicate Predicate::compare(std::string metric, CmpOp op, double bound) {
  Predicate p;
  p.kind = Kind::compare;
  p.metric = std::move(metric);
  p.op = op;
  p.bound = bound;
  return p;
}

Predicate Predicate::rate_of_change(std::string metric, CmpOp op, double bound) {
  Predicate p;
  p.kind = Kind::rate_of_change;
  p.metric = std::move(metric);
  p.op = op;
  p.bound = bound;
  return p;
}

Predicate Predicate::ratio(std::string metric, std::string denom, CmpOp op,
                           double bound) {
  Predicate p;
  p.kind = Kind::ratio;
  p.metric = std::move(metric);
  p.denom_metric = std::move(denom);
  p.op = op;
  p.bound = bound;
  return p;
}

Predicate Predicate::abs_deviation(std::string metric, CmpOp op, double bound) {
  Predicate p;
  p.kind = Kind::abs_deviation;
  p.metric = std::move(metric);
  p.op = op;
  p.bound = bound;
  return p;
}

Predicate Predicate::all_of(std::vector<Predicate> children) {
  Predicate p;
  p.kind = Kind::all_of;
  p.children = std::move(children);
  return p;
}

Predicate Predicate::any_of(std::vector<Predicate> children) {
  Predicate p;
  p.kind = Kind::any_of;
  p.children = std::move(children);
  return p;
}

void Predicate::collect_metrics(std::set<std::string>& out) const {
  if (!metric.empty()) out.insert(metric);
  if (!denom_metric.empty()) out.insert(denom_metric);
  for (const Predicate& c : children) c.collect_metrics(out);
}

bool Predicate::references_baseline_of(const std::string& m) const {
  if ((kind == Kind::above_baseline || kind == Kind::abs_deviation) && metric == m)
    return true;
  for (const Predicate& c : children)
    if (c.references_baseline_of(m)) return true;
  return false;
}

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::critical: return "critical";
  }
  return "warning";
}

Severity severity_from_name(std::string_view name) {
  if (name == "info") return Severity::info;
  if (name == "warning") return Severity::warning;
  if (name == "critical") return Severity::critical;
  throw std::runtime_error("unknown severity: " + std::string(name));
}

void DetectionRule::validate(std::int64_t resolution) const {
  if (rule_id.empty() || rule_id.find_first_of(" \t,") != std::string::npos)
    throw std::invalid_argument("rule id must be non-empty without spaces or commas");
  if (!valid_metric_id(target))
    throw std::invalid_argument("rule " + rule_id + ": bad target metric");
  if (grace < resolution)
    throw std::invalid_argument("rule " + rule_id + ": grace below metric resolution");
  if (renotify_after < grace)
    throw std::invalid_argument("rule " + rule_id + ": renotify_after below grace");
  if (lookback <= 0)
    throw std::invalid_argument("rule " + rule_id + ": lookback must be positive");
}

std::vector<ViolationInterval> evaluate_rule(
    const DetectionRule& rule, const std::map<std::string, MetricSeries>& context,
    const std::map<std::string, WeeklyBaseline>& baselines, std::int64_t now) {
  std::set<std::string> metrics;
  rule.condition.collect_metrics(metrics);
  metrics.insert(rule.target);

  for (const std::string& m : metrics)
    if (!context.contains(m)) throw std::runtime_error("missing metric: " + m);

  const MetricSeries& target = context.at(rule.target);
  const std::int64_t resolution = target.resolution();

  std::set<std::string> smoothed_metrics;
  collect_smoothed_metrics(rule.condition, smoothed_metrics);

  std::map<std::string, MetricView> views;
  for (const std::string& m : metrics) {
    const MetricSeries& series = context.at(m);
    if (series.resolution() != resolution)
      throw std::runtime_error("metric " + m + " is on a different grid");
    MetricView view;
    view.raw.reserve(series.size());
    for (const Sample& s : series.samples()) view.raw.emplace(s.ts, s.value);
    if (smoothed_metrics.contains(m)) {
      auto it = baselines.find(m);
      if (it == baselines.end())
        throw std::runtime_error("no baseline loaded for metric: " + m);
      if (it->second.config().resolution != resolution)
        throw std::runtime_error("baseline for " + m + " is on a different grid");
      view.baseline = &it->second;
      const SmoothedSeries sm = moving_average(series, it->second.config().window);
      view.smoothed.reserve(sm.size());
      for (const Sample& s : sm.samples()) view.smoothed.emplace(s.ts, s.value);
    }
    views.emplace(m, std::move(view));
  }

  const bool peak_from_smoothed = rule.condition.references_baseline_of(rule.target);
  const MetricView& target_view = views.at(rule.target);
  const std::int64_t window_start = now - rule.lookback;

  std::vector<ViolationInterval> intervals;
  ViolationInterval current{};
  bool open = false;
  std::int64_t prev_ts = 0;

  auto target_value_at = [&](std::int64_t ts) -> double {
    if (peak_from_smoothed) {
      if (auto v = target_view.smoothed_at(ts)) return *v;
    }
    return *target_view.raw_at(ts);
  };
  auto close_interval = [&] {
    if (open && current.end - current.start >= rule.grace)
      intervals.push_back(current);
    open = false;
  };

  for (const Sample& s : target.samples()) {
    if (s.ts < window_start || s.ts > now) continue;
    const bool hit = eval_predicate(rule.condition, views, s.ts, resolution);
    if (!hit) {
      close_interval();
      prev_ts = s.ts;
      continue;
    }
    const double value = target_value_at(s.ts);
    if (open && s.ts - prev_ts == resolution) {
      current.end = s.ts;
      ++current.samples;
      if (value > current.peak_value) {
        current.peak_value = value;
        current.peak_ts = s.ts;
      }
    } else {
      close_interval();
      current = ViolationInterval{s.ts, s.ts, value, s.ts, 0.0, 1};
      open = true;
    }
    prev_ts = s.ts;
  }
  close_interval();

  // Threshold recorded at the peak: the baseline bound when one applies,
  // otherwise the first static bound on the target, otherwise NaN.
  for (ViolationInterval& iv : intervals) {
    const WeeklyBaseline* b = target_view.baseline;
    if (b == nullptr) {
      auto it = baselines.find(rule.target);
      if (it != baselines.end()) b = &it->second;
    }
    if (b != nullptr && b->slot_at(iv.peak_ts).valid) {
      const SlotStats& slot = b->slot_at(iv.peak_ts);
      iv.threshold_at_peak =
          slot.expected + b->config().deviation_multiplier * slot.deviation;
    } else if (double bound; find_static_bound(rule.condition, rule.target, bound)) {
      iv.threshold_at_peak = bound;
    } else {
      iv.threshold_at_peak = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return intervals;
}

std::vector<ViolationInterval> evaluate_composite_outage(
    const MetricSeries& incoming, const MetricSeries& outgoing,
    const WeeklyBaseline& baseline_in, std::int64_t now, std::int64_t grace,
    std::int64_t lookback) {
  if (incoming.resolution() != outgoing.resolution())
    throw std::runtime_error("incoming/outgoing series on different grids");
  if (!incoming.empty() && !outgoing.empty() &&
      (incoming.start() - outgoing.start()) % incoming.resolution() != 0)
    throw std::runtime_error("incoming/outgoing series on different grids");

  DetectionRule rule;
  rule.rule_id = "composite-outage";
  rule.target = incoming.metric_id();
  rule.condition = Predicate::all_of({Predicate::above_baseline(incoming.metric_id()),
                                      Predicate::is_zero(outgoing.metric_id())});
  rule.grace = grace;
  rule.lookback = lookback;
  rule.renotify_after = std::max(grace, lookback);

  std::map<std::string, MetricSeries> context;
  context.emplace(incoming.metric_id(), incoming);
  context.emplace(outgoing.metric_id(), outgoing);
  std::map<std::string, WeeklyBaseline> baselines;
  baselines.emplace(incoming.metric_id(), baseline_in);
  return evaluate_rule(rule, context, baselines, now);
}

std::vector<Alert> apply_containment(const std::vector<ViolationInterval>& violations,
                                     const DetectionRule& rule, ContainmentState& state,
                                     std::int64_t now) {
  ContainmentState::RuleState& rs = state.rule_state(rule.rule_id);
  std::vector<Alert> emitted;

  auto may_notify = [&] {
    return !rs.last_notified_at || now - *rs.last_notified_at >= rule.renotify_after;
  };

  bool active_seen = false;
  for (const ViolationInterval& v : violations) {
    if (v.end - v.start < rule.grace) continue;  // evaluate_rule already filters

    const bool continues_active = rs.active && v.start <= rs.active->end &&
                                  v.end >= rs.active->start;
    if (continues_active) {
      Alert& a = *rs.active;
      a.end = std::max(a.end, v.end);
      if (v.peak_value > a.peak_value) {
        a.peak_value = v.peak_value;
        a.threshold_at_peak = v.threshold_at_peak;
      }
      active_seen = true;
      if (may_notify()) {
        ++a.notify_count;
        if (a.notify_count == 1) a.first_notified_at = now;
        a.notified_at = now;
        rs.last_notified_at = now;
        emitted.push_back(a);
      }
      continue;
    }

    // New episode; whatever was active has ended.
    Alert a;
    a.rule_id = rule.rule_id;
    a.metric_id = rule.target;
    a.start = v.start;
    a.end = v.end;
    a.peak_value = v.peak_value;
    a.threshold_at_peak = v.threshold_at_peak;
    a.severity = rule.severity;
    if (may_notify()) {
      a.notify_count = 1;
      a.first_notified_at = now;
      a.notified_at = now;
      rs.last_notified_at = now;
      emitted.push_back(a);
    }
    rs.active = a;
    active_seen = true;
  }

  // No violation touched the stored alert this cycle: the condition cleared.
  if (rs.active && !active_seen) rs.active.reset();
  return emitted;
}

CycleReport run_detection_cycle(const std::vector<DetectionRule>& rules,
                                const RecentStore& store,
                                const std::map<std::string, WeeklyBaseline>& baselines,
                                ContainmentState& state, std::int64_t now) {
  using clock = std::chrono::steady_clock;
  const auto cycle_start = clock::now();
  CycleReport report;

  for (const DetectionRule& rule : rules) {
    const auto rule_start = clock::now();
    try {
      std::set<std::string> metrics;
      rule.condition.collect_metrics(metrics);
      metrics.insert(rule.target);

      std::set<std::string> smoothed_metrics;
      collect_smoothed_metrics(rule.condition, smoothed_metrics);
      std::int64_t warmup = 0;
      for (const std::string& m : smoothed_metrics) {
        auto it = baselines.find(m);
        if (it != baselines.end()) warmup = std::max(warmup, it->second.config().window);
      }

      std::map<std::string, MetricSeries> context;
      for (const std::string& m : metrics) {
        auto snap = store.snapshot(m, now - rule.lookback - warmup, now);
        if (snap) context.emplace(m, std::move(*snap));
      }

      const auto violations = evaluate_rule(rule, context, baselines, now);
      auto alerts = apply_containment(violations, rule, state, now);
      for (Alert& a : alerts) report.alerts.push_back(std::move(a));

      const auto& target_samples = context.at(rule.target).samples();
      for (const Sample& s : target_samples)
        if (s.ts >= now - rule.lookback && s.ts <= now) ++report.elements;
    } catch (const std::exception& e) {
      report.issues.push_back({rule.rule_id, e.what()});
    }
    report.rule_seconds.emplace_back(
        rule.rule_id, std::chrono::duration<double>(clock::now() - rule_start).count());
  }

  report.seconds = std::chrono::duration<double>(clock::now() - cycle_start).count();
  return report;
}

std::vector<DetectionRule> parse_rules(const std::string& json_text,
                                       std::int64_t resolution,
                                       const RuleDefaults& defaults) {
  nlohmann::json doc = nlohmann::json::parse(json_text);
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array())
    throw std::runtime_error("rules file must be an object with a 'rules' array");

  std::function<Predicate(const nlohmann::json&)> parse_predicate =
      [&](const nlohmann::json& j) -> Predicate {
    if (!j.is_object()) throw std::runtime_error("predicate must be an object");
    if (j.contains("all_of") || j.contains("any_of")) {
      const bool conj = j.contains("all_of");
      const auto& arr = j[conj ? "all_of" : "any_of"];
      if (!arr.is_array() || arr.empty())
        throw std::runtime_error("all_of/any_of needs a non-empty array");
      std::vector<Predicate> children;
      for (const auto& c : arr) children.push_back(parse_predicate(c));
      return conj ? Predicate::all_of(std::move(children))
                  : Predicate::any_of(std::move(children));
    }
    const std::string metric = j.value("metric", "");
    if (metric.empty()) throw std::runtime_error("predicate leaf needs a metric");
    if (j.contains("above")) {
      if (j["above"] != "baseline")
        throw std::runtime_error("'above' only supports \"baseline\"");
      return Predicate::above_baseline(metric);
    }
    const CmpOp op = op_from_name(j.value("op", ""));
    if (!j.contains("value") || !j["value"].is_number())
      throw std::runtime_error("predicate leaf needs a numeric 'value'");
    const double value = j["value"].get<double>();
    const std::string fn = j.value("fn", "");
    if (fn.empty()) return Predicate::compare(metric, op, value);
    if (fn == "rate_of_change") return Predicate::rate_of_change(metric, op, value);
    if (fn == "abs_deviation") return Predicate::abs_deviation(metric, op, value);
    if (fn == "ratio") {
      const std::string denom = j.value("denominator", "");
      if (denom.empty()) throw std::runtime_error("ratio needs a 'denominator'");
      return Predicate::ratio(metric, denom, op, value);
    }
    throw std::runtime_error("unknown leaf function: " + fn);
  };

  std::vector<DetectionRule> rules;
  for (const auto& j : doc["rules"]) {
    DetectionRule r;
    r.rule_id = j.value("id", "");
    r.target = j.value("metric", "");
    r.severity = severity_from_name(j.value("severity", "warning"));
    r.grace = static_cast<std::int64_t>(j.value("grace_minutes", defaults.grace_minutes)) * 60;
    r.lookback =
        static_cast<std::int64_t>(j.value("lookback_minutes", defaults.lookback_minutes)) * 60;
    r.renotify_after =
        static_cast<std::int64_t>(j.value("renotify_minutes", defaults.renotify_minutes)) * 60;
    if (!j.contains("when")) throw std::runtime_error("rule needs a 'when' predicate");
    r.condition = parse_predicate(j["when"]);
    r.validate(resolution);
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<DetectionRule> load_rules(const std::filesystem::path& path,
                                      std::int64_t resolution,
                                      const RuleDefaults& defaults) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str(), resolution, defaults);
}

void append_alerts(const std::filesystem::path& path, const std::vector<Alert>& alerts) {
  if (alerts.empty()) return;
  std::string out;
  for (const Alert& a : alerts) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%s,%lld,%lld,%.17g,%.17g,%s,%lld,%d\n",
                  a.rule_id.c_str(), a.metric_id.c_str(),
                  static_cast<long long>(a.start), static_cast<long long>(a.end),
                  a.peak_value, a.threshold_at_peak,
                  std::string(severity_name(a.severity)).c_str(),
                  static_cast<long long>(a.notified_at), a.notify_count);
    out += line;
  }
  append_to_file(path, out);
}

std::vector<Alert> read_alerts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  std::vector<Alert> alerts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 9)
      throw std::runtime_error("malformed alert line: " + line);
    Alert a;
    a.rule_id = fields[0];
    a.metric_id = fields[1];
    a.start = std::stoll(fields[2]);
    a.end = std::stoll(fields[3]);
    a.peak_value = parse_double_token(fields[4], "peak_value");
    a.threshold_at_peak = parse_double_token(fields[5], "threshold_at_peak");
    a.severity = severity_from_name(fields[6]);
    a.notified_at = std::stoll(fields[7]);
    a.notify_count = std::stoi(fields[8]);
    alerts.push_back(std::move(a));
  }
  return alerts;
}

void save_containment_state(const ContainmentState& state,
                            const std::filesystem::path& path) {
  std::ostringstream out;
  out << kStateMagic << ' ' << kStateVersion << '\n';
  for (const auto& [rule_id, rs] : state.rules()) {
    out << "rule " << rule_id << " last_notified ";
    if (rs.last_notified_at)
      out << *rs.last_notified_at;
    else
      out << '-';
    out << " active " << (rs.active ? 1 : 0) << '\n';
    if (rs.active) {
      const Alert& a = *rs.active;
      char line[256];
      std::snprintf(line, sizeof(line), "alert %s %lld %lld %.17g %.17g %s %lld %d\n",
                    a.metric_id.c_str(), static_cast<long long>(a.start),
                    static_cast<long long>(a.end), a.peak_value, a.threshold_at_peak,
                    std::string(severity_name(a.severity)).c_str(),
                    static_cast<long long>(a.first_notified_at), a.notify_count);
      out << line;
    }
  }
  atomic_write_file(path, out.str());
}

ContainmentState load_containment_state(const std::filesystem::path& path) {
  ContainmentState state;
  std::ifstream in(path);
  if (!in) return state;

  std::string magic;
  int version = -1;
  if (!(in >> magic >> version) || magic != kStateMagic)
    throw std::runtime_error("not a containment state file: " + path.string());
  if (version != kStateVersion)
    throw std::runtime_error("unsupported state format version " +
                             std::to_string(version));

  std::string tok;
  while (in >> tok) {
    if (tok != "rule") throw std::runtime_error("corrupt state file near: " + tok);
    std::string rule_id, key, last, active_key;
    int active = 0;
    if (!(in >> rule_id >> key >> last >> active_key >> active) ||
        key != "last_notified" || active_key != "active")
      throw std::runtime_error("corrupt state entry for rule " + rule_id);
    ContainmentState::RuleState rs;
    if (last != "-") rs.last_notified_at = std::stoll(last);
    if (active == 1) {
      std::string alert_tok, metric, sev, peak_tok, thr_tok;
      Alert a;
      if (!(in >> alert_tok >> metric >> a.start >> a.end >> peak_tok >> thr_tok >>
            sev >> a.first_notified_at >> a.notify_count) ||
          alert_tok != "alert")
        throw std::runtime_error("corrupt active alert for rule " + rule_id);
      a.peak_value = parse_double_token(peak_tok, "peak_value");
      a.threshold_at_peak = parse_double_token(thr_tok, "threshold_at_peak");
      a.rule_id = rule_id;
      a.metric_id = metric;
      a.severity = severity_from_name(sev);
      a.notified_at = rs.last_notified_at.value_or(0);
      rs.active = std::move(a);
    }
    state.rule_state(rule_id) = std::move(rs);
  }
  return state;
}

}  // namespace netmon
