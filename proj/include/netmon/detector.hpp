#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "netmon/baseline.hpp"
#include "netmon/ingest.hpp"
#include "netmon/timeseries.hpp"

namespace netmon {

enum class CmpOp { gt, ge, lt, le, eq };

// Condition tree evaluated per sample. Leaves compare one metric against
// the baseline upper threshold, a static constant, or a named function of
// the sample; and/or nodes combine children.
//
// Baseline-backed leaves (above_baseline, abs_deviation) look at the
// moving-averaged value, matching the statistic the baseline was built
// from; plain comparisons and the other functions look at the raw bucket.
struct Predicate {
  enum class Kind { above_baseline, compare, rate_of_change, ratio, abs_deviation,
                    all_of, any_of };

  Kind kind = Kind::compare;
  std::string metric;        // leaves
  CmpOp op = CmpOp::gt;      // compare / function leaves
  double bound = 0.0;
  std::string denom_metric;  // ratio only
  std::vector<Predicate> children;  // all_of / any_of

  static Predicate above_baseline(std::string metric);
  static Predicate compare(std::string metric, CmpOp op, double bound);
  static Predicate is_zero(std::string metric) {
    return compare(std::move(metric), CmpOp::eq, 0.0);
  }
  static Predicate rate_of_change(std::string metric, CmpOp op, double bound);
  static Predicate ratio(std::string metric, std::string denom, CmpOp op, double bound);
  static Predicate abs_deviation(std::string metric, CmpOp op, double bound);
  static Predicate all_of(std::vector<Predicate> children);
  static Predicate any_of(std::vector<Predicate> children);

  void collect_metrics(std::set<std::string>& out) const;
  bool references_baseline_of(const std::string& m) const;
};

enum class Severity { info, warning, critical };

std::string_view severity_name(Severity s);
Severity severity_from_name(std::string_view name);

struct DetectionRule {
  std::string rule_id;
  std::string target;  // metric whose grid drives evaluation
  Predicate condition;
  std::int64_t grace = 600;            // seconds
  std::int64_t lookback = 3600;        // seconds
  std::int64_t renotify_after = 3600;  // seconds
  Severity severity = Severity::warning;

  void validate(std::int64_t resolution) const;
};

struct ViolationInterval {
  std::int64_t start = 0;  // first violating sample
  std::int64_t end = 0;    // last violating sample
  double peak_value = 0.0;
  std::int64_t peak_ts = 0;
  double threshold_at_peak = 0.0;
  std::size_t samples = 0;
};

struct Alert {
  std::string rule_id;
  std::string metric_id;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double peak_value = 0.0;
  double threshold_at_peak = 0.0;
  Severity severity = Severity::warning;
  std::int64_t first_notified_at = 0;
  std::int64_t notified_at = 0;
  int notify_count = 0;
};

// Maximal runs of grid-consecutive samples where the condition holds at
// every sample, kept only when end - start >= grace. A single clean or
// missing sample breaks a run. Throws when the condition references a
// metric missing from the context ("missing metric: <id>").
std::vector<ViolationInterval> evaluate_rule(
    const DetectionRule& rule, const std::map<std::string, MetricSeries>& context,
    const std::map<std::string, WeeklyBaseline>& baselines, std::int64_t now);

// Service-outage special case: incoming above its baseline threshold while
// outgoing is zero, as one AND predicate. Both series must share the grid.
std::vector<ViolationInterval> evaluate_composite_outage(
    const MetricSeries& incoming, const MetricSeries& outgoing,
    const WeeklyBaseline& baseline_in, std::int64_t now, std::int64_t grace = 600,
    std::int64_t lookback = 3600);

// Per-rule notification memory. Persisted between cycles so a restarted
// detector keeps suppressing.
class ContainmentState {
 public:
  struct RuleState {
    std::optional<std::int64_t> last_notified_at;
    std::optional<Alert> active;
  };

  RuleState& rule_state(const std::string& rule_id) { return by_rule_[rule_id]; }
  const std::map<std::string, RuleState>& rules() const { return by_rule_; }
  std::map<std::string, RuleState>& rules() { return by_rule_; }

 private:
  std::map<std::string, RuleState> by_rule_;
};

// Promotes qualifying violations to notifications under the containment
// policy: at most one notification per rule per renotify_after, ongoing
// alerts tracked and re-notified only after the interval elapses.
std::vector<Alert> apply_containment(const std::vector<ViolationInterval>& violations,
                                     const DetectionRule& rule, ContainmentState& state,
                                     std::int64_t now);

struct RuleIssue {
  std::string rule_id;
  std::string message;
};

struct CycleReport {
  std::vector<Alert> alerts;
  std::vector<RuleIssue> issues;
  std::size_t elements = 0;  // evaluated target samples across rules
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> rule_seconds;
};

// Evaluates every rule over its lookback against the store and applies
// containment. Per-rule failures are reported in issues and never abort
// the cycle.
CycleReport run_detection_cycle(const std::vector<DetectionRule>& rules,
                                const RecentStore& store,
                                const std::map<std::string, WeeklyBaseline>& baselines,
                                ContainmentState& state, std::int64_t now);

// Fallbacks for rules that omit the per-rule knobs.
struct RuleDefaults {
  int grace_minutes = 10;
  int lookback_minutes = 60;
  int renotify_minutes = 60;
};

// Rule configuration file (JSON; see README for the schema).
std::vector<DetectionRule> load_rules(const std::filesystem::path& path,
                                      std::int64_t resolution,
                                      const RuleDefaults& defaults = {});
std::vector<DetectionRule> parse_rules(const std::string& json_text,
                                       std::int64_t resolution,
                                       const RuleDefaults& defaults = {});

// Append-only alert sink, one CSV line per notification:
// rule_id,metric_id,start,end,peak_value,threshold_at_peak,severity,
// notified_at,notify_count
void append_alerts(const std::filesystem::path& path, const std::vector<Alert>& alerts);
std::vector<Alert> read_alerts(const std::filesystem::path& path);

// Versioned containment-state file; loading a missing file yields an
// empty state.
void save_containment_state(const ContainmentState& state,
                            const std::filesystem::path& path);
ContainmentState load_containment_state(const std::filesystem::path& path);

}  // namespace netmon
