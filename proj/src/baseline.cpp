#include "netmon/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "netmon/io_util.hpp"
#include "netmon/stats.hpp"

namespace netmon {

namespace {
constexpr int kFormatVersion = 1;
constexpr char kMagic[] = "netmon-baseline";
}  // namespace

void BaselineConfig::validate() const {
  if (weeks_back < 1) throw std::invalid_argument("weeks_back must be >= 1");
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  if (window <= 0 || window % resolution != 0)
    throw std::invalid_argument("window must be a positive multiple of resolution");
  if (kSecondsPerWeek % window != 0)
    throw std::invalid_argument("window must divide the week evenly");
  if (!(deviation_multiplier > 0))
    throw std::invalid_argument("deviation_multiplier must be > 0");
}

WeeklyBaseline::WeeklyBaseline(std::string metric_id, BaselineConfig config,
                               std::vector<SlotStats> slots, std::int64_t built_at,
                               int weeks_used)
    : metric_id_(std::move(metric_id)),
      config_(config),
      slots_(std::move(slots)),
      built_at_(built_at),
      weeks_used_(weeks_used) {
  config_.validate();
  if (metric_id_.empty()) throw std::invalid_argument("empty metric_id");
  if (slots_.size() != static_cast<std::size_t>(config_.slot_count()))
    throw std::invalid_argument("slot vector size does not match config");
  for (const SlotStats& s : slots_) {
    if (s.valid && (!std::isfinite(s.expected) || !(s.deviation >= 0)))
      throw std::invalid_argument("invalid slot statistics");
  }
}

std::vector<double> history_vector(const SmoothedSeries& smoothed, std::int64_t k,
                                   const BaselineConfig& config) {
  if (k % config.resolution != 0)
    throw std::invalid_argument("timestamp off the resolution grid");
  const auto& samples = smoothed.samples();
  std::vector<double> out;
  out.reserve(config.weeks_back);
  for (int w = config.weeks_back; w >= 1; --w) {
    const std::int64_t ts = k - static_cast<std::int64_t>(w) * BaselineConfig::week_period;
    auto it = std::lower_bound(samples.begin(), samples.end(), ts,
                               [](const Sample& s, std::int64_t t) { return s.ts < t; });
    if (it != samples.end() && it->ts == ts) out.push_back(it->value);
  }
  return out;
}

WeeklyBaseline build_baseline(const SmoothedSeries& smoothed, std::int64_t as_of,
                              const BaselineConfig& config) {
  config.validate();
  if (smoothed.resolution() != config.resolution)
    throw std::invalid_argument("smoothed series resolution does not match config");

  const std::int64_t span_start =
      as_of - static_cast<std::int64_t>(config.weeks_back) * BaselineConfig::week_period;
  const int n_slots = config.slot_count();

  std::vector<std::vector<double>> groups(n_slots);
  const std::size_t nominal = config.nominal_slot_samples();
  for (auto& g : groups) g.reserve(nominal);

  std::set<std::int64_t> weeks_seen;
  for (const Sample& s : smoothed.samples()) {
    if (s.ts < span_start || s.ts >= as_of) continue;
    groups[week_slot_of(s.ts, config.window)].push_back(s.value);
    weeks_seen.insert((as_of - s.ts - 1) / BaselineConfig::week_period);
  }
  if (weeks_seen.empty()) throw std::runtime_error("insufficient history");

  std::vector<SlotStats> slots(n_slots);
  for (int i = 0; i < n_slots; ++i) {
    const auto& g = groups[i];
    SlotStats& st = slots[i];
    st.sample_count = static_cast<std::uint32_t>(g.size());
    if (g.empty() || 4 * g.size() < nominal) continue;  // invalid slot
    st.expected = median(g);
    st.deviation = sample_stddev(g);
    st.valid = true;
  }

  return WeeklyBaseline(smoothed.source(), config, std::move(slots), as_of,
                        static_cast<int>(weeks_seen.size()));
}

Threshold threshold_at(const WeeklyBaseline& baseline, std::int64_t k) {
  const SlotStats& s = baseline.slot_at(k);
  if (!s.valid)
    throw std::runtime_error("no baseline for slot " +
                             std::to_string(week_slot_of(k, baseline.config().window)));
  return {s.expected, s.expected + baseline.config().deviation_multiplier * s.deviation};
}

void save_baseline(const WeeklyBaseline& baseline, const std::filesystem::path& path) {
  std::ostringstream out;
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "metric " << baseline.metric_id() << '\n';
  out << "resolution " << baseline.config().resolution << '\n';
  out << "window " << baseline.config().window << '\n';
  out << "weeks_back " << baseline.config().weeks_back << '\n';
  char num[40];
  std::snprintf(num, sizeof(num), "%.17g", baseline.config().deviation_multiplier);
  out << "deviation_multiplier " << num << '\n';
  out << "built_at " << baseline.built_at() << '\n';
  out << "weeks_used " << baseline.weeks_used() << '\n';
  out << "slots " << baseline.slots().size() << '\n';
  for (std::size_t i = 0; i < baseline.slots().size(); ++i) {
    const SlotStats& s = baseline.slots()[i];
    char line[96];
    std::snprintf(line, sizeof(line), "%zu %.17g %.17g %u\n", i, s.expected,
                  s.deviation, s.sample_count);
    out << line;
  }
  atomic_write_file(path, out.str());
}

WeeklyBaseline load_baseline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open baseline file: " + path.string());

  std::string magic;
  int version = -1;
  if (!(in >> magic >> version) || magic != kMagic)
    throw std::runtime_error("not a baseline file: " + path.string());
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported baseline format version " +
                             std::to_string(version));

  std::string metric_id;
  BaselineConfig config;
  std::int64_t built_at = 0;
  int weeks_used = 0;
  std::size_t n_slots = 0;
  bool have_slots = false;
  std::string key;
  while (!have_slots && in >> key) {
    if (key == "metric") {
      in >> metric_id;
    } else if (key == "resolution") {
      in >> config.resolution;
    } else if (key == "window") {
      in >> config.window;
    } else if (key == "weeks_back") {
      in >> config.weeks_back;
    } else if (key == "deviation_multiplier") {
      in >> config.deviation_multiplier;
    } else if (key == "built_at") {
      in >> built_at;
    } else if (key == "weeks_used") {
      in >> weeks_used;
    } else if (key == "slots") {
      in >> n_slots;
      have_slots = true;
    } else {
      throw std::runtime_error("unknown baseline header field: " + key);
    }
    if (!in) throw std::runtime_error("corrupt baseline header in " + path.string());
  }
  if (!have_slots) throw std::runtime_error("truncated baseline file: " + path.string());

  const std::size_t nominal = [&] {
    config.validate();
    return config.nominal_slot_samples();
  }();

  std::vector<SlotStats> slots(n_slots);
  for (std::size_t i = 0; i < n_slots; ++i) {
    std::size_t index;
    SlotStats s;
    if (!(in >> index >> s.expected >> s.deviation >> s.sample_count))
      throw std::runtime_error("truncated baseline file: " + path.string());
    if (index != i)
      throw std::runtime_error("slot index mismatch at record " + std::to_string(i));
    s.valid = s.sample_count > 0 && 4 * static_cast<std::size_t>(s.sample_count) >= nominal;
    slots[i] = s;
  }
  return WeeklyBaseline(std::move(metric_id), config, std::move(slots), built_at,
                        weeks_used);
}

void ensure_baseline_compatible(const WeeklyBaseline& baseline,
                                const BaselineConfig& config) {
  if (baseline.config().window != config.window)
    throw std::runtime_error("baseline window " +
                             std::to_string(baseline.config().window) +
                             " does not match configured window " +
                             std::to_string(config.window));
  if (baseline.config().resolution != config.resolution)
    throw std::runtime_error("baseline resolution " +
                             std::to_string(baseline.config().resolution) +
                             " does not match configured resolution " +
                             std::to_string(config.resolution));
}

}  // namespace netmon
