#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "netmon/time_util.hpp"
#include "netmon/timeseries.hpp"

namespace netmon {

// Parameters of the weekly baseline. weeks_back is the estimation span in
// weeks (how far history reaches); window is the slot width the smoothed
// values are grouped by.
struct BaselineConfig {
  int weeks_back = 8;
  std::int64_t window = kDefaultSmoothingWindow;  // seconds
  std::int64_t resolution = 60;                   // seconds
  double deviation_multiplier = 3.0;

  static constexpr std::int64_t week_period = kSecondsPerWeek;

  void validate() const;
  int slot_count() const { return static_cast<int>(kSecondsPerWeek / window); }
  std::size_t nominal_slot_samples() const {
    return static_cast<std::size_t>(weeks_back) *
           static_cast<std::size_t>(window / resolution);
  }

  friend bool operator==(const BaselineConfig&, const BaselineConfig&) = default;
};

// Slot index within the week for a timestamp: minute-of-week floor-aligned
// to the window. Weeks start Monday 00:00 UTC.
inline int week_slot_of(std::int64_t ts, std::int64_t window) {
  return static_cast<int>(second_of_week(ts) / window);
}

struct SlotStats {
  double expected = 0.0;   // median of the slot sample
  double deviation = 0.0;  // sample standard deviation
  std::uint32_t sample_count = 0;
  bool valid = false;

  friend bool operator==(const SlotStats&, const SlotStats&) = default;
};

struct Threshold {
  double expected;
  double upper;
};

// Per-week-slot expected value (median) and dispersion (standard deviation)
// defining the usual weekly behavior of one metric. Immutable; safe for
// concurrent readers.
class WeeklyBaseline {
 public:
  WeeklyBaseline(std::string metric_id, BaselineConfig config,
                 std::vector<SlotStats> slots, std::int64_t built_at,
                 int weeks_used);

  const std::string& metric_id() const { return metric_id_; }
  const BaselineConfig& config() const { return config_; }
  const std::vector<SlotStats>& slots() const { return slots_; }
  std::int64_t built_at() const { return built_at_; }
  int weeks_used() const { return weeks_used_; }

  const SlotStats& slot(int index) const { return slots_.at(index); }
  const SlotStats& slot_at(std::int64_t ts) const {
    return slots_[week_slot_of(ts, config_.window)];
  }

  friend bool operator==(const WeeklyBaseline&, const WeeklyBaseline&) = default;

 private:
  std::string metric_id_;
  BaselineConfig config_;
  std::vector<SlotStats> slots_;
  std::int64_t built_at_;
  int weeks_used_;
};

// Values of the smoothed series at k-mT, k-(m-1)T, ..., k-T where m is
// weeks_back and T one week; timestamps with no sample are omitted.
std::vector<double> history_vector(const SmoothedSeries& smoothed, std::int64_t k,
                                   const BaselineConfig& config);

// Groups every smoothed value from the weeks_back weeks before as_of by week
// slot and reduces each group to median + standard deviation. Slots with
// fewer than a quarter of the nominal sample count are marked invalid.
// Throws "insufficient history" when no sample falls in the span.
WeeklyBaseline build_baseline(const SmoothedSeries& smoothed, std::int64_t as_of,
                              const BaselineConfig& config);

// Expected value and upper alert bound (expected + c * deviation) for the
// slot containing k. Throws "no baseline for slot" on invalid slots.
Threshold threshold_at(const WeeklyBaseline& baseline, std::int64_t k);

// Line-oriented text file, one record per slot; see README for the format.
void save_baseline(const WeeklyBaseline& baseline, const std::filesystem::path& path);
WeeklyBaseline load_baseline(const std::filesystem::path& path);

// A baseline is usable by a detector only when built on the same grid.
void ensure_baseline_compatible(const WeeklyBaseline& baseline,
                                const BaselineConfig& config);

}  // namespace netmon
