#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace netmon {

struct Sample {
  std::int64_t ts;
  double value;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class GapPolicy { leave_gap, fill_zero, fill_previous };

// How multiple raw points landing in one resolution bucket combine.
// Counters (flows, visits) are additive; gauges want the mean.
enum class BucketAgg { sum, mean };

// Regularly-sampled metric values on a fixed resolution grid. Gaps are
// allowed: a missing timestamp simply has no sample. Immutable after
// construction and safe to share across threads.
class MetricSeries {
 public:
  MetricSeries(std::string metric_id, std::int64_t resolution,
               std::vector<Sample> samples);

  const std::string& metric_id() const { return metric_id_; }
  std::int64_t resolution() const { return resolution_; }
  const std::vector<Sample>& samples() const { return samples_; }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  std::int64_t start() const { return samples_.empty() ? 0 : samples_.front().ts; }
  std::int64_t end() const { return samples_.empty() ? 0 : samples_.back().ts; }

 private:
  std::string metric_id_;
  std::int64_t resolution_;
  std::vector<Sample> samples_;
};

// Moving-average view of a source series; same timestamp grid.
class SmoothedSeries {
 public:
  SmoothedSeries(std::string source, std::int64_t resolution, std::int64_t window,
                 std::vector<Sample> samples);

  const std::string& source() const { return source_; }
  std::int64_t resolution() const { return resolution_; }
  std::int64_t window() const { return window_; }
  const std::vector<Sample>& samples() const { return samples_; }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }

 private:
  std::string source_;
  std::int64_t resolution_;
  std::int64_t window_;
  std::vector<Sample> samples_;
};

// Buckets unordered raw points onto the resolution grid. Points sharing a
// bucket are combined per agg; interior gap buckets are handled per policy.
// Throws on empty input ("no data") and on non-finite values (the message
// names the offending timestamp).
MetricSeries regularize(std::vector<std::pair<std::int64_t, double>> raw_points,
                        std::string metric_id, std::int64_t resolution,
                        GapPolicy gap_policy,
                        BucketAgg agg = BucketAgg::sum);

// Trailing (causal) moving mean over the window ending at each sample. The
// head, where fewer samples exist, averages what is available; gap buckets
// are excluded. Output grid equals the input grid. The window must be a
// positive multiple of the resolution.
SmoothedSeries moving_average(const MetricSeries& series, std::int64_t window);

// Default smoothing window, 10 minutes.
inline constexpr std::int64_t kDefaultSmoothingWindow = 600;

}  // namespace netmon
