#include "netmon/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

#include "netmon/time_util.hpp"

namespace netmon {

namespace {

void check_grid(const std::vector<Sample>& samples, std::int64_t resolution) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0 && samples[i].ts <= samples[i - 1].ts)
      throw std::invalid_argument("timestamps not strictly increasing at " +
                                  std::to_string(samples[i].ts));
    if ((samples[i].ts - samples[0].ts) % resolution != 0)
      throw std::invalid_argument("timestamp " + std::to_string(samples[i].ts) +
                                  " off the resolution grid");
  }
}

}  // namespace

MetricSeries::MetricSeries(std::string metric_id, std::int64_t resolution,
                           std::vector<Sample> samples)
    : metric_id_(std::move(metric_id)),
      resolution_(resolution),
      samples_(std::move(samples)) {
  if (metric_id_.empty()) throw std::invalid_argument("empty metric_id");
  if (resolution_ <= 0) throw std::invalid_argument("resolution must be positive");
  check_grid(samples_, resolution_);
}

SmoothedSeries::SmoothedSeries(std::string source, std::int64_t resolution,
                               std::int64_t window, std::vector<Sample> samples)
    : source_(std::move(source)),
      resolution_(resolution),
      window_(window),
      samples_(std::move(samples)) {
  if (resolution_ <= 0) throw std::invalid_argument("resolution must be positive");
  if (window_ <= 0 || window_ % resolution_ != 0)
    throw std::invalid_argument("window must be a positive multiple of resolution");
  check_grid(samples_, resolution_);
}

MetricSeries regularize(std::vector<std::pair<std::int64_t, double>> raw_points,
                        std::string metric_id, std::int64_t resolution,
                        GapPolicy gap_policy, BucketAgg agg) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  if (raw_points.empty()) throw std::runtime_error("no data");

  struct Bucket {
    double sum = 0.0;
    std::uint64_t count = 0;
  };
  std::map<std::int64_t, Bucket> buckets;
  for (const auto& [ts, value] : raw_points) {
    if (!std::isfinite(value))
      throw std::runtime_error("non-finite value at timestamp " + std::to_string(ts));
    Bucket& b = buckets[floor_align(ts, resolution)];
    b.sum += value;
    b.count += 1;
  }

  std::vector<Sample> out;
  out.reserve(buckets.size());
  std::int64_t prev_ts = 0;
  double prev_value = 0.0;
  bool have_prev = false;
  for (const auto& [ts, b] : buckets) {
    if (have_prev && gap_policy != GapPolicy::leave_gap) {
      for (std::int64_t g = prev_ts + resolution; g < ts; g += resolution)
        out.push_back({g, gap_policy == GapPolicy::fill_zero ? 0.0 : prev_value});
    }
    const double v = agg == BucketAgg::sum ? b.sum : b.sum / static_cast<double>(b.count);
    out.push_back({ts, v});
    prev_ts = ts;
    prev_value = v;
    have_prev = true;
  }
  return MetricSeries(std::move(metric_id), resolution, std::move(out));
}

SmoothedSeries moving_average(const MetricSeries& series, std::int64_t window) {
  const std::int64_t res = series.resolution();
  if (window < res) throw std::invalid_argument("window smaller than resolution");
  if (window % res != 0)
    throw std::invalid_argument("window must be a multiple of resolution");

  const auto& in = series.samples();
  std::vector<Sample> out;
  out.reserve(in.size());

  // Sliding sum plus monotonic min/max deques; the mean is clamped into the
  // window's [min, max] so constant inputs come back bit-exact.
  std::size_t left = 0;
  double sum = 0.0;
  std::deque<std::size_t> minq, maxq;
  for (std::size_t i = 0; i < in.size(); ++i) {
    sum += in[i].value;
    while (!minq.empty() && in[minq.back()].value >= in[i].value) minq.pop_back();
    minq.push_back(i);
    while (!maxq.empty() && in[maxq.back()].value <= in[i].value) maxq.pop_back();
    maxq.push_back(i);

    const std::int64_t window_start = in[i].ts - window;  // exclusive bound
    while (in[left].ts <= window_start) {
      sum -= in[left].value;
      if (minq.front() == left) minq.pop_front();
      if (maxq.front() == left) maxq.pop_front();
      ++left;
    }

    const auto n = static_cast<double>(i - left + 1);
    double mean = sum / n;
    mean = std::clamp(mean, in[minq.front()].value, in[maxq.front()].value);
    out.push_back({in[i].ts, mean});
  }
  return SmoothedSeries(series.metric_id(), res, window, std::move(out));
}

}  // namespace netmon
