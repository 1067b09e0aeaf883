#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "netmon/timeseries.hpp"
#include "oracles.hpp"

using namespace netmon;

namespace {

std::vector<double> values_of(const std::vector<Sample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.value);
  return out;
}

}  // namespace

TEST_CASE("regularize sums points sharing a bucket and keeps the grid") {
  auto series = regularize({{0, 1.0}, {30, 2.0}, {90, 4.0}}, "m", 60,
                           GapPolicy::fill_zero);
  REQUIRE(series.size() == 2);
  CHECK(series.samples()[0] == Sample{0, 3.0});
  CHECK(series.samples()[1] == Sample{60, 4.0});
}

TEST_CASE("regularize of a single point is the identity") {
  auto series = regularize({{0, 7.0}}, "m", 60, GapPolicy::fill_zero);
  REQUIRE(series.size() == 1);
  CHECK(series.samples()[0] == Sample{0, 7.0});
}

TEST_CASE("regularize fills interior gaps with zeros under fill_zero") {
  auto series = regularize({{0, 5.0}, {180, 9.0}}, "m", 60, GapPolicy::fill_zero);
  REQUIRE(series.size() == 4);
  CHECK(series.samples()[0] == Sample{0, 5.0});
  CHECK(series.samples()[1] == Sample{60, 0.0});
  CHECK(series.samples()[2] == Sample{120, 0.0});
  CHECK(series.samples()[3] == Sample{180, 9.0});
}

TEST_CASE("regularize carries the previous value under fill_previous") {
  auto series = regularize({{0, 5.0}, {180, 9.0}}, "m", 60, GapPolicy::fill_previous);
  REQUIRE(series.size() == 4);
  CHECK(series.samples()[1] == Sample{60, 5.0});
  CHECK(series.samples()[2] == Sample{120, 5.0});
}

TEST_CASE("regularize leaves gaps alone under leave_gap") {
  auto series = regularize({{0, 5.0}, {180, 9.0}}, "m", 60, GapPolicy::leave_gap);
  REQUIRE(series.size() == 2);
  CHECK(series.samples()[0].ts == 0);
  CHECK(series.samples()[1].ts == 180);
}

TEST_CASE("regularize floor-aligns timestamps, including negative ones") {
  auto series = regularize({{-30, 1.0}, {59, 2.0}}, "m", 60, GapPolicy::leave_gap);
  REQUIRE(series.size() == 2);
  CHECK(series.samples()[0].ts == -60);
  CHECK(series.samples()[1].ts == 0);
}

TEST_CASE("regularize can average a bucket instead of summing it") {
  auto series = regularize({{0, 1.0}, {30, 3.0}}, "m", 60, GapPolicy::leave_gap,
                           BucketAgg::mean);
  REQUIRE(series.size() == 1);
  CHECK(series.samples()[0].value == doctest::Approx(2.0));
}

TEST_CASE("regularize rejects empty and non-finite input") {
  CHECK_THROWS_WITH_AS(regularize({}, "m", 60, GapPolicy::fill_zero), "no data",
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(
      regularize({{120, std::nan("")}}, "m", 60, GapPolicy::fill_zero),
      "non-finite value at timestamp 120", std::runtime_error);
}

TEST_CASE("regularize conserves the total under sum aggregation") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::int64_t> ts_dist(0, 86400);
  std::uniform_real_distribution<double> val_dist(-50.0, 50.0);
  std::vector<std::pair<std::int64_t, double>> raw;
  double total = 0.0;
  for (int i = 0; i < 500; ++i) {
    raw.emplace_back(ts_dist(rng), val_dist(rng));
    total += raw.back().second;
  }
  for (GapPolicy policy : {GapPolicy::leave_gap, GapPolicy::fill_zero}) {
    auto series = regularize(raw, "m", 60, policy);
    double bucketed = 0.0;
    for (const Sample& s : series.samples()) bucketed += s.value;
    CHECK(bucketed == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("regularize is independent of input order") {
  std::vector<std::pair<std::int64_t, double>> raw = {
      {300, 1.0}, {0, 2.0}, {120, 3.0}, {60, 4.0}, {30, 5.0}};
  auto sorted_in = raw;
  std::sort(sorted_in.begin(), sorted_in.end());
  auto a = regularize(raw, "m", 60, GapPolicy::fill_zero);
  auto b = regularize(sorted_in, "m", 60, GapPolicy::fill_zero);
  CHECK(a.samples() == b.samples());
}

TEST_CASE("moving average of a constant series is the constant, bit-exact") {
  std::vector<std::pair<std::int64_t, double>> raw;
  for (int i = 0; i < 120; ++i) raw.emplace_back(i * 60, 5.0);
  auto smoothed = moving_average(regularize(raw, "m", 60, GapPolicy::leave_gap), 600);
  REQUIRE(smoothed.size() == 120);
  for (const Sample& s : smoothed.samples()) CHECK(s.value == 5.0);
}

TEST_CASE("moving average ramps in over a partial head window") {
  // 1-minute samples 1,2,3,4 under a 2-minute window.
  auto series = MetricSeries("m", 60, {{0, 1.0}, {60, 2.0}, {120, 3.0}, {180, 4.0}});
  auto smoothed = moving_average(series, 120);
  REQUIRE(smoothed.size() == 4);
  CHECK(smoothed.samples()[0].value == doctest::Approx(1.0));
  CHECK(smoothed.samples()[1].value == doctest::Approx(1.5));
  CHECK(smoothed.samples()[2].value == doctest::Approx(2.5));
  CHECK(smoothed.samples()[3].value == doctest::Approx(3.5));
}

TEST_CASE("moving average excludes gap buckets from the mean") {
  // Gap at 60: the window ending at 120 only sees the samples at 0 and 120.
  auto series = MetricSeries("m", 60, {{0, 10.0}, {120, 20.0}});
  auto smoothed = moving_average(series, 180);
  REQUIRE(smoothed.size() == 2);
  CHECK(smoothed.samples()[1].value == doctest::Approx(15.0));
}

TEST_CASE("moving average preserves the timestamp grid") {
  std::vector<std::pair<std::int64_t, double>> raw;
  for (int i = 0; i < 50; ++i) raw.emplace_back(i * 97 * 60, double(i));
  auto series = regularize(raw, "m", 60, GapPolicy::leave_gap);
  auto smoothed = moving_average(series, 600);
  REQUIRE(smoothed.size() == series.size());
  for (std::size_t i = 0; i < series.size(); ++i)
    CHECK(smoothed.samples()[i].ts == series.samples()[i].ts);
}

TEST_CASE("moving average stays within the window min and max") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> val_dist(-100.0, 100.0);
  std::bernoulli_distribution keep(0.8);
  std::vector<std::pair<std::int64_t, double>> raw;
  for (int i = 0; i < 400; ++i)
    if (keep(rng)) raw.emplace_back(i * 60, val_dist(rng));
  auto series = regularize(raw, "m", 60, GapPolicy::leave_gap);
  auto smoothed = moving_average(series, 600);
  auto vals = values_of(series.samples());
  const double lo = *std::min_element(vals.begin(), vals.end());
  const double hi = *std::max_element(vals.begin(), vals.end());
  for (const Sample& s : smoothed.samples()) {
    CHECK(s.value >= lo);
    CHECK(s.value <= hi);
  }
}

TEST_CASE("moving average rejects windows that do not fit the grid") {
  auto series = MetricSeries("m", 60, {{0, 1.0}});
  CHECK_THROWS_AS(moving_average(series, 30), std::invalid_argument);
  CHECK_THROWS_AS(moving_average(series, 90), std::invalid_argument);
}

TEST_CASE("series constructors reject off-grid and unsorted samples") {
  CHECK_THROWS_AS(MetricSeries("m", 60, {{0, 1.0}, {90, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(MetricSeries("m", 60, {{60, 1.0}, {0, 2.0}}), std::invalid_argument);
  CHECK_THROWS_AS(MetricSeries("", 60, {}), std::invalid_argument);
  CHECK_THROWS_AS(MetricSeries("m", 0, {}), std::invalid_argument);
}
