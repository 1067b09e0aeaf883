#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "netmon/geoip.hpp"
#include "netmon/synth.hpp"
#include "netmon/time_util.hpp"

using namespace netmon;

namespace {

// Monday 2025-09-01 00:00 UTC.
constexpr std::int64_t kMonday = 1756684800;

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string(name) + "." + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

SyntheticSpec quiet_spec() {
  SyntheticSpec spec;
  spec.weeks = 1;
  spec.resolution = 3600;
  spec.end_ts = kMonday;
  spec.noise = 0.0;
  spec.metric_prefix = "m";
  return spec;
}

}  // namespace

TEST_CASE("the gaussian source replays identically for a seed") {
  GaussianSource a(42), b(42), c(43);
  bool all_equal = true, any_differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.next();
    all_equal = all_equal && x == b.next();
    any_differs = any_differs || x != c.next();
  }
  CHECK(all_equal);
  CHECK(any_differs);

  GaussianSource u(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("the gaussian source is roughly standard normal") {
  GaussianSource g(1234);
  const int n = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = g.next();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("generation is deterministic in the spec and moves with the seed") {
  SyntheticSpec spec = quiet_spec();
  spec.noise = 0.1;
  spec.metrics = 2;
  auto first = generate_synthetic_records(spec);
  auto second = generate_synthetic_records(spec);
  CHECK(first == second);

  spec.seed = 2;
  auto reseeded = generate_synthetic_records(spec);
  REQUIRE(reseeded.size() == first.size());
  CHECK(reseeded != first);
}

TEST_CASE("each metric covers the window on its grid") {
  SyntheticSpec spec = quiet_spec();
  spec.metrics = 2;
  auto records = generate_synthetic_records(spec);
  REQUIRE(records.size() == 2 * 168);  // hourly for a week, per metric
  CHECK(records[0].ts == kMonday - kSecondsPerWeek);
  CHECK(records[0].metric_id == "m.0");
  CHECK(records[167].ts == kMonday - 3600);
  CHECK(records[168].metric_id == "m.1");
  for (int i = 1; i < 168; ++i) CHECK(records[i].ts - records[i - 1].ts == 3600);
}

TEST_CASE("without noise the stream follows the daily sine exactly") {
  SyntheticSpec spec = quiet_spec();
  auto records = generate_synthetic_records(spec);
  for (const auto& r : records) CHECK(r.value == synth_level(spec, r.ts));

  const std::int64_t midnight = kMonday - kSecondsPerWeek;
  CHECK(synth_level(spec, midnight) == doctest::Approx(1000.0));
  CHECK(synth_level(spec, midnight + 6 * 3600) == doctest::Approx(1500.0));  // sine peak
  CHECK(synth_level(spec, midnight + 18 * 3600) == doctest::Approx(500.0));  // trough
}

TEST_CASE("weekends are damped by the configured factor") {
  SyntheticSpec spec = quiet_spec();
  spec.weekend_damping = 0.5;
  const std::int64_t start = kMonday - kSecondsPerWeek;
  const std::int64_t wednesday_noon = start + 2 * kSecondsPerDay + 43200;
  const std::int64_t saturday_noon = start + 5 * kSecondsPerDay + 43200;
  const std::int64_t sunday_noon = start + 6 * kSecondsPerDay + 43200;
  CHECK(synth_level(spec, saturday_noon) ==
        doctest::Approx(0.5 * synth_level(spec, wednesday_noon)));
  CHECK(synth_level(spec, sunday_noon) ==
        doctest::Approx(0.5 * synth_level(spec, wednesday_noon)));
}

TEST_CASE("injections scale their window only and stack multiplicatively") {
  SyntheticSpec spec = quiet_spec();
  const std::int64_t t0 = kMonday - 86400;
  spec.injections = {{"m.0", t0, 7200, 3.0}, {"m.0", t0 + 3600, 7200, 2.0}};

  CHECK(synth_injection_factor(spec, "m.0", t0 - 3600) == 1.0);
  CHECK(synth_injection_factor(spec, "m.0", t0) == 3.0);
  CHECK(synth_injection_factor(spec, "m.0", t0 + 3600) == 6.0);  // overlap
  CHECK(synth_injection_factor(spec, "m.0", t0 + 7200) == 2.0);
  CHECK(synth_injection_factor(spec, "m.0", t0 + 10800) == 1.0);  // end exclusive
  CHECK(synth_injection_factor(spec, "m.1", t0) == 1.0);          // other metric

  auto records = generate_synthetic_records(spec);
  for (const auto& r : records)
    CHECK(r.value ==
          synth_level(spec, r.ts) * synth_injection_factor(spec, "m.0", r.ts));
}

TEST_CASE("a written dataset reads back with its injection labels") {
  SyntheticSpec spec = quiet_spec();
  spec.injections = {{"m.0", kMonday - 86400, 1800, 2.5}};
  auto root = temp_dir("synth-dataset");

  auto summary = write_synth_dataset(spec, root);
  CHECK(summary.start == kMonday - kSecondsPerWeek);
  CHECK(summary.end == kMonday);
  CHECK(summary.records == 168);
  CHECK(summary.metric_ids == std::vector<std::string>{"m.0"});
  CHECK(list_partition_metrics(root) == std::vector<std::string>{"m.0"});

  auto records = read_metric_partitions(root, "m.0", summary.start, summary.end);
  REQUIRE(records.size() == 168);
  CHECK(records.front().ts == summary.start);
  CHECK(records.back().ts == kMonday - 3600);

  auto labels = read_injection_labels(root / "labels.csv");
  REQUIRE(labels.size() == 1);
  CHECK(labels[0].metric_id == "m.0");
  CHECK(labels[0].start == kMonday - 86400);
  CHECK(labels[0].duration == 1800);
  CHECK(labels[0].multiplier == 2.5);
  std::filesystem::remove_all(root);
}

TEST_CASE("malformed generator specs are rejected up front") {
  SyntheticSpec spec = quiet_spec();
  spec.end_ts = 0;
  CHECK_THROWS_WITH_AS(spec.validate(), "end_ts must be set and grid-aligned",
                       std::invalid_argument);
  spec = quiet_spec();
  spec.resolution = 7000;  // does not divide a week
  CHECK_THROWS_WITH_AS(spec.validate(), "resolution must divide a week",
                       std::invalid_argument);
  spec = quiet_spec();
  spec.daily_amplitude = 1.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = quiet_spec();
  spec.injections = {{"m.0", 0, 0, 2.0}};
  CHECK_THROWS_WITH_AS(spec.validate(), "injection duration must be positive",
                       std::invalid_argument);
}

TEST_CASE("access generation is deterministic and stays inside the blocks") {
  AccessSpec spec;
  spec.start = kMonday;
  spec.end = kMonday + 1800;
  spec.base_rate = 40.0;
  spec.mix = {{"AA", 3.0, 0x0a000000, 256}, {"BB", 1.0, 0x0a000100, 16}};

  auto first = generate_access_records(spec);
  auto second = generate_access_records(spec);
  CHECK(first == second);
  REQUIRE(!first.empty());
  for (const auto& r : first) {
    const bool in_aa = r.ip >= 0x0a000000 && r.ip <= 0x0a0000ff;
    const bool in_bb = r.ip >= 0x0a000100 && r.ip <= 0x0a00010f;
    CHECK((in_aa || in_bb));
    CHECK(r.ts >= spec.start);
    CHECK(r.ts < spec.end);
    CHECK(r.service == "web");
  }
}

TEST_CASE("bursts emit an exact evenly spaced stream from one address") {
  AccessSpec spec;
  spec.start = kMonday;
  spec.end = kMonday + 600;
  spec.base_rate = 0.0;  // bursts only
  spec.mix = {{"AA", 1.0, 0x0a000000, 256}};
  // Five minutes in range, the rest clipped by the window.
  spec.bursts = {{"XX", kMonday + 300, 10, 4, 0x63090909}};

  auto records = generate_access_records(spec);
  REQUIRE(records.size() == 5 * 4);
  std::set<std::int64_t> seen;
  for (const auto& r : records) {
    CHECK(r.ip == 0x63090909);
    seen.insert(r.ts);
  }
  // per_minute 4 lands at :00 :15 :30 :45 of each covered minute.
  CHECK(seen.count(kMonday + 300));
  CHECK(seen.count(kMonday + 315));
  CHECK(seen.count(kMonday + 345));
  CHECK(seen.size() == 20);
}

TEST_CASE("the access window must be minute-aligned and non-empty") {
  AccessSpec spec;
  spec.start = kMonday + 30;
  spec.end = kMonday + 90;
  spec.mix = {{"AA", 1.0, 0, 1}};
  CHECK_THROWS_WITH_AS(spec.validate(), "access window must be minute-aligned and non-empty",
                       std::invalid_argument);
  spec.start = spec.end = kMonday;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.start = kMonday;
  spec.end = kMonday + 60;
  spec.mix = {{"AA", 1.0, 0xffffffff, 2}};  // block wraps
  CHECK_THROWS_WITH_AS(spec.validate(), "client address block wraps past 255.255.255.255",
                       std::invalid_argument);
}

TEST_CASE("a written access dataset carries a matching country database") {
  AccessSpec spec;
  spec.start = kMonday;
  spec.end = kMonday + 600;
  spec.base_rate = 30.0;
  spec.mix = {{"AA", 2.0, 0x0a000000, 256}, {"BB", 1.0, 0x0a000100, 16}};
  spec.bursts = {{"XX", kMonday, 5, 3, 0x63090909}};

  auto dir = temp_dir("access-dataset");
  auto summary = write_access_dataset(spec, dir / "access.csv", dir / "geoip.csv");
  CHECK(summary.ranges == 3);

  auto table = load_geoip(dir / "geoip.csv");
  CHECK(table.country_of(0x0a000005) == "AA");
  CHECK(table.country_of(0x0a000105) == "BB");
  CHECK(table.country_of(0x63090909) == "XX");

  std::ifstream in(dir / "access.csv");
  REQUIRE(in.good());
  std::size_t parsed = 0;
  ParseStats stats = parse_access_stream(in, InputFormat::csv,
                                         [&](AccessRecord&&) { ++parsed; });
  CHECK(parsed == summary.records);
  CHECK(stats.errors.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("burst addresses cannot contradict the mix geography") {
  AccessSpec spec;
  spec.start = kMonday;
  spec.end = kMonday + 120;
  spec.mix = {{"AA", 1.0, 0x0a000000, 256}};
  spec.bursts = {{"BB", kMonday, 1, 1, 0x0a000005}};  // inside AA's block
  auto dir = temp_dir("access-conflict");
  CHECK_THROWS_WITH_AS(
      write_access_dataset(spec, dir / "a.csv", dir / "g.csv"),
      "burst address 10.0.0.5 belongs to mix country AA", std::invalid_argument);

  spec.bursts = {{"XX", kMonday, 1, 1, 0x63090909}, {"YY", kMonday, 1, 1, 0x63090909}};
  CHECK_THROWS_WITH_AS(
      write_access_dataset(spec, dir / "a.csv", dir / "g.csv"),
      "burst address 99.9.9.9 reused for two countries", std::invalid_argument);
  std::filesystem::remove_all(dir);
}
