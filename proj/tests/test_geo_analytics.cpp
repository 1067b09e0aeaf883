#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "netmon/geo_analytics.hpp"
#include "oracles.hpp"

using namespace netmon;

namespace {

std::vector<AccessRecord> parse_all(const std::string& text, InputFormat format,
                                    ParseStats* stats = nullptr) {
  std::istringstream in(text);
  std::vector<AccessRecord> out;
  ParseStats s =
      parse_access_stream(in, format, [&](AccessRecord&& r) { out.push_back(std::move(r)); });
  if (stats) *stats = s;
  return out;
}

// 10.0.0.0/24 -> AA, 10.0.1.0/24 -> BB; everything else unknown.
GeoIpTable two_country_table() {
  return GeoIpTable({{0x0a000000, 0x0a0000ff, "AA", "Aaland"},
                     {0x0a000100, 0x0a0001ff, "BB", "Beeland"}});
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() /
         (std::string(name) + "." + std::to_string(::getpid()));
}

}  // namespace

TEST_CASE("access logs parse from csv with optional counts") {
  ParseStats stats;
  auto records = parse_all(
      "# ts,ip,service,count\n"
      "1000,10.0.0.5,web\n"
      "2025-09-01T00:00:30Z,10.0.1.9,web,7\n"
      "1060,not-an-ip,web\n"
      "1060,10.0.0.5,web,minus\n"
      "1060,10.0.0.5,\n",
      InputFormat::csv, &stats);
  REQUIRE(records.size() == 2);
  CHECK(records[0] == AccessRecord{1000, 0x0a000005, "web", 1});
  CHECK(records[1] == AccessRecord{1756684830, 0x0a000109, "web", 7});
  CHECK(stats.skipped == 3);
  REQUIRE(stats.errors.size() == 3);
  CHECK(stats.errors[0].second == "bad client address");
  CHECK(stats.errors[1].second == "bad count");
  CHECK(stats.errors[2].second == "empty service");
}

TEST_CASE("access logs parse from json lines") {
  ParseStats stats;
  auto records = parse_all(
      R"({"ts":1000,"ip":"10.0.0.5","service":"web"})"
      "\n"
      R"({"ts":"2025-09-01T00:00:30Z","ip":"10.0.1.9","service":"api","count":3})"
      "\n"
      R"({"ts":1000,"service":"web"})"
      "\n"
      "not json\n",
      InputFormat::jsonl, &stats);
  REQUIRE(records.size() == 2);
  CHECK(records[0].count == 1);
  CHECK(records[1].service == "api");
  CHECK(records[1].count == 3);
  REQUIRE(stats.errors.size() == 2);
  CHECK(stats.errors[0].second == "missing ip");
  CHECK(stats.errors[1].second == "not a JSON object");
}

TEST_CASE("access csv rendering parses back to the same record") {
  AccessRecord r{1756684830, 0x0a000109, "web", 42};
  auto parsed = parse_all(format_access_csv(r) + "\n", InputFormat::csv);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0] == r);
}

TEST_CASE("whitelisted clients are dropped before any counting") {
  std::vector<AccessRecord> records = {{60, 0x0a000005, "web", 1},
                                       {60, 0x0a000105, "web", 1},
                                       {120, 0x0a000005, "web", 1}};
  IpWhitelist wl;
  wl.add("10.0.0.0/24");
  CHECK(filter_whitelisted(records, wl) == 2);
  REQUIRE(records.size() == 1);
  CHECK(records[0].ip == 0x0a000105);
}

TEST_CASE("three records from two countries land in one aggregate minute") {
  std::vector<AccessRecord> records = {{10, 0x0a000005, "web", 1},
                                       {30, 0x0a000006, "web", 1},
                                       {50, 0x0a000105, "web", 1}};
  auto agg = aggregate_visits(records, two_country_table(), 0, 60);
  REQUIRE(agg.by_country.size() == 2);
  CHECK(agg.by_country.at("AA") == std::vector<std::uint64_t>{2});
  CHECK(agg.by_country.at("BB") == std::vector<std::uint64_t>{1});
  CHECK(agg.total_requests == 3);
  CHECK(agg.out_of_range == 0);
  CHECK(agg.ips_by_country.at("AA").at(0x0a000005) == 1);
}

TEST_CASE("an empty record set aggregates to an empty summary") {
  auto agg = aggregate_visits({}, two_country_table(), 0, 3600);
  CHECK(agg.by_country.empty());
  CHECK(agg.total_requests == 0);
  CHECK(agg.minutes() == 60);
}

TEST_CASE("per-minute vectors conserve the total including unknown origins") {
  std::mt19937 rng(61);
  std::vector<AccessRecord> records;
  for (int i = 0; i < 2000; ++i) {
    AccessRecord r;
    r.ts = static_cast<std::int64_t>(rng() % 4000) - 200;  // some out of range
    r.ip = (rng() % 3 == 0) ? 0x0a000000 + rng() % 512     // AA or BB
                            : rng();                       // mostly unknown
    r.service = "web";
    r.count = 1 + rng() % 5;
    records.push_back(r);
  }
  auto agg = aggregate_visits(records, two_country_table(), 0, 3600);

  std::uint64_t in_range = 0;
  for (const auto& r : records)
    if (r.ts >= 0 && r.ts < 3600) in_range += r.count;
  std::uint64_t bucketed = 0;
  for (const auto& [country, minutes] : agg.by_country) {
    REQUIRE(minutes.size() == agg.minutes());
    for (std::uint64_t c : minutes) bucketed += c;
  }
  std::uint64_t by_ip = 0;
  for (const auto& [country, ips] : agg.ips_by_country)
    for (const auto& [ip, count] : ips) by_ip += count;

  CHECK(agg.total_requests == in_range);
  CHECK(bucketed == in_range);
  CHECK(by_ip == in_range);
  CHECK(agg.by_country.contains("ZZ"));
  CHECK(agg.out_of_range ==
        static_cast<std::uint64_t>(records.size()) -
            [&] {
              std::uint64_t n = 0;
              for (const auto& r : records)
                if (r.ts >= 0 && r.ts < 3600) ++n;
              return n;
            }());
}

TEST_CASE("aggregate windows must be minute-aligned and non-empty") {
  CHECK_THROWS_AS(aggregate_visits({}, two_country_table(), 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_visits({}, two_country_table(), 30, 90),
                  std::invalid_argument);
  CHECK_THROWS_AS(aggregate_visits({}, two_country_table(), 0, 90), std::invalid_argument);
}

TEST_CASE("asking for more top addresses than exist returns them all, ordered") {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> counts = {
      {30, 5}, {10, 9}, {20, 5}};
  auto top = top_k_ips(counts, 10);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == IpCount{10, 9});
  CHECK(top[1] == IpCount{20, 5});  // tie broken by ascending address
  CHECK(top[2] == IpCount{30, 5});
  CHECK(top_k_ips(counts, 0).empty());
}

TEST_CASE("the bounded heap matches a full sort on random populations") {
  std::mt19937 rng(67);
  for (int round = 0; round < 30; ++round) {
    std::vector<std::pair<std::uint32_t, std::uint64_t>> counts;
    const std::size_t n = 1 + rng() % 400;
    for (std::size_t i = 0; i < n; ++i)
      counts.emplace_back(rng() % 1000, rng() % 20);  // collisions and ties likely
    const std::size_t k = 1 + rng() % 50;
    auto expected = oracle::top_k(counts, k);
    auto actual = top_k_ips(counts, k);
    REQUIRE(actual.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(actual[i].ip == expected[i].first);
      CHECK(actual[i].count == expected[i].second);
    }
  }
}

TEST_CASE("the ccdf of 0,0,1,3 steps through one half, one quarter, zero") {
  std::vector<std::uint64_t> counts = {0, 0, 1, 3};
  auto model = build_country_model("AA", counts, 0.99);
  REQUIRE(model.ccdf.size() == 3);
  CHECK(model.ccdf[0] == std::pair<std::uint64_t, double>{0, 0.5});
  CHECK(model.ccdf[1] == std::pair<std::uint64_t, double>{1, 0.25});
  CHECK(model.ccdf[2] == std::pair<std::uint64_t, double>{3, 0.0});
  CHECK(model.ever_seen);
  CHECK(model.history_minutes == 4);
}

TEST_CASE("an all-zero history never counts as seen") {
  std::vector<std::uint64_t> zeros(100, 0);
  auto model = build_country_model("QQ", zeros, 0.99);
  CHECK_FALSE(model.ever_seen);
  CHECK(model.quantile_threshold == 1);
  REQUIRE(model.ccdf.size() == 1);
  CHECK(model.ccdf[0].second == 0.0);

  auto empty = build_country_model("QQ", {}, 0.99);
  CHECK_FALSE(empty.ever_seen);
  CHECK(empty.ccdf.empty());
}

TEST_CASE("the quantile threshold is the smallest count inside the tail") {
  // Counts 1..100: CCDF(x) = (100 - x) / 100.
  std::vector<std::uint64_t> counts;
  for (std::uint64_t x = 1; x <= 100; ++x) counts.push_back(x);
  auto model = build_country_model("AA", counts, 0.95);
  CHECK(model.quantile_threshold == 95);

  // A quantile so low the first distinct value qualifies; the floor is 1.
  std::vector<std::uint64_t> zeros_then_one = {0, 0, 0, 1};
  auto floored = build_country_model("AA", zeros_then_one, 0.5);
  CHECK(floored.quantile_threshold == 1);

  CHECK_THROWS_AS(build_country_model("AA", counts, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_country_model("AA", counts, 1.0), std::invalid_argument);
}

TEST_CASE("ccdf values agree with direct counting and decrease to zero") {
  std::mt19937 rng(71);
  for (int round = 0; round < 30; ++round) {
    std::vector<std::uint64_t> counts(1 + rng() % 300);
    for (auto& c : counts) c = rng() % 15;
    auto model = build_country_model("AA", counts, 0.9);
    auto expected = oracle::ccdf(counts);
    REQUIRE(model.ccdf.size() == expected.size());
    double prev = 1.1;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(model.ccdf[i].first == expected[i].first);
      CHECK(model.ccdf[i].second == expected[i].second);
      CHECK(model.ccdf[i].second <= prev);
      prev = model.ccdf[i].second;
    }
    CHECK(model.ccdf.back().second == 0.0);
  }
}

TEST_CASE("a sustained burst from an unseen country raises one alert") {
  VisitAggregate live;
  live.from = 0;
  live.to = 3600;
  auto& counts = live.by_country["XX"];
  counts.assign(60, 0);
  for (int minute = 10; minute < 40; ++minute) counts[minute] = 1;
  live.ips_by_country["XX"][0x63090909] = 30;

  auto report = detect_anomalous_visits(live, {}, 1800);
  REQUIRE(report.alerts.size() == 1);
  CHECK(report.alerts[0].country == "XX");
  CHECK(report.alerts[0].start == 600);
  CHECK(report.alerts[0].end == 2400);
  CHECK(report.alerts[0].model_threshold == 1);
  CHECK(report.alerts[0].peak_rate == doctest::Approx(1.0));
  CHECK(report.alerts[0].contributing_ips == std::vector<std::uint32_t>{0x63090909});
  CHECK(report.without_model == std::vector<std::string>{"XX"});
}

TEST_CASE("one minute short of the sustain window stays quiet") {
  VisitAggregate live;
  live.from = 0;
  live.to = 3600;
  auto& counts = live.by_country["XX"];
  counts.assign(60, 0);
  for (int minute = 10; minute < 39; ++minute) counts[minute] = 50;
  CHECK(detect_anomalous_visits(live, {}, 1800).alerts.empty());
}

TEST_CASE("a known country inside its usual rates stays quiet") {
  VisitAggregate history;
  history.from = 0;
  history.to = 7 * 86400;
  history.by_country["AA"].assign(history.minutes(), 5);
  auto models = build_country_models(history, 0.99);
  CHECK(models.at("AA").quantile_threshold == 5);

  VisitAggregate live;
  live.from = 7 * 86400;
  live.to = 7 * 86400 + 3600;
  live.by_country["AA"].assign(60, 5);  // at, not above, the threshold
  auto report = detect_anomalous_visits(live, models, 1800);
  CHECK(report.alerts.empty());
  CHECK(report.without_model.empty());
}

TEST_CASE("a known country above its threshold for long enough alerts") {
  VisitAggregate history;
  history.from = 0;
  history.to = 7 * 86400;
  history.by_country["AA"].assign(history.minutes(), 5);
  auto models = build_country_models(history, 0.99);

  VisitAggregate live;
  live.from = 0;
  live.to = 3600;
  live.by_country["AA"].assign(60, 6);
  live.ips_by_country["AA"][0x0a000005] = 300;
  live.ips_by_country["AA"][0x0a000006] = 60;

  auto report = detect_anomalous_visits(live, models, 1800);
  REQUIRE(report.alerts.size() == 1);
  CHECK(report.alerts[0].model_threshold == 5);
  CHECK(report.alerts[0].end - report.alerts[0].start == 3600);
  // Heaviest address first.
  REQUIRE(report.alerts[0].contributing_ips.size() == 2);
  CHECK(report.alerts[0].contributing_ips[0] == 0x0a000005);
}

TEST_CASE("a modeled country that never had traffic is treated as unseen") {
  VisitAggregate history;
  history.from = 0;
  history.to = 86400;
  history.by_country["QQ"].assign(history.minutes(), 0);
  auto models = build_country_models(history, 0.99);

  VisitAggregate live;
  live.from = 0;
  live.to = 3600;
  live.by_country["QQ"].assign(60, 1);
  auto report = detect_anomalous_visits(live, models, 1800);
  REQUIRE(report.alerts.size() == 1);
  CHECK(report.alerts[0].model_threshold == 1);
  // The model exists, so the country is not reported as missing one.
  CHECK(report.without_model.empty());
}

TEST_CASE("whitelisting the burst source removes the alert it caused") {
  auto make_records = [] {
    std::vector<AccessRecord> records;
    for (int minute = 0; minute < 40; ++minute)
      records.push_back({static_cast<std::int64_t>(minute) * 60, 0x63090909, "web", 1});
    return records;
  };
  GeoIpTable table({{0x63090909, 0x63090909, "XX", ""}});

  auto noisy = make_records();
  auto live = aggregate_visits(noisy, table, 0, 3600);
  CHECK(detect_anomalous_visits(live, {}, 1800).alerts.size() == 1);

  IpWhitelist wl;
  wl.add("99.9.9.9");
  auto filtered = make_records();
  filter_whitelisted(filtered, wl);
  CHECK(filtered.empty());
  auto quiet = aggregate_visits(filtered, table, 0, 3600);
  CHECK(detect_anomalous_visits(quiet, {}, 1800).alerts.empty());
}

TEST_CASE("map rows order countries by weight and keep only global leaders") {
  VisitAggregate agg;
  agg.from = 0;
  agg.to = 120;
  agg.by_country["AA"] = {10, 5};
  agg.by_country["BB"] = {100, 0};
  agg.by_country["CC"] = {10, 5};
  agg.ips_by_country["AA"] = {{1, 10}, {2, 5}};
  agg.ips_by_country["BB"] = {{3, 100}};
  agg.ips_by_country["CC"] = {{4, 15}};

  std::vector<IpCount> global_top = {{3, 100}, {4, 15}, {1, 10}};
  auto rows = build_map_rows(agg, global_top, 10);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].code == "BB");
  CHECK(rows[0].total == 100);
  CHECK(rows[1].code == "AA");  // 15 apiece; code breaks the tie
  CHECK(rows[2].code == "CC");
  // AA's address 2 is not in the global top set, so only address 1 survives.
  REQUIRE(rows[1].top_ips.size() == 1);
  CHECK(rows[1].top_ips[0] == IpCount{1, 10});
}

TEST_CASE("per-country map lists respect the cap") {
  VisitAggregate agg;
  agg.from = 0;
  agg.to = 60;
  agg.by_country["AA"] = {100};
  std::vector<IpCount> global_top;
  for (std::uint32_t ip = 1; ip <= 20; ++ip) {
    agg.ips_by_country["AA"][ip] = 100 - ip;
    global_top.push_back({ip, 100 - ip});
  }
  auto rows = build_map_rows(agg, global_top, 10);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].top_ips.size() == 10);
  CHECK(rows[0].top_ips[0] == IpCount{1, 99});
  CHECK(rows[0].top_ips[9] == IpCount{10, 90});
}

TEST_CASE("the map export writes one row per country under a header") {
  VisitAggregate agg;
  agg.from = 0;
  agg.to = 60;
  agg.by_country["AA"] = {3};
  agg.by_country["BB"] = {9};
  agg.ips_by_country["AA"] = {{0x0a000005, 3}};
  agg.ips_by_country["BB"] = {{0x0a000105, 9}};
  auto rows = build_map_rows(agg, top_k_ips(agg, 10), 10);

  auto path = temp_path("map-export");
  write_map_export(path, rows, 0, 60);
  CHECK(read_file(path) ==
        "# netmon-map 1 from 0 to 60\n"
        "country_code,total_visits,top_ips\n"
        "BB,9,10.0.1.5:9\n"
        "AA,3,10.0.0.5:3\n");

  write_map_export(path, {}, 0, 60);
  CHECK(read_file(path) ==
        "# netmon-map 1 from 0 to 60\n"
        "country_code,total_visits,top_ips\n");
  std::filesystem::remove(path);
}

TEST_CASE("the address ranking export resolves countries per row") {
  std::vector<IpCount> rows = {{0x0a000105, 9}, {0x63090909, 2}};
  auto path = temp_path("ip-ranking");
  write_ip_ranking(path, rows, two_country_table());
  CHECK(read_file(path) ==
        "# netmon-ips 1\n"
        "ip,count,country\n"
        "10.0.1.5,9,BB\n"
        "99.9.9.9,2,ZZ\n");
  std::filesystem::remove(path);
}

TEST_CASE("country models export one line per country") {
  std::map<std::string, CountryActivityModel> models;
  models.emplace("AA", build_country_model("AA", std::vector<std::uint64_t>{0, 0, 1, 3},
                                           0.99));
  auto path = temp_path("ccdf-export");
  write_country_models(path, models);
  CHECK(read_file(path) ==
        "# netmon-ccdf 1\n"
        "country,history_minutes,threshold,ever_seen,ccdf\n"
        "AA,4,3,1,0:0.5;1:0.25;3:0\n");
  std::filesystem::remove(path);
}

TEST_CASE("geo alerts append to the sink without truncating it") {
  GeoAlert a;
  a.country = "XX";
  a.start = 600;
  a.end = 2400;
  a.peak_rate = 50.0;
  a.model_threshold = 1;
  a.contributing_ips = {0x63090909, 0x0a000005};

  auto path = temp_path("geo-alert-sink");
  std::filesystem::remove(path);
  append_geo_alerts(path, std::vector<GeoAlert>{a});
  append_geo_alerts(path, std::vector<GeoAlert>{a});
  CHECK(read_file(path) ==
        "XX,600,2400,50,1,99.9.9.9;10.0.0.5\n"
        "XX,600,2400,50,1,99.9.9.9;10.0.0.5\n");
  std::filesystem::remove(path);
}
