#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "netmon/geoip.hpp"
#include "netmon/ingest.hpp"

namespace netmon {

// One service access: a request (or a pre-counted batch of them) from one
// client address.
struct AccessRecord {
  std::int64_t ts = 0;
  std::uint32_t ip = 0;
  std::string service;
  std::uint64_t count = 1;

  bool operator==(const AccessRecord&) const = default;
};

// Streams access records from CSV (ts,ip,service[,count]) or JSON lines
// ({"ts":..,"ip":"..","service":"..","count":..}). Timestamps accept epoch
// seconds or RFC 3339. Bad lines are skipped and reported in the stats.
ParseStats parse_access_stream(std::istream& in, InputFormat format,
                               const std::function<void(AccessRecord&&)>& sink);

std::string format_access_csv(const AccessRecord& r);

// Drops whitelisted client addresses in place; returns how many records
// were removed. Run before aggregation so that totals only ever reflect
// retained traffic.
std::size_t filter_whitelisted(std::vector<AccessRecord>& records,
                               const IpWhitelist& whitelist);

// Per-country request totals over a half-open minute-aligned window
// [from, to). Every country observed in range carries a dense per-minute
// vector (zeros included); per-IP totals live alongside. The sum of all
// minute vectors always equals total_requests.
struct VisitAggregate {
  std::int64_t from = 0;
  std::int64_t to = 0;
  std::map<std::string, std::vector<std::uint64_t>> by_country;
  std::map<std::string, std::unordered_map<std::uint32_t, std::uint64_t>>
      ips_by_country;
  std::uint64_t total_requests = 0;   // requests inside [from, to)
  std::uint64_t out_of_range = 0;     // records dropped for being outside

  std::size_t minutes() const { return static_cast<std::size_t>((to - from) / 60); }
};

VisitAggregate aggregate_visits(std::span<const AccessRecord> records,
                                const GeoIpTable& table, std::int64_t from,
                                std::int64_t to);

struct IpCount {
  std::uint32_t ip = 0;
  std::uint64_t count = 0;

  bool operator==(const IpCount&) const = default;
};

// Heaviest client addresses across all countries: count descending, ties by
// ascending numeric address. Bounded min-heap, so k much smaller than the
// address population stays cheap.
std::vector<IpCount> top_k_ips(const VisitAggregate& agg, std::size_t k);
std::vector<IpCount> top_k_ips(std::span<const std::pair<std::uint32_t, std::uint64_t>> counts,
                               std::size_t k);

// Activity model for one country: the complementary CDF of its per-minute
// request counts over a history window, and the count threshold at a chosen
// quantile. ccdf holds (x, fraction of minutes with count > x) for every
// distinct observed count (zero included), x ascending.
struct CountryActivityModel {
  std::string country;
  std::int64_t history_minutes = 0;
  std::vector<std::pair<std::uint64_t, double>> ccdf;
  std::uint64_t quantile_threshold = 1;
  bool ever_seen = false;
};

// quantile q in (0, 1): the threshold is the smallest count x with
// CCDF(x) <= 1 - q, floored at 1. A country with an all-zero history gets
// ever_seen = false and the floor threshold.
CountryActivityModel build_country_model(std::string country,
                                         std::span<const std::uint64_t> minute_counts,
                                         double quantile);

std::map<std::string, CountryActivityModel> build_country_models(
    const VisitAggregate& history, double quantile);

// Sustained per-country visit anomaly. end is exclusive (last anomalous
// minute + 60), so end - start is the anomaly duration in seconds.
struct GeoAlert {
  std::string country;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double peak_rate = 0.0;            // highest per-minute count in the run
  std::uint64_t model_threshold = 1;  // effective threshold that was exceeded
  std::vector<std::uint32_t> contributing_ips;  // heaviest first
};

struct GeoDetectionReport {
  std::vector<GeoAlert> alerts;
  std::vector<std::string> without_model;  // countries treated as never seen
};

// Flags countries whose live per-minute counts stay anomalous for at least
// sustain seconds: above the model threshold for known countries, any
// activity at all for countries never seen in the history. contributing_ips
// lists the country's heaviest addresses over the live window.
GeoDetectionReport detect_anomalous_visits(
    const VisitAggregate& live,
    const std::map<std::string, CountryActivityModel>& models,
    std::int64_t sustain, std::size_t max_contributors = 32);

// One row of the country map export.
struct MapRow {
  std::string code;
  std::uint64_t total = 0;
  std::vector<IpCount> top_ips;  // country's members of the global top set
};

// Rows ordered by total descending, ties by code ascending. Each row's IP
// list is the country's slice of global_top, capped at per_country.
std::vector<MapRow> build_map_rows(const VisitAggregate& agg,
                                   std::span<const IpCount> global_top,
                                   std::size_t per_country = 10);

// Writes "# netmon-map 1 from <ts> to <ts>" then one
// country_code,total_visits,top_ips row per country, top_ips as
// "ip:count;ip:count;...".
void write_map_export(const std::filesystem::path& path,
                      std::span<const MapRow> rows, std::int64_t from,
                      std::int64_t to);

// Writes "# netmon-ips 1" then ip,count,country rows, heaviest first.
void write_ip_ranking(const std::filesystem::path& path,
                      std::span<const IpCount> rows, const GeoIpTable& table);

// Writes "# netmon-ccdf 1" then one
// country,history_minutes,threshold,ever_seen,x:ccdf;... row per model.
void write_country_models(const std::filesystem::path& path,
                          const std::map<std::string, CountryActivityModel>& models);

// Appends country,start,end,peak_rate,threshold,ips rows ("ips" joined with
// ';') to the sink; creates the file on first use.
void append_geo_alerts(const std::filesystem::path& path,
                       std::span<const GeoAlert> alerts);

}  // namespace netmon
