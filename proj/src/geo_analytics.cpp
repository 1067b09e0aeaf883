#include "netmon/geo_analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "netmon/io_util.hpp"
#include "netmon/time_util.hpp"

namespace netmon {

namespace {

bool better(const IpCount& a, const IpCount& b) {
  return a.count != b.count ? a.count > b.count : a.ip < b.ip;
}

std::optional<std::uint64_t> parse_u64(std::string_view text) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<AccessRecord> parse_access_csv(const std::string& line,
                                             std::string& error) {
  std::vector<std::string_view> fields;
  std::string_view rest = line;
  while (true) {
    const std::size_t comma = rest.find(',');
    fields.push_back(rest.substr(0, comma));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (fields.size() < 3 || fields.size() > 4) {
    error = "expected ts,ip,service[,count]";
    return std::nullopt;
  }
  const auto ts = parse_timestamp(fields[0]);
  if (!ts) {
    error = "bad timestamp";
    return std::nullopt;
  }
  const auto ip = parse_ipv4(fields[1]);
  if (!ip) {
    error = "bad client address";
    return std::nullopt;
  }
  if (fields[2].empty()) {
    error = "empty service";
    return std::nullopt;
  }
  AccessRecord r;
  r.ts = *ts;
  r.ip = *ip;
  r.service = std::string(fields[2]);
  if (fields.size() == 4) {
    const auto count = parse_u64(fields[3]);
    if (!count) {
      error = "bad count";
      return std::nullopt;
    }
    r.count = *count;
  }
  return r;
}

std::optional<AccessRecord> parse_access_jsonl(const std::string& line,
                                               std::string& error) {
  const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    error = "not a JSON object";
    return std::nullopt;
  }
  AccessRecord r;
  if (!j.contains("ts")) {
    error = "missing ts";
    return std::nullopt;
  }
  if (j["ts"].is_number_integer()) {
    r.ts = j["ts"].get<std::int64_t>();
  } else if (j["ts"].is_string()) {
    const auto ts = parse_timestamp(j["ts"].get<std::string>());
    if (!ts) {
      error = "bad timestamp";
      return std::nullopt;
    }
    r.ts = *ts;
  } else {
    error = "bad timestamp";
    return std::nullopt;
  }
  if (!j.contains("ip") || !j["ip"].is_string()) {
    error = "missing ip";
    return std::nullopt;
  }
  const auto ip = parse_ipv4(j["ip"].get<std::string>());
  if (!ip) {
    error = "bad client address";
    return std::nullopt;
  }
  r.ip = *ip;
  if (!j.contains("service") || !j["service"].is_string() ||
      j["service"].get<std::string>().empty()) {
    error = "missing service";
    return std::nullopt;
  }
  r.service = j["service"].get<std::string>();
  if (j.contains("count")) {
    if (!j["count"].is_number_unsigned()) {
      error = "bad count";
      return std::nullopt;
    }
    r.count = j["count"].get<std::uint64_t>();
  }
  return r;
}

}  // namespace

ParseStats parse_access_stream(std::istream& in, InputFormat format,
                               const std::function<void(AccessRecord&&)>& sink) {
  ParseStats stats;
  std::string line;
  while (std::getline(in, line)) {
    ++stats.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::string error;
    auto record = format == InputFormat::csv ? parse_access_csv(line, error)
                                             : parse_access_jsonl(line, error);
    if (record) {
      ++stats.parsed;
      sink(std::move(*record));
    } else {
      stats.note_error(stats.lines, std::move(error));
    }
  }
  if (in.bad()) throw std::runtime_error("error reading access stream");
  return stats;
}

std::string format_access_csv(const AccessRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%lld,%s,%s,%llu", static_cast<long long>(r.ts),
                format_ipv4(r.ip).c_str(), r.service.c_str(),
                static_cast<unsigned long long>(r.count));
  return buf;
}

std::size_t filter_whitelisted(std::vector<AccessRecord>& records,
                               const IpWhitelist& whitelist) {
  const auto removed = std::erase_if(
      records, [&](const AccessRecord& r) { return whitelist.contains(r.ip); });
  return removed;
}

VisitAggregate aggregate_visits(std::span<const AccessRecord> records,
                                const GeoIpTable& table, std::int64_t from,
                                std::int64_t to) {
  if (from >= to || from % 60 != 0 || to % 60 != 0)
    throw std::invalid_argument("aggregate window must be minute-aligned and non-empty");

  VisitAggregate agg;
  agg.from = from;
  agg.to = to;
  const std::size_t n_minutes = agg.minutes();

  for (const AccessRecord& r : records) {
    if (r.ts < from || r.ts >= to) {
      ++agg.out_of_range;
      continue;
    }
    const std::string country(table.country_of(r.ip));
    auto& minutes = agg.by_country[country];
    if (minutes.empty()) minutes.resize(n_minutes, 0);
    minutes[static_cast<std::size_t>((r.ts - from) / 60)] += r.count;
    agg.ips_by_country[country][r.ip] += r.count;
    agg.total_requests += r.count;
  }
  return agg;
}

std::vector<IpCount> top_k_ips(
    std::span<const std::pair<std::uint32_t, std::uint64_t>> counts, std::size_t k) {
  if (k == 0) return {};
  // priority_queue keeps its "largest" element on top; with `better` as the
  // ordering the top is the weakest kept entry, ready to be displaced.
  std::priority_queue<IpCount, std::vector<IpCount>, decltype(&better)> heap(&better);
  for (const auto& [ip, count] : counts) {
    IpCount c{ip, count};
    if (heap.size() < k) {
      heap.push(c);
    } else if (better(c, heap.top())) {
      heap.pop();
      heap.push(c);
    }
  }
  std::vector<IpCount> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<IpCount> top_k_ips(const VisitAggregate& agg, std::size_t k) {
  std::vector<std::pair<std::uint32_t, std::uint64_t>> counts;
  for (const auto& [country, ips] : agg.ips_by_country)
    for (const auto& [ip, count] : ips) counts.emplace_back(ip, count);
  return top_k_ips(counts, k);
}

CountryActivityModel build_country_model(std::string country,
                                         std::span<const std::uint64_t> minute_counts,
                                         double quantile) {
  if (quantile <= 0.0 || quantile >= 1.0)
    throw std::invalid_argument("quantile must be in (0, 1)");

  CountryActivityModel model;
  model.country = std::move(country);
  model.history_minutes = static_cast<std::int64_t>(minute_counts.size());
  if (minute_counts.empty()) return model;

  std::vector<std::uint64_t> sorted(minute_counts.begin(), minute_counts.end());
  std::sort(sorted.begin(), sorted.end());
  model.ever_seen = sorted.back() > 0;

  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    const std::uint64_t x = sorted[i];
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == x) ++j;
    // j minutes have count <= x, so the rest exceed it.
    model.ccdf.emplace_back(x, static_cast<double>(sorted.size() - j) / n);
    i = j;
  }

  if (model.ever_seen) {
    const double tail = 1.0 - quantile;
    for (const auto& [x, frac] : model.ccdf) {
      if (frac <= tail) {
        model.quantile_threshold = std::max<std::uint64_t>(x, 1);
        break;
      }
    }
  }
  return model;
}

std::map<std::string, CountryActivityModel> build_country_models(
    const VisitAggregate& history, double quantile) {
  std::map<std::string, CountryActivityModel> models;
  for (const auto& [country, minutes] : history.by_country)
    models.emplace(country, build_country_model(country, minutes, quantile));
  return models;
}

GeoDetectionReport detect_anomalous_visits(
    const VisitAggregate& live,
    const std::map<std::string, CountryActivityModel>& models, std::int64_t sustain,
    std::size_t max_contributors) {
  if (sustain <= 0) throw std::invalid_argument("sustain must be positive");

  GeoDetectionReport report;
  for (const auto& [country, counts] : live.by_country) {
    const auto model_it = models.find(country);
    const bool never_seen = model_it == models.end() || !model_it->second.ever_seen;
    if (model_it == models.end()) report.without_model.push_back(country);
    const std::uint64_t threshold =
        never_seen ? 1 : model_it->second.quantile_threshold;

    auto violates = [&](std::uint64_t c) { return never_seen ? c >= 1 : c > threshold; };

    std::vector<IpCount> contributors;
    for (std::size_t i = 0; i < counts.size();) {
      if (!violates(counts[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      std::uint64_t peak = 0;
      while (j < counts.size() && violates(counts[j])) {
        peak = std::max(peak, counts[j]);
        ++j;
      }
      const std::int64_t start = live.from + static_cast<std::int64_t>(i) * 60;
      const std::int64_t end = live.from + static_cast<std::int64_t>(j) * 60;
      if (end - start >= sustain) {
        if (contributors.empty()) {
          auto it = live.ips_by_country.find(country);
          if (it != live.ips_by_country.end()) {
            std::vector<std::pair<std::uint32_t, std::uint64_t>> pairs(
                it->second.begin(), it->second.end());
            contributors = top_k_ips(pairs, max_contributors);
          }
        }
        GeoAlert alert;
        alert.country = country;
        alert.start = start;
        alert.end = end;
        alert.peak_rate = static_cast<double>(peak);
        alert.model_threshold = threshold;
        alert.contributing_ips.reserve(contributors.size());
        for (const IpCount& c : contributors) alert.contributing_ips.push_back(c.ip);
        report.alerts.push_back(std::move(alert));
      }
      i = j;
    }
  }
  return report;
}

std::vector<MapRow> build_map_rows(const VisitAggregate& agg,
                                   std::span<const IpCount> global_top,
                                   std::size_t per_country) {
  std::unordered_set<std::uint32_t> top_set;
  top_set.reserve(global_top.size());
  for (const IpCount& c : global_top) top_set.insert(c.ip);

  std::vector<MapRow> rows;
  rows.reserve(agg.by_country.size());
  for (const auto& [country, minutes] : agg.by_country) {
    MapRow row;
    row.code = country;
    for (const std::uint64_t c : minutes) row.total += c;

    auto it = agg.ips_by_country.find(country);
    if (it != agg.ips_by_country.end()) {
      std::vector<IpCount> members;
      for (const auto& [ip, count] : it->second)
        if (top_set.contains(ip)) members.push_back({ip, count});
      std::sort(members.begin(), members.end(), better);
      if (members.size() > per_country) members.resize(per_country);
      row.top_ips = std::move(members);
    }
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [](const MapRow& a, const MapRow& b) {
    return a.total != b.total ? a.total > b.total : a.code < b.code;
  });
  return rows;
}

void write_map_export(const std::filesystem::path& path, std::span<const MapRow> rows,
                      std::int64_t from, std::int64_t to) {
  std::ostringstream out;
  out << "# netmon-map 1 from " << from << " to " << to << '\n';
  out << "country_code,total_visits,top_ips\n";
  for (const MapRow& row : rows) {
    out << row.code << ',' << row.total << ',';
    for (std::size_t i = 0; i < row.top_ips.size(); ++i) {
      if (i > 0) out << ';';
      out << format_ipv4(row.top_ips[i].ip) << ':' << row.top_ips[i].count;
    }
    out << '\n';
  }
  atomic_write_file(path, out.str());
}

void write_ip_ranking(const std::filesystem::path& path, std::span<const IpCount> rows,
                      const GeoIpTable& table) {
  std::ostringstream out;
  out << "# netmon-ips 1\n";
  out << "ip,count,country\n";
  for (const IpCount& row : rows)
    out << format_ipv4(row.ip) << ',' << row.count << ',' << table.country_of(row.ip)
        << '\n';
  atomic_write_file(path, out.str());
}

void write_country_models(const std::filesystem::path& path,
                          const std::map<std::string, CountryActivityModel>& models) {
  std::ostringstream out;
  out << "# netmon-ccdf 1\n";
  out << "country,history_minutes,threshold,ever_seen,ccdf\n";
  for (const auto& [country, model] : models) {
    out << country << ',' << model.history_minutes << ',' << model.quantile_threshold
        << ',' << (model.ever_seen ? 1 : 0) << ',';
    char buf[48];
    for (std::size_t i = 0; i < model.ccdf.size(); ++i) {
      if (i > 0) out << ';';
      std::snprintf(buf, sizeof(buf), "%llu:%.17g",
                    static_cast<unsigned long long>(model.ccdf[i].first),
                    model.ccdf[i].second);
      out << buf;
    }
    out << '\n';
  }
  atomic_write_file(path, out.str());
}

void append_geo_alerts(const std::filesystem::path& path,
                       std::span<const GeoAlert> alerts) {
  if (alerts.empty()) return;
  std::ostringstream out;
  for (const GeoAlert& a : alerts) {
    char head[128];
    std::snprintf(head, sizeof(head), "%s,%lld,%lld,%.17g,%llu,", a.country.c_str(),
                  static_cast<long long>(a.start), static_cast<long long>(a.end),
                  a.peak_rate, static_cast<unsigned long long>(a.model_threshold));
    out << head;
    for (std::size_t i = 0; i < a.contributing_ips.size(); ++i) {
      if (i > 0) out << ';';
      out << format_ipv4(a.contributing_ips[i]);
    }
    out << '\n';
  }
  append_to_file(path, out.str());
}

}  // namespace netmon
