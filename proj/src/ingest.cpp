#include "netmon/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

#include "netmon/io_util.hpp"
#include "netmon/time_util.hpp"

namespace netmon {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxReportedErrors = 10;

bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && std::isfinite(out);
}

// timestamp,metric_id,value[,k=v;k=v]
bool parse_csv_record(std::string_view line, MetricRecord& out, std::string& reason) {
  const std::size_t c1 = line.find(',');
  if (c1 == std::string_view::npos) {
    reason = "missing metric field";
    return false;
  }
  const std::size_t c2 = line.find(',', c1 + 1);
  if (c2 == std::string_view::npos) {
    reason = "missing value field";
    return false;
  }
  const std::size_t c3 = line.find(',', c2 + 1);

  const auto ts = parse_timestamp(line.substr(0, c1));
  if (!ts) {
    reason = "bad timestamp";
    return false;
  }
  const std::string_view metric = line.substr(c1 + 1, c2 - c1 - 1);
  if (metric.empty()) {
    reason = "empty metric_id";
    return false;
  }
  const std::string_view value_field =
      c3 == std::string_view::npos ? line.substr(c2 + 1) : line.substr(c2 + 1, c3 - c2 - 1);
  double value;
  if (!parse_double(value_field, value)) {
    reason = "non-numeric value";
    return false;
  }

  out.ts = *ts;
  out.metric_id.assign(metric);
  out.value = value;
  out.tags.clear();
  if (c3 != std::string_view::npos) {
    std::string_view tags = line.substr(c3 + 1);
    while (!tags.empty()) {
      const std::size_t semi = tags.find(';');
      const std::string_view item =
          semi == std::string_view::npos ? tags : tags.substr(0, semi);
      tags = semi == std::string_view::npos ? std::string_view{} : tags.substr(semi + 1);
      if (item.empty()) continue;
      const std::size_t eq = item.find('=');
      if (eq == std::string_view::npos) {
        reason = "malformed tag";
        return false;
      }
      out.tags.emplace_back(std::string(item.substr(0, eq)),
                            std::string(item.substr(eq + 1)));
    }
  }
  return true;
}

bool parse_jsonl_record(std::string_view line, MetricRecord& out, std::string& reason) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    reason = "invalid json";
    return false;
  }
  if (!j.contains("metric") || !j["metric"].is_string()) {
    reason = "missing metric";
    return false;
  }
  if (!j.contains("value") || !j["value"].is_number()) {
    reason = "missing value";
    return false;
  }
  if (!j.contains("ts")) {
    reason = "missing ts";
    return false;
  }
  const auto& ts = j["ts"];
  if (ts.is_number_integer()) {
    out.ts = ts.get<std::int64_t>();
  } else if (ts.is_string()) {
    const auto parsed = parse_timestamp(ts.get_ref<const std::string&>());
    if (!parsed) {
      reason = "bad timestamp";
      return false;
    }
    out.ts = *parsed;
  } else {
    reason = "bad timestamp";
    return false;
  }
  out.metric_id = j["metric"].get<std::string>();
  if (out.metric_id.empty()) {
    reason = "empty metric_id";
    return false;
  }
  out.value = j["value"].get<double>();
  if (!std::isfinite(out.value)) {
    reason = "non-finite value";
    return false;
  }
  out.tags.clear();
  if (j.contains("tags")) {
    if (!j["tags"].is_object()) {
      reason = "tags not an object";
      return false;
    }
    for (const auto& [k, v] : j["tags"].items()) {
      if (!v.is_string()) {
        reason = "tag value not a string";
        return false;
      }
      out.tags.emplace_back(k, v.get<std::string>());
    }
  }
  return true;
}

}  // namespace

void ParseStats::note_error(std::size_t line, std::string reason) {
  ++skipped;
  if (errors.size() < kMaxReportedErrors) errors.emplace_back(line, std::move(reason));
}

void ParseStats::merge(const ParseStats& other) {
  lines += other.lines;
  parsed += other.parsed;
  skipped += other.skipped;
  for (const auto& e : other.errors) {
    if (errors.size() >= kMaxReportedErrors) break;
    errors.push_back(e);
  }
}

ParseStats parse_metric_stream(std::istream& in, InputFormat format,
                               const std::function<void(MetricRecord&&)>& sink) {
  if (!in) throw std::runtime_error("unreadable input source");
  ParseStats stats;
  std::string line;
  MetricRecord record;
  std::string reason;
  while (std::getline(in, line)) {
    ++stats.lines;
    if (line.empty() || line[0] == '#') continue;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    const bool ok = format == InputFormat::csv ? parse_csv_record(view, record, reason)
                                               : parse_jsonl_record(view, record, reason);
    if (!ok) {
      stats.note_error(stats.lines, reason);
      continue;
    }
    ++stats.parsed;
    sink(std::move(record));
  }
  return stats;
}

std::string format_metric_csv(const MetricRecord& record) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld,", static_cast<long long>(record.ts));
  std::string out = buf;
  out += record.metric_id;
  std::snprintf(buf, sizeof(buf), ",%.17g", record.value);
  out += buf;
  if (!record.tags.empty()) {
    out += ',';
    for (std::size_t i = 0; i < record.tags.size(); ++i) {
      if (i) out += ';';
      out += record.tags[i].first;
      out += '=';
      out += record.tags[i].second;
    }
  }
  return out;
}

RecentStore::RecentStore(std::int64_t horizon_seconds, std::int64_t resolution)
    : horizon_(horizon_seconds), resolution_(resolution) {
  if (horizon_ <= 0) throw std::invalid_argument("horizon must be positive");
  if (resolution_ <= 0) throw std::invalid_argument("resolution must be positive");
}

void RecentStore::set_metric_agg(const std::string& metric_id, BucketAgg agg) {
  std::unique_lock lock(mu_);
  agg_override_[metric_id] = agg;
}

RecentStore::IngestStats RecentStore::ingest(std::span<const MetricRecord> records) {
  IngestStats st;
  std::string spill;
  {
    std::unique_lock lock(mu_);
    for (const MetricRecord& r : records) {
      const std::int64_t bucket_ts = floor_align(r.ts, resolution_);
      if (has_data_ && bucket_ts < newest_ - horizon_) {
        ++st.dropped_old;
        continue;
      }
      Bucket& b = by_metric_[r.metric_id][bucket_ts];
      b.sum += r.value;
      b.count += 1;
      if (!has_data_ || bucket_ts > newest_) {
        newest_ = bucket_ts;
        has_data_ = true;
      }
      ++st.accepted;
      if (!spill_path_.empty()) {
        spill += format_metric_csv(r);
        spill += '\n';
      }
    }
    evict_locked();
  }
  if (!spill.empty()) append_to_file(spill_path_, spill);
  return st;
}

void RecentStore::evict() {
  std::unique_lock lock(mu_);
  evict_locked();
}

void RecentStore::evict_locked() {
  if (!has_data_) return;
  const std::int64_t cutoff = newest_ - horizon_;
  for (auto it = by_metric_.begin(); it != by_metric_.end();) {
    auto& buckets = it->second;
    buckets.erase(buckets.begin(), buckets.lower_bound(cutoff));
    it = buckets.empty() ? by_metric_.erase(it) : std::next(it);
  }
}

std::int64_t RecentStore::newest() const {
  std::shared_lock lock(mu_);
  return newest_;
}

std::vector<std::string> RecentStore::metric_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  ids.reserve(by_metric_.size());
  for (const auto& [id, _] : by_metric_) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double RecentStore::bucket_value(const std::string& metric, const Bucket& b) const {
  auto it = agg_override_.find(metric);
  if (it != agg_override_.end() && it->second == BucketAgg::mean)
    return b.sum / static_cast<double>(b.count);
  return b.sum;
}

std::optional<MetricSeries> RecentStore::snapshot(const std::string& metric_id,
                                                  std::int64_t from,
                                                  std::int64_t to) const {
  std::shared_lock lock(mu_);
  auto it = by_metric_.find(metric_id);
  if (it == by_metric_.end()) return std::nullopt;
  std::vector<Sample> samples;
  for (auto b = it->second.lower_bound(floor_align(from, resolution_));
       b != it->second.end() && b->first <= to; ++b)
    samples.push_back({b->first, bucket_value(metric_id, b->second)});
  return MetricSeries(metric_id, resolution_, std::move(samples));
}

void RecentStore::attach_spill(const fs::path& path) {
  std::unique_lock lock(mu_);
  spill_path_ = path;
}

std::size_t RecentStore::replay_spill(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return 0;
  std::vector<MetricRecord> batch;
  parse_metric_stream(in, InputFormat::csv,
                      [&](MetricRecord&& r) { batch.push_back(std::move(r)); });
  return ingest(batch).accepted;
}

RecentStore::IngestStats ingest_into_store(std::span<const MetricRecord> records,
                                           RecentStore& store) {
  return store.ingest(records);
}

bool valid_metric_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-' ||
                    c == ':';
    if (!ok) return false;
  }
  return true;
}

PartitionWriter::PartitionWriter(fs::path root) : root_(std::move(root)) {}

PartitionWriter::~PartitionWriter() {
  try {
    flush();
  } catch (...) {
    // Destructor must not throw; callers needing the error call flush().
  }
}

void PartitionWriter::add(const MetricRecord& record) {
  if (!valid_metric_id(record.metric_id))
    throw std::invalid_argument("metric id not usable as a path: " + record.metric_id);
  std::string key = record.metric_id + "/" + day_key(record.ts);
  std::string& buf = buffers_[key];
  buf += format_metric_csv(record);
  buf += '\n';
  if (buf.size() >= 1 << 20) {
    append_to_file(root_ / "metrics" / (key + ".csv"), buf);
    buf.clear();
  }
}

void PartitionWriter::flush() {
  for (auto& [key, buf] : buffers_) {
    if (buf.empty()) continue;
    append_to_file(root_ / "metrics" / (key + ".csv"), buf);
    buf.clear();
  }
}

std::vector<std::string> list_partition_metrics(const fs::path& root) {
  std::vector<std::string> out;
  const fs::path dir = root / "metrics";
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MetricRecord> read_metric_partitions(const fs::path& root,
                                                 const std::string& metric_id,
                                                 std::int64_t from, std::int64_t to,
                                                 ParseStats* stats) {
  std::vector<MetricRecord> out;
  const fs::path dir = root / "metrics" / metric_id;
  if (!fs::exists(dir)) return out;
  for (std::int64_t day = day_start(from); day < to; day += kSecondsPerDay) {
    const fs::path file = dir / (day_key(day) + ".csv");
    std::ifstream in(file);
    if (!in) continue;
    ParseStats s = parse_metric_stream(in, InputFormat::csv, [&](MetricRecord&& r) {
      if (r.ts >= from && r.ts < to) out.push_back(std::move(r));
    });
    if (stats) stats->merge(s);
  }
  return out;
}

}  // namespace netmon
