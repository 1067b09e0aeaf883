#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "netmon/timeseries.hpp"

namespace netmon {

struct MetricRecord {
  std::int64_t ts = 0;
  std::string metric_id;
  double value = 0.0;
  std::vector<std::pair<std::string, std::string>> tags;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

enum class InputFormat { csv, jsonl };

struct ParseStats {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  // First few (line number, reason) pairs; skipped keeps the full count.
  std::vector<std::pair<std::size_t, std::string>> errors;

  void note_error(std::size_t line, std::string reason);
  void merge(const ParseStats& other);
};

// Streams records out of a CSV ("timestamp,metric_id,value[,k=v;k=v]") or
// JSON-lines source. Invalid lines are counted and reported, never fatal;
// only an unreadable source throws.
ParseStats parse_metric_stream(std::istream& in, InputFormat format,
                               const std::function<void(MetricRecord&&)>& sink);

// Lossless single-line CSV rendering; parse_metric_stream inverts it.
std::string format_metric_csv(const MetricRecord& record);

// In-memory view of the last horizon seconds of every metric, bucketed on
// the resolution grid at ingest. Single writer, concurrent readers; readers
// get point-in-time snapshot copies.
class RecentStore {
 public:
  explicit RecentStore(std::int64_t horizon_seconds, std::int64_t resolution = 60);

  struct IngestStats {
    std::size_t accepted = 0;
    std::size_t dropped_old = 0;
  };

  // Counters sum within a bucket by default; gauge metrics can be switched
  // to mean before ingesting them.
  void set_metric_agg(const std::string& metric_id, BucketAgg agg);

  IngestStats ingest(std::span<const MetricRecord> records);
  IngestStats ingest(const MetricRecord& record) {
    return ingest(std::span<const MetricRecord>(&record, 1));
  }

  // Drops every bucket older than the horizon relative to the newest sample.
  void evict();

  std::int64_t horizon() const { return horizon_; }
  std::int64_t resolution() const { return resolution_; }
  std::int64_t newest() const;
  std::vector<std::string> metric_ids() const;

  // Samples of one metric in [from, to], gaps left as gaps. Returns nothing
  // for an unknown metric.
  std::optional<MetricSeries> snapshot(const std::string& metric_id, std::int64_t from,
                                       std::int64_t to) const;

  // Optional crash-recovery spill: every accepted record is appended to the
  // file; replay_spill reloads it on startup.
  void attach_spill(const std::filesystem::path& path);
  std::size_t replay_spill(const std::filesystem::path& path);

 private:
  struct Bucket {
    double sum = 0.0;
    std::uint64_t count = 0;
  };

  mutable std::shared_mutex mu_;
  std::int64_t horizon_;
  std::int64_t resolution_;
  std::int64_t newest_ = 0;
  bool has_data_ = false;
  std::unordered_map<std::string, std::map<std::int64_t, Bucket>> by_metric_;
  std::unordered_map<std::string, BucketAgg> agg_override_;
  std::filesystem::path spill_path_;

  void evict_locked();
  double bucket_value(const std::string& metric, const Bucket& b) const;
};

RecentStore::IngestStats ingest_into_store(std::span<const MetricRecord> records,
                                           RecentStore& store);

// Historical partition layout: <root>/metrics/<metric_id>/<YYYY-MM-DD>.csv,
// one record per line in the metric CSV format. External producers can
// write it directly.
class PartitionWriter {
 public:
  explicit PartitionWriter(std::filesystem::path root);
  ~PartitionWriter();

  void add(const MetricRecord& record);
  void flush();

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> buffers_;  // "<metric>/<day>" -> lines
};

// Metric id usable as a directory name.
bool valid_metric_id(std::string_view id);

std::vector<std::string> list_partition_metrics(const std::filesystem::path& root);

// Records of one metric with ts in [from, to), ordered by file then line.
std::vector<MetricRecord> read_metric_partitions(const std::filesystem::path& root,
                                                 const std::string& metric_id,
                                                 std::int64_t from, std::int64_t to,
                                                 ParseStats* stats = nullptr);

}  // namespace netmon
