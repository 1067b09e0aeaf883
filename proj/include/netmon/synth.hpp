#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "netmon/geo_analytics.hpp"
#include "netmon/ingest.hpp"

namespace netmon {

// Deterministic standard-normal stream. Box-Muller over a fixed 64-bit
// engine so the same seed yields the same draws on every platform.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : state_(seed ? seed : 1) {}

  double next();
  double uniform();  // [0, 1)
  std::uint64_t next_u64();

 private:
  std::uint64_t state_;
};

// A window where one metric's level is multiplied by a constant factor.
struct InjectionSpec {
  std::string metric_id;
  std::int64_t start = 0;
  std::int64_t duration = 0;  // seconds; window is [start, start + duration)
  double multiplier = 1.0;
};

// Week-shaped traffic generator: a daily sine on top of a base level,
// damped on weekends, with multiplicative gaussian noise. Values are
// clamped at zero. Injections scale the finished value.
struct SyntheticSpec {
  int weeks = 8;
  std::int64_t resolution = 60;
  std::int64_t end_ts = 0;  // exclusive; generation covers weeks back from here
  double base_level = 1000.0;
  double daily_amplitude = 0.5;   // relative swing of the daily sine
  double daily_phase = 0.0;       // radians
  double weekend_damping = 0.7;   // multiplier on Saturday/Sunday
  double noise = 0.05;            // relative stddev of the gaussian term
  int metrics = 1;
  std::string metric_prefix = "metric";
  std::uint64_t seed = 1;
  std::vector<InjectionSpec> injections;

  void validate() const;
  std::int64_t start_ts() const;
  std::string metric_name(int index) const;
};

// Deterministic shape (no noise, no injections) at ts: the level the
// generator fluctuates around. Exposed so expectations can be computed
// without replaying the stream.
double synth_level(const SyntheticSpec& spec, std::int64_t ts);

// Injection factor applying to metric_id at ts (product when windows overlap).
double synth_injection_factor(const SyntheticSpec& spec, const std::string& metric_id,
                              std::int64_t ts);

// Full sample streams, one per metric, in timestamp order.
std::vector<MetricRecord> generate_synthetic_records(const SyntheticSpec& spec);

struct SynthSummary {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::size_t records = 0;
  std::vector<std::string> metric_ids;
};

// Writes the generated stream into day partitions under root and the
// injection windows into <root>/labels.csv
// (metric_id,start,end,multiplier).
SynthSummary write_synth_dataset(const SyntheticSpec& spec,
                                 const std::filesystem::path& root);

std::vector<InjectionSpec> read_injection_labels(const std::filesystem::path& path);

// --- access-log generation ---------------------------------------------

// One country's share of synthetic traffic, served from a contiguous
// client address block.
struct CountryMix {
  std::string code;
  double weight = 1.0;          // relative share of base_rate
  std::uint32_t ip_base = 0;    // first address of the block
  std::uint32_t ip_count = 1;   // block size
};

// A burst of per_minute requests per minute from one address, lasting
// minutes minutes.
struct GeoBurst {
  std::string country;
  std::int64_t start = 0;
  std::int64_t minutes = 0;
  std::uint64_t per_minute = 0;
  std::uint32_t ip = 0;
};

struct AccessSpec {
  std::int64_t start = 0;  // minute-aligned
  std::int64_t end = 0;    // exclusive, minute-aligned
  double base_rate = 60.0;  // requests per minute across all countries
  std::string service = "web";
  std::uint64_t seed = 1;
  std::vector<CountryMix> mix;
  std::vector<GeoBurst> bursts;

  void validate() const;
};

std::vector<AccessRecord> generate_access_records(const AccessSpec& spec);

struct AccessSynthSummary {
  std::size_t records = 0;
  std::size_t ranges = 0;
};

// Writes the access log as CSV plus a matching country range database
// covering every mix block and burst address. Burst addresses inside a mix
// block must agree with that block's country.
AccessSynthSummary write_access_dataset(const AccessSpec& spec,
                                        const std::filesystem::path& access_csv,
                                        const std::filesystem::path& geoip_csv);

}  // namespace netmon
