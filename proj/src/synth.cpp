#include "netmon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "netmon/geoip.hpp"
#include "netmon/io_util.hpp"
#include "netmon/time_util.hpp"

namespace netmon {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
}

}  // namespace

std::uint64_t GaussianSource::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double GaussianSource::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double GaussianSource::next() {
  // Box-Muller; u1 is kept away from zero so the log stays finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void SyntheticSpec::validate() const {
  if (weeks < 1) throw std::invalid_argument("weeks must be at least 1");
  if (resolution <= 0 || kSecondsPerWeek % resolution != 0)
    throw std::invalid_argument("resolution must divide a week");
  if (end_ts == 0 || end_ts % resolution != 0)
    throw std::invalid_argument("end_ts must be set and grid-aligned");
  if (base_level <= 0) throw std::invalid_argument("base_level must be positive");
  if (daily_amplitude < 0 || daily_amplitude > 1)
    throw std::invalid_argument("daily_amplitude must be in [0, 1]");
  if (weekend_damping <= 0)
    throw std::invalid_argument("weekend_damping must be positive");
  if (noise < 0) throw std::invalid_argument("noise must be non-negative");
  if (metrics < 1) throw std::invalid_argument("metrics must be at least 1");
  if (metric_prefix.empty() || !valid_metric_id(metric_prefix))
    throw std::invalid_argument("bad metric_prefix");
  for (const InjectionSpec& inj : injections) {
    if (inj.duration <= 0)
      throw std::invalid_argument("injection duration must be positive");
    if (inj.multiplier <= 0)
      throw std::invalid_argument("injection multiplier must be positive");
  }
}

std::int64_t SyntheticSpec::start_ts() const {
  return end_ts - static_cast<std::int64_t>(weeks) * kSecondsPerWeek;
}

std::string SyntheticSpec::metric_name(int index) const {
  return metric_prefix + "." + std::to_string(index);
}

double synth_level(const SyntheticSpec& spec, std::int64_t ts) {
  const double day_angle = 2.0 * std::numbers::pi *
                               static_cast<double>(second_of_day(ts)) / kSecondsPerDay +
                           spec.daily_phase;
  double level = spec.base_level * (1.0 + spec.daily_amplitude * std::sin(day_angle));
  if (is_weekend(ts)) level *= spec.weekend_damping;
  return level;
}

double synth_injection_factor(const SyntheticSpec& spec, const std::string& metric_id,
                              std::int64_t ts) {
  double factor = 1.0;
  for (const InjectionSpec& inj : spec.injections)
    if (inj.metric_id == metric_id && ts >= inj.start && ts < inj.start + inj.duration)
      factor *= inj.multiplier;
  return factor;
}

namespace {

// Runs the generator for one metric, handing each record to sink in
// timestamp order.
template <typename Sink>
void generate_metric(const SyntheticSpec& spec, int index, Sink&& sink) {
  GaussianSource noise(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const std::string metric_id = spec.metric_name(index);
  for (std::int64_t ts = spec.start_ts(); ts < spec.end_ts; ts += spec.resolution) {
    const double jitter = std::max(0.0, 1.0 + spec.noise * noise.next());
    const double value =
        synth_level(spec, ts) * jitter * synth_injection_factor(spec, metric_id, ts);
    sink(MetricRecord{ts, metric_id, value, {}});
  }
}

}  // namespace

std::vector<MetricRecord> generate_synthetic_records(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<MetricRecord> records;
  records.reserve(static_cast<std::size_t>(spec.metrics) *
                  static_cast<std::size_t>((spec.end_ts - spec.start_ts()) /
                                           spec.resolution));
  for (int i = 0; i < spec.metrics; ++i)
    generate_metric(spec, i, [&](MetricRecord&& r) { records.push_back(std::move(r)); });
  return records;
}

SynthSummary write_synth_dataset(const SyntheticSpec& spec,
                                 const std::filesystem::path& root) {
  spec.validate();
  SynthSummary summary;
  summary.start = spec.start_ts();
  summary.end = spec.end_ts;

  PartitionWriter writer(root);
  for (int i = 0; i < spec.metrics; ++i) {
    summary.metric_ids.push_back(spec.metric_name(i));
    generate_metric(spec, i, [&](MetricRecord&& r) {
      writer.add(r);
      ++summary.records;
    });
  }
  writer.flush();

  std::ostringstream labels;
  labels << "# metric_id,start,end,multiplier\n";
  for (const InjectionSpec& inj : spec.injections) {
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%lld,%lld,%.17g\n", inj.metric_id.c_str(),
                  static_cast<long long>(inj.start),
                  static_cast<long long>(inj.start + inj.duration), inj.multiplier);
    labels << line;
  }
  atomic_write_file(root / "labels.csv", labels.str());
  return summary;
}

std::vector<InjectionSpec> read_injection_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file: " + path.string());
  std::vector<InjectionSpec> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string metric, start_tok, end_tok, mult_tok;
    if (!std::getline(fields, metric, ',') || !std::getline(fields, start_tok, ',') ||
        !std::getline(fields, end_tok, ',') || !std::getline(fields, mult_tok))
      throw std::runtime_error("malformed label line: " + line);
    InjectionSpec inj;
    inj.metric_id = metric;
    inj.start = std::stoll(start_tok);
    inj.duration = std::stoll(end_tok) - inj.start;
    inj.multiplier = std::stod(mult_tok);
    labels.push_back(std::move(inj));
  }
  return labels;
}

void AccessSpec::validate() const {
  if (start >= end || start % 60 != 0 || end % 60 != 0)
    throw std::invalid_argument("access window must be minute-aligned and non-empty");
  if (base_rate < 0) throw std::invalid_argument("base_rate must be non-negative");
  if (service.empty()) throw std::invalid_argument("service must be non-empty");
  if (mix.empty()) throw std::invalid_argument("country mix must be non-empty");
  double total_weight = 0.0;
  for (const CountryMix& m : mix) {
    if (m.code.empty()) throw std::invalid_argument("country mix entry without code");
    if (m.weight < 0) throw std::invalid_argument("negative mix weight");
    if (m.ip_count == 0) throw std::invalid_argument("empty client address block");
    if (m.ip_count - 1 > ~m.ip_base)
      throw std::invalid_argument("client address block wraps past 255.255.255.255");
    total_weight += m.weight;
  }
  if (total_weight <= 0) throw std::invalid_argument("mix weights sum to zero");
  for (const GeoBurst& b : bursts) {
    if (b.country.empty()) throw std::invalid_argument("burst without country");
    if (b.start % 60 != 0) throw std::invalid_argument("burst start must be minute-aligned");
    if (b.minutes < 1) throw std::invalid_argument("burst must last at least a minute");
    if (b.per_minute < 1) throw std::invalid_argument("burst rate must be positive");
  }
}

std::vector<AccessRecord> generate_access_records(const AccessSpec& spec) {
  spec.validate();
  double total_weight = 0.0;
  for (const CountryMix& m : spec.mix) total_weight += m.weight;

  std::vector<AccessRecord> records;
  GaussianSource rng(spec.seed);
  for (std::int64_t minute = spec.start; minute < spec.end; minute += 60) {
    for (const CountryMix& m : spec.mix) {
      const double expected = spec.base_rate * m.weight / total_weight;
      const double jittered = expected * std::max(0.0, 1.0 + 0.3 * rng.next());
      const auto count = static_cast<std::int64_t>(std::llround(jittered));
      for (std::int64_t i = 0; i < count; ++i) {
        AccessRecord r;
        r.ts = minute + static_cast<std::int64_t>(rng.next_u64() % 60);
        r.ip = m.ip_base + static_cast<std::uint32_t>(rng.next_u64() % m.ip_count);
        r.service = spec.service;
        records.push_back(std::move(r));
      }
    }
  }
  for (const GeoBurst& b : spec.bursts) {
    for (std::int64_t k = 0; k < b.minutes; ++k) {
      const std::int64_t minute = b.start + k * 60;
      if (minute < spec.start || minute >= spec.end) continue;
      for (std::uint64_t i = 0; i < b.per_minute; ++i) {
        AccessRecord r;
        r.ts = minute + static_cast<std::int64_t>(i * 60 / b.per_minute);
        r.ip = b.ip;
        r.service = spec.service;
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

AccessSynthSummary write_access_dataset(const AccessSpec& spec,
                                        const std::filesystem::path& access_csv,
                                        const std::filesystem::path& geoip_csv) {
  const auto records = generate_access_records(spec);

  std::vector<GeoRange> ranges;
  for (const CountryMix& m : spec.mix)
    ranges.push_back({m.ip_base, m.ip_base + m.ip_count - 1, m.code, m.code});
  for (const GeoBurst& b : spec.bursts) {
    bool covered = false;
    for (const CountryMix& m : spec.mix) {
      if (b.ip >= m.ip_base && b.ip - m.ip_base < m.ip_count) {
        if (m.code != b.country)
          throw std::invalid_argument("burst address " + format_ipv4(b.ip) +
                                      " belongs to mix country " + m.code);
        covered = true;
        break;
      }
    }
    if (covered) continue;
    for (const GeoRange& r : ranges) {
      if (r.from == b.ip && r.to == b.ip) {
        if (r.code != b.country)
          throw std::invalid_argument("burst address " + format_ipv4(b.ip) +
                                      " reused for two countries");
        covered = true;
        break;
      }
    }
    if (!covered) ranges.push_back({b.ip, b.ip, b.country, b.country});
  }
  const GeoIpTable table(std::move(ranges));  // sorts and rejects overlap

  std::ostringstream geo;
  for (const GeoRange& r : table.ranges())
    geo << '"' << r.from << "\",\"" << r.to << "\",\"" << r.code << "\",\"" << r.name
        << "\"\n";
  atomic_write_file(geoip_csv, geo.str());

  std::string csv;
  csv.reserve(records.size() * 40);
  for (const AccessRecord& r : records) {
    csv += format_access_csv(r);
    csv += '\n';
  }
  atomic_write_file(access_csv, csv);

  return {records.size(), table.size()};
}

}  // namespace netmon
