#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netmon {

// Dotted-quad IPv4 <-> host-order integer. parse_ipv4 returns nullopt on
// anything that is not exactly four decimal octets in [0, 255].
std::optional<std::uint32_t> parse_ipv4(std::string_view text);
std::string format_ipv4(std::uint32_t ip);

// One [from, to] range mapped to an ISO country code. Bounds are inclusive,
// host byte order.
struct GeoRange {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  std::string code;
  std::string name;
};

inline constexpr std::string_view kUnknownCountry = "ZZ";

// Immutable range table over the full IPv4 space. Ranges are kept sorted by
// lower bound; overlapping input is rejected at construction so that lookup
// can binary-search on the lower bounds alone.
class GeoIpTable {
 public:
  GeoIpTable() = default;
  explicit GeoIpTable(std::vector<GeoRange> ranges);

  // Range containing ip, or nullptr when no range covers it.
  const GeoRange* lookup(std::uint32_t ip) const;

  // Country code for ip; kUnknownCountry when uncovered.
  std::string_view country_of(std::uint32_t ip) const;

  const std::vector<GeoRange>& ranges() const { return ranges_; }
  std::size_t size() const { return ranges_.size(); }
  bool empty() const { return ranges_.empty(); }

 private:
  std::vector<GeoRange> ranges_;  // sorted by from, non-overlapping
};

// Loads a range-per-line CSV: "from","to","code","country name". Quotes are
// optional; quoted fields may contain commas and doubled-quote escapes.
// Blank lines and lines starting with '#' are skipped. Malformed rows and
// overlapping ranges raise with the offending line number.
GeoIpTable load_geoip(const std::filesystem::path& path);

// Plain IPs and CIDR blocks, one per line. Matching is by masked compare;
// host bits in a CIDR entry are ignored.
class IpWhitelist {
 public:
  // Accepts "a.b.c.d" or "a.b.c.d/N" with N in [0, 32].
  void add(std::string_view entry);
  bool contains(std::uint32_t ip) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct MaskedRange {
    std::uint32_t base = 0;
    std::uint32_t mask = 0;
  };
  std::vector<MaskedRange> entries_;
};

IpWhitelist load_whitelist(const std::filesystem::path& path);

// Splits one CSV line into fields, honouring double-quoted fields with
// embedded commas and "" escapes. Shared by the geo loaders.
std::vector<std::string> split_csv_fields(const std::string& line);

}  // namespace netmon
