#include "netmon/geoip.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace netmon {

namespace {

std::optional<std::uint32_t> parse_u32(std::string_view text) {
  std::uint32_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t ip = 0;
  int octets = 0;
  while (octets < 4) {
    const std::size_t dot = text.find('.');
    const std::string_view part =
        octets < 3 ? text.substr(0, dot) : text;
    if (octets < 3 && dot == std::string_view::npos) return std::nullopt;
    if (part.empty() || part.size() > 3) return std::nullopt;
    const auto value = parse_u32(part);
    if (!value || *value > 255) return std::nullopt;
    ip = (ip << 8) | *value;
    ++octets;
    if (octets < 4) text.remove_prefix(dot + 1);
  }
  return ip;
}

std::string format_ipv4(std::uint32_t ip) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%u.%u.%u.%u", ip >> 24, (ip >> 16) & 0xff,
                (ip >> 8) & 0xff, ip & 0xff);
  return buf;
}

GeoIpTable::GeoIpTable(std::vector<GeoRange> ranges) : ranges_(std::move(ranges)) {
  std::sort(ranges_.begin(), ranges_.end(),
            [](const GeoRange& a, const GeoRange& b) { return a.from < b.from; });
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    const GeoRange& r = ranges_[i];
    if (r.from > r.to)
      throw std::invalid_argument("inverted range " + format_ipv4(r.from) + "-" +
                                  format_ipv4(r.to));
    if (i > 0 && r.from <= ranges_[i - 1].to)
      throw std::invalid_argument("overlapping ranges at " + format_ipv4(r.from) +
                                  " (previous ends " + format_ipv4(ranges_[i - 1].to) +
                                  ")");
  }
}

const GeoRange* GeoIpTable::lookup(std::uint32_t ip) const {
  // Last range whose lower bound is <= ip; non-overlap makes it the only
  // candidate that can contain ip.
  auto it = std::upper_bound(
      ranges_.begin(), ranges_.end(), ip,
      [](std::uint32_t value, const GeoRange& r) { return value < r.from; });
  if (it == ranges_.begin()) return nullptr;
  --it;
  return ip <= it->to ? &*it : nullptr;
}

std::string_view GeoIpTable::country_of(std::uint32_t ip) const {
  const GeoRange* r = lookup(ip);
  return r ? std::string_view(r->code) : kUnknownCountry;
}

std::vector<std::string> split_csv_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

GeoIpTable load_geoip(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geo database: " + path.string());

  std::vector<GeoRange> ranges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const auto fields = split_csv_fields(line);
    if (fields.size() < 3)
      throw std::runtime_error("geo database line " + std::to_string(line_no) +
                               ": expected from,to,code[,name]");
    const auto from = parse_u32(fields[0]);
    const auto to = parse_u32(fields[1]);
    if (!from || !to)
      throw std::runtime_error("geo database line " + std::to_string(line_no) +
                               ": malformed range bounds");
    if (*from > *to)
      throw std::runtime_error("geo database line " + std::to_string(line_no) +
                               ": range is inverted");
    if (fields[2].empty())
      throw std::runtime_error("geo database line " + std::to_string(line_no) +
                               ": empty country code");
    GeoRange r;
    r.from = *from;
    r.to = *to;
    r.code = fields[2];
    r.name = fields.size() > 3 ? fields[3] : "";
    if (!ranges.empty() && r.from <= ranges.back().to)
      throw std::runtime_error("geo database line " + std::to_string(line_no) +
                               ": range overlaps or precedes the previous one");
    ranges.push_back(std::move(r));
  }
  return GeoIpTable(std::move(ranges));
}

void IpWhitelist::add(std::string_view entry) {
  int prefix = 32;
  const std::size_t slash = entry.find('/');
  if (slash != std::string_view::npos) {
    const auto bits = parse_u32(entry.substr(slash + 1));
    if (!bits || *bits > 32)
      throw std::invalid_argument("bad CIDR prefix in: " + std::string(entry));
    prefix = static_cast<int>(*bits);
    entry = entry.substr(0, slash);
  }
  const auto ip = parse_ipv4(entry);
  if (!ip) throw std::invalid_argument("bad IP in whitelist entry: " + std::string(entry));
  const std::uint32_t mask =
      prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
  entries_.push_back({*ip & mask, mask});
}

bool IpWhitelist::contains(std::uint32_t ip) const {
  for (const MaskedRange& e : entries_)
    if ((ip & e.mask) == e.base) return true;
  return false;
}

IpWhitelist load_whitelist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open whitelist: " + path.string());
  IpWhitelist wl;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    try {
      wl.add(std::string_view(line).substr(first, last - first + 1));
    } catch (const std::exception& e) {
      throw std::runtime_error("whitelist line " + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  return wl;
}

}  // namespace netmon
