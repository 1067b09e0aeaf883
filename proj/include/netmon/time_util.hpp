#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace netmon {

inline constexpr std::int64_t kSecondsPerMinute = 60;
inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSecondsPerWeek = 7 * kSecondsPerDay;

// Epoch day 0 (1970-01-01) was a Thursday; shift so weeks start on Monday.
inline constexpr std::int64_t kMondayOffset = 3 * kSecondsPerDay;

// Floors toward negative infinity for negative timestamps.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t floor_align(std::int64_t ts, std::int64_t step) {
  return floor_div(ts, step) * step;
}

// Seconds since Monday 00:00 UTC of the week containing ts, in [0, 604800).
inline std::int64_t second_of_week(std::int64_t ts) {
  std::int64_t s = (ts + kMondayOffset) % kSecondsPerWeek;
  return s < 0 ? s + kSecondsPerWeek : s;
}

// Weekday with Monday = 0 .. Sunday = 6.
inline int weekday_of(std::int64_t ts) {
  return static_cast<int>(second_of_week(ts) / kSecondsPerDay);
}

inline bool is_weekend(std::int64_t ts) { return weekday_of(ts) >= 5; }

inline std::int64_t second_of_day(std::int64_t ts) {
  std::int64_t s = ts % kSecondsPerDay;
  return s < 0 ? s + kSecondsPerDay : s;
}

struct CivilDate {
  int year;
  int month;  // 1..12
  int day;    // 1..31
};

// Days since 1970-01-01 -> calendar date (proleptic Gregorian, UTC).
CivilDate civil_from_days(std::int64_t days);

// Calendar date -> days since 1970-01-01.
std::int64_t days_from_civil(int year, int month, int day);

// "YYYY-MM-DD" day key for partition file names (UTC).
std::string day_key(std::int64_t ts);

// First second of the UTC day containing ts.
inline std::int64_t day_start(std::int64_t ts) { return floor_align(ts, kSecondsPerDay); }

// Accepts integer epoch seconds or RFC3339 ("2018-06-01T12:30:00Z",
// offsets "+HH:MM"/"-HH:MM" allowed). Returns nothing on malformed input.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

// RFC3339 UTC rendering, e.g. "2018-06-01T12:30:00Z".
std::string format_timestamp_utc(std::int64_t ts);

}  // namespace netmon
