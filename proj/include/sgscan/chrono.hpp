#pragma once

#include <array>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace sgscan {

// All timestamps are UTC with whole-second precision.
using Duration = std::chrono::seconds;
using Instant = std::chrono::sys_seconds;

inline constexpr Duration minutes(long long m) { return Duration{m * 60}; }
inline constexpr Duration hours(long long h) { return Duration{h * 3600}; }
inline constexpr Duration days(long long d) { return Duration{d * 86400}; }

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}

inline std::optional<Instant> make_instant(int y, int mo, int d, int h, int mi, int sec) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 59) return std::nullopt;
  return sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + seconds{sec};
}

}  // namespace detail

/// Renders an instant as `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_iso(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<std::chrono::days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hms.hours().count()), static_cast<long long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

/// Parses `YYYY-MM-DD[THH:MM[:SS]][Z|+00:00]`. A space may replace the `T`.
/// Only UTC offsets are accepted; anything else yields nullopt.
inline std::optional<Instant> parse_iso(std::string_view s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' || !detail::parse_fixed_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!detail::parse_fixed_int(s, pos + 1, 2, h) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !detail::parse_fixed_int(s, pos + 4, 2, mi)) {
      return std::nullopt;
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!detail::parse_fixed_int(s, pos + 1, 2, sec)) return std::nullopt;
      pos += 3;
    }
  }
  std::string_view rest = s.substr(pos);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000")) return std::nullopt;
  return detail::make_instant(y, mo, d, h, mi, sec);
}

inline constexpr std::array<std::string_view, 12> kMonthAbbrev = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

/// The year-less stamp at the head of a BSD syslog line.
struct BsdStamp {
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  std::optional<Instant> in_year(int year) const {
    return detail::make_instant(year, month, day, hour, minute, second);
  }
};

/// Parses `MMM dd HH:MM:SS` (day space- or zero-padded). On failure returns
/// nullopt and stores the offending byte offset in `error_offset`.
inline std::optional<BsdStamp> parse_bsd_stamp(std::string_view s, std::size_t& error_offset) {
  BsdStamp st;
  if (s.size() < 15) {
    error_offset = s.size();
    return std::nullopt;
  }
  int m = 0;
  for (; m < 12; ++m) {
    if (s.substr(0, 3) == kMonthAbbrev[static_cast<std::size_t>(m)]) break;
  }
  if (m == 12) {
    error_offset = 0;
    return std::nullopt;
  }
  st.month = m + 1;
  if (s[3] != ' ') {
    error_offset = 3;
    return std::nullopt;
  }
  if (s[4] == ' ') {
    if (!detail::parse_fixed_int(s, 5, 1, st.day)) {
      error_offset = 5;
      return std::nullopt;
    }
  } else if (!detail::parse_fixed_int(s, 4, 2, st.day)) {
    error_offset = 4;
    return std::nullopt;
  }
  if (s[6] != ' ' || !detail::parse_fixed_int(s, 7, 2, st.hour) || s[9] != ':' ||
      !detail::parse_fixed_int(s, 10, 2, st.minute) || s[12] != ':' ||
      !detail::parse_fixed_int(s, 13, 2, st.second)) {
    error_offset = 6;
    return std::nullopt;
  }
  if (st.hour > 23 || st.minute > 59 || st.second > 59) {
    error_offset = 7;
    return std::nullopt;
  }
  return st;
}

inline std::string format_bsd_stamp(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<std::chrono::days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s %2u %02lld:%02lld:%02lld",
                kMonthAbbrev[static_cast<unsigned>(ymd.month()) - 1].data(), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(hms.hours().count()), static_cast<long long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

inline int year_of(Instant t) {
  using namespace std::chrono;
  return static_cast<int>(year_month_day{floor<std::chrono::days>(t)}.year());
}

/// Parses durations such as `30m`, `10min`, `1h`, `90s`, `2d` or a bare number of seconds.
inline std::optional<Duration> parse_duration(std::string_view s) {
  if (s.empty()) return std::nullopt;
  long long value = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || value < 0) return std::nullopt;
  std::string_view unit(p, static_cast<std::size_t>(s.data() + s.size() - p));
  if (unit.empty() || unit == "s") return Duration{value};
  if (unit == "m" || unit == "min") return minutes(value);
  if (unit == "h") return hours(value);
  if (unit == "d") return days(value);
  return std::nullopt;
}

}  // namespace sgscan
