#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace cachecast {

// All timestamps are UTC milliseconds since the Unix epoch. Unix time has no
// leap seconds, so hour/day arithmetic is plain integer math.
using TimeMs = std::int64_t;

inline constexpr TimeMs kMsPerSecond = 1000;
inline constexpr TimeMs kMsPerMinute = 60 * kMsPerSecond;
inline constexpr TimeMs kMsPerHour = 60 * kMsPerMinute;
inline constexpr TimeMs kMsPerDay = 24 * kMsPerHour;

// Floor division, correct for negative values.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  return a - floor_div(a, b) * b;
}

// Days since 1970-01-01 from a proleptic Gregorian date (Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = floor_div(y, 400);
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = floor_div(z, 146097);
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

inline bool is_leap_year(int y) {
  return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

inline unsigned days_in_month(int y, unsigned m) {
  static constexpr std::array<unsigned, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                     31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap_year(y)) return 29;
  return kDays[m - 1];
}

inline TimeMs make_utc(int year, unsigned month, unsigned day, unsigned hour = 0,
                       unsigned minute = 0, unsigned second = 0,
                       unsigned millis = 0) {
  return days_from_civil(year, month, day) * kMsPerDay + hour * kMsPerHour +
         minute * kMsPerMinute + second * kMsPerSecond + millis;
}

// Canonical form: "2021-07-01T00:00:00.000Z" — fixed three fractional digits.
inline std::string format_rfc3339(TimeMs t) {
  const std::int64_t day = floor_div(t, kMsPerDay);
  std::int64_t rem = t - day * kMsPerDay;
  const CivilDate cd = civil_from_days(day);
  const int hour = static_cast<int>(rem / kMsPerHour);
  rem %= kMsPerHour;
  const int minute = static_cast<int>(rem / kMsPerMinute);
  rem %= kMsPerMinute;
  const int second = static_cast<int>(rem / kMsPerSecond);
  const int ms = static_cast<int>(rem % kMsPerSecond);

  std::string out(24, '0');
  auto put = [&](int pos, int width, std::int64_t value) {
    for (int i = width - 1; i >= 0; --i) {
      out[pos + i] = static_cast<char>('0' + value % 10);
      value /= 10;
    }
  };
  put(0, 4, cd.year);
  out[4] = '-';
  put(5, 2, cd.month);
  out[7] = '-';
  put(8, 2, cd.day);
  out[10] = 'T';
  put(11, 2, hour);
  out[13] = ':';
  put(14, 2, minute);
  out[16] = ':';
  put(17, 2, second);
  out[19] = '.';
  put(20, 3, ms);
  out[23] = 'Z';
  return out;
}

// Accepts RFC 3339 UTC ("Z" offset only) with 0-9 fractional digits; digits
// beyond milliseconds must be zero since the internal resolution is 1 ms.
inline std::optional<TimeMs> parse_rfc3339(std::string_view s) {
  auto digits = [&](std::size_t pos, int n, int& out) -> bool {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (int i = 0; i < n; ++i) {
      char c = s[pos + i];
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = v;
    return true;
  };

  int year, month, day, hour, minute, second;
  if (s.size() < 20) return std::nullopt;
  if (!digits(0, 4, year) || s[4] != '-' || !digits(5, 2, month) ||
      s[7] != '-' || !digits(8, 2, day) || s[10] != 'T' ||
      !digits(11, 2, hour) || s[13] != ':' || !digits(14, 2, minute) ||
      s[16] != ':' || !digits(17, 2, second)) {
    return std::nullopt;
  }
  if (month < 1 || month > 12) return std::nullopt;
  if (day < 1 || day > static_cast<int>(days_in_month(year, month)))
    return std::nullopt;
  if (hour > 23 || minute > 59 || second > 59) return std::nullopt;

  std::size_t pos = 19;
  int millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int n_digits = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (n_digits < 3) {
        millis = millis * 10 + (s[pos] - '0');
      } else if (s[pos] != '0') {
        return std::nullopt;  // sub-millisecond precision is not representable
      }
      ++n_digits;
      ++pos;
    }
    if (n_digits == 0 || n_digits > 9) return std::nullopt;
    for (int i = n_digits; i < 3; ++i) millis *= 10;
  }
  if (pos + 1 != s.size() || s[pos] != 'Z') return std::nullopt;

  return make_utc(year, static_cast<unsigned>(month),
                  static_cast<unsigned>(day), static_cast<unsigned>(hour),
                  static_cast<unsigned>(minute), static_cast<unsigned>(second),
                  static_cast<unsigned>(millis));
}

inline TimeMs floor_to_hour(TimeMs t) {
  return floor_div(t, kMsPerHour) * kMsPerHour;
}

inline TimeMs floor_to_day(TimeMs t) {
  return floor_div(t, kMsPerDay) * kMsPerDay;
}

}  // namespace cachecast
