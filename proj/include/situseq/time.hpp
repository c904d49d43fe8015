#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace situseq {

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSlotSeconds = 60;
inline constexpr int kSlotsPerDay = 1440;

// Naive local time, seconds since 1970-01-01T00:00:00. No timezone arithmetic.
struct Timestamp {
  std::int64_t seconds = 0;

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;

  constexpr std::int64_t second_of_day() const {
    std::int64_t r = seconds % kSecondsPerDay;
    return r < 0 ? r + kSecondsPerDay : r;
  }
  constexpr Timestamp operator+(std::int64_t s) const { return {seconds + s}; }
  constexpr Timestamp operator-(std::int64_t s) const { return {seconds - s}; }
};

inline Timestamp make_timestamp(int y, unsigned mo, unsigned d, int h = 0, int mi = 0, int s = 0) {
  using namespace std::chrono;
  const sys_days date{year{y} / month{mo} / std::chrono::day{d}};
  return {static_cast<std::int64_t>(date.time_since_epoch().count()) * kSecondsPerDay + h * 3600 + mi * 60 + s};
}

// Strict `YYYY-MM-DDTHH:MM:SS`. Returns nullopt on any deviation, including
// impossible calendar dates.
inline std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':')
    return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) -> int {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return -1;
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  const int y = num(0, 4), mo = num(5, 2), d = num(8, 2), h = num(11, 2), mi = num(14, 2), s = num(17, 2);
  if (y < 0 || mo < 1 || d < 1 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return make_timestamp(y, mo, d, h, mi, s);
}

inline std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  std::int64_t days = ts.seconds / kSecondsPerDay;
  std::int64_t rem = ts.seconds % kSecondsPerDay;
  if (rem < 0) {
    rem += kSecondsPerDay;
    --days;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

// Time of day expressed in seconds after midnight.
struct TimeOfDay {
  std::int64_t seconds = 0;
  friend constexpr auto operator<=>(const TimeOfDay&, const TimeOfDay&) = default;
  static constexpr TimeOfDay hm(int h, int m) { return {h * 3600 + m * 60}; }
  constexpr std::int64_t minutes() const { return seconds / 60; }
};

inline std::optional<TimeOfDay> parse_time_of_day(std::string_view text) {
  int h = 0, m = 0;
  if (text.size() != 5 || text[2] != ':') return std::nullopt;
  if (std::sscanf(std::string(text).c_str(), "%2d:%2d", &h, &m) != 2) return std::nullopt;
  if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
  return TimeOfDay::hm(h, m);
}

inline std::string format_time_of_day(TimeOfDay t) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(t.seconds / 3600), static_cast<int>(t.seconds / 60 % 60));
  return buf;
}

// Half-open interval [begin, end) on the 24 h clock; wraps midnight when end <= begin.
struct DailyWindow {
  TimeOfDay begin;
  TimeOfDay end;

  constexpr bool contains(std::int64_t second_of_day) const {
    if (begin.seconds < end.seconds) return second_of_day >= begin.seconds && second_of_day < end.seconds;
    return second_of_day >= begin.seconds || second_of_day < end.seconds;
  }
};

// Cyclic distance between two times of day, in seconds: min(|d|, 86400 - |d|).
constexpr std::int64_t cyclic_distance(std::int64_t a, std::int64_t b) {
  std::int64_t d = a - b;
  if (d < 0) d = -d;
  d %= kSecondsPerDay;
  return d < kSecondsPerDay - d ? d : kSecondsPerDay - d;
}

}  // namespace situseq
