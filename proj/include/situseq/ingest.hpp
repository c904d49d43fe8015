#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "situseq/csv.hpp"
#include "situseq/error.hpp"
#include "situseq/time.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

// One timestamped device operation or user entry/exit.
struct EventRecord {
  Timestamp timestamp;
  OperationId op = 0;
  std::string actor;  // empty when unknown

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct SensorFrame {
  Timestamp timestamp;
  double temperature = 0.0;  // degC
  double humidity = 0.0;     // %
  double atmosphere = 0.0;   // mbar
  double co2 = 0.0;          // ppm
  double noise = 0.0;        // dB

  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

struct TimeslotRecord {
  int k = 1;            // slot of day, 1..1440 relative to the day origin
  std::int64_t t = 1;   // slot of data, 1-based, gapless
  Timestamp start;
  SensorFrame sensors;  // last observation carried forward
  std::vector<EventRecord> events;

  std::int64_t day() const { return (t - 1) / kSlotsPerDay; }
};

enum class UnknownOperationPolicy { reject, skip };

struct ParseReport {
  std::vector<std::string> warnings;
};

namespace detail {

inline double parse_double(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e || b == e)
    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": invalid number in " + field + ": '" + s + "'");
  return v;
}

inline Timestamp parse_ts(const std::string& s, std::size_t line) {
  auto ts = parse_timestamp(s);
  if (!ts) throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": invalid timestamp '" + s + "'");
  return *ts;
}

inline void expect_header(const std::vector<csv::Row>& rows, const std::vector<std::string>& header,
                          const char* what) {
  if (rows.empty() || rows.front().fields != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorKind::parse, std::string(what) + ": line 1: expected header '" + want + "'");
  }
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<EventRecord> parse_operation_log_text(std::string_view text, const Vocabulary& vocab,
                                                         UnknownOperationPolicy policy = UnknownOperationPolicy::reject,
                                                         ParseReport* report = nullptr) {
  const auto rows = csv::parse(text);
  detail::expect_header(rows, {"timestamp", "device", "action", "actor"}, "operation log");
  std::vector<EventRecord> out;
  out.reserve(rows.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 4)
      throw Error(ErrorKind::parse, "line " + std::to_string(row.line) + ": expected 4 fields, got " +
                                        std::to_string(row.fields.size()));
    const Timestamp ts = detail::parse_ts(row.fields[0], row.line);
    auto id = vocab.find(row.fields[1], row.fields[2]);
    if (!id) {
      const std::string msg = "line " + std::to_string(row.line) + ": unregistered operation " + row.fields[1] + ":" +
                              row.fields[2];
      if (policy == UnknownOperationPolicy::reject) throw Error(ErrorKind::schema, msg);
      if (report) report->warnings.push_back(msg + " (skipped)");
      continue;
    }
    out.push_back({ts, *id, row.fields[3]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
  return out;
}

inline std::vector<EventRecord> parse_operation_log(const std::string& path, const Vocabulary& vocab,
                                                    UnknownOperationPolicy policy = UnknownOperationPolicy::reject,
                                                    ParseReport* report = nullptr) {
  return parse_operation_log_text(csv::read_file(path), vocab, policy, report);
}

inline void validate_frame(const SensorFrame& f, const SensorRanges& ranges, std::size_t line = 0) {
  auto check = [&](double v, const Range& r, const char* name) {
    if (!r.contains(v)) {
      std::string where = line ? "line " + std::to_string(line) + ": " : std::string();
      throw Error(ErrorKind::validation, where + name + " value " + detail::format_number(v) + " outside [" +
                                             detail::format_number(r.lo) + ", " + detail::format_number(r.hi) + "]");
    }
  };
  check(f.temperature, ranges.temperature, "temperature");
  check(f.humidity, ranges.humidity, "humidity");
  check(f.atmosphere, ranges.atmosphere, "atmosphere");
  check(f.co2, ranges.co2, "co2");
  check(f.noise, ranges.noise, "noise");
}

inline std::vector<SensorFrame> parse_sensor_log_text(std::string_view text, const SensorRanges& ranges = {}) {
  const auto rows = csv::parse(text);
  detail::expect_header(rows, {"timestamp", "temperature", "humidity", "atmosphere", "co2", "noise"}, "sensor log");
  std::vector<SensorFrame> out;
  out.reserve(rows.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 6)
      throw Error(ErrorKind::parse, "line " + std::to_string(row.line) + ": expected 6 fields, got " +
                                        std::to_string(row.fields.size()));
    SensorFrame f;
    f.timestamp = detail::parse_ts(row.fields[0], row.line);
    f.temperature = detail::parse_double(row.fields[1], row.line, "temperature");
    f.humidity = detail::parse_double(row.fields[2], row.line, "humidity");
    f.atmosphere = detail::parse_double(row.fields[3], row.line, "atmosphere");
    f.co2 = detail::parse_double(row.fields[4], row.line, "co2");
    f.noise = detail::parse_double(row.fields[5], row.line, "noise");
    validate_frame(f, ranges, row.line);
    out.push_back(f);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SensorFrame& a, const SensorFrame& b) { return a.timestamp < b.timestamp; });
  return out;
}

inline std::vector<SensorFrame> parse_sensor_log(const std::string& path, const SensorRanges& ranges = {}) {
  return parse_sensor_log_text(csv::read_file(path), ranges);
}

inline std::string write_operation_log(const std::vector<EventRecord>& events, const Vocabulary& vocab) {
  std::string out = "timestamp,device,action,actor\n";
  for (const auto& e : events) {
    const auto& op = vocab.operation(e.op);
    out += csv::join({format_timestamp(e.timestamp), op.device, op.action, e.actor});
  }
  return out;
}

inline std::string write_sensor_log(const std::vector<SensorFrame>& frames) {
  using detail::format_number;
  std::string out = "timestamp,temperature,humidity,atmosphere,co2,noise\n";
  for (const auto& f : frames)
    out += csv::join({format_timestamp(f.timestamp), format_number(f.temperature), format_number(f.humidity),
                      format_number(f.atmosphere), format_number(f.co2), format_number(f.noise)});
  return out;
}

// Start of the day (relative to `origin`) containing `ts`.
inline Timestamp day_start(Timestamp ts, TimeOfDay origin) {
  std::int64_t shifted = ts.seconds - origin.seconds;
  std::int64_t day = shifted >= 0 ? shifted / kSecondsPerDay : -((-shifted + kSecondsPerDay - 1) / kSecondsPerDay);
  return {day * kSecondsPerDay + origin.seconds};
}

// Slot of day (1..1440) of the slot starting at or containing `ts`.
inline int slot_of_day(Timestamp ts, TimeOfDay origin) {
  return static_cast<int>((ts.seconds - day_start(ts, origin).seconds) / kSlotSeconds) + 1;
}

// One record per minute between the first and last day boundary covering the
// inputs. Sensor values are carried forward from the latest frame at or
// before each slot start.
inline std::vector<TimeslotRecord> build_timeslots(const std::vector<EventRecord>& events,
                                                   const std::vector<SensorFrame>& frames,
                                                   TimeOfDay day_origin = {},
                                                   const std::optional<SensorFrame>& default_frame = std::nullopt) {
  auto by_time = [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; };
  if (!std::is_sorted(events.begin(), events.end(), by_time) || !std::is_sorted(frames.begin(), frames.end(), by_time))
    throw Error(ErrorKind::usage, "build_timeslots: inputs must be sorted by timestamp");
  if (events.empty() && frames.empty()) return {};

  Timestamp first{INT64_MAX}, last{INT64_MIN};
  if (!events.empty()) first = std::min(first, events.front().timestamp), last = std::max(last, events.back().timestamp);
  if (!frames.empty()) first = std::min(first, frames.front().timestamp), last = std::max(last, frames.back().timestamp);
  const Timestamp begin = day_start(first, day_origin);
  const Timestamp end = day_start(last, day_origin) + kSecondsPerDay;
  const std::int64_t n_slots = (end.seconds - begin.seconds) / kSlotSeconds;

  if ((frames.empty() || frames.front().timestamp > begin) && !default_frame)
    throw Error(ErrorKind::initialization,
                "no sensor frame at or before first slot " + format_timestamp(begin) + " and no default frame");

  std::vector<TimeslotRecord> slots(static_cast<std::size_t>(n_slots));
  std::size_t fi = 0, ei = 0;
  std::optional<SensorFrame> current = default_frame;
  for (std::int64_t s = 0; s < n_slots; ++s) {
    auto& slot = slots[static_cast<std::size_t>(s)];
    slot.t = s + 1;
    slot.k = static_cast<int>(s % kSlotsPerDay) + 1;
    slot.start = begin + s * kSlotSeconds;
    while (fi < frames.size() && frames[fi].timestamp <= slot.start) current = frames[fi++];
    slot.sensors = *current;
    const Timestamp slot_end = slot.start + kSlotSeconds;
    while (ei < events.size() && events[ei].timestamp < slot_end) slot.events.push_back(events[ei++]);
  }
  return slots;
}

}  // namespace situseq
