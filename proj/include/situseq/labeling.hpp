#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "situseq/csv.hpp"
#include "situseq/ingest.hpp"
#include "situseq/state.hpp"
#include "situseq/time.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

struct LabelingParams {
  int before_slots = 15;
  int after_slots = 15;
  int cooking_slots = 10;
  DailyWindow night{TimeOfDay::hm(22, 0), TimeOfDay::hm(10, 0)};
  // Operations during the night before this time trigger the pre-sleep
  // correction, operations at or after it the post-sleep correction.
  TimeOfDay correction_split = TimeOfDay::hm(5, 0);
  double noise_threshold = 35.0;   // dB, sleep requires noise below
  double co2_threshold = 1500.0;   // ppm, sleep requires co2 above
  int sleep_gap_merge_min = 90;
  int use_gap_merge_min = 15;
  int presleep_correction_h = 5;
  int postsleep_correction_h = 4;
  int initial_occupants = 1;

  void validate() const {
    if (before_slots < 0 || after_slots < 0 || cooking_slots < 0 || sleep_gap_merge_min < 0 ||
        use_gap_merge_min < 0 || presleep_correction_h < 0 || postsleep_correction_h < 0 || initial_occupants < 0 ||
        noise_threshold < 0 || co2_threshold < 0)
      throw Error(ErrorKind::validation, "labeling parameters must be nonnegative");
  }
};

// Per-slot labels at three granularities: the label of the slot as a whole,
// the state in force at the slot's first instant, and the state in force at
// each event of the slot.
template <typename Label>
struct SlotLabels {
  std::vector<Label> slot;
  std::vector<Label> entry;
  std::vector<std::vector<Label>> events;
};

struct UserActivityLabels : SlotLabels<UserActivity> {
  std::vector<bool> excluded_day;  // indexed by data day
};

using DeviceUsageLabels = SlotLabels<DeviceUsage>;

struct LabeledSlot {
  const TimeslotRecord* slot = nullptr;
  StateIndex state = 0;        // label of the whole slot
  StateIndex entry_state = 0;  // state at the slot boundary instant
  std::vector<StateIndex> event_states;
  bool excluded_day = false;
};

inline std::vector<EventRecord> presence_events(const std::vector<EventRecord>& events, const Vocabulary& vocab) {
  std::vector<EventRecord> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [&](const EventRecord& e) { return vocab.is_presence(e.op); });
  return out;
}

// Presence events must lie inside the span covered by the slots.
inline void check_presence_events(std::span<const TimeslotRecord> slots, const std::vector<EventRecord>& presence) {
  if (presence.empty()) return;
  if (slots.empty() || presence.front().timestamp < slots.front().start)
    throw Error(ErrorKind::bookkeeping, "presence event at " + format_timestamp(presence.front().timestamp) +
                                            " precedes the dataset start");
  if (presence.back().timestamp >= slots.back().start + kSlotSeconds)
    throw Error(ErrorKind::bookkeeping, "presence event at " + format_timestamp(presence.back().timestamp) +
                                            " is after the dataset end");
}

inline UserActivityLabels label_user_activity(std::span<const TimeslotRecord> slots, const Vocabulary& vocab,
                                              const LabelingParams& params) {
  params.validate();
  const std::size_t n = slots.size();
  UserActivityLabels out;
  out.slot.assign(n, UserActivity::active);
  out.entry.assign(n, UserActivity::active);
  out.events.resize(n);
  out.excluded_day.assign(n == 0 ? 0 : static_cast<std::size_t>(slots.back().day() + 1), false);

  // Occupancy bookkeeping. A device operation while nobody is home means an
  // entry was not logged: one occupant from that operation onward.
  std::vector<bool> entry_out(n, false), slot_out(n, false);
  std::vector<std::vector<bool>> event_out(n);
  int count = params.initial_occupants;
  for (std::size_t s = 0; s < n; ++s) {
    entry_out[s] = count == 0;
    bool forced_active = false;
    event_out[s].resize(slots[s].events.size());
    for (std::size_t e = 0; e < slots[s].events.size(); ++e) {
      const auto op = slots[s].events[e].op;
      if (vocab.is_entry(op)) {
        event_out[s][e] = count == 0;
        ++count;
      } else if (vocab.is_exit(op)) {
        event_out[s][e] = count == 0;
        count = std::max(0, count - 1);
      } else {
        if (count == 0) {
          count = 1;
          forced_active = true;
          out.excluded_day[static_cast<std::size_t>(slots[s].day())] = true;
        }
        event_out[s][e] = false;
      }
    }
    slot_out[s] = entry_out[s] && !forced_active;
  }

  // Sleep from night-time sensor levels.
  std::vector<bool> night(n), sleep(n, false);
  for (std::size_t s = 0; s < n; ++s) {
    night[s] = params.night.contains(slots[s].start.second_of_day());
    const auto& f = slots[s].sensors;
    sleep[s] = night[s] && !slot_out[s] && f.noise < params.noise_threshold && f.co2 > params.co2_threshold;
  }

  // Two sleep slots within the merge gap inside one night: everything between sleeps too.
  const std::int64_t sleep_gap = params.sleep_gap_merge_min * 60 / kSlotSeconds;
  std::size_t prev = n;
  for (std::size_t s = 0; s < n; ++s) {
    if (!night[s]) {
      prev = n;
      continue;
    }
    if (!sleep[s]) continue;
    if (prev != n && static_cast<std::int64_t>(s - prev) <= sleep_gap)
      for (std::size_t m = prev + 1; m < s; ++m)
        if (!slot_out[m]) sleep[m] = true;
    prev = s;
  }

  // Someone operating a device during sleep was awake: relabel the hours
  // before (late night) or after (early morning) the operation as active.
  std::vector<bool> awake(n, false);
  const std::int64_t pre = params.presleep_correction_h * 3600 / kSlotSeconds;
  const std::int64_t post = params.postsleep_correction_h * 3600 / kSlotSeconds;
  const DailyWindow late_night{params.night.begin, params.correction_split};
  for (std::size_t s = 0; s < n; ++s) {
    if (!sleep[s]) continue;
    for (const auto& ev : slots[s].events) {
      if (vocab.is_presence(ev.op)) continue;
      const auto tod = ev.timestamp.second_of_day();
      const auto si = static_cast<std::int64_t>(s);
      std::int64_t lo = si, hi = si;
      if (late_night.contains(tod))
        lo = std::max<std::int64_t>(0, si - pre);
      else
        hi = std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1, si + post);
      for (std::int64_t m = lo; m <= hi; ++m) awake[static_cast<std::size_t>(m)] = true;
    }
  }

  for (std::size_t s = 0; s < n; ++s) {
    const UserActivity home = (sleep[s] && !awake[s]) ? UserActivity::sleep : UserActivity::active;
    out.slot[s] = slot_out[s] ? UserActivity::out : home;
    out.entry[s] = entry_out[s] ? UserActivity::out : home;
    out.events[s].resize(slots[s].events.size());
    for (std::size_t e = 0; e < slots[s].events.size(); ++e)
      out.events[s][e] = event_out[s][e] ? UserActivity::out : home;
  }
  return out;
}

inline DeviceUsageLabels label_device_usage(std::span<const TimeslotRecord> slots, const Vocabulary& vocab,
                                            const LabelingParams& params) {
  params.validate();
  const std::size_t n = slots.size();
  std::vector<bool> use(n, false);
  for (std::size_t s = 0; s < n; ++s)
    for (const auto& ev : slots[s].events)
      if (vocab.is_cooking(ev.op))
        for (std::size_t m = s; m <= std::min(n - 1, s + static_cast<std::size_t>(params.cooking_slots)); ++m)
          use[m] = true;

  const std::size_t gap = static_cast<std::size_t>(params.use_gap_merge_min * 60 / kSlotSeconds);
  std::size_t last_use = n;
  for (std::size_t s = 0; s < n; ++s) {
    if (!use[s]) continue;
    if (last_use != n && s - last_use > 1 && s - last_use <= gap)
      for (std::size_t m = last_use + 1; m < s; ++m) use[m] = true;
    last_use = s;
  }

  DeviceUsageLabels out;
  out.slot.assign(n, DeviceUsage::none);
  for (std::size_t s = 0; s < n; ++s)
    if (use[s]) out.slot[s] = DeviceUsage::use;
  auto mark = [&](std::int64_t m, DeviceUsage d) {
    if (m < 0 || m >= static_cast<std::int64_t>(n)) return;
    auto& cur = out.slot[static_cast<std::size_t>(m)];
    // use > before > after > none; enum order encodes precedence
    if (static_cast<int>(d) < static_cast<int>(cur)) cur = d;
  };
  for (std::size_t s = 0; s < n; ++s) {
    if (!use[s]) continue;
    const auto si = static_cast<std::int64_t>(s);
    if (s == 0 || !use[s - 1])
      for (std::int64_t m = si - params.before_slots; m < si; ++m) mark(m, DeviceUsage::before);
    if (s + 1 == n || !use[s + 1])
      for (std::int64_t m = si + 1; m <= si + params.after_slots; ++m) mark(m, DeviceUsage::after);
  }

  // A use run starts at the first cooking operation of its first slot; the
  // instants before it keep the preceding state.
  out.entry = out.slot;
  out.events.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    out.events[s].assign(slots[s].events.size(), out.slot[s]);
    if (!use[s] || (s > 0 && use[s - 1])) continue;
    const DeviceUsage prior = s > 0 ? out.slot[s - 1] : (params.before_slots > 0 ? DeviceUsage::before : DeviceUsage::none);
    out.entry[s] = prior;
    for (std::size_t e = 0; e < slots[s].events.size(); ++e) {
      if (vocab.is_cooking(slots[s].events[e].op)) break;
      out.events[s][e] = prior;
    }
  }
  return out;
}

namespace detail {
inline HomeState repaired(UserActivity u, DeviceUsage d) {
  if (d == DeviceUsage::use && u != UserActivity::active) u = UserActivity::active;
  return HomeState(u, d);
}
}  // namespace detail

inline std::vector<LabeledSlot> label_states(std::span<const TimeslotRecord> slots, const Vocabulary& vocab,
                                             const LabelingParams& params, const StateAlphabet& alphabet = {}) {
  const auto u = label_user_activity(slots, vocab, params);
  const auto d = label_device_usage(slots, vocab, params);
  std::vector<LabeledSlot> out(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& ls = out[s];
    ls.slot = &slots[s];
    ls.state = alphabet.index_of(detail::repaired(u.slot[s], d.slot[s]));
    ls.entry_state = alphabet.index_of(detail::repaired(u.entry[s], d.entry[s]));
    for (std::size_t e = 0; e < slots[s].events.size(); ++e)
      ls.event_states.push_back(alphabet.index_of(detail::repaired(u.events[s][e], d.events[s][e])));
    ls.excluded_day = u.excluded_day[static_cast<std::size_t>(slots[s].day())];
  }
  return out;
}

// One row per slot boundary and one per event, each with the state in force
// at that instant.
inline std::string write_labeled_csv(const std::vector<LabeledSlot>& labeled, const StateAlphabet& alphabet) {
  std::string out = "t,k,date,u,d,excluded\n";
  auto row = [&](const LabeledSlot& ls, Timestamp when, StateIndex st) {
    const auto& hs = alphabet[st];
    out += csv::join({std::to_string(ls.slot->t), std::to_string(ls.slot->k), format_timestamp(when),
                      std::string(to_string(hs.u())), std::string(to_string(hs.d())), ls.excluded_day ? "1" : "0"});
  };
  for (const auto& ls : labeled) {
    row(ls, ls.slot->start, ls.entry_state);
    for (std::size_t e = 0; e < ls.event_states.size(); ++e) row(ls, ls.slot->events[e].timestamp, ls.event_states[e]);
  }
  return out;
}

}  // namespace situseq
