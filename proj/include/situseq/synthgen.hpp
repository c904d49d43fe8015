#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "situseq/error.hpp"
#include "situseq/eval.hpp"
#include "situseq/ingest.hpp"
#include "situseq/state.hpp"
#include "situseq/time.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

// Interval of a day with truncated-normal jitter on both ends. `end` before
// `begin` means the interval runs past midnight.
struct JitteredInterval {
  TimeOfDay begin, end;
  double jitter_min = 0.0;  // truncation half-width; sigma is half of it
};

struct CookTemplate {
  TimeOfDay at;
  double jitter_min = 0.0;
};

struct DayTemplate {
  std::optional<JitteredInterval> sleep;
  std::vector<JitteredInterval> out;  // per user, same-day intervals
  std::vector<CookTemplate> cook;
};

struct DeviceHabit {
  std::string operation;  // "device:action"
  double rate_per_hour = 0.0;
};

// Per-channel sensor level by user activity, plus gaussian noise.
struct ChannelModel {
  double active = 0.0, sleep = 0.0, out = 0.0, noise_sd = 0.0;
  double level(UserActivity u) const {
    return u == UserActivity::active ? active : u == UserActivity::sleep ? sleep : out;
  }
};

struct SensorModel {
  ChannelModel temperature{22, 21, 20, 0.3};
  ChannelModel humidity{45, 50, 44, 1.0};
  ChannelModel atmosphere{1013, 1013, 1013, 1.0};
  ChannelModel co2{600, 1800, 450, 40.0};
  ChannelModel noise{45, 31, 33, 1.0};
  std::int64_t period_s = 300;
};

struct CookingSession {
  double fridge_lead_min_s = 30, fridge_lead_max_s = 240;  // refrigerator opened this long before the stove
  double duration_min_s = 600, duration_max_s = 1500;      // stove on until off
  double microwave_probability = 0.3;
};

struct Scenario {
  std::uint64_t seed = 1;
  std::size_t n_days = 28;
  int start_year = 2020;
  unsigned start_month = 1, start_day = 6;
  std::size_t n_users = 2;
  DayTemplate weekday, weekend;
  std::vector<DeviceHabit> habits;
  CookingSession cooking;
  SensorModel sensors;

  void validate(const Vocabulary& vocab) const {
    if (n_days == 0) throw Error(ErrorKind::validation, "scenario needs at least one day");
    if (n_users == 0) throw Error(ErrorKind::validation, "scenario needs at least one user");
    for (const auto* t : {&weekday, &weekend}) {
      if (t->out.size() > n_users) throw Error(ErrorKind::validation, "more out intervals than users");
      for (const auto& o : t->out)
        if (!(o.begin < o.end)) throw Error(ErrorKind::validation, "out intervals must not cross midnight");
      for (const auto& c : t->cook)
        if (c.jitter_min < 0) throw Error(ErrorKind::validation, "jitter must be nonnegative");
    }
    for (const auto& h : habits) {
      if (h.rate_per_hour < 0) throw Error(ErrorKind::validation, "habit rates must be nonnegative");
      if (!vocab.find_key(h.operation)) throw Error(ErrorKind::vocabulary, "unknown habit operation " + h.operation);
    }
    if (cooking.fridge_lead_min_s > cooking.fridge_lead_max_s || cooking.duration_min_s > cooking.duration_max_s ||
        cooking.duration_min_s < 0 || cooking.fridge_lead_min_s < 0)
      throw Error(ErrorKind::validation, "cooking session bounds are inconsistent");
    if (sensors.period_s <= 0) throw Error(ErrorKind::validation, "sensor period must be positive");
  }
};

inline Scenario scenario_s1(std::uint64_t seed = 1) {
  Scenario s;
  s.seed = seed;
  const auto hm = TimeOfDay::hm;
  s.weekday.sleep = JitteredInterval{hm(23, 30), hm(7, 0), 10};
  s.weekday.out = {{hm(9, 0), hm(18, 0), 10}, {hm(9, 0), hm(18, 0), 10}};
  s.weekday.cook = {{hm(7, 30), 10}, {hm(19, 0), 10}};
  s.weekend = s.weekday;
  s.weekend.out.clear();
  s.habits = {{"room_light:on", 0.4},       {"room_light:off", 0.4},     {"tv:on", 0.3},
              {"tv:off", 0.3},              {"refrigerator:open", 0.5},  {"air_conditioner:cooling", 0.1},
              {"air_conditioner:off", 0.1}, {"electric_fan:on", 0.1},    {"electric_fan:off", 0.1},
              {"washing_machine:on", 0.05}};
  return s;
}

struct TruthRow {
  Timestamp timestamp;
  UserActivity u;
  DeviceUsage d;
};

struct GeneratedData {
  std::vector<EventRecord> events;
  std::vector<SensorFrame> frames;
  std::vector<TruthRow> truth;  // one row per minute
};

inline std::string write_truth_csv(const std::vector<TruthRow>& rows) {
  std::string out = "timestamp,u,d\n";
  for (const auto& r : rows)
    out += format_timestamp(r.timestamp) + "," + std::string(to_string(r.u)) + "," + std::string(to_string(r.d)) + "\n";
  return out;
}

namespace detail {

class DayRng {
 public:
  explicit DayRng(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  // Normal with sigma = half_width / 2, redrawn until within +-half_width.
  double jitter(double half_width) {
    if (half_width <= 0) return 0.0;
    std::normal_distribution<double> n(0.0, half_width / 2.0);
    while (true) {
      const double v = n(rng_);
      if (std::abs(v) <= half_width) return v;
    }
  }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(rng_); }
  double gaussian(double sd) { return sd <= 0 ? 0.0 : std::normal_distribution<double>(0.0, sd)(rng_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng_); }

 private:
  std::mt19937_64 rng_;
};

struct Span {
  std::int64_t begin, end;  // absolute seconds, half-open
  bool contains(std::int64_t t) const { return begin <= t && t < end; }
};

inline std::int64_t jittered(std::int64_t day_start, TimeOfDay t, double jitter_min, DayRng& rng) {
  return day_start + t.seconds + static_cast<std::int64_t>(std::llround(rng.jitter(jitter_min) * 60.0));
}

inline bool is_weekend(int y, unsigned m, unsigned d, std::int64_t offset) {
  using namespace std::chrono;
  const weekday wd{sys_days{year{y} / month{m} / day{d}} + days{offset}};
  return wd == Saturday || wd == Sunday;
}

}  // namespace detail

// Deterministic given the scenario. Cooking happens only at the template
// times and only if someone is home and awake; other devices fire as Poisson
// processes while someone is home and awake.
inline GeneratedData generate(const Scenario& sc, const Vocabulary& vocab = Vocabulary::standard()) {
  sc.validate(vocab);
  using detail::Span;
  const Timestamp origin = make_timestamp(sc.start_year, sc.start_month, sc.start_day);
  const std::int64_t t0 = origin.seconds, t_end = t0 + static_cast<std::int64_t>(sc.n_days) * kSecondsPerDay;

  struct Session {
    std::int64_t fridge, on, off;
    std::optional<std::int64_t> microwave;
  };
  std::vector<Span> sleeps;
  std::vector<std::vector<Span>> outs(sc.n_users);
  std::vector<Session> sessions;
  std::vector<std::uint64_t> day_seeds;

  // Schedules; day -1 only contributes the night that runs into the first morning.
  for (std::int64_t d = -1; d < static_cast<std::int64_t>(sc.n_days); ++d) {
    detail::DayRng rng(derive_seed(sc.seed, static_cast<std::uint64_t>(d + 1)));
    const std::int64_t ds = t0 + d * kSecondsPerDay;
    const auto& tpl = detail::is_weekend(sc.start_year, sc.start_month, sc.start_day, d) ? sc.weekend : sc.weekday;
    if (tpl.sleep) {
      const auto& s = *tpl.sleep;
      const std::int64_t len = (s.end.seconds - s.begin.seconds + kSecondsPerDay) % kSecondsPerDay;
      const std::int64_t b = detail::jittered(ds, s.begin, s.jitter_min, rng);
      const std::int64_t e = detail::jittered(ds + len, s.begin, s.jitter_min, rng);
      if (e > b) sleeps.push_back({b, e});
    }
    if (d < 0) continue;
    for (std::size_t u = 0; u < tpl.out.size(); ++u) {
      const auto& o = tpl.out[u];
      const std::int64_t b = detail::jittered(ds, o.begin, o.jitter_min, rng);
      const std::int64_t e = detail::jittered(ds, o.end, o.jitter_min, rng);
      if (e > b) outs[u].push_back({b, e});
    }
    for (const auto& c : tpl.cook) {
      Session s;
      s.on = detail::jittered(ds, c.at, c.jitter_min, rng);
      s.fridge = s.on - static_cast<std::int64_t>(std::llround(rng.uniform(sc.cooking.fridge_lead_min_s, sc.cooking.fridge_lead_max_s)));
      s.off = s.on + static_cast<std::int64_t>(std::llround(rng.uniform(sc.cooking.duration_min_s, sc.cooking.duration_max_s)));
      if (rng.bernoulli(sc.cooking.microwave_probability))
        s.microwave = s.on + static_cast<std::int64_t>(std::llround(rng.uniform(0.0, static_cast<double>(s.off - s.on))));
      sessions.push_back(s);
    }
    day_seeds.push_back(derive_seed(sc.seed ^ 0xD1CEULL, static_cast<std::uint64_t>(d)));
  }

  auto asleep = [&](std::int64_t t) {
    return std::any_of(sleeps.begin(), sleeps.end(), [&](const Span& s) { return s.contains(t); });
  };
  auto home_count = [&](std::int64_t t) {
    std::size_t n = sc.n_users;
    for (const auto& spans : outs)
      if (std::any_of(spans.begin(), spans.end(), [&](const Span& s) { return s.contains(t); })) --n;
    return n;
  };
  auto activity = [&](std::int64_t t) {
    if (home_count(t) == 0) return UserActivity::out;
    return asleep(t) ? UserActivity::sleep : UserActivity::active;
  };

  GeneratedData g;
  struct Pending {
    std::int64_t t;
    std::size_t order;
    EventRecord e;
  };
  std::vector<Pending> pending;
  auto emit = [&](std::int64_t t, const std::string& key, std::string actor) {
    if (t < t0 || t >= t_end) return;
    pending.push_back({t, pending.size(), {Timestamp{t}, vocab.require(key.substr(0, key.find(':')), key.substr(key.find(':') + 1)), std::move(actor)}});
  };

  const std::string presence = vocab.presence_device();
  for (std::size_t u = 0; u < sc.n_users; ++u)
    for (const auto& s : outs[u]) {
      const std::string actor = "user" + std::to_string(u + 1);
      emit(s.begin, presence + ":" + vocab.exit_action(), actor);
      emit(s.end, presence + ":" + vocab.entry_action(), actor);
    }

  std::vector<Span> use;
  for (const auto& s : sessions) {
    if (activity(s.fridge) != UserActivity::active || activity(s.off) != UserActivity::active) continue;
    emit(s.fridge, "refrigerator:open", "user1");
    emit(s.on, "cooking_stove:on", "user1");
    if (s.microwave) emit(*s.microwave, "microwave:on", "user1");
    emit(s.off, "cooking_stove:off", "user1");
    use.push_back({s.on, s.off + 1});
  }

  for (std::size_t d = 0; d < sc.n_days; ++d) {
    detail::DayRng rng(day_seeds[d]);
    const std::int64_t ds = t0 + static_cast<std::int64_t>(d) * kSecondsPerDay;
    for (const auto& h : sc.habits) {
      if (h.rate_per_hour <= 0) continue;
      double t = 0.0;
      while (true) {
        t += rng.exponential(h.rate_per_hour / 3600.0);
        if (t >= static_cast<double>(kSecondsPerDay)) break;
        const std::int64_t at = ds + static_cast<std::int64_t>(t);
        if (activity(at) == UserActivity::active) emit(at, h.operation, "user1");
      }
    }
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.t != b.t ? a.t < b.t : a.order < b.order; });
  for (auto& p : pending) g.events.push_back(std::move(p.e));

  for (std::int64_t t = t0; t < t_end; t += kSlotSeconds) {
    const bool in_use = std::any_of(use.begin(), use.end(), [&](const Span& s) { return s.contains(t); });
    g.truth.push_back({Timestamp{t}, activity(t), in_use ? DeviceUsage::use : DeviceUsage::none});
  }

  detail::DayRng noise(derive_seed(sc.seed ^ 0x5E45ULL, 0));
  const auto& r = vocab.sensor_ranges();
  const auto& m = sc.sensors;
  for (std::int64_t t = t0; t < t_end; t += m.period_s) {
    const auto u = activity(t);
    auto sample = [&](const ChannelModel& c, const Range& range) {
      return std::clamp(c.level(u) + noise.gaussian(c.noise_sd), range.lo, range.hi);
    };
    SensorFrame f;
    f.timestamp = Timestamp{t};
    f.temperature = sample(m.temperature, r.temperature);
    f.humidity = sample(m.humidity, r.humidity);
    f.atmosphere = sample(m.atmosphere, r.atmosphere);
    f.co2 = sample(m.co2, r.co2);
    f.noise = sample(m.noise, r.noise);
    g.frames.push_back(f);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

inline TimeOfDay tod_from_json(const nlohmann::json& j) {
  auto t = parse_time_of_day(j.get<std::string>());
  if (!t) throw Error(ErrorKind::validation, "invalid time of day " + j.dump());
  return *t;
}

inline JitteredInterval interval_from_json(const nlohmann::json& j) {
  return {tod_from_json(j.at("begin")), tod_from_json(j.at("end")), j.value("jitter_min", 0.0)};
}

inline nlohmann::json interval_to_json(const JitteredInterval& i) {
  return {{"begin", format_time_of_day(i.begin)}, {"end", format_time_of_day(i.end)}, {"jitter_min", i.jitter_min}};
}

inline DayTemplate day_template_from_json(const nlohmann::json& j) {
  DayTemplate t;
  if (j.contains("sleep") && !j.at("sleep").is_null()) t.sleep = interval_from_json(j.at("sleep"));
  if (j.contains("out"))
    for (const auto& o : j.at("out")) t.out.push_back(interval_from_json(o));
  if (j.contains("cook"))
    for (const auto& c : j.at("cook")) t.cook.push_back({tod_from_json(c.at("at")), c.value("jitter_min", 0.0)});
  return t;
}

inline nlohmann::json day_template_to_json(const DayTemplate& t) {
  nlohmann::json j;
  j["sleep"] = t.sleep ? interval_to_json(*t.sleep) : nlohmann::json(nullptr);
  j["out"] = nlohmann::json::array();
  for (const auto& o : t.out) j["out"].push_back(interval_to_json(o));
  j["cook"] = nlohmann::json::array();
  for (const auto& c : t.cook) j["cook"].push_back({{"at", format_time_of_day(c.at)}, {"jitter_min", c.jitter_min}});
  return j;
}

inline void channel_from_json(const nlohmann::json& j, const char* key, ChannelModel& c) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  c.active = v.value("active", c.active);
  c.sleep = v.value("sleep", c.sleep);
  c.out = v.value("out", c.out);
  c.noise_sd = v.value("noise_sd", c.noise_sd);
}

}  // namespace detail

// A scenario file may start from {"preset": "s1"} and override any field.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s = j.value("preset", "") == "s1" ? scenario_s1() : Scenario{};
    if (j.contains("preset") && j.at("preset") != "s1")
      throw Error(ErrorKind::validation, "unknown scenario preset " + j.at("preset").dump());
    s.seed = j.value("seed", s.seed);
    s.n_days = j.value("n_days", s.n_days);
    s.n_users = j.value("n_users", s.n_users);
    if (j.contains("start_date")) {
      auto ts = parse_timestamp(j.at("start_date").get<std::string>() + "T00:00:00");
      if (!ts) throw Error(ErrorKind::validation, "start_date must be YYYY-MM-DD");
      const auto text = j.at("start_date").get<std::string>();
      s.start_year = std::stoi(text.substr(0, 4));
      s.start_month = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
      s.start_day = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    }
    if (j.contains("day_templates")) {
      const auto& t = j.at("day_templates");
      if (t.contains("weekday")) s.weekday = detail::day_template_from_json(t.at("weekday"));
      if (t.contains("weekend")) s.weekend = detail::day_template_from_json(t.at("weekend"));
    }
    if (j.contains("device_habits")) {
      s.habits.clear();
      for (const auto& h : j.at("device_habits"))
        s.habits.push_back({h.at("operation").get<std::string>(), h.at("rate_per_hour").get<double>()});
    }
    if (j.contains("cooking")) {
      const auto& c = j.at("cooking");
      auto& o = s.cooking;
      o.fridge_lead_min_s = c.value("fridge_lead_min_s", o.fridge_lead_min_s);
      o.fridge_lead_max_s = c.value("fridge_lead_max_s", o.fridge_lead_max_s);
      o.duration_min_s = c.value("duration_min_s", o.duration_min_s);
      o.duration_max_s = c.value("duration_max_s", o.duration_max_s);
      o.microwave_probability = c.value("microwave_probability", o.microwave_probability);
    }
    if (j.contains("sensor_model")) {
      const auto& m = j.at("sensor_model");
      detail::channel_from_json(m, "temperature", s.sensors.temperature);
      detail::channel_from_json(m, "humidity", s.sensors.humidity);
      detail::channel_from_json(m, "atmosphere", s.sensors.atmosphere);
      detail::channel_from_json(m, "co2", s.sensors.co2);
      detail::channel_from_json(m, "noise", s.sensors.noise);
      s.sensors.period_s = m.value("period_s", s.sensors.period_s);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("scenario: ") + e.what());
  }
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  char date[16];
  std::snprintf(date, sizeof date, "%04d-%02u-%02u", s.start_year, s.start_month, s.start_day);
  nlohmann::json j;
  j["seed"] = s.seed;
  j["n_days"] = s.n_days;
  j["n_users"] = s.n_users;
  j["start_date"] = date;
  j["day_templates"] = {{"weekday", detail::day_template_to_json(s.weekday)},
                        {"weekend", detail::day_template_to_json(s.weekend)}};
  j["device_habits"] = nlohmann::json::array();
  for (const auto& h : s.habits) j["device_habits"].push_back({{"operation", h.operation}, {"rate_per_hour", h.rate_per_hour}});
  j["cooking"] = {{"fridge_lead_min_s", s.cooking.fridge_lead_min_s},
                  {"fridge_lead_max_s", s.cooking.fridge_lead_max_s},
                  {"duration_min_s", s.cooking.duration_min_s},
                  {"duration_max_s", s.cooking.duration_max_s},
                  {"microwave_probability", s.cooking.microwave_probability}};
  auto ch = [](const ChannelModel& c) {
    return nlohmann::json{{"active", c.active}, {"sleep", c.sleep}, {"out", c.out}, {"noise_sd", c.noise_sd}};
  };
  j["sensor_model"] = {{"temperature", ch(s.sensors.temperature)}, {"humidity", ch(s.sensors.humidity)},
                       {"atmosphere", ch(s.sensors.atmosphere)},   {"co2", ch(s.sensors.co2)},
                       {"noise", ch(s.sensors.noise)},             {"period_s", s.sensors.period_s}};
  return j;
}

}  // namespace situseq
