#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "situseq/cli.hpp"
#include "situseq/csv.hpp"
#include "situseq/eval.hpp"
#include "situseq/hsmodel.hpp"
#include "situseq/ingest.hpp"
#include "situseq/labeling.hpp"
#include "situseq/model.hpp"
#include "situseq/vocabulary.hpp"

namespace support {

using namespace situseq;

inline std::string fixture(const std::string& name) { return std::string(SITUSEQ_FIXTURES) + "/" + name; }

inline bool sums_to_one(const std::vector<double>& v, double tol = 1e-9) {
  double s = 0;
  for (double x : v) {
    if (!(x >= 0.0)) return false;
    s += x;
  }
  return std::abs(s - 1.0) <= tol;
}

struct MidnightDay {
  Vocabulary vocab;
  PipelineParams params;
  std::vector<TimeslotRecord> slots;
};

inline MidnightDay load_midnight() {
  MidnightDay t;
  t.vocab = Vocabulary::from_json(cli::read_json_file(fixture("midnight_vocab.json")));
  params_from_json(cli::read_json_file(fixture("midnight_params.json")), t.params);
  const auto events = parse_operation_log(fixture("midnight_operations.csv"), t.vocab);
  const auto frames = parse_sensor_log(fixture("midnight_sensors.csv"), t.vocab.sensor_ranges());
  t.slots = build_timeslots(events, frames, t.params.day_origin);
  return t;
}

// Random filter problem in both the library's and the oracle's representation.
struct RandomFilter {
  TransitionTensor a;
  OperationTable b;
  StateBelief initial;
  std::vector<TimeslotRecord> slots;
  oracle::FilterInstance ref;
};

inline RandomFilter random_filter(std::mt19937_64& rng, std::size_t max_states = 5, std::size_t max_slots = 50,
                                  std::size_t max_ops = 10) {
  std::uniform_int_distribution<std::size_t> pick_n(1, max_states), pick_slots(1, max_slots), pick_ops(1, max_ops);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  RandomFilter f;
  const std::size_t n = pick_n(rng), n_slots = pick_slots(rng), n_ops = pick_ops(rng);
  f.ref.n = n;
  f.a = TransitionTensor(n);
  f.b = OperationTable(n, n_ops);

  // Operation table: mixture of zeros, exact ones (unseen columns) and random values.
  f.ref.emit.assign(n, std::vector<double>(n_ops));
  for (OperationId x = 0; x < n_ops; ++x) {
    const double kind = u01(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double v = kind < 0.15 ? 1.0 : (u01(rng) < 0.2 ? 0.0 : u01(rng));
      f.b.at(i, x) = v;
      f.ref.emit[i][x] = v;
    }
  }

  const int k0 = std::uniform_int_distribution<int>(1, kSlotsPerDay)(rng);
  std::vector<double> init(n);
  for (auto& v : init) v = u01(rng) + 0.01;
  f.initial = StateBelief{oracle::normalized(init), 0, 0};
  f.ref.initial = f.initial.alpha;
  const Timestamp t0 = make_timestamp(2020, 1, 1) + static_cast<std::int64_t>(k0 - 1) * kSlotSeconds;
  for (std::size_t s = 0; s < n_slots; ++s) {
    TimeslotRecord slot;
    slot.t = static_cast<std::int64_t>(s) + 1;
    slot.k = static_cast<int>((k0 - 1 + static_cast<int>(s)) % kSlotsPerDay) + 1;
    slot.start = t0 + static_cast<std::int64_t>(s) * kSlotSeconds;
    const std::size_t events = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    std::vector<int> ops;
    for (std::size_t e = 0; e < events; ++e) {
      const auto x = std::uniform_int_distribution<OperationId>(0, n_ops - 1)(rng);
      slot.events.push_back({slot.start + static_cast<std::int64_t>(e * 10), x, {}});
      ops.push_back(static_cast<int>(x));
    }
    f.ref.slot_k.push_back(slot.k);
    f.ref.slot_ops.push_back(ops);
    f.slots.push_back(std::move(slot));
    if (f.ref.trans.count(f.slots.back().k)) continue;
    oracle::Matrix m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      if (u01(rng) < 0.1) continue;  // zero row
      std::vector<double> row(n);
      for (auto& v : row) v = u01(rng) < 0.3 ? 0.0 : u01(rng);
      row = oracle::normalized(row);
      for (std::size_t j = 0; j < n; ++j) m[i][j] = f.a.at(f.slots.back().k, i, j) = row[j];
    }
    f.ref.trans[f.slots.back().k] = m;
  }
  return f;
}

// Beliefs of a library trace in the oracle's order (slot entries and post-event).
inline std::vector<std::vector<double>> trace_beliefs(const std::vector<BeliefSnapshot>& trace) {
  std::vector<std::vector<double>> out;
  for (const auto& s : trace)
    if (s.phase != SnapshotPhase::pre_event) out.push_back(s.belief.alpha);
  return out;
}

inline double max_error(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return INFINITY;
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return INFINITY;
    for (std::size_t j = 0; j < a[i].size(); ++j) e = std::max(e, std::abs(a[i][j] - b[i][j]));
  }
  return e;
}

// Two days with stove:on at 08:00 and 20:00 on day 0 and 08:00 on day 1.
inline Dataset toy_two_days() {
  const auto vocab = Vocabulary::standard();
  const auto stove = vocab.require("cooking_stove", "on");
  const auto d0 = make_timestamp(2020, 1, 1);
  std::vector<EventRecord> events = {{d0 + 8 * 3600, stove, {}},
                                     {d0 + 20 * 3600, stove, {}},
                                     {d0 + 86400 + 8 * 3600, stove, {}}};
  std::vector<SensorFrame> frames = {{d0, 22, 45, 1013, 600, 45}};
  return make_dataset(vocab, events, frames);
}

// Hand count for the toy under the sequence baseline with a one-hour window
// and ratio thresholds 0.5 / 1.0: an injection is missed when some training
// stove operation lies within the hour of its time of day.
inline Counts toy_expected_counts(const Dataset& toy, const EvalOptions& opt) {
  auto near = [](Timestamp t, std::int64_t tod) {
    const auto d = std::abs(t.second_of_day() - tod);
    return std::min<std::int64_t>(d, 86400 - d) <= 3600;
  };
  Counts c;
  c.fp = 1;  // day 0, 20:00: day 1 has nothing near it
  c.tn = 2;  // both 08:00 operations
  const std::vector<std::vector<std::int64_t>> training = {{8 * 3600}, {8 * 3600, 20 * 3600}};
  for (std::size_t d = 0; d < 2; ++d) {
    const auto plan = inject_anomalies(toy.day(d).front().start, opt.injections_per_day, derive_seed(opt.seed, d));
    for (auto t : plan.times) {
      bool missed = false;
      for (auto tod : training[d]) missed = missed || near(t, tod);
      ++(missed ? c.fn : c.tp);
    }
  }
  return c;
}

inline PipelineParams toy_sequence_params() {
  PipelineParams p;
  p.seq_baseline.time_window_s = 3600;
  p.seq_baseline.ratio = {0.5, 1.0};
  return p;
}

inline EvalPoint point(double mis, double det, const std::string& tag = {}) {
  EvalPoint p;
  p.params_json = tag;
  p.counts.fp = static_cast<std::uint64_t>(std::lround(mis * 1000));
  p.counts.tn = 1000 - p.counts.fp;
  p.counts.tp = static_cast<std::uint64_t>(std::lround(det * 1000));
  p.counts.fn = 1000 - p.counts.tp;
  return p;
}

}  // namespace support
