#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "situseq/csv.hpp"
#include "situseq/detector.hpp"
#include "situseq/error.hpp"
#include "situseq/hsmodel.hpp"
#include "situseq/ingest.hpp"
#include "situseq/labeling.hpp"
#include "situseq/model.hpp"
#include "situseq/seqstore.hpp"
#include "situseq/state.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

// ---------------------------------------------------------------------------
// Dataset and injections

struct Dataset {
  Vocabulary vocab;
  TimeOfDay day_origin{};
  std::vector<TimeslotRecord> slots;  // whole days, contiguous

  std::size_t n_days() const { return slots.size() / static_cast<std::size_t>(kSlotsPerDay); }
  std::span<const TimeslotRecord> days(std::size_t first, std::size_t count) const {
    return std::span<const TimeslotRecord>(slots).subspan(first * kSlotsPerDay, count * kSlotsPerDay);
  }
  std::span<const TimeslotRecord> day(std::size_t d) const { return days(d, 1); }
};

inline Dataset make_dataset(Vocabulary vocab, const std::vector<EventRecord>& events,
                            const std::vector<SensorFrame>& frames, TimeOfDay day_origin = {},
                            const std::optional<SensorFrame>& default_frame = std::nullopt) {
  Dataset d{std::move(vocab), day_origin, build_timeslots(events, frames, day_origin, default_frame)};
  return d;
}

// splitmix64 step; used to derive independent per-day and per-stream seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct InjectionPlan {
  Timestamp day_start;
  std::uint64_t rng_seed = 0;
  std::vector<Timestamp> times;  // ascending
};

// `count` i.i.d. uniform whole-second times within the day starting at `day_start`.
inline InjectionPlan inject_anomalies(Timestamp day_start, std::size_t count, std::uint64_t seed) {
  InjectionPlan plan{day_start, seed, {}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> tod(0, kSecondsPerDay - 1);
  plan.times.reserve(count);
  for (std::size_t i = 0; i < count; ++i) plan.times.push_back(day_start + tod(rng));
  std::sort(plan.times.begin(), plan.times.end());
  return plan;
}

// ---------------------------------------------------------------------------
// Counts

struct Counts {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  double detection() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
  double misdetection() const { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn); }
  void record(bool injected, Decision d) {
    if (injected)
      ++(d == Decision::anomalous ? tp : fn);
    else
      ++(d == Decision::anomalous ? fp : tn);
  }
  Counts& operator+=(const Counts& o) {
    tp += o.tp, fn += o.fn, fp += o.fp, tn += o.tn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct EvalPoint {
  Method method = Method::proposed;
  std::string params_json;  // canonical (sorted keys)
  Counts counts;

  double detection() const { return counts.detection(); }
  double misdetection() const { return counts.misdetection(); }
};

// ---------------------------------------------------------------------------
// Judging a held-out day

struct EvalOptions {
  std::size_t injections_per_day = 100;
  std::string injection_action = "on";
  std::uint64_t seed = 1;
};

// One judged operation of the detection day. The window is the day's real
// events [window_end - ..., window_end) trimmed by time, then the operation.
struct Judgement {
  bool injected = false;
  Timestamp time;
  OperationId op = 0;
  std::size_t window_end = 0;
};

struct DayWalk {
  std::vector<EventRecord> events;  // real events of the day, in order
  std::vector<Judgement> judged;
  std::vector<StateBelief> beliefs;  // belief just before each judgement (empty without a model)

  std::vector<EventRecord> window(std::size_t j, std::int64_t max_gap_s) const {
    const auto& jd = judged[j];
    auto begin = events.begin();
    auto end = events.begin() + static_cast<std::ptrdiff_t>(jd.window_end);
    auto lo = std::lower_bound(begin, end, jd.time - max_gap_s,
                               [](const EventRecord& e, Timestamp t) { return e.timestamp < t; });
    std::vector<EventRecord> w(lo, end);
    w.push_back({jd.time, jd.op, {}});
    return w;
  }
};

// Walks one day: real target operations are judged with the belief just
// before them, injected ones with the belief after every real event strictly
// earlier. Injections never touch the belief or the window of anything else.
inline DayWalk walk_day(std::span<const TimeslotRecord> day, const InjectionPlan& plan, const Vocabulary& vocab,
                        OperationId injected_op, const TransitionTensor* a = nullptr, const OperationTable* b = nullptr) {
  DayWalk w;
  std::optional<ForwardFilter> filter;
  if (a && b) filter.emplace(*a, *b, StateBelief::uniform(a->n_states()));
  std::size_t next_inj = 0;
  auto judge = [&](bool injected, Timestamp time, OperationId op) {
    w.judged.push_back({injected, time, op, w.events.size()});
    if (filter) w.beliefs.push_back(filter->belief());
  };
  for (const auto& slot : day) {
    if (filter) filter->enter_slot(slot);
    const Timestamp slot_end = slot.start + kSlotSeconds;
    for (const auto& e : slot.events) {
      while (next_inj < plan.times.size() && plan.times[next_inj] <= e.timestamp && plan.times[next_inj] < slot_end)
        judge(true, plan.times[next_inj++], injected_op);
      if (vocab.is_target(e.op)) judge(false, e.timestamp, e.op);
      if (filter) filter->observe(e.op);
      w.events.push_back(e);
    }
    while (next_inj < plan.times.size() && plan.times[next_inj] < slot_end)
      judge(true, plan.times[next_inj++], injected_op);
  }
  return w;
}

// Scores recorded for one judged operation: the best score among single
// operations and among longer sequences (only `single` for the estimation
// baseline). Thresholds are applied afterwards.
struct ScoredOp {
  bool injected = false;
  double single = -1.0;
  double multi = -1.0;
};

using ScoreTable = std::vector<ScoredOp>;

namespace detail {

inline OperationId injection_op(const Vocabulary& vocab, const EvalOptions& opt) {
  return vocab.require(vocab.target_device(), opt.injection_action);
}

inline std::vector<std::span<const TimeslotRecord>> training_segments(const Dataset& data, std::size_t held_out) {
  std::vector<std::span<const TimeslotRecord>> segs;
  if (held_out > 0) segs.push_back(data.days(0, held_out));
  if (held_out + 1 < data.n_days()) segs.push_back(data.days(held_out + 1, data.n_days() - held_out - 1));
  return segs;
}

inline void require_folds(const Dataset& data) {
  if (data.n_days() < 2) throw Error(ErrorKind::validation, "cross-validation needs at least two days of data");
}

inline InjectionPlan plan_for_day(const Dataset& data, std::size_t d, const EvalOptions& opt) {
  return inject_anomalies(data.day(d).front().start, opt.injections_per_day, derive_seed(opt.seed, d));
}

// Fitted state model for one fold plus the training belief traces.
struct FoldStateModel {
  TransitionTensor a;
  OperationTable b;
  std::vector<std::vector<BeliefSnapshot>> traces;  // one per training segment
};

inline FoldStateModel fit_fold(std::span<const std::span<const TimeslotRecord>> segments, const Vocabulary& vocab,
                               const LabelingParams& labeling, const ModelParams& model, bool with_traces) {
  StateAlphabet alphabet;
  std::vector<LabeledSlot> labeled;
  for (const auto& seg : segments) {
    auto l = label_states(seg, vocab, labeling, alphabet);
    labeled.insert(labeled.end(), l.begin(), l.end());
  }
  FoldStateModel f;
  f.a = fit_transitions(labeled, alphabet.size(), model);
  f.b = fit_operations(labeled, alphabet.size(), vocab.size());
  if (with_traces)
    for (const auto& seg : segments) f.traces.push_back(run_filter(seg, f.a, f.b, StateBelief::uniform(alphabet.size())));
  return f;
}

inline SequenceStore build_store(std::span<const std::span<const TimeslotRecord>> segments,
                                 const std::vector<std::vector<BeliefSnapshot>>& traces, const Vocabulary& vocab,
                                 const SeqParams& seq, std::size_t n_states) {
  SequenceStoreBuilder builder(n_states, vocab, seq);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].empty()) continue;
    builder.start_segment();
    for (const auto& snap : traces[s]) {
      if (snap.phase == SnapshotPhase::slot_entry)
        builder.on_slot_entry(snap.belief);
      else if (snap.phase == SnapshotPhase::pre_event)
        builder.on_event(segments[s][snap.slot].events[snap.event], snap.belief);
    }
  }
  return builder.take();
}

inline SequenceBaselineStore build_baseline_store(std::span<const std::span<const TimeslotRecord>> segments,
                                                  const Vocabulary& vocab, const SequenceBaselineParams& p) {
  SequenceBaselineBuilder builder(vocab, p.max_gap_s, p.max_length, p.max_window);
  for (const auto& seg : segments) {
    builder.start_segment();
    for (const auto& slot : seg)
      for (const auto& e : slot.events) builder.on_event(e);
  }
  return builder.take();
}

}  // namespace detail

// Proposed method, one labeling setting, several sequence settings: one score
// table per entry of `seqs`, all folds concatenated in day order.
inline std::vector<ScoreTable> score_proposed(const Dataset& data, const PipelineParams& base,
                                              std::span<const SeqParams> seqs, const EvalOptions& opt) {
  detail::require_folds(data);
  const StateAlphabet alphabet;
  const auto inj_op = detail::injection_op(data.vocab, opt);
  std::vector<ScoreTable> out(seqs.size());
  for (std::size_t d = 0; d < data.n_days(); ++d) {
    const auto segs = detail::training_segments(data, d);
    const auto fold = detail::fit_fold(segs, data.vocab, base.labeling, base.model, true);
    const auto walk = walk_day(data.day(d), detail::plan_for_day(data, d, opt), data.vocab, inj_op, &fold.a, &fold.b);
    for (std::size_t c = 0; c < seqs.size(); ++c) {
      const auto store = detail::build_store(segs, fold.traces, data.vocab, seqs[c], alphabet.size());
      for (std::size_t j = 0; j < walk.judged.size(); ++j) {
        const auto window = walk.window(j, seqs[c].max_gap_s);
        const auto s = assess_proposed(store, walk.beliefs[j], window, seqs[c]).scores;
        out[c].push_back({walk.judged[j].injected, s.single, s.multi});
      }
    }
  }
  return out;
}

// Estimation baseline: the score is the belief-weighted operation probability.
inline ScoreTable score_estimation(const Dataset& data, const PipelineParams& base, const EvalOptions& opt) {
  detail::require_folds(data);
  const auto inj_op = detail::injection_op(data.vocab, opt);
  ScoreTable out;
  for (std::size_t d = 0; d < data.n_days(); ++d) {
    const auto segs = detail::training_segments(data, d);
    const auto fold = detail::fit_fold(segs, data.vocab, base.labeling, base.model, false);
    const auto walk = walk_day(data.day(d), detail::plan_for_day(data, d, opt), data.vocab, inj_op, &fold.a, &fold.b);
    for (std::size_t j = 0; j < walk.judged.size(); ++j)
      out.push_back({walk.judged[j].injected, estimation_score(fold.b, walk.beliefs[j], walk.judged[j].op), -1.0});
  }
  return out;
}

// Sequence baseline for one gap and several time-of-day windows.
inline std::vector<ScoreTable> score_sequence_baseline(const Dataset& data, const SequenceBaselineParams& base,
                                                       std::span<const std::int64_t> time_windows,
                                                       const EvalOptions& opt) {
  detail::require_folds(data);
  const auto inj_op = detail::injection_op(data.vocab, opt);
  std::vector<ScoreTable> out(time_windows.size());
  for (std::size_t d = 0; d < data.n_days(); ++d) {
    const auto segs = detail::training_segments(data, d);
    const auto store = detail::build_baseline_store(segs, data.vocab, base);
    const auto walk = walk_day(data.day(d), detail::plan_for_day(data, d, opt), data.vocab, inj_op);
    for (std::size_t j = 0; j < walk.judged.size(); ++j) {
      const auto window = walk.window(j, base.max_gap_s);
      for (std::size_t c = 0; c < time_windows.size(); ++c) {
        const auto s = sequence_baseline_scores(store, window, time_windows[c], base.max_length, base.max_window);
        out[c].push_back({walk.judged[j].injected, s.single, s.multi});
      }
    }
  }
  return out;
}

// Counts for fixed thresholds. `strict` selects "score > threshold" (the
// estimation baseline) instead of "score >= threshold".
inline Counts count_decisions(const ScoreTable& table, const Thresholds& t, bool strict = false) {
  Counts c;
  for (const auto& s : table) {
    const bool legit = strict ? (s.single > t.single || s.multi > t.multi) : (s.single >= t.single || s.multi >= t.multi);
    c.record(s.injected, legit ? Decision::legitimate : Decision::anomalous);
  }
  return c;
}

// Leave-one-day-out counts for each method at the thresholds in `params`.
inline std::map<Method, Counts> cross_validate(const Dataset& data, const PipelineParams& params,
                                               std::span<const Method> methods, const EvalOptions& opt = {}) {
  params.validate();
  detail::require_folds(data);
  std::map<Method, Counts> out;
  for (auto m : methods) {
    switch (m) {
      case Method::proposed: {
        const SeqParams one[] = {params.seq};
        out[m] = count_decisions(score_proposed(data, params, one, opt).front(), params.thresholds);
        break;
      }
      case Method::estimation: {
        // Only the single-operation score exists; the multi score is -1 and
        // can never exceed a threshold in [0, 1].
        out[m] = count_decisions(score_estimation(data, params, opt), {params.theta, 1.0}, true);
        break;
      }
      case Method::sequence: {
        const std::int64_t tw[] = {params.seq_baseline.time_window_s};
        out[m] = count_decisions(score_sequence_baseline(data, params.seq_baseline, tw, opt).front(),
                                 params.seq_baseline.ratio);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter grids

// Explicit values, or an arithmetic range start + i*step for i < count.
struct ValueList {
  std::vector<double> values;
  bool is_range = false;
  double start = 0.0, step = 0.0;
  std::uint64_t count = 0;

  static ValueList of(std::vector<double> v) { return {std::move(v), false, 0.0, 0.0, 0}; }
  static ValueList range(double start, double step, std::uint64_t count) { return {{}, true, start, step, count}; }

  std::uint64_t size() const { return is_range ? count : values.size(); }
  // Range values are rounded to 12 significant digits so 0.1 + 3 * 0.1 reads 0.4.
  double at(std::uint64_t i) const {
    if (!is_range) return values.at(i);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", start + step * static_cast<double>(i));
    return std::strtod(buf, nullptr);
  }

  void validate(const char* name) const {
    if (size() == 0) throw Error(ErrorKind::validation, std::string(name) + ": empty value list");
    if (is_range && !(step > 0.0)) throw Error(ErrorKind::validation, std::string(name) + ": range step must be positive");
    for (std::uint64_t i : {std::uint64_t{0}, size() - 1})
      if (at(i) < 0.0 || at(i) > 1.0) throw Error(ErrorKind::validation, std::string(name) + ": values must lie in [0, 1]");
    if (!is_range)
      for (double v : values)
        if (v < 0.0 || v > 1.0) throw Error(ErrorKind::validation, std::string(name) + ": values must lie in [0, 1]");
  }
};

struct Grid {
  PipelineParams base;  // everything not swept
  std::vector<int> before_slots{15}, after_slots{15}, cooking_slots{10};
  std::vector<std::int64_t> max_gap_s{600};
  std::vector<int> rank_cutoffs{1};           // rank criterion values
  std::vector<double> alpha_thresholds;       // alpha criterion values
  ValueList n_single = ValueList::of({0.001}), n_multi = ValueList::of({0.001});
  ValueList theta = ValueList::of({0.001});
  std::vector<std::int64_t> seq_max_gap_s{600};
  std::vector<std::int64_t> time_windows{3600};
  ValueList ratio_single = ValueList::of({0.05}), ratio_multi = ValueList::of({0.05});

  void validate(Method m) const {
    base.validate();
    auto nonempty = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorKind::validation, std::string("grid: empty list for ") + what);
    };
    if (m != Method::sequence) {
      nonempty(!before_slots.empty(), "before_slots");
      nonempty(!after_slots.empty(), "after_slots");
      nonempty(!cooking_slots.empty(), "cooking_slots");
    }
    if (m == Method::proposed) {
      nonempty(!max_gap_s.empty(), "max_gap_s");
      nonempty(!rank_cutoffs.empty() || !alpha_thresholds.empty(), "rank_cutoffs/alpha_thresholds");
      n_single.validate("n_single");
      n_multi.validate("n_multi");
    }
    if (m == Method::estimation) theta.validate("theta");
    if (m == Method::sequence) {
      nonempty(!seq_max_gap_s.empty(), "seq_max_gap_s");
      nonempty(!time_windows.empty(), "time_windows");
      ratio_single.validate("ratio_single");
      ratio_multi.validate("ratio_multi");
    }
  }
};

// Number of parameter combinations the grid describes for `m`. The rank and
// alpha criterion values are alternatives, so their counts add.
inline std::uint64_t cardinality(const Grid& g, Method m) {
  const std::uint64_t labeling = g.before_slots.size() * g.after_slots.size() * g.cooking_slots.size();
  switch (m) {
    case Method::proposed:
      return labeling * g.max_gap_s.size() * (g.rank_cutoffs.size() + g.alpha_thresholds.size()) * g.n_single.size() *
             g.n_multi.size();
    case Method::estimation: return labeling * g.theta.size();
    case Method::sequence:
      return g.seq_max_gap_s.size() * g.time_windows.size() * g.ratio_single.size() * g.ratio_multi.size();
  }
  return 0;
}

// Reference value lists for a full sweep.
inline Grid reference_grid() {
  Grid g;
  g.before_slots = {15, 30, 60, 100};
  g.after_slots = {15, 30, 60, 100};
  g.cooking_slots = {10, 15, 20, 30, 45, 60};
  g.max_gap_s = {600};
  g.rank_cutoffs = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  g.alpha_thresholds.clear();
  for (int i = 0; i <= 20; ++i) g.alpha_thresholds.push_back(i * 0.05);
  const auto fine = ValueList::range(0.0, 1e-7, 10'000'001);
  g.n_single = fine;
  g.n_multi = fine;
  g.theta = fine;
  g.seq_max_gap_s = {600};
  g.time_windows = {0, 900, 3600, 10800, 32400, 43200};
  const std::vector<double> ratios = {0, .02, .05, .1, .15, .2, .25, .3, .35, .4, .45, .5, 1.0};
  g.ratio_single = ValueList::of(ratios);
  g.ratio_multi = ValueList::of(ratios);
  g.base.model.max_halfwidth = 720;
  return g;
}

namespace detail {

// Largest index whose value does not pass `s` (value <= s, or value < s when
// strict); nullopt when every value passes.
inline std::optional<std::uint64_t> last_not_above(const ValueList& l, double s, bool strict) {
  auto ok = [&](std::uint64_t i) { return strict ? l.at(i) < s : l.at(i) <= s; };
  if (!l.is_range) {
    std::optional<std::uint64_t> best;
    for (std::uint64_t i = 0; i < l.size(); ++i)
      if (ok(i) && (!best || l.at(i) > l.at(*best))) best = i;
    return best;
  }
  const double guess = std::floor((s - l.start) / l.step);
  std::int64_t i = guess < -1.0 ? -1
                   : guess >= static_cast<double>(l.count) ? static_cast<std::int64_t>(l.count) - 1
                                                           : static_cast<std::int64_t>(guess);
  while (i + 1 < static_cast<std::int64_t>(l.count) && ok(static_cast<std::uint64_t>(i + 1))) ++i;
  while (i >= 0 && !ok(static_cast<std::uint64_t>(i))) --i;
  if (i < 0) return std::nullopt;
  return static_cast<std::uint64_t>(i);
}

// Smallest index whose value passes `s` (value > s, or >= s when strict).
inline std::optional<std::uint64_t> first_above(const ValueList& l, double s, bool strict) {
  auto last = last_not_above(l, s, strict);
  const std::uint64_t i = last ? *last + 1 : 0;
  if (!l.is_range) {
    std::optional<std::uint64_t> best;
    for (std::uint64_t j = 0; j < l.size(); ++j)
      if ((strict ? l.at(j) >= s : l.at(j) > s) && (!best || l.at(j) < l.at(*best))) best = j;
    return best;
  }
  if (i >= l.count) return std::nullopt;
  return i;
}

// Threshold indices to evaluate. A threshold's outcome only changes when it
// crosses a recorded score, so ranges are reduced to one index per outcome
// class. In pruned mode only real-operation scores delimit classes and the
// largest index of each class is kept: it flags the most injections while
// leaving the real-operation outcome unchanged.
inline std::vector<std::uint64_t> sweep_indices(const ValueList& l, std::vector<double> scores, bool strict,
                                                bool pruned) {
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  std::vector<std::uint64_t> idx;
  if (pruned) {
    for (double s : scores)
      if (auto i = last_not_above(l, s, strict)) idx.push_back(*i);
    idx.push_back(l.is_range ? l.count - 1 : *last_not_above(l, std::numeric_limits<double>::infinity(), false));
  } else if (!l.is_range) {
    for (std::uint64_t i = 0; i < l.size(); ++i) idx.push_back(i);
    return idx;
  } else {
    idx.push_back(0);
    for (double s : scores)
      if (auto i = first_above(l, s, strict)) idx.push_back(*i);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// Emits (i1, i2, counts) for "single passes t1 or multi passes t2".
inline void sweep_pairs(const ScoreTable& table, const ValueList& l1, const ValueList& l2, bool pruned,
                        const std::function<void(std::uint64_t, std::uint64_t, const Counts&)>& emit) {
  std::vector<double> s1, s2;
  for (const auto& s : table)
    if (!pruned || !s.injected) s1.push_back(s.single), s2.push_back(s.multi);
  const auto idx1 = sweep_indices(l1, s1, false, pruned);
  const auto idx2 = sweep_indices(l2, s2, false, pruned);
  std::vector<double> rest_inj, rest_real;
  for (auto i1 : idx1) {
    const double t1 = l1.at(i1);
    Counts base;
    rest_inj.clear();
    rest_real.clear();
    for (const auto& s : table) {
      if (s.single >= t1)
        base.record(s.injected, Decision::legitimate);
      else
        (s.injected ? rest_inj : rest_real).push_back(s.multi);
    }
    std::sort(rest_inj.begin(), rest_inj.end());
    std::sort(rest_real.begin(), rest_real.end());
    for (auto i2 : idx2) {
      const double t2 = l2.at(i2);
      auto passing = [&](const std::vector<double>& v) {
        return static_cast<std::uint64_t>(v.end() - std::lower_bound(v.begin(), v.end(), t2));
      };
      Counts c = base;
      const auto li = passing(rest_inj), lr = passing(rest_real);
      c.fn += li;
      c.tp += rest_inj.size() - li;
      c.tn += lr;
      c.fp += rest_real.size() - lr;
      emit(i1, i2, c);
    }
  }
}

inline nlohmann::json labeling_json(int before, int after, int cooking) {
  return {{"before_slots", before}, {"after_slots", after}, {"cooking_slots", cooking}};
}

}  // namespace detail

struct GridOptions {
  EvalOptions eval;
  std::size_t jobs = 1;
  bool prune = false;  // keep only each structural combination's own frontier
};

inline std::vector<EvalPoint> pareto_frontier(std::vector<EvalPoint> points);

namespace detail {

struct GridUnit {
  std::function<std::vector<EvalPoint>()> run;
};

inline std::vector<EvalPoint> run_units(std::vector<GridUnit>& units, std::size_t jobs) {
  std::vector<std::vector<EvalPoint>> results(units.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    while (true) {
      const std::size_t u = next.fetch_add(1);
      if (u >= units.size()) return;
      try {
        results[u] = units[u].run();
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, units.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  std::vector<EvalPoint> all;
  for (auto& r : results) all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  std::stable_sort(all.begin(), all.end(),
                   [](const EvalPoint& a, const EvalPoint& b) { return a.params_json < b.params_json; });
  return all;
}

inline std::vector<EvalPoint> finish_combo(std::vector<EvalPoint> pts, bool prune) {
  return prune ? pareto_frontier(std::move(pts)) : pts;
}

}  // namespace detail

// One EvalPoint per parameter combination (per outcome class for threshold
// ranges, see sweep_indices). Output is sorted by params_json.
inline std::vector<EvalPoint> grid_search(const Dataset& data, const Grid& grid, Method method,
                                          const GridOptions& opt = {}) {
  grid.validate(method);
  detail::require_folds(data);
  std::vector<detail::GridUnit> units;

  if (method == Method::proposed || method == Method::estimation) {
    for (int before : grid.before_slots)
      for (int after : grid.after_slots)
        for (int cooking : grid.cooking_slots) {
          PipelineParams p = grid.base;
          p.labeling.before_slots = before;
          p.labeling.after_slots = after;
          p.labeling.cooking_slots = cooking;
          p.labeling.validate();
          if (method == Method::estimation) {
            units.push_back({[&data, &grid, &opt, p, before, after, cooking] {
              const auto table = score_estimation(data, p, opt.eval);
              std::vector<double> real;
              for (const auto& s : table)
                if (!opt.prune || !s.injected) real.push_back(s.single);
              std::vector<EvalPoint> pts;
              for (auto i : detail::sweep_indices(grid.theta, real, true, opt.prune)) {
                auto j = detail::labeling_json(before, after, cooking);
                j["theta"] = grid.theta.at(i);
                pts.push_back({Method::estimation, j.dump(), count_decisions(table, {grid.theta.at(i), 1.0}, true)});
              }
              return detail::finish_combo(std::move(pts), opt.prune);
            }});
            continue;
          }
          units.push_back({[&data, &grid, &opt, p, before, after, cooking] {
            std::vector<SeqParams> seqs;
            std::vector<nlohmann::json> tags;
            for (auto gap : grid.max_gap_s) {
              auto add = [&](SeqParams s, nlohmann::json tag) {
                s.max_gap_s = gap;
                s.validate();
                tag["max_gap_s"] = gap;
                seqs.push_back(s);
                tags.push_back(std::move(tag));
              };
              for (int r : grid.rank_cutoffs) {
                SeqParams s = p.seq;
                s.criterion = StoringCriterion::rank;
                s.rank_cutoff = r;
                add(s, {{"criterion", "rank"}, {"rank_cutoff", r}});
              }
              for (double a : grid.alpha_thresholds) {
                SeqParams s = p.seq;
                s.criterion = StoringCriterion::alpha;
                s.alpha_threshold = a;
                add(s, {{"criterion", "alpha"}, {"alpha_threshold", a}});
              }
            }
            const auto tables = score_proposed(data, p, seqs, opt.eval);
            std::vector<EvalPoint> all;
            for (std::size_t c = 0; c < seqs.size(); ++c) {
              std::vector<EvalPoint> pts;
              auto tag = detail::labeling_json(before, after, cooking);
              tag.update(tags[c]);
              detail::sweep_pairs(tables[c], grid.n_single, grid.n_multi, opt.prune,
                                  [&](std::uint64_t i1, std::uint64_t i2, const Counts& counts) {
                                    auto j = tag;
                                    j["n_single"] = grid.n_single.at(i1);
                                    j["n_multi"] = grid.n_multi.at(i2);
                                    pts.push_back({Method::proposed, j.dump(), counts});
                                  });
              pts = detail::finish_combo(std::move(pts), opt.prune);
              all.insert(all.end(), pts.begin(), pts.end());
            }
            return all;
          }});
        }
  } else {
    for (auto gap : grid.seq_max_gap_s) {
      SequenceBaselineParams p = grid.base.seq_baseline;
      p.max_gap_s = gap;
      units.push_back({[&data, &grid, &opt, p] {
        const auto tables = score_sequence_baseline(data, p, grid.time_windows, opt.eval);
        std::vector<EvalPoint> all;
        for (std::size_t c = 0; c < grid.time_windows.size(); ++c) {
          std::vector<EvalPoint> pts;
          detail::sweep_pairs(tables[c], grid.ratio_single, grid.ratio_multi, opt.prune,
                              [&](std::uint64_t i1, std::uint64_t i2, const Counts& counts) {
                                nlohmann::json j = {{"max_gap_s", p.max_gap_s},
                                                    {"time_window_s", grid.time_windows[c]},
                                                    {"n_single", grid.ratio_single.at(i1)},
                                                    {"n_multi", grid.ratio_multi.at(i2)}};
                                pts.push_back({Method::sequence, j.dump(), counts});
                              });
          pts = detail::finish_combo(std::move(pts), opt.prune);
          all.insert(all.end(), pts.begin(), pts.end());
        }
        return all;
      }});
    }
  }
  return detail::run_units(units, opt.jobs);
}

// ---------------------------------------------------------------------------
// Frontier

// For every achieved misdetection level, the best detection among points at
// or below it. Sorted by misdetection; both coordinates strictly increase.
inline std::vector<EvalPoint> pareto_frontier(std::vector<EvalPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const EvalPoint& a, const EvalPoint& b) {
    if (a.misdetection() != b.misdetection()) return a.misdetection() < b.misdetection();
    return a.detection() > b.detection();
  });
  std::vector<EvalPoint> out;
  for (auto& p : points)
    if (out.empty() || p.detection() > out.back().detection()) out.push_back(std::move(p));
  return out;
}

// Highest detection with misdetection strictly below `cap`; ties go to the
// lower misdetection, then to the earlier point.
inline std::optional<EvalPoint> best_at(std::span<const EvalPoint> points, double cap) {
  std::optional<EvalPoint> best;
  for (const auto& p : points) {
    if (!(p.misdetection() < cap)) continue;
    if (!best || p.detection() > best->detection() ||
        (p.detection() == best->detection() && p.misdetection() < best->misdetection()))
      best = p;
  }
  return best;
}

inline std::string write_results_csv(std::span<const EvalPoint> points) {
  std::string out = "method,params_json,misdetection,detection,tp,fn,fp,tn\n";
  for (const auto& p : points)
    out += csv::join({to_string(p.method), p.params_json, detail::format_double(p.misdetection()),
                      detail::format_double(p.detection()), std::to_string(p.counts.tp), std::to_string(p.counts.fn),
                      std::to_string(p.counts.fp), std::to_string(p.counts.tn)});
  return out;
}

// ---------------------------------------------------------------------------
// Grid JSON

namespace detail {

inline ValueList value_list_from_json(const nlohmann::json& j) {
  if (j.is_array()) return ValueList::of(j.get<std::vector<double>>());
  if (j.is_number()) return ValueList::of({j.get<double>()});
  if (j.is_object()) return ValueList::range(j.at("start").get<double>(), j.at("step").get<double>(), j.at("count").get<std::uint64_t>());
  throw Error(ErrorKind::validation, "value list must be a number, an array or {start, step, count}");
}

template <typename T>
std::vector<T> list_from_json(const nlohmann::json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

}  // namespace detail

// Grid from JSON: {"preset": "reference"} or explicit lists; "params" holds
// the non-swept pipeline parameters.
inline Grid grid_from_json(const nlohmann::json& j) {
  Grid g;
  try {
    if (j.value("preset", "") == "reference") g = reference_grid();
    if (j.contains("params")) params_from_json(j.at("params"), g.base);
    auto ints = [&](const char* k, auto& out) {
      using T = typename std::decay_t<decltype(out)>::value_type;
      if (j.contains(k)) out = detail::list_from_json<T>(j.at(k));
    };
    auto vals = [&](const char* k, ValueList& out) {
      if (j.contains(k)) out = detail::value_list_from_json(j.at(k));
    };
    ints("before_slots", g.before_slots);
    ints("after_slots", g.after_slots);
    ints("cooking_slots", g.cooking_slots);
    ints("max_gap_s", g.max_gap_s);
    ints("rank_cutoffs", g.rank_cutoffs);
    ints("alpha_thresholds", g.alpha_thresholds);
    vals("n_single", g.n_single);
    vals("n_multi", g.n_multi);
    vals("theta", g.theta);
    ints("seq_max_gap_s", g.seq_max_gap_s);
    ints("time_windows", g.time_windows);
    vals("ratio_single", g.ratio_single);
    vals("ratio_multi", g.ratio_multi);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("grid: ") + e.what());
  }
  return g;
}

}  // namespace situseq
