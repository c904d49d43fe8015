#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "situseq/detector.hpp"
#include "situseq/error.hpp"
#include "situseq/hsmodel.hpp"
#include "situseq/labeling.hpp"
#include "situseq/seqstore.hpp"
#include "situseq/state.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

inline constexpr int kModelFormatVersion = 1;

// Every tunable of the pipeline, from labeling to the verdict thresholds.
struct PipelineParams {
  TimeOfDay day_origin{};
  LabelingParams labeling;
  ModelParams model;
  SeqParams seq;
  Thresholds thresholds{0.001, 0.001};
  double theta = 0.001;
  SequenceBaselineParams seq_baseline;

  void validate() const {
    labeling.validate();
    model.validate();
    seq.validate();
    thresholds.validate();
    seq_baseline.ratio.validate();
    if (theta < 0.0 || theta > 1.0) throw Error(ErrorKind::validation, "theta must lie in [0, 1]");
    if (seq_baseline.time_window_s < 0) throw Error(ErrorKind::validation, "time window must be nonnegative");
    if (seq_baseline.max_gap_s <= 0) throw Error(ErrorKind::validation, "sequence gap must be positive");
  }
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline TimeOfDay read_tod(const nlohmann::json& j, const char* key, TimeOfDay fallback) {
  if (!j.contains(key)) return fallback;
  auto t = parse_time_of_day(j.at(key).get<std::string>());
  if (!t) throw Error(ErrorKind::validation, std::string("invalid time of day for ") + key);
  return *t;
}

}  // namespace detail

inline nlohmann::json params_to_json(const PipelineParams& p) {
  using nlohmann::json;
  json j;
  j["day_origin"] = format_time_of_day(p.day_origin);
  const auto& l = p.labeling;
  j["labeling"] = {{"before_slots", l.before_slots},
                   {"after_slots", l.after_slots},
                   {"cooking_slots", l.cooking_slots},
                   {"night_begin", format_time_of_day(l.night.begin)},
                   {"night_end", format_time_of_day(l.night.end)},
                   {"correction_split", format_time_of_day(l.correction_split)},
                   {"noise_threshold", l.noise_threshold},
                   {"co2_threshold", l.co2_threshold},
                   {"sleep_gap_merge_min", l.sleep_gap_merge_min},
                   {"use_gap_merge_min", l.use_gap_merge_min},
                   {"presleep_correction_h", l.presleep_correction_h},
                   {"postsleep_correction_h", l.postsleep_correction_h},
                   {"initial_occupants", l.initial_occupants}};
  j["model"] = {{"max_halfwidth", p.model.max_halfwidth},
                {"window_support", p.model.support == WindowSupport::all_states ? "all_states" : "observed_states"}};
  const auto& s = p.seq;
  j["sequence"] = {{"max_gap_s", s.max_gap_s},
                   {"criterion", s.criterion == StoringCriterion::rank ? "rank" : "alpha"},
                   {"rank_cutoff", s.rank_cutoff},
                   {"alpha_threshold", s.alpha_threshold},
                   {"alpha_direction", s.alpha_direction == AlphaDirection::at_least ? "at_least" : "at_most"},
                   {"max_length", s.max_length},
                   {"max_window", s.max_window},
                   {"slot_count", s.slot_count == SlotCountMode::criterion ? "criterion" : "argmax"}};
  j["thresholds"] = {{"n_single", p.thresholds.single}, {"n_multi", p.thresholds.multi}};
  j["theta"] = p.theta;
  j["sequence_baseline"] = {{"max_gap_s", p.seq_baseline.max_gap_s},
                            {"time_window_s", p.seq_baseline.time_window_s},
                            {"n_single", p.seq_baseline.ratio.single},
                            {"n_multi", p.seq_baseline.ratio.multi},
                            {"max_length", p.seq_baseline.max_length},
                            {"max_window", p.seq_baseline.max_window}};
  return j;
}

// Missing keys keep the values already in `p`.
inline void params_from_json(const nlohmann::json& j, PipelineParams& p) {
  using detail::read_opt;
  try {
    p.day_origin = detail::read_tod(j, "day_origin", p.day_origin);
    if (j.contains("labeling")) {
      const auto& l = j.at("labeling");
      auto& o = p.labeling;
      read_opt(l, "before_slots", o.before_slots);
      read_opt(l, "after_slots", o.after_slots);
      read_opt(l, "cooking_slots", o.cooking_slots);
      o.night.begin = detail::read_tod(l, "night_begin", o.night.begin);
      o.night.end = detail::read_tod(l, "night_end", o.night.end);
      o.correction_split = detail::read_tod(l, "correction_split", o.correction_split);
      read_opt(l, "noise_threshold", o.noise_threshold);
      read_opt(l, "co2_threshold", o.co2_threshold);
      read_opt(l, "sleep_gap_merge_min", o.sleep_gap_merge_min);
      read_opt(l, "use_gap_merge_min", o.use_gap_merge_min);
      read_opt(l, "presleep_correction_h", o.presleep_correction_h);
      read_opt(l, "postsleep_correction_h", o.postsleep_correction_h);
      read_opt(l, "initial_occupants", o.initial_occupants);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      read_opt(m, "max_halfwidth", p.model.max_halfwidth);
      if (m.contains("window_support")) {
        const auto v = m.at("window_support").get<std::string>();
        if (v != "all_states" && v != "observed_states") throw Error(ErrorKind::validation, "window_support: " + v);
        p.model.support = v == "all_states" ? WindowSupport::all_states : WindowSupport::observed_states;
      }
    }
    if (j.contains("sequence")) {
      const auto& s = j.at("sequence");
      auto& o = p.seq;
      read_opt(s, "max_gap_s", o.max_gap_s);
      if (s.contains("criterion")) {
        const auto v = s.at("criterion").get<std::string>();
        if (v != "rank" && v != "alpha") throw Error(ErrorKind::validation, "criterion must be rank or alpha");
        o.criterion = v == "rank" ? StoringCriterion::rank : StoringCriterion::alpha;
      }
      read_opt(s, "rank_cutoff", o.rank_cutoff);
      read_opt(s, "alpha_threshold", o.alpha_threshold);
      if (s.contains("alpha_direction"))
        o.alpha_direction = s.at("alpha_direction").get<std::string>() == "at_most" ? AlphaDirection::at_most
                                                                                    : AlphaDirection::at_least;
      read_opt(s, "max_length", o.max_length);
      read_opt(s, "max_window", o.max_window);
      if (s.contains("slot_count"))
        o.slot_count = s.at("slot_count").get<std::string>() == "argmax" ? SlotCountMode::argmax : SlotCountMode::criterion;
    }
    if (j.contains("thresholds")) {
      read_opt(j.at("thresholds"), "n_single", p.thresholds.single);
      read_opt(j.at("thresholds"), "n_multi", p.thresholds.multi);
    }
    read_opt(j, "theta", p.theta);
    if (j.contains("sequence_baseline")) {
      const auto& b = j.at("sequence_baseline");
      read_opt(b, "max_gap_s", p.seq_baseline.max_gap_s);
      read_opt(b, "time_window_s", p.seq_baseline.time_window_s);
      read_opt(b, "n_single", p.seq_baseline.ratio.single);
      read_opt(b, "n_multi", p.seq_baseline.ratio.multi);
      read_opt(b, "max_length", p.seq_baseline.max_length);
      read_opt(b, "max_window", p.seq_baseline.max_window);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("parameters: ") + e.what());
  }
  p.validate();
}

// Everything detection needs, immutable once trained.
struct TrainedModel {
  Vocabulary vocab;
  StateAlphabet alphabet;
  PipelineParams params;
  TransitionTensor transitions;
  OperationTable operations;
  SequenceStore store;
  SequenceBaselineStore seq_baseline;
};

struct TrainingParts {
  bool state_model = true;   // labels, transitions, operation table
  bool store = true;         // sequence store (needs the state model)
  bool seq_baseline = true;  // time-of-day sequence store
};

// Trains on one or more contiguous slot segments. Each segment is labeled on
// its own, so labeling windows never reach across a gap.
inline TrainedModel train_model(std::span<const std::span<const TimeslotRecord>> segments, const Vocabulary& vocab,
                                const PipelineParams& params, TrainingParts parts = {}) {
  params.validate();
  TrainedModel m;
  m.vocab = vocab;
  m.params = params;
  const std::size_t n = m.alphabet.size();

  bool any = false;
  for (const auto& seg : segments) any = any || !seg.empty();
  if (!any) throw Error(ErrorKind::model, "empty training data");

  if (parts.state_model || parts.store) {
    std::vector<LabeledSlot> labeled;
    for (const auto& seg : segments) {
      auto l = label_states(seg, vocab, params.labeling, m.alphabet);
      labeled.insert(labeled.end(), l.begin(), l.end());
    }
    m.transitions = fit_transitions(labeled, n, params.model);
    m.operations = fit_operations(labeled, n, vocab.size());
  }
  if (parts.store) {
    SequenceStoreBuilder builder(n, vocab, params.seq);
    for (const auto& seg : segments) {
      if (seg.empty()) continue;
      builder.start_segment();
      ForwardFilter filter(m.transitions, m.operations, StateBelief::uniform(n));
      for (const auto& slot : seg) {
        builder.on_slot_entry(filter.enter_slot(slot));
        for (const auto& e : slot.events) {
          builder.on_event(e, filter.belief());
          filter.observe(e.op);
        }
      }
    }
    m.store = builder.take();
  } else {
    m.store = SequenceStore(n);
  }
  if (parts.seq_baseline) {
    SequenceBaselineBuilder builder(vocab, params.seq_baseline.max_gap_s, params.seq_baseline.max_length,
                                    params.seq_baseline.max_window);
    for (const auto& seg : segments) {
      builder.start_segment();
      for (const auto& slot : seg)
        for (const auto& e : slot.events) builder.on_event(e);
    }
    m.seq_baseline = builder.take();
  }
  return m;
}

inline TrainedModel train_model(std::span<const TimeslotRecord> slots, const Vocabulary& vocab,
                                const PipelineParams& params, TrainingParts parts = {}) {
  const std::span<const TimeslotRecord> one[] = {slots};
  return train_model(std::span<const std::span<const TimeslotRecord>>(one), vocab, params, parts);
}

namespace detail {

inline nlohmann::json key_to_json(const SequenceKey& y, const Vocabulary& vocab) {
  nlohmann::json a = nlohmann::json::array();
  for (auto x : y) a.push_back(vocab.operation(x).key());
  return a;
}

inline SequenceKey key_from_json(const nlohmann::json& a, const Vocabulary& vocab) {
  SequenceKey y;
  for (const auto& s : a) {
    auto id = vocab.find_key(s.get<std::string>());
    if (!id) throw Error(ErrorKind::vocabulary, "model references unregistered operation " + s.get<std::string>());
    y.push_back(*id);
  }
  return y;
}

}  // namespace detail

// Single JSON document; transition rows are stored sparsely (nonzero rows only).
inline nlohmann::json model_to_json(const TrainedModel& m) {
  using nlohmann::json;
  const std::size_t n = m.alphabet.size();
  json j;
  j["format_version"] = kModelFormatVersion;
  j["vocabulary"] = m.vocab.to_json();
  j["states"] = m.alphabet.names();
  j["params"] = params_to_json(m.params);

  json halfwidth = json::array(), rows = json::array();
  if (m.transitions.n_states() == n) {
    for (int k = 1; k <= kSlotsPerDay; ++k) {
      halfwidth.push_back(m.transitions.halfwidth(k));
      for (std::size_t i = 0; i < n; ++i) {
        if (m.transitions.row_is_zero(k, i)) continue;
        auto r = m.transitions.row(k, i);
        rows.push_back({{"k", k}, {"i", i}, {"p", std::vector<double>(r.begin(), r.end())}});
      }
    }
  }
  j["transitions"] = {{"halfwidth", halfwidth}, {"rows", rows}};

  json b = json::array();
  for (std::size_t i = 0; i < m.operations.n_states(); ++i) {
    json row = json::array();
    for (OperationId x = 0; x < m.operations.n_ops(); ++x) row.push_back(m.operations.at(i, x));
    b.push_back(row);
  }
  j["operations"] = b;

  json seqs = json::array();
  for (const auto& [y, counts] : m.store.counts())
    seqs.push_back({{"items", detail::key_to_json(y, m.vocab)}, {"counts", counts}});
  j["sequence_store"] = {{"slot_counts", m.store.slot_counts()}, {"sequences", seqs}};

  json occ = json::array();
  for (const auto& [y, tods] : m.seq_baseline.occurrences())
    occ.push_back({{"items", detail::key_to_json(y, m.vocab)}, {"times_of_day", tods}});
  j["sequence_baseline"] = {{"target_operations", m.seq_baseline.target_operations()}, {"occurrences", occ}};
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  TrainedModel m;
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw Error(ErrorKind::model, "unsupported model format_version " + j.at("format_version").dump());
    m.vocab = Vocabulary::from_json(j.at("vocabulary"));
    if (j.at("states").get<std::vector<std::string>>() != m.alphabet.names())
      throw Error(ErrorKind::model, "model state alphabet does not match");
    params_from_json(j.at("params"), m.params);
    const std::size_t n = m.alphabet.size();

    m.transitions = TransitionTensor(n);
    const auto& tr = j.at("transitions");
    const auto& hw = tr.at("halfwidth");
    for (std::size_t k = 0; k < hw.size() && k < static_cast<std::size_t>(kSlotsPerDay); ++k)
      m.transitions.set_halfwidth(static_cast<int>(k + 1), hw[k].get<int>());
    for (const auto& r : tr.at("rows")) {
      const int k = r.at("k").get<int>();
      const auto i = r.at("i").get<std::size_t>();
      const auto p = r.at("p").get<std::vector<double>>();
      if (p.size() != n) throw Error(ErrorKind::model, "transition row has wrong width");
      for (std::size_t jj = 0; jj < n; ++jj) m.transitions.at(k, i, jj) = p[jj];
    }

    const auto& b = j.at("operations");
    m.operations = OperationTable(n, m.vocab.size());
    if (b.size() != n) throw Error(ErrorKind::model, "operation table has wrong height");
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = b[i].get<std::vector<double>>();
      if (row.size() != m.vocab.size()) throw Error(ErrorKind::model, "operation table has wrong width");
      for (OperationId x = 0; x < row.size(); ++x) m.operations.at(i, x) = row[x];
    }

    const auto& st = j.at("sequence_store");
    m.store = SequenceStore(n);
    m.store.slot_counts() = st.at("slot_counts").get<std::vector<std::uint64_t>>();
    if (m.store.slot_counts().size() != n) throw Error(ErrorKind::model, "slot_counts has wrong size");
    for (const auto& s : st.at("sequences")) {
      auto counts = s.at("counts").get<std::vector<std::uint64_t>>();
      if (counts.size() != n) throw Error(ErrorKind::model, "sequence counts have wrong size");
      m.store.counts()[detail::key_from_json(s.at("items"), m.vocab)] = std::move(counts);
    }

    const auto& sb = j.at("sequence_baseline");
    m.seq_baseline.set_target_operations(sb.at("target_operations").get<std::uint64_t>());
    for (const auto& o : sb.at("occurrences"))
      m.seq_baseline.occurrences()[detail::key_from_json(o.at("items"), m.vocab)] =
          o.at("times_of_day").get<std::vector<std::int64_t>>();
    m.seq_baseline.finalize();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::model, std::string("model JSON: ") + e.what());
  }
  return m;
}

// Judges every target operation of a contiguous slot stream, starting from a
// uniform belief at the first slot.
inline std::vector<Verdict> detect_stream(const TrainedModel& m, std::span<const TimeslotRecord> slots, Method method) {
  std::vector<Verdict> out;
  if (slots.empty()) return out;
  const std::size_t n = m.alphabet.size();
  const bool needs_state = method != Method::sequence;
  if (needs_state && m.transitions.n_states() != n) throw Error(ErrorKind::model, "model has no state estimator");
  std::optional<ForwardFilter> filter;
  if (needs_state) filter.emplace(m.transitions, m.operations, StateBelief::uniform(n));
  EventWindow window(method == Method::sequence ? m.params.seq_baseline.max_gap_s : m.params.seq.max_gap_s);
  for (const auto& slot : slots) {
    if (filter) filter->enter_slot(slot);
    for (const auto& e : slot.events) {
      if (m.vocab.is_target(e.op)) {
        const auto w = window.leading_to(e);
        switch (method) {
          case Method::proposed:
            out.push_back(judge_proposed(m.store, filter->belief(), w, m.vocab, m.params.thresholds, m.params.seq));
            break;
          case Method::estimation:
            out.push_back(judge_estimation_baseline(m.operations, filter->belief(), e, m.vocab, m.params.theta));
            break;
          case Method::sequence:
            out.push_back(judge_sequence_baseline(m.seq_baseline, w, m.vocab, m.params.seq_baseline));
            break;
        }
      }
      window.push(e);
      if (filter) filter->observe(e.op);
    }
  }
  return out;
}

}  // namespace situseq
