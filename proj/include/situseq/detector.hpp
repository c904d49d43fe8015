#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "situseq/error.hpp"
#include "situseq/hsmodel.hpp"
#include "situseq/seqstore.hpp"

namespace situseq {

enum class Method { proposed, estimation, sequence };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::estimation: return "estimation";
    case Method::sequence: return "sequence";
  }
  return "?";
}

inline std::optional<Method> parse_method(const std::string& s) {
  for (auto m : {Method::proposed, Method::estimation, Method::sequence})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

// Per-length thresholds: one for single operations, one for every longer sequence.
struct Thresholds {
  double single = 0.0;
  double multi = 0.0;

  double at(std::size_t length) const { return length <= 1 ? single : multi; }
  void validate() const {
    if (single < 0.0 || single > 1.0 || multi < 0.0 || multi > 1.0)
      throw Error(ErrorKind::validation, "sequence thresholds must lie in [0, 1]");
  }
};

enum class Decision { legitimate, anomalous };

inline const char* to_string(Decision d) { return d == Decision::legitimate ? "legitimate" : "anomalous"; }

struct Evidence {
  SequenceKey sequence;  // strongest candidate
  double delta = 0.0;    // its score
  std::size_t length = 0;
  double threshold = 0.0;
  std::vector<double> belief;  // belief just before the operation
};

struct Verdict {
  EventRecord operation;
  Method method = Method::proposed;
  Decision decision = Decision::anomalous;
  Evidence evidence;
};

// Highest score per length class; -1 when the class has no candidate.
struct LengthScores {
  double single = -1.0;
  double multi = -1.0;

  bool legitimate(const Thresholds& n) const { return single >= n.single || multi >= n.multi; }
};

namespace detail {
inline void require_target(const EventRecord& op, const Vocabulary& vocab) {
  if (!vocab.is_target(op.op))
    throw Error(ErrorKind::usage, "operation " + vocab.operation(op.op).key() + " is not a detection-target operation");
}
}  // namespace detail

// Belief-weighted sequence probability of a single candidate.
inline double occurrence_probability(const SequenceStore& store, const StateBelief& belief, const SequenceKey& y) {
  double delta = 0.0;
  for (StateIndex i = 0; i < belief.size(); ++i) delta += store.probability(i, y) * belief.alpha[i];
  return std::clamp(delta, 0.0, 1.0);
}

struct ProposedAssessment {
  LengthScores scores;
  std::vector<std::pair<SequenceKey, double>> candidates;
};

inline ProposedAssessment assess_proposed(const SequenceStore& store, const StateBelief& belief,
                                          std::span<const EventRecord> window, const SeqParams& params) {
  ProposedAssessment out;
  for (auto& y : candidates_ending_at_last(window, params.max_length, params.max_window)) {
    const double d = occurrence_probability(store, belief, y);
    auto& slot = y.size() <= 1 ? out.scores.single : out.scores.multi;
    slot = std::max(slot, d);
    out.candidates.emplace_back(std::move(y), d);
  }
  return out;
}

// Legitimate iff some candidate sequence ending at the operation reaches its
// length's threshold. `window` holds the events leading up to the operation,
// with the operation itself last.
inline Verdict judge_proposed(const SequenceStore& store, const StateBelief& belief, std::span<const EventRecord> window,
                              const Vocabulary& vocab, const Thresholds& thresholds, const SeqParams& params) {
  if (window.empty()) throw Error(ErrorKind::usage, "detection window must end with the judged operation");
  const auto& op = window.back();
  detail::require_target(op, vocab);
  const auto assessment = assess_proposed(store, belief, window, params);
  Verdict v{op, Method::proposed, Decision::anomalous, {}};
  double best_margin = -std::numeric_limits<double>::infinity();
  for (const auto& [y, d] : assessment.candidates) {
    const double n = thresholds.at(y.size());
    if (d >= n) v.decision = Decision::legitimate;
    if (d - n > best_margin) {
      best_margin = d - n;
      v.evidence.sequence = y;
      v.evidence.delta = d;
      v.evidence.length = y.size();
      v.evidence.threshold = n;
    }
  }
  v.evidence.belief = belief.alpha;
  return v;
}

inline double estimation_score(const OperationTable& b, const StateBelief& belief, OperationId x) {
  double s = 0.0;
  for (StateIndex i = 0; i < belief.size(); ++i) s += belief.alpha[i] * b.at(i, x);
  return s;
}

// Legitimate iff the belief-weighted operation probability exceeds theta.
inline Verdict judge_estimation_baseline(const OperationTable& b, const StateBelief& belief, const EventRecord& op,
                                         const Vocabulary& vocab, double theta) {
  detail::require_target(op, vocab);
  const double s = estimation_score(b, belief, op.op);
  Verdict v{op, Method::estimation, s > theta ? Decision::legitimate : Decision::anomalous, {}};
  v.evidence.sequence = {op.op};
  v.evidence.delta = s;
  v.evidence.length = 1;
  v.evidence.threshold = theta;
  v.evidence.belief = belief.alpha;
  return v;
}

struct SequenceBaselineParams {
  std::int64_t max_gap_s = 600;
  std::int64_t time_window_s = 3600;  // +- time of day
  Thresholds ratio;                   // for length 1 and >= 2
  std::size_t max_length = 5;
  std::size_t max_window = 16;
};

// Time-of-day stamped occurrences of target-related sequences.
class SequenceBaselineStore {
 public:
  void add(const SequenceKey& y, std::int64_t time_of_day) { occurrences_[y].push_back(time_of_day); }
  void count_target_operation() { ++target_ops_; }
  void finalize() {
    for (auto& [y, tods] : occurrences_) std::sort(tods.begin(), tods.end());
  }

  std::uint64_t target_operations() const { return target_ops_; }
  void set_target_operations(std::uint64_t n) { target_ops_ = n; }
  const std::map<SequenceKey, std::vector<std::int64_t>>& occurrences() const { return occurrences_; }
  std::map<SequenceKey, std::vector<std::int64_t>>& occurrences() { return occurrences_; }

  // Stored occurrences of y whose cyclic time-of-day distance to `tod` is at most `window_s`.
  std::uint64_t count_near(const SequenceKey& y, std::int64_t tod, std::int64_t window_s) const {
    auto it = occurrences_.find(y);
    if (it == occurrences_.end()) return 0;
    const auto& v = it->second;
    if (window_s >= kSecondsPerDay / 2) return v.size();
    auto count_range = [&](std::int64_t lo, std::int64_t hi) {
      return static_cast<std::uint64_t>(std::upper_bound(v.begin(), v.end(), hi) - std::lower_bound(v.begin(), v.end(), lo));
    };
    const std::int64_t lo = tod - window_s, hi = tod + window_s;
    std::uint64_t c = count_range(std::max<std::int64_t>(lo, 0), std::min<std::int64_t>(hi, kSecondsPerDay - 1));
    if (lo < 0) c += count_range(lo + kSecondsPerDay, kSecondsPerDay - 1);
    if (hi >= kSecondsPerDay) c += count_range(0, hi - kSecondsPerDay);
    return c;
  }

  friend bool operator==(const SequenceBaselineStore&, const SequenceBaselineStore&) = default;

 private:
  std::map<SequenceKey, std::vector<std::int64_t>> occurrences_;
  std::uint64_t target_ops_ = 0;
};

class SequenceBaselineBuilder {
 public:
  SequenceBaselineBuilder(const Vocabulary& vocab, std::int64_t max_gap_s, std::size_t max_length, std::size_t max_window)
      : vocab_(&vocab), window_(max_gap_s), max_length_(max_length), max_window_(max_window) {}

  void start_segment() { window_.clear(); }
  void on_event(const EventRecord& e) {
    if (vocab_->is_target(e.op)) {
      store_.count_target_operation();
      for (const auto& y : candidates_ending_at_last(window_.leading_to(e), max_length_, max_window_))
        store_.add(y, e.timestamp.second_of_day());
    }
    window_.push(e);
  }
  SequenceBaselineStore take() {
    store_.finalize();
    return std::move(store_);
  }

 private:
  const Vocabulary* vocab_;
  EventWindow window_;
  std::size_t max_length_, max_window_;
  SequenceBaselineStore store_;
};

// Best count ratio per length class for each candidate ending at the operation.
inline LengthScores sequence_baseline_scores(const SequenceBaselineStore& store, std::span<const EventRecord> window,
                                             std::int64_t time_window_s, std::size_t max_length, std::size_t max_window) {
  LengthScores out;
  if (window.empty()) return out;
  const auto tod = window.back().timestamp.second_of_day();
  const double total = static_cast<double>(store.target_operations());
  for (const auto& y : candidates_ending_at_last(window, max_length, max_window)) {
    const double r = total > 0.0 ? static_cast<double>(store.count_near(y, tod, time_window_s)) / total : 0.0;
    auto& slot = y.size() <= 1 ? out.single : out.multi;
    slot = std::max(slot, r);
  }
  return out;
}

inline Verdict judge_sequence_baseline(const SequenceBaselineStore& store, std::span<const EventRecord> window,
                                       const Vocabulary& vocab, const SequenceBaselineParams& params) {
  if (window.empty()) throw Error(ErrorKind::usage, "detection window must end with the judged operation");
  const auto& op = window.back();
  detail::require_target(op, vocab);
  const auto tod = op.timestamp.second_of_day();
  const double total = static_cast<double>(store.target_operations());
  Verdict v{op, Method::sequence, Decision::anomalous, {}};
  double best_margin = -std::numeric_limits<double>::infinity();
  for (const auto& y : candidates_ending_at_last(window, params.max_length, params.max_window)) {
    const double r = total > 0.0 ? static_cast<double>(store.count_near(y, tod, params.time_window_s)) / total : 0.0;
    const double n = params.ratio.at(y.size());
    if (r >= n) v.decision = Decision::legitimate;
    if (r - n > best_margin) {
      best_margin = r - n;
      v.evidence.sequence = y;
      v.evidence.delta = r;
      v.evidence.length = y.size();
      v.evidence.threshold = n;
    }
  }
  return v;
}

inline std::string verdict_to_json_line(const Verdict& v, const Vocabulary& vocab) {
  const auto& op = vocab.operation(v.operation.op);
  nlohmann::ordered_json j;
  j["timestamp"] = format_timestamp(v.operation.timestamp);
  j["device"] = op.device;
  j["action"] = op.action;
  j["method"] = to_string(v.method);
  j["decision"] = to_string(v.decision);
  j["delta"] = v.evidence.delta;
  j["seq_len"] = v.evidence.length;
  j["threshold"] = v.evidence.threshold;
  return j.dump() + "\n";
}

}  // namespace situseq
