#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "situseq/error.hpp"
#include "situseq/hsmodel.hpp"
#include "situseq/ingest.hpp"
#include "situseq/vocabulary.hpp"

namespace situseq {

// Ordered (device, action) symbols; exact-match key of a behavior sequence.
using SequenceKey = std::vector<OperationId>;

struct EventSequence {
  SequenceKey items;
  Timestamp end_time;
};

enum class StoringCriterion { rank, alpha };
// Direction of the probability comparison for the alpha criterion.
enum class AlphaDirection { at_least, at_most };
// What the per-state slot count tracks: slots whose entry belief selects
// state i under the storing criterion, or has i as its most likely state.
enum class SlotCountMode { criterion, argmax };

struct SeqParams {
  std::int64_t max_gap_s = 600;  // events further apart do not chain
  StoringCriterion criterion = StoringCriterion::rank;
  int rank_cutoff = 1;
  double alpha_threshold = 0.1;
  AlphaDirection alpha_direction = AlphaDirection::at_least;
  std::size_t max_length = 5;    // longest stored sequence
  std::size_t max_window = 16;   // most recent events considered
  SlotCountMode slot_count = SlotCountMode::criterion;

  void validate() const {
    if (max_gap_s <= 0) throw Error(ErrorKind::validation, "sequence gap must be positive");
    if (rank_cutoff < 0) throw Error(ErrorKind::validation, "rank cutoff must be nonnegative");
    if (alpha_threshold < 0.0 || alpha_threshold > 1.0)
      throw Error(ErrorKind::validation, "alpha threshold must lie in [0, 1]");
    if (max_length == 0 || max_window == 0 || max_window > 24)
      throw Error(ErrorKind::validation, "max_length must be positive and max_window in [1, 24]");
  }
};

inline std::string sequence_to_string(const SequenceKey& key, const Vocabulary& vocab) {
  std::string s;
  for (std::size_t i = 0; i < key.size(); ++i) s += (i ? "-" : "") + vocab.operation(key[i]).key();
  return s;
}

// All non-empty order-preserving subsequences of `window` no longer than
// `max_length`. The window is first cut to its `max_window` most recent events.
inline std::vector<EventSequence> generate_subsequences(std::span<const EventRecord> window, std::size_t max_length,
                                                        std::size_t max_window = 16) {
  if (window.size() > max_window) window = window.subspan(window.size() - max_window);
  const std::size_t n = window.size();
  std::vector<EventSequence> out;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) > max_length) continue;
    EventSequence seq;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        seq.items.push_back(window[i].op);
        seq.end_time = window[i].timestamp;
      }
    out.push_back(std::move(seq));
  }
  return out;
}

// Distinct keys of the subsequences that end with the window's last event,
// i.e. the candidates "leading up to" that event. Shortest first, then in
// lexicographic order of positions.
inline std::vector<SequenceKey> candidates_ending_at_last(std::span<const EventRecord> window, std::size_t max_length,
                                                          std::size_t max_window = 16) {
  if (window.empty()) return {};
  if (window.size() > max_window) window = window.subspan(window.size() - max_window);
  const std::size_t prefix = window.size() - 1;
  std::set<SequenceKey> seen;
  std::vector<SequenceKey> out;
  std::vector<std::size_t> chosen;
  // Choose up to max_length-1 earlier events, in increasing position order.
  auto emit = [&]() {
    SequenceKey key;
    for (auto p : chosen) key.push_back(window[p].op);
    key.push_back(window.back().op);
    if (seen.insert(key).second) out.push_back(std::move(key));
  };
  for (std::size_t len = 0; len + 1 <= max_length && len <= prefix; ++len) {
    chosen.assign(len, 0);
    for (std::size_t i = 0; i < len; ++i) chosen[i] = i;
    while (true) {
      emit();
      if (len == 0) break;
      std::size_t i = len;
      while (i > 0 && chosen[i - 1] == prefix - len + (i - 1)) --i;
      if (i == 0) break;
      ++chosen[i - 1];
      for (std::size_t m = i; m < len; ++m) chosen[m] = chosen[m - 1] + 1;
    }
  }
  return out;
}

inline std::vector<StateIndex> select_states(const StateBelief& belief, const SeqParams& params) {
  std::vector<StateIndex> out;
  const auto& a = belief.alpha;
  for (StateIndex i = 0; i < a.size(); ++i) {
    bool pick = false;
    if (params.criterion == StoringCriterion::rank) {
      const auto higher = std::count_if(a.begin(), a.end(), [&](double v) { return v > a[i]; });
      pick = higher + 1 <= params.rank_cutoff;
    } else if (params.alpha_direction == AlphaDirection::at_least) {
      pick = a[i] >= params.alpha_threshold;
    } else {
      pick = a[i] <= params.alpha_threshold;
    }
    if (pick) out.push_back(i);
  }
  return out;
}

// Per-state occurrence counts of target-related sequences and per-state slot
// counts.
class SequenceStore {
 public:
  SequenceStore() = default;
  explicit SequenceStore(std::size_t n_states) : slot_counts_(n_states, 0) {}

  std::size_t n_states() const { return slot_counts_.size(); }

  void count_slot(StateIndex i) { ++slot_counts_.at(i); }
  void add(const SequenceKey& y, StateIndex i) {
    auto& c = counts_[y];
    if (c.empty()) c.assign(n_states(), 0);
    ++c.at(i);
  }

  std::uint64_t occurrences(StateIndex i, const SequenceKey& y) const {
    auto it = counts_.find(y);
    return it == counts_.end() ? 0 : it->second.at(i);
  }
  std::uint64_t slot_count(StateIndex i) const { return slot_counts_.at(i); }

  // occurrences / slot count for state i; 0 when the slot count is 0 or y is unknown. Clamped to 1.
  double probability(StateIndex i, const SequenceKey& y) const {
    if (i >= n_states() || slot_counts_[i] == 0) return 0.0;
    auto it = counts_.find(y);
    if (it == counts_.end()) return 0.0;
    return std::min(1.0, static_cast<double>(it->second[i]) / static_cast<double>(slot_counts_[i]));
  }

  const std::map<SequenceKey, std::vector<std::uint64_t>>& counts() const { return counts_; }
  const std::vector<std::uint64_t>& slot_counts() const { return slot_counts_; }
  std::vector<std::uint64_t>& slot_counts() { return slot_counts_; }
  std::map<SequenceKey, std::vector<std::uint64_t>>& counts() { return counts_; }

  bool empty() const { return counts_.empty(); }
  friend bool operator==(const SequenceStore&, const SequenceStore&) = default;

 private:
  std::vector<std::uint64_t> slot_counts_;
  std::map<SequenceKey, std::vector<std::uint64_t>> counts_;
};

inline double sequence_probability(const SequenceStore& store, StateIndex i, const SequenceKey& y) {
  return store.probability(i, y);
}

// Sliding buffer of the events within the gap of the newest one.
class EventWindow {
 public:
  explicit EventWindow(std::int64_t max_gap_s) : max_gap_(max_gap_s) {}

  void push(const EventRecord& e) {
    buf_.push_back(e);
    while (!buf_.empty() && buf_.front().timestamp.seconds < e.timestamp.seconds - max_gap_) buf_.pop_front();
  }
  void clear() { buf_.clear(); }

  // Events within the gap before `last`, followed by `last`.
  std::vector<EventRecord> leading_to(const EventRecord& last) const {
    std::vector<EventRecord> w;
    for (const auto& e : buf_)
      if (e.timestamp.seconds >= last.timestamp.seconds - max_gap_ && e.timestamp <= last.timestamp) w.push_back(e);
    w.push_back(last);
    return w;
  }

 private:
  std::int64_t max_gap_;
  std::deque<EventRecord> buf_;
};

// Builds the store while a forward filter walks the training stream: slot
// entries feed the slot counts, target operations feed the occurrence counts
// using the belief just before the operation.
class SequenceStoreBuilder {
 public:
  SequenceStoreBuilder(std::size_t n_states, const Vocabulary& vocab, SeqParams params)
      : store_(n_states), vocab_(&vocab), params_(params), window_(params.max_gap_s) {
    params_.validate();
  }

  void start_segment() { window_.clear(); }

  void on_slot_entry(const StateBelief& belief) {
    if (params_.slot_count == SlotCountMode::argmax) {
      const auto& a = belief.alpha;
      const double top = *std::max_element(a.begin(), a.end());
      for (StateIndex i = 0; i < a.size(); ++i)
        if (a[i] == top) store_.count_slot(i);
    } else {
      for (auto i : select_states(belief, params_)) store_.count_slot(i);
    }
  }

  // Call with the belief before the event is applied.
  void on_event(const EventRecord& e, const StateBelief& before) {
    if (vocab_->is_target(e.op)) {
      const auto window = window_.leading_to(e);
      const auto states = select_states(before, params_);
      if (!states.empty())
        for (const auto& y : candidates_ending_at_last(window, params_.max_length, params_.max_window))
          for (auto i : states) store_.add(y, i);
    }
    window_.push(e);
  }

  const SequenceStore& store() const { return store_; }
  SequenceStore take() { return std::move(store_); }

 private:
  SequenceStore store_;
  const Vocabulary* vocab_;
  SeqParams params_;
  EventWindow window_;
};

// Store from a completed belief trace over `slots` (as produced by run_filter).
inline SequenceStore store_sequences(std::span<const TimeslotRecord> slots, std::span<const BeliefSnapshot> trace,
                                     const Vocabulary& vocab, const SeqParams& params) {
  const std::size_t n = trace.empty() ? 0 : trace.front().belief.size();
  SequenceStoreBuilder builder(n, vocab, params);
  for (const auto& snap : trace) {
    if (slots.empty()) break;
    if (snap.phase == SnapshotPhase::slot_entry)
      builder.on_slot_entry(snap.belief);
    else if (snap.phase == SnapshotPhase::pre_event)
      builder.on_event(slots[snap.slot].events[snap.event], snap.belief);
  }
  return builder.take();
}

}  // namespace situseq
