#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "situseq/error.hpp"
#include "situseq/ingest.hpp"
#include "situseq/labeling.hpp"
#include "situseq/time.hpp"

namespace situseq {

// Which states must have support inside the pooling window before it stops
// growing: every state of the alphabet, or only those present anywhere in
// the training labels.
enum class WindowSupport { all_states, observed_states };

struct ModelParams {
  int max_halfwidth = 720;  // in slots
  WindowSupport support = WindowSupport::all_states;

  void validate() const {
    if (max_halfwidth < 0 || max_halfwidth > 720)
      throw Error(ErrorKind::validation, "max_halfwidth must lie in [0, 720]");
  }
};

// Time-of-day dependent transition probabilities. `at(k, i, j)` is the
// probability of moving from state i in slot k-1 to state j in slot k, with
// k the 1-based slot of day (slot 1 follows slot 1440 of the previous day).
class TransitionTensor {
 public:
  TransitionTensor() = default;
  explicit TransitionTensor(std::size_t n_states)
      : n_(n_states), p_(static_cast<std::size_t>(kSlotsPerDay) * n_states * n_states, 0.0),
        halfwidth_(kSlotsPerDay, 0) {}

  std::size_t n_states() const { return n_; }

  double at(int k, std::size_t i, std::size_t j) const { return p_[offset(k, i, j)]; }
  double& at(int k, std::size_t i, std::size_t j) { return p_[offset(k, i, j)]; }

  std::span<const double> row(int k, std::size_t i) const { return {p_.data() + offset(k, i, 0), n_}; }
  std::span<double> row(int k, std::size_t i) { return {p_.data() + offset(k, i, 0), n_}; }

  bool row_is_zero(int k, std::size_t i) const {
    auto r = row(k, i);
    return std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; });
  }

  // Realized pooling half-width for slot of day k.
  int halfwidth(int k) const { return halfwidth_[static_cast<std::size_t>(k - 1)]; }
  void set_halfwidth(int k, int v) { halfwidth_[static_cast<std::size_t>(k - 1)] = v; }

 private:
  std::size_t offset(int k, std::size_t i, std::size_t j) const {
    if (k < 1 || k > kSlotsPerDay || i >= n_ || j >= n_) throw Error(ErrorKind::usage, "transition index out of range");
    return (static_cast<std::size_t>(k - 1) * n_ + i) * n_ + j;
  }

  std::size_t n_ = 0;
  std::vector<double> p_;
  std::vector<int> halfwidth_;
};

// b(i, x): probability of operation x in state i.
class OperationTable {
 public:
  OperationTable() = default;
  OperationTable(std::size_t n_states, std::size_t n_ops) : n_states_(n_states), n_ops_(n_ops), p_(n_states * n_ops, 0.0) {}

  std::size_t n_states() const { return n_states_; }
  std::size_t n_ops() const { return n_ops_; }

  double at(std::size_t i, OperationId x) const { return p_[offset(i, x)]; }
  double& at(std::size_t i, OperationId x) { return p_[offset(i, x)]; }

  void require(OperationId x) const {
    if (x >= n_ops_) throw Error(ErrorKind::vocabulary, "operation id " + std::to_string(x) + " is not registered");
  }

 private:
  std::size_t offset(std::size_t i, OperationId x) const {
    require(x);
    if (i >= n_states_) throw Error(ErrorKind::usage, "state index out of range");
    return i * n_ops_ + x;
  }

  std::size_t n_states_ = 0, n_ops_ = 0;
  std::vector<double> p_;
};

struct StateBelief {
  std::vector<double> alpha;
  std::int64_t t = 0;      // slot of data the belief refers to
  std::size_t event = 0;   // number of operations applied within slot t

  static StateBelief uniform(std::size_t n) { return {std::vector<double>(n, 1.0 / static_cast<double>(n)), 0, 0}; }
  std::size_t size() const { return alpha.size(); }
};

namespace detail {

// Divide by the total; an all-zero vector becomes uniform.
inline void normalize_or_reset(std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  if (sum > 0.0) {
    for (double& x : v) x /= sum;
  } else {
    std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
  }
}

// Sum over the cyclic slot-of-day range [center - hw, center + hw] using a
// prefix array of length 1441. Each slot of day contributes at most once.
template <typename Prefix>
double cyclic_window_sum(const Prefix& prefix, int center, int hw) {
  if (2 * hw + 1 >= kSlotsPerDay) return prefix[kSlotsPerDay];
  const int lo = center - hw, hi = center + hw;  // 0-based positions, may fall outside [0, 1440)
  auto range = [&](int a, int b) { return prefix[static_cast<std::size_t>(b + 1)] - prefix[static_cast<std::size_t>(a)]; };
  if (lo < 0) return range(0, hi) + range(lo + kSlotsPerDay, kSlotsPerDay - 1);
  if (hi >= kSlotsPerDay) return range(lo, kSlotsPerDay - 1) + range(0, hi - kSlotsPerDay);
  return range(lo, hi);
}

inline bool usable_for_fitting(const LabeledSlot& ls) { return !ls.excluded_day; }

}  // namespace detail

// Pools slot-of-day transition counts over a window of +-halfwidth slots around each
// slot, the half-width being the smallest half-width that gives every required state some
// support (capped at max_halfwidth). Excluded days do not contribute.
inline TransitionTensor fit_transitions(std::span<const LabeledSlot> labeled, std::size_t n_states,
                                        const ModelParams& params) {
  params.validate();
  const std::size_t n = n_states;
  // occupancy[f][i]: slots at slot-of-day f (0-based) labeled i
  // pairs[f][i][j]: transitions from slot-of-day f in state i to the next slot in state j
  std::vector<double> occupancy(kSlotsPerDay * n, 0.0), pairs(kSlotsPerDay * n * n, 0.0);
  std::size_t used = 0;
  for (std::size_t s = 0; s < labeled.size(); ++s) {
    const auto& cur = labeled[s];
    if (!detail::usable_for_fitting(cur)) continue;
    if (cur.state >= n) throw Error(ErrorKind::usage, "labeled state outside alphabet");
    const auto f = static_cast<std::size_t>(cur.slot->k - 1);
    occupancy[f * n + cur.state] += 1.0;
    ++used;
    if (s + 1 < labeled.size()) {
      const auto& next = labeled[s + 1];
      if (detail::usable_for_fitting(next) && next.slot->t == cur.slot->t + 1)
        pairs[(f * n + cur.state) * n + next.state] += 1.0;
    }
  }
  if (used == 0) throw Error(ErrorKind::model, "no training slots available for fitting transitions");

  // Prefix sums over slot of day.
  std::vector<std::vector<double>> occ_prefix(n, std::vector<double>(kSlotsPerDay + 1, 0.0));
  std::vector<std::vector<double>> pair_prefix(n * n, std::vector<double>(kSlotsPerDay + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (int f = 0; f < kSlotsPerDay; ++f) occ_prefix[i][f + 1] = occ_prefix[i][f] + occupancy[f * n + i];
  for (std::size_t ij = 0; ij < n * n; ++ij)
    for (int f = 0; f < kSlotsPerDay; ++f) pair_prefix[ij][f + 1] = pair_prefix[ij][f] + pairs[f * n * n + ij];

  std::vector<bool> required(n, true);
  if (params.support == WindowSupport::observed_states)
    for (std::size_t i = 0; i < n; ++i) required[i] = occ_prefix[i][kSlotsPerDay] > 0.0;

  auto supported = [&](int center, int hw) {
    for (std::size_t i = 0; i < n; ++i)
      if (required[i] && detail::cyclic_window_sum(occ_prefix[i], center, hw) == 0.0) return false;
    return true;
  };

  TransitionTensor a(n);
  for (int k = 1; k <= kSlotsPerDay; ++k) {
    // Transitions into slot k leave from slot k-1 (0-based position k-2, cyclic).
    const int center = (k - 2 + kSlotsPerDay) % kSlotsPerDay;
    int hw = params.max_halfwidth;
    if (supported(center, params.max_halfwidth)) {
      int lo = 0, hi = params.max_halfwidth;
      while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (supported(center, mid))
          hi = mid;
        else
          lo = mid + 1;
      }
      hw = lo;
    }
    a.set_halfwidth(k, hw);
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = detail::cyclic_window_sum(occ_prefix[i], center, hw);
      if (denom == 0.0) continue;
      auto row = a.row(k, i);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = detail::cyclic_window_sum(pair_prefix[i * n + j], center, hw) / denom;
        total += row[j];
      }
      if (total > 0.0)
        for (double& v : row) v /= total;
    }
  }
  return a;
}

// b(i, x) = occurrences of x in state i / slots in which state i was in force.
// Operations never seen in training get b = 1 in every state.
inline OperationTable fit_operations(std::span<const LabeledSlot> labeled, std::size_t n_states, std::size_t n_ops) {
  std::vector<double> slots_in_state(n_states, 0.0);
  std::vector<double> occurrences(n_states * n_ops, 0.0);
  std::vector<bool> seen(n_ops, false);
  std::vector<bool> visited(n_states);
  for (const auto& ls : labeled) {
    if (!detail::usable_for_fitting(ls)) continue;
    std::fill(visited.begin(), visited.end(), false);
    visited.at(ls.state) = true;
    visited.at(ls.entry_state) = true;
    for (std::size_t e = 0; e < ls.event_states.size(); ++e) {
      const auto st = ls.event_states[e];
      const auto x = ls.slot->events[e].op;
      if (x >= n_ops) throw Error(ErrorKind::vocabulary, "operation id outside the vocabulary");
      visited.at(st) = true;
      occurrences[st * n_ops + x] += 1.0;
      seen[x] = true;
    }
    for (std::size_t i = 0; i < n_states; ++i)
      if (visited[i]) slots_in_state[i] += 1.0;
  }
  OperationTable b(n_states, n_ops);
  for (OperationId x = 0; x < n_ops; ++x)
    for (std::size_t i = 0; i < n_states; ++i) {
      if (!seen[x])
        b.at(i, x) = 1.0;
      else if (slots_in_state[i] > 0.0)
        b.at(i, x) = std::min(1.0, occurrences[i * n_ops + x] / slots_in_state[i]);
    }
  return b;
}

// Slot change: predict with the transitions into slot-of-day k, then renormalize.
inline StateBelief advance_slot(const StateBelief& belief, int k, const TransitionTensor& a) {
  const std::size_t n = belief.size();
  if (n != a.n_states()) throw Error(ErrorKind::usage, "belief and transition sizes differ");
  StateBelief next{std::vector<double>(n, 0.0), belief.t + 1, 0};
  for (std::size_t j = 0; j < n; ++j) {
    if (belief.alpha[j] == 0.0) continue;
    auto row = a.row(k, j);
    for (std::size_t i = 0; i < n; ++i) next.alpha[i] += row[i] * belief.alpha[j];
  }
  detail::normalize_or_reset(next.alpha);
  return next;
}

// Operation x observed: weight by b(., x), then renormalize. When b(., x) is 1
// everywhere the belief is returned untouched.
inline StateBelief observe_operation(const StateBelief& belief, OperationId x, const OperationTable& b) {
  b.require(x);
  if (belief.size() != b.n_states()) throw Error(ErrorKind::usage, "belief and operation table sizes differ");
  StateBelief next = belief;
  next.event = belief.event + 1;
  bool neutral = true;
  for (std::size_t i = 0; i < belief.size(); ++i) neutral = neutral && b.at(i, x) == 1.0;
  if (neutral) return next;
  for (std::size_t i = 0; i < belief.size(); ++i) next.alpha[i] = b.at(i, x) * belief.alpha[i];
  detail::normalize_or_reset(next.alpha);
  return next;
}

enum class SnapshotPhase { slot_entry, pre_event, post_event };

struct BeliefSnapshot {
  SnapshotPhase phase = SnapshotPhase::slot_entry;
  std::size_t slot = 0;   // position in the input stream
  std::size_t event = 0;  // event index within the slot (unused for slot_entry)
  StateBelief belief;
};

// Incremental forward filter over a contiguous slot stream. The first slot
// keeps the initial belief; every later slot advances it first.
class ForwardFilter {
 public:
  ForwardFilter(const TransitionTensor& a, const OperationTable& b, StateBelief initial)
      : a_(&a), b_(&b), belief_(std::move(initial)) {}

  const StateBelief& enter_slot(const TimeslotRecord& slot) {
    if (started_) {
      if (slot.t != last_t_ + 1) throw Error(ErrorKind::usage, "slot stream is not contiguous");
      belief_ = advance_slot(belief_, slot.k, *a_);
    }
    belief_.t = slot.t;
    belief_.event = 0;
    last_t_ = slot.t;
    started_ = true;
    return belief_;
  }

  const StateBelief& observe(OperationId x) {
    belief_ = observe_operation(belief_, x, *b_);
    return belief_;
  }

  const StateBelief& belief() const { return belief_; }

 private:
  const TransitionTensor* a_;
  const OperationTable* b_;
  StateBelief belief_;
  std::int64_t last_t_ = 0;
  bool started_ = false;
};

// Belief trace: the initial belief alone for an empty stream; otherwise one
// snapshot at every slot entry and one before and after every event.
inline std::vector<BeliefSnapshot> run_filter(std::span<const TimeslotRecord> slots, const TransitionTensor& a,
                                              const OperationTable& b, const StateBelief& initial) {
  std::vector<BeliefSnapshot> trace;
  if (slots.empty()) {
    trace.push_back({SnapshotPhase::slot_entry, 0, 0, initial});
    return trace;
  }
  ForwardFilter filter(a, b, initial);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    trace.push_back({SnapshotPhase::slot_entry, s, 0, filter.enter_slot(slots[s])});
    for (std::size_t e = 0; e < slots[s].events.size(); ++e) {
      trace.push_back({SnapshotPhase::pre_event, s, e, filter.belief()});
      trace.push_back({SnapshotPhase::post_event, s, e, filter.observe(slots[s].events[e].op)});
    }
  }
  return trace;
}

}  // namespace situseq
