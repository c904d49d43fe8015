#include <gtest/gtest.h>

#include <chrono>
#include <cstring>
#include <random>

#include "situseq/hsmodel.hpp"
#include "support.hpp"

using namespace situseq;

namespace {

struct Labeled {
  std::vector<TimeslotRecord> slots;
  std::vector<LabeledSlot> labeled;
  std::vector<oracle::LabeledStep> steps;
};

// Random state sequence over `days` days; some days excluded.
Labeled random_labeled(std::mt19937_64& rng, std::size_t n, int days, int stride_states, double exclude_p = 0.0) {
  Labeled out;
  const std::size_t total = static_cast<std::size_t>(days) * kSlotsPerDay;
  out.slots.resize(total);
  std::uniform_int_distribution<int> st(0, static_cast<int>(n) - 1);
  std::uniform_real_distribution<double> u01(0, 1);
  std::vector<bool> excluded(static_cast<std::size_t>(days));
  for (auto&& e : excluded) e = u01(rng) < exclude_p;
  int state = 0;
  for (std::size_t s = 0; s < total; ++s) {
    auto& slot = out.slots[s];
    slot.t = static_cast<std::int64_t>(s) + 1;
    slot.k = static_cast<int>(s % kSlotsPerDay) + 1;
    if (s % static_cast<std::size_t>(stride_states) == 0) state = st(rng);
    LabeledSlot ls;
    ls.slot = &slot;
    ls.state = ls.entry_state = static_cast<StateIndex>(state);
    ls.excluded_day = excluded[s / kSlotsPerDay];
    out.labeled.push_back(ls);
    out.steps.push_back({slot.k, slot.t, state, !ls.excluded_day});
  }
  return out;
}

}  // namespace

TEST(Transitions, MatchPairCountOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t n = 4;
    // Sparse states (long runs) so minimal half-widths vary by slot.
    auto data = random_labeled(rng, n, 2, 97, trial == 3 ? 0.5 : 0.0);
    ModelParams params;
    params.max_halfwidth = 60 + trial * 200;
    // Odd trials only require the states that occur somewhere.
    params.support = trial % 2 ? WindowSupport::observed_states : WindowSupport::all_states;
    const auto a = fit_transitions(data.labeled, n, params);
    std::vector<bool> required(n, params.support == WindowSupport::all_states);
    for (const auto& s : data.steps)
      if (s.usable) required[static_cast<std::size_t>(s.state)] = true;
    for (int k : {1, 2, 3, 100, 719, 720, 1000, 1439, 1440}) {
      int hw = -1;
      const auto ref = oracle::transitions_into(data.steps, n, k, params.max_halfwidth, required, &hw);
      EXPECT_EQ(a.halfwidth(k), hw) << "k=" << k;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a.at(k, i, j), ref[i][j], 1e-12) << k << " " << i << " " << j;
    }
  }
}

TEST(Transitions, AllStatesSupportUsesMaximumWhenSomeStateNeverSeen) {
  std::mt19937_64 rng(3);
  auto data = random_labeled(rng, 3, 1, 200);  // states 0..2 only
  ModelParams params;
  params.support = WindowSupport::all_states;
  params.max_halfwidth = 720;
  const auto a = fit_transitions(data.labeled, 5, params);  // states 3, 4 never occur
  for (int k = 1; k <= kSlotsPerDay; k += 97) EXPECT_EQ(a.halfwidth(k), 720);
  params.support = WindowSupport::observed_states;
  const auto b = fit_transitions(data.labeled, 5, params);
  EXPECT_LT(b.halfwidth(700), 720);
}

TEST(Transitions, RowsAreStochasticOrZero) {
  std::mt19937_64 rng(11);
  auto data = random_labeled(rng, 5, 3, 13);
  const auto a = fit_transitions(data.labeled, 6, {});  // state 5 never seen
  for (int k = 1; k <= kSlotsPerDay; ++k)
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 6; ++j) s += a.at(k, i, j);
      if (i == 5)
        EXPECT_EQ(s, 0.0);  // zero denominator: row stays zero
      else
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Transitions, WrapAroundMidnight) {
  // Two days; state 1 only around midnight, so windows near k = 1 wrap.
  std::vector<TimeslotRecord> slots(2 * kSlotsPerDay);
  std::vector<LabeledSlot> labeled;
  std::vector<oracle::LabeledStep> steps;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    slots[s].t = static_cast<std::int64_t>(s) + 1;
    slots[s].k = static_cast<int>(s % kSlotsPerDay) + 1;
    LabeledSlot ls;
    ls.slot = &slots[s];
    const int k = slots[s].k;
    ls.state = ls.entry_state = (k >= 1435 || k <= 5) ? 1 : 0;
    labeled.push_back(ls);
    steps.push_back({k, slots[s].t, static_cast<int>(ls.state), true});
  }
  ModelParams params;
  params.max_halfwidth = 10;
  params.support = WindowSupport::observed_states;
  const auto a = fit_transitions(labeled, 2, params);
  // Into k = 1 the window is centered on k = 1440 and must reach back to k = 1434 for state 0.
  EXPECT_EQ(a.halfwidth(1), 6);
  EXPECT_GT(a.at(1, 1, 1), 0.0);  // 1440 -> 1 pairs cross the day boundary
  for (int k : {1, 2, 6, 7, 1435, 1440}) {
    const auto ref = oracle::transitions_into(steps, 2, k, 10, {true, true});
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a.at(k, i, j), ref[i][j], 1e-12) << k;
  }
}

TEST(Transitions, ExcludedDaysIgnoredAndEmptyIsModelError) {
  std::mt19937_64 rng(5);
  auto data = random_labeled(rng, 2, 1, 50);
  for (auto& ls : data.labeled) ls.excluded_day = true;
  try {
    fit_transitions(data.labeled, 2, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::model);
  }
}

TEST(Operations, CountsPerVisitedState) {
  // Slot 0: state 0 with op 0 in state 1; slot 1: state 1 with op 0 in state 1.
  std::vector<TimeslotRecord> slots(3);
  for (int s = 0; s < 3; ++s) slots[static_cast<std::size_t>(s)].t = s + 1;
  slots[0].events = {{Timestamp{0}, 0, {}}};
  slots[1].events = {{Timestamp{60}, 0, {}}};
  std::vector<LabeledSlot> labeled(3);
  for (std::size_t s = 0; s < 3; ++s) labeled[s].slot = &slots[s];
  labeled[0].state = 0, labeled[0].entry_state = 0, labeled[0].event_states = {1};
  labeled[1].state = 1, labeled[1].entry_state = 1, labeled[1].event_states = {1};
  labeled[2].state = 1, labeled[2].entry_state = 1;
  const auto b = fit_operations(labeled, 3, 2);
  EXPECT_DOUBLE_EQ(b.at(0, 0), 0.0);        // state 0 visited once, no op in it
  EXPECT_DOUBLE_EQ(b.at(1, 0), 2.0 / 3.0);  // state 1 visited in 3 slots, 2 ops
  EXPECT_DOUBLE_EQ(b.at(2, 0), 0.0);        // never visited: zero denominator
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.at(i, 1), 1.0);  // op 1 never seen
}

TEST(Operations, ClampedToOne) {
  std::vector<TimeslotRecord> slots(1);
  slots[0].events = {{Timestamp{0}, 0, {}}, {Timestamp{1}, 0, {}}, {Timestamp{2}, 0, {}}};
  std::vector<LabeledSlot> labeled(1);
  labeled[0].slot = &slots[0];
  labeled[0].event_states = {0, 0, 0};
  EXPECT_EQ(fit_operations(labeled, 1, 1).at(0, 0), 1.0);
}

TEST(Filter, MatchesBruteForceOn100Instances) {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    auto f = support::random_filter(rng);
    const auto trace = run_filter(f.slots, f.a, f.b, f.initial);
    const auto got = support::trace_beliefs(trace);
    const auto want = oracle::filter(f.ref);
    worst = std::max(worst, support::max_error(got, want));
    for (const auto& s : trace) EXPECT_TRUE(support::sums_to_one(s.belief.alpha));
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Filter, UnseenOperationLeavesBeliefBitwiseUnchanged) {
  OperationTable b(3, 2);
  for (std::size_t i = 0; i < 3; ++i) b.at(i, 1) = 1.0, b.at(i, 0) = 0.2 * static_cast<double>(i + 1);
  StateBelief belief{{0.1, 0.7, 0.2000000000000001}, 1, 0};
  const auto next = observe_operation(belief, 1, b);
  EXPECT_EQ(std::memcmp(next.alpha.data(), belief.alpha.data(), sizeof(double) * 3), 0);
}

TEST(Filter, AllZeroBeliefResetsToUniform) {
  OperationTable b(4, 1);  // b = 0 everywhere for op 0
  const auto next = observe_operation(StateBelief{{0.25, 0.25, 0.5, 0.0}, 1, 0}, 0, b);
  for (double v : next.alpha) EXPECT_DOUBLE_EQ(v, 0.25);
  TransitionTensor a(2);  // all rows zero
  const auto moved = advance_slot(StateBelief{{0.9, 0.1}, 1, 0}, 5, a);
  EXPECT_DOUBLE_EQ(moved.alpha[0], 0.5);
  EXPECT_DOUBLE_EQ(moved.alpha[1], 0.5);
}

TEST(Filter, EmptyStreamYieldsInitialBelief) {
  TransitionTensor a(2);
  OperationTable b(2, 1);
  const auto trace = run_filter({}, a, b, StateBelief::uniform(2));
  ASSERT_EQ(trace.size(), 1u);
  EXPECT_EQ(trace[0].belief.alpha, (std::vector<double>{0.5, 0.5}));
}

TEST(Filter, FirstSlotKeepsInitialBelief) {
  std::mt19937_64 rng(1);
  auto f = support::random_filter(rng);
  const auto trace = run_filter(f.slots, f.a, f.b, f.initial);
  EXPECT_EQ(trace.front().belief.alpha, f.initial.alpha);
}

TEST(Filter, RejectsNonContiguousSlots) {
  TransitionTensor a(1);
  OperationTable b(1, 1);
  std::vector<TimeslotRecord> slots(2);
  slots[0].t = 1;
  slots[1].t = 3;
  EXPECT_THROW(run_filter(slots, a, b, StateBelief::uniform(1)), Error);
}

TEST(Filter, UnknownOperationIdIsVocabularyError) {
  OperationTable b(2, 1);
  try {
    observe_operation(StateBelief::uniform(2), 5, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::vocabulary);
  }
}
