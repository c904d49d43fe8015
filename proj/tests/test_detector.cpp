#include <gtest/gtest.h>

#include "situseq/detector.hpp"
#include "support.hpp"

using namespace situseq;

namespace {

const Vocabulary kVocab = Vocabulary::standard();

OperationId op(const std::string& key) { return *kVocab.find_key(key); }

}  // namespace

TEST(Proposed, HandComputedOccurrenceProbability) {
  const OperationId fridge = op("refrigerator:open"), stove = op("cooking_stove:on");
  SequenceStore store(2);
  for (int i = 0; i < 4; ++i) store.count_slot(0);
  for (int i = 0; i < 2; ++i) store.count_slot(1);
  store.add({fridge, stove}, 0);  // 1/4
  store.add({stove}, 1);          // 1/2
  const StateBelief belief{{0.6, 0.4}, 1, 0};
  EXPECT_DOUBLE_EQ(occurrence_probability(store, belief, {fridge, stove}), 0.25 * 0.6);
  EXPECT_DOUBLE_EQ(occurrence_probability(store, belief, {stove}), 0.5 * 0.4);

  const auto t0 = make_timestamp(2020, 1, 1, 8, 0);
  const std::vector<EventRecord> window = {{t0, fridge, {}}, {t0 + 30, stove, {}}};
  const auto a = assess_proposed(store, belief, window, {});
  EXPECT_DOUBLE_EQ(a.scores.single, 0.2);
  EXPECT_DOUBLE_EQ(a.scores.multi, 0.15);

  // Either length class reaching its threshold suffices; equality counts.
  EXPECT_EQ(judge_proposed(store, belief, window, kVocab, {0.2, 0.9}, {}).decision, Decision::legitimate);
  EXPECT_EQ(judge_proposed(store, belief, window, kVocab, {0.9, 0.15}, {}).decision, Decision::legitimate);
  const auto v = judge_proposed(store, belief, window, kVocab, {0.21, 0.16}, {});
  EXPECT_EQ(v.decision, Decision::anomalous);
  EXPECT_EQ(v.evidence.belief, belief.alpha);
}

TEST(Proposed, EmptyStoreIsAnomalous) {
  const SequenceStore store(3);
  const std::vector<EventRecord> window = {{make_timestamp(2020, 1, 1, 8, 0), op("cooking_stove:on"), {}}};
  const auto v = judge_proposed(store, StateBelief::uniform(3), window, kVocab, {0.0, 0.0}, {});
  EXPECT_EQ(v.decision, Decision::legitimate);  // zero threshold accepts delta = 0
  const auto w = judge_proposed(store, StateBelief::uniform(3), window, kVocab, {1e-7, 1e-7}, {});
  EXPECT_EQ(w.decision, Decision::anomalous);
  EXPECT_EQ(w.evidence.delta, 0.0);
}

TEST(Proposed, NonTargetOperationIsUsageError) {
  const std::vector<EventRecord> window = {{make_timestamp(2020, 1, 1), op("tv:on"), {}}};
  try {
    judge_proposed(SequenceStore(1), StateBelief::uniform(1), window, kVocab, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::usage);
  }
}

TEST(Estimation, StrictThreshold) {
  OperationTable b(2, kVocab.size());
  const OperationId stove = op("cooking_stove:on");
  b.at(0, stove) = 0.5;
  b.at(1, stove) = 0.0;
  const StateBelief belief{{0.5, 0.5}, 1, 0};
  const EventRecord e{make_timestamp(2020, 1, 1), stove, {}};
  EXPECT_DOUBLE_EQ(estimation_score(b, belief, stove), 0.25);
  EXPECT_EQ(judge_estimation_baseline(b, belief, e, kVocab, 0.25).decision, Decision::anomalous);
  EXPECT_EQ(judge_estimation_baseline(b, belief, e, kVocab, 0.2499).decision, Decision::legitimate);
}

TEST(SequenceBaseline, CyclicTimeOfDayCount) {
  SequenceBaselineStore s;
  const SequenceKey y = {1};
  for (std::int64_t tod : {100, 86300, 43200}) s.add(y, tod);
  s.finalize();
  EXPECT_EQ(s.count_near(y, 0, 150), 2u);  // wraps across midnight
  EXPECT_EQ(s.count_near(y, 86399, 100), 1u);  // 100 is 101 s away
  EXPECT_EQ(s.count_near(y, 86399, 101), 2u);
  EXPECT_EQ(s.count_near(y, 43200, 0), 1u);
  EXPECT_EQ(s.count_near(y, 20000, 43200), 3u);
  EXPECT_EQ(s.count_near({2}, 0, 43200), 0u);
  // Brute force on a grid of query times.
  for (std::int64_t q = 0; q < 86400; q += 997)
    for (std::int64_t w : {0, 60, 3600, 40000}) {
      std::uint64_t want = 0;
      for (std::int64_t tod : {100, 86300, 43200}) {
        const auto d = std::abs(q - tod) % 86400;
        if (std::min(d, 86400 - d) <= w) ++want;
      }
      EXPECT_EQ(s.count_near(y, q, w), want) << q << " " << w;
    }
}

TEST(SequenceBaseline, RatioOverTrainingTargetOperations) {
  const OperationId fridge = op("refrigerator:open"), stove = op("cooking_stove:on");
  SequenceBaselineBuilder builder(kVocab, 600, 5, 16);
  const auto day = make_timestamp(2020, 1, 1);
  builder.on_event({day + 8 * 3600, fridge, {}});
  builder.on_event({day + 8 * 3600 + 60, stove, {}});
  builder.on_event({day + 20 * 3600, stove, {}});
  const auto store = builder.take();
  EXPECT_EQ(store.target_operations(), 2u);
  const std::vector<EventRecord> w = {{day + 86400 + 8 * 3600 + 30, fridge, {}},
                                      {day + 86400 + 8 * 3600 + 90, stove, {}}};
  const auto sc = sequence_baseline_scores(store, w, 3600, 5, 16);
  EXPECT_DOUBLE_EQ(sc.single, 0.5);
  EXPECT_DOUBLE_EQ(sc.multi, 0.5);
  SequenceBaselineParams p;
  p.ratio = {0.6, 0.5};
  EXPECT_EQ(judge_sequence_baseline(store, w, kVocab, p).decision, Decision::legitimate);
  p.ratio = {0.6, 0.6};
  EXPECT_EQ(judge_sequence_baseline(store, w, kVocab, p).decision, Decision::anomalous);
  // Empty training store: every ratio is zero.
  EXPECT_EQ(sequence_baseline_scores(SequenceBaselineStore{}, w, 3600, 5, 16).single, 0.0);
}

TEST(Verdicts, JsonLine) {
  Verdict v{{make_timestamp(2020, 1, 1, 8, 0), op("cooking_stove:on"), {}}, Method::proposed, Decision::anomalous, {}};
  const auto j = nlohmann::json::parse(verdict_to_json_line(v, kVocab));
  EXPECT_EQ(j["device"], "cooking_stove");
  EXPECT_EQ(j["decision"], "anomalous");
  EXPECT_EQ(parse_method("sequence"), Method::sequence);
  EXPECT_FALSE(parse_method("bogus"));
}
