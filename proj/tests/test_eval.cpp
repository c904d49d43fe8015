#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "situseq/eval.hpp"
#include "situseq/synthgen.hpp"
#include "support.hpp"

using namespace situseq;

namespace {

const Dataset& s1_small() {
  static const Dataset d = [] {
    const auto vocab = Vocabulary::standard();
    auto sc = scenario_s1(11);
    sc.n_days = 4;
    const auto g = generate(sc, vocab);
    return make_dataset(vocab, g.events, g.frames);
  }();
  return d;
}

PipelineParams s1_params() {
  PipelineParams p;
  p.labeling.initial_occupants = 2;
  return p;
}

std::vector<std::pair<double, double>> coords(const std::vector<EvalPoint>& pts) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : pts) out.push_back({p.misdetection(), p.detection()});
  return out;
}

}  // namespace

TEST(Injections, SortedWithinDayAndUniform) {
  const auto day = make_timestamp(2020, 1, 1);
  const auto plan = inject_anomalies(day, 20000, 77);
  ASSERT_EQ(plan.times.size(), 20000u);
  EXPECT_TRUE(std::is_sorted(plan.times.begin(), plan.times.end()));
  EXPECT_GE(plan.times.front(), day);
  EXPECT_LT(plan.times.back(), day + 86400);
  // Kolmogorov-Smirnov against U[0, 86400); 1.63/sqrt(n) is the 1% critical value.
  double dmax = 0;
  const double n = static_cast<double>(plan.times.size());
  for (std::size_t i = 0; i < plan.times.size(); ++i) {
    const double f = static_cast<double>(plan.times[i].seconds - day.seconds) / 86400.0;
    dmax = std::max({dmax, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  EXPECT_LT(dmax, 1.63 / std::sqrt(n));
  EXPECT_EQ(inject_anomalies(day, 50, 5).times, inject_anomalies(day, 50, 5).times);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Counts, RatesAndEmptyDenominators) {
  Counts c;
  EXPECT_EQ(c.detection(), 0.0);
  EXPECT_EQ(c.misdetection(), 0.0);
  c.record(true, Decision::anomalous);
  c.record(true, Decision::legitimate);
  c.record(false, Decision::anomalous);
  EXPECT_EQ(c, (Counts{1, 1, 1, 0}));
  EXPECT_DOUBLE_EQ(c.detection(), 0.5);
  EXPECT_DOUBLE_EQ(c.misdetection(), 1.0);
}

TEST(CrossValidation, ToyMatchesHandCount) {
  const auto toy = support::toy_two_days();
  ASSERT_EQ(toy.n_days(), 2u);
  const EvalOptions opt;
  const Method m[] = {Method::sequence};
  const auto got = cross_validate(toy, support::toy_sequence_params(), m, opt).at(Method::sequence);
  const auto want = support::toy_expected_counts(toy, opt);
  EXPECT_EQ(got.tp + got.fn, 200u);
  EXPECT_EQ(got, want);
}

TEST(CrossValidation, InjectionTotalsPerMethod) {
  const auto& data = s1_small();
  EvalOptions opt;
  opt.injections_per_day = 25;
  const Method all[] = {Method::proposed, Method::estimation, Method::sequence};
  const auto counts = cross_validate(data, s1_params(), all, opt);
  std::uint64_t real = 0;
  for (const auto& slot : data.slots)
    for (const auto& e : slot.events) real += data.vocab.is_target(e.op);
  for (const auto& [m, c] : counts) {
    EXPECT_EQ(c.tp + c.fn, 25u * data.n_days()) << to_string(m);
    EXPECT_EQ(c.fp + c.tn, real) << to_string(m);
  }
}

TEST(CrossValidation, ThresholdAboveEveryScoreFlagsAll) {
  ScoreTable t = {{true, 0.3, 0.2}, {false, 0.9, -1}, {true, 0.0, 0.99}, {false, 0.5, 0.5}};
  const auto c = count_decisions(t, {1.0, 1.0});
  EXPECT_EQ(c.detection(), 1.0);
  EXPECT_EQ(c.misdetection(), 1.0);
  const auto s = count_decisions(t, {0.5, 1.0}, true);  // strict: 0.5 does not pass
  EXPECT_EQ(s, (Counts{2, 0, 1, 1}));
}

TEST(CrossValidation, SingleDayIsValidationError) {
  const auto vocab = Vocabulary::standard();
  const auto d = make_dataset(vocab, {}, {{make_timestamp(2020, 1, 1), 22, 45, 1013, 600, 45}});
  try {
    const Method m[] = {Method::sequence};
    cross_validate(d, {}, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}

TEST(Grid, ReferenceCardinality) {
  const auto g = reference_grid();
  const std::uint64_t fine = 10'000'001;
  EXPECT_EQ(cardinality(g, Method::proposed), 4u * 4 * 6 * (10 + 21) * fine * fine);
  EXPECT_EQ(cardinality(g, Method::estimation), 4u * 4 * 6 * fine);
  EXPECT_EQ(cardinality(g, Method::sequence), 6u * 13 * 13);
}

TEST(Grid, SingleCombinationMatchesCrossValidation) {
  const auto& data = s1_small();
  EvalOptions eo;
  eo.injections_per_day = 20;
  Grid g;
  g.base = s1_params();
  g.n_single = ValueList::of({0.01});
  g.n_multi = ValueList::of({0.02});
  g.theta = ValueList::of({0.005});
  g.ratio_single = ValueList::of({0.1});
  g.ratio_multi = ValueList::of({0.2});
  PipelineParams p = g.base;
  p.labeling.before_slots = p.labeling.after_slots = 15;
  p.labeling.cooking_slots = 10;
  p.thresholds = {0.01, 0.02};
  p.theta = 0.005;
  p.seq_baseline.ratio = {0.1, 0.2};
  GridOptions go;
  go.eval = eo;
  for (auto m : {Method::proposed, Method::estimation, Method::sequence}) {
    EXPECT_EQ(cardinality(g, m), 1u);
    const auto pts = grid_search(data, g, m, go);
    ASSERT_EQ(pts.size(), 1u) << to_string(m);
    const Method one[] = {m};
    EXPECT_EQ(pts[0].counts, cross_validate(data, p, one, eo).at(m)) << to_string(m);
  }
}

TEST(Grid, PrunedSweepKeepsTheFrontierAndThreadsAgree) {
  const auto& data = s1_small();
  Grid g;
  g.base = s1_params();
  g.cooking_slots = {10, 30};
  g.rank_cutoffs = {1, 3};
  g.alpha_thresholds = {0.2};
  g.n_single = g.n_multi = g.theta = ValueList::range(0.0, 0.001, 1001);
  g.time_windows = {900, 3600};
  g.ratio_single = g.ratio_multi = ValueList::range(0.0, 0.01, 101);
  GridOptions full;
  full.eval.injections_per_day = 30;
  GridOptions pruned = full;
  pruned.prune = true;
  pruned.jobs = 3;
  for (auto m : {Method::proposed, Method::estimation, Method::sequence}) {
    const auto a = grid_search(data, g, m, full);
    const auto b = grid_search(data, g, m, pruned);
    EXPECT_LE(b.size(), a.size());
    EXPECT_EQ(coords(pareto_frontier(a)), coords(pareto_frontier(b))) << to_string(m);
    full.jobs = 4;
    const auto c = grid_search(data, g, m, full);
    full.jobs = 1;
    EXPECT_EQ(write_results_csv(a), write_results_csv(c));
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.params_json < y.params_json; }));
  }
}

TEST(Grid, RangeSweepMatchesExplicitValues) {
  // Collapsing a range to outcome classes loses no frontier point.
  const auto& data = s1_small();
  Grid g;
  g.base = s1_params();
  g.theta = ValueList::range(0.0, 0.0005, 41);
  std::vector<double> explicit_values;
  for (std::uint64_t i = 0; i < g.theta.size(); ++i) explicit_values.push_back(g.theta.at(i));
  Grid h = g;
  h.theta = ValueList::of(explicit_values);
  GridOptions o;
  o.eval.injections_per_day = 30;
  EXPECT_EQ(coords(pareto_frontier(grid_search(data, g, Method::estimation, o))),
            coords(pareto_frontier(grid_search(data, h, Method::estimation, o))));
  EXPECT_EQ(grid_search(data, h, Method::estimation, o).size(), 41u);
}

TEST(Grid, ValueListsSnapAndValidate) {
  const auto r = ValueList::range(0.0, 0.1, 11);
  EXPECT_EQ(r.at(3), 0.3);
  EXPECT_EQ(r.at(10), 1.0);
  EXPECT_THROW(ValueList::range(0.0, 0.2, 7).validate("x"), Error);
  EXPECT_THROW(ValueList::of({}).validate("x"), Error);
  EXPECT_THROW(ValueList::of({-0.1}).validate("x"), Error);
}

TEST(Grid, FromJson) {
  const auto g = grid_from_json(nlohmann::json::parse(
      R"({"before_slots":[15,30],"n_single":{"start":0,"step":0.25,"count":5},"time_windows":900,
          "params":{"labeling":{"initial_occupants":2}}})"));
  EXPECT_EQ(g.before_slots, (std::vector<int>{15, 30}));
  EXPECT_EQ(g.n_single.size(), 5u);
  EXPECT_EQ(g.n_single.at(4), 1.0);
  EXPECT_EQ(g.time_windows, (std::vector<std::int64_t>{900}));
  EXPECT_EQ(g.base.labeling.initial_occupants, 2);
  EXPECT_EQ(cardinality(grid_from_json({{"preset", "reference"}}), Method::sequence), 1014u);
  EXPECT_THROW(grid_from_json(nlohmann::json::parse(R"({"n_single":"x"})")), Error);
}

TEST(Frontier, WorkedExample) {
  const std::vector<EvalPoint> pts = {support::point(0.05, 0.6, "a"), support::point(0.08, 0.5, "b"),
                                      support::point(0.10, 0.9, "c")};
  const auto f = pareto_frontier(pts);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].params_json, "a");
  EXPECT_EQ(f[1].params_json, "c");
  EXPECT_EQ(best_at(pts, 0.10)->params_json, "a");  // strict cap excludes 0.10
  EXPECT_EQ(best_at(pts, 0.11)->params_json, "c");
  EXPECT_FALSE(best_at(pts, 0.05));
  EXPECT_TRUE(pareto_frontier({}).empty());
}

TEST(Frontier, MatchesDefinitionAndIgnoresOrder) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::uniform_int_distribution<int> grid(0, 20);
    std::vector<EvalPoint> pts;
    std::vector<std::pair<double, double>> raw;
    for (int i = 0; i < n; ++i) {
      pts.push_back(support::point(grid(rng) / 20.0, grid(rng) / 20.0));
      raw.push_back({pts.back().misdetection(), pts.back().detection()});
    }
    const auto f = coords(pareto_frontier(pts));
    EXPECT_EQ(f, oracle::frontier(raw));
    std::shuffle(pts.begin(), pts.end(), rng);
    EXPECT_EQ(coords(pareto_frontier(pts)), f);
  }
}

TEST(Results, CsvLayout) {
  EvalPoint p = support::point(0.25, 0.5, R"({"a":1})");
  p.method = Method::sequence;
  const auto text = write_results_csv(std::vector<EvalPoint>{p});
  EXPECT_EQ(text, "method,params_json,misdetection,detection,tp,fn,fp,tn\n"
                  "sequence,\"{\"\"a\"\":1}\",0.25,0.5,500,500,250,750\n");
}
