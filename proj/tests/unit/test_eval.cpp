#include <algorithm>
#include <atomic>
#include <set>

#include <gtest/gtest.h>

#include "truelearn/error.hpp"
#include "truelearn/eval.hpp"
#include "truelearn/synthetic.hpp"

using namespace truelearn;

namespace {

constexpr Label kPos = Label::kPositive;
constexpr Label kNeg = Label::kNegative;

std::vector<EngagementEvent> stream(const std::string& learner, std::vector<Label> labels,
                                    KcId kc = 1) {
  std::vector<EngagementEvent> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.push_back({learner, "L" + std::to_string(i % 3), i, i, {{kc, 0.4}, {kc + 1, 0.2}},
                   labels[i]});
  }
  return out;
}

std::vector<EngagementEvent> small_synthetic(std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.learners = 12;
  spec.total_events = 12 * 30;
  return generate_synthetic(spec).events;
}

}  // namespace

TEST(Metrics, Examples) {
  const Metrics m = compute_metrics({1, 1, 0, 1});
  EXPECT_NEAR(m.accuracy, 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
  const Metrics neg = compute_metrics({0, 0, 4, 0});
  EXPECT_DOUBLE_EQ(neg.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(neg.precision, 0.0);
  EXPECT_DOUBLE_EQ(neg.f1, 0.0);
  EXPECT_THROW(compute_metrics({}), DataError);
  EXPECT_DOUBLE_EQ(m.get("recall"), 0.5);
  EXPECT_THROW(m.get("auc"), UsageError);

  ConfusionCounts c;
  c.add(kPos, kPos);
  c.add(kPos, kNeg);
  c.add(kNeg, kNeg);
  c.add(kNeg, kPos);
  EXPECT_EQ(c, (ConfusionCounts{1, 1, 1, 1}));
  c += c;
  EXPECT_EQ(c.total(), 8u);
}

TEST(Evaluate, PersistenceToy) {
  ModelConfig cfg;
  cfg.kind = ModelKind::kPersistence;
  const auto r = evaluate_sequential(cfg, stream("u", {kPos, kPos, kNeg, kPos}));
  ASSERT_EQ(r.learners.size(), 1u);
  EXPECT_EQ(r.learners[0].events, 4u);
  EXPECT_EQ(r.learners[0].evaluated, 3u);
  EXPECT_EQ(r.learners[0].unique_kcs, 2u);
  EXPECT_EQ(r.totals, (ConfusionCounts{1, 1, 0, 1}));
  EXPECT_DOUBLE_EQ(r.weighted.f1, 0.5);
  EXPECT_DOUBLE_EQ(r.learners[0].weight, 1.0);
  EXPECT_EQ(r.dataset.events, 4u);
}

TEST(Evaluate, ActivityWeighting) {
  ModelConfig cfg;
  cfg.kind = ModelKind::kPersistence;
  auto events = stream("a", {kPos, kPos, kPos});  // 2 evaluated, f1 = 1
  const auto b = stream("b", {kPos, kNeg, kPos});  // 2 evaluated, f1 = 0
  events.insert(events.end(), b.begin(), b.end());
  const auto single = stream("c", {kNeg});         // nothing evaluated
  events.insert(events.end(), single.begin(), single.end());
  const auto r = evaluate_sequential(cfg, events);
  ASSERT_EQ(r.learners.size(), 3u);
  EXPECT_DOUBLE_EQ(r.learners[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(r.learners[1].weight, 0.5);
  EXPECT_DOUBLE_EQ(r.learners[2].weight, 0.0);
  EXPECT_EQ(r.learners[2].metrics, Metrics{});
  EXPECT_DOUBLE_EQ(r.weighted.f1, 0.5);
}

TEST(Evaluate, JobsDoNotChangeResults) {
  const auto events = small_synthetic();
  for (const ModelKind k : kAllModelKinds) {
    const auto cfg = ModelConfig::defaults_for(k);
    EXPECT_EQ(evaluate_sequential(cfg, events, {1}), evaluate_sequential(cfg, events, {4}))
        << to_string(k);
  }
}

TEST(Evaluate, PerLearnerModelsAreIndependent) {
  // Concatenating two disjoint learner sets gives the union of the results.
  const auto events = small_synthetic();
  std::set<std::string> ids;
  for (const auto& e : events) ids.insert(e.learner_id);
  const std::vector<std::string> all(ids.begin(), ids.end());
  const std::vector<std::string> first(all.begin(), all.begin() + 5);
  const std::vector<std::string> rest(all.begin() + 5, all.end());
  const auto cfg = ModelConfig::defaults_for(ModelKind::kTrueLearnNovelty);
  const auto whole = evaluate_sequential(cfg, events);
  const auto a = evaluate_sequential(cfg, filter_learners(events, first));
  const auto b = evaluate_sequential(cfg, filter_learners(events, rest));
  std::vector<LearnerResult> parts = a.learners;
  parts.insert(parts.end(), b.learners.begin(), b.learners.end());
  ASSERT_EQ(parts.size(), whole.learners.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    EXPECT_EQ(parts[i].counts, whole.learners[i].counts);
    EXPECT_EQ(parts[i].metrics, whole.learners[i].metrics);
  }
}

TEST(Evaluate, GlobalModelFollowsStreamOrder) {
  const auto events = small_synthetic();
  const auto cfg = ModelConfig::defaults_for(ModelKind::kTrueLearnDynamicDepth);
  ResourceTable resources;
  std::map<std::string, LearnerState> states;
  EvalOptions opt;
  opt.final_resources = &resources;
  opt.final_states = &states;
  const auto r = evaluate_sequential(cfg, events, opt);

  Model m(cfg);
  std::map<std::string, LearnerState> manual;
  ConfusionCounts totals;
  for (const auto& e : events) {
    const auto p = m.predict_and_update(manual[e.learner_id], e);
    if (e.order > 0) totals.add(p.label, e.label);
  }
  EXPECT_EQ(r.totals, totals);
  EXPECT_EQ(resources, m.resources());
  EXPECT_EQ(states, manual);
}

TEST(Evaluate, RejectsBadStreamsWithContext) {
  auto events = stream("u", {kPos, kPos});
  events[1].order = 5;
  EXPECT_THROW(evaluate_sequential({}, events), DataError);
  ModelConfig kt;
  kt.kind = ModelKind::kMultiSkillKt;
  auto wide = stream("u", {kPos});
  for (KcId i = 10; i < 21; ++i) wide[0].topics.push_back({i, 0.1});
  try {
    evaluate_sequential(kt, wide);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("learner u"), std::string::npos) << e.what();
  }
}

TEST(Split, SizesAndDeterminism) {
  std::vector<std::string> ten;
  for (int i = 0; i < 10; ++i) ten.push_back("u" + std::to_string(i));
  const auto s = split_learners(ten, 0.7, 42);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.test.size(), 3u);
  std::vector<std::string> shuffled = ten;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again = split_learners(shuffled, 0.7, 42);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
  std::set<std::string> both(s.train.begin(), s.train.end());
  both.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(both.size(), 10u);
  EXPECT_NE(split_learners(ten, 0.7, 43).train, s.train);

  const auto three = split_learners({"a", "b", "c"}, 0.7, 1);
  EXPECT_EQ(three.train.size(), 2u);
  EXPECT_EQ(three.test.size(), 1u);
  const auto two = split_learners({"a", "b"}, 0.99, 1);
  EXPECT_EQ(two.train.size(), 1u);
  EXPECT_THROW(split_learners({"a"}, 0.7, 1), Error);
}

TEST(Grid, ExpandAndDefaults) {
  GridSpec g;
  EXPECT_TRUE(g.empty());
  g.init_variance = {0.5, 1.0};
  g.tau = {0.0, 0.1, 0.2};
  EXPECT_EQ(g.size(), 6u);
  const auto configs = g.expand(ModelConfig{});
  ASSERT_EQ(configs.size(), 6u);
  std::set<std::pair<double, double>> seen;
  for (const auto& c : configs) {
    seen.insert({c.init_variance, c.tau});
    EXPECT_DOUBLE_EQ(c.beta, 0.5);
  }
  EXPECT_EQ(seen.size(), 6u);

  const auto novelty = GridSpec::defaults_for(ModelKind::kTrueLearnNovelty);
  EXPECT_EQ(novelty.init_variance.size(), 20u);
  EXPECT_EQ(novelty.tau, (std::vector<double>{0.0, 0.01, 0.05, 0.1}));
  EXPECT_EQ(GridSpec::defaults_for(ModelKind::kMultiSkillKt).kt_noise.size(), 7u);
  EXPECT_TRUE(GridSpec::defaults_for(ModelKind::kMajority).empty());
}

TEST(Grid, TiesPreferSmallerValues) {
  ModelConfig base;
  base.kind = ModelKind::kMajority;  // ignores every tuned value
  GridSpec g;
  g.init_variance = {2.0, 1.0, 1.5};
  g.tau = {0.1, 0.0};
  const auto r = grid_search(base, g, small_synthetic());
  EXPECT_EQ(r.rows.size(), 6u);
  EXPECT_DOUBLE_EQ(r.best().config.init_variance, 1.0);
  EXPECT_DOUBLE_EQ(r.best().config.tau, 0.0);
  EXPECT_THROW(grid_search(base, GridSpec{}, small_synthetic()), UsageError);
}

TEST(Grid, FailingPointsAreRecorded) {
  ModelConfig base;
  base.kind = ModelKind::kMultiSkillKt;
  GridSpec g;
  g.kt_noise = {0.6, 0.1};
  const auto r = grid_search(base, g, small_synthetic(), "accuracy", 2);
  ASSERT_EQ(r.rows.size(), 2u);
  const auto bad = std::find_if(r.rows.begin(), r.rows.end(),
                                [](const SweepRow& row) { return !row.metrics; });
  ASSERT_NE(bad, r.rows.end());
  EXPECT_FALSE(bad->error.empty());
  EXPECT_DOUBLE_EQ(r.best().config.kt_noise, 0.1);
  g.kt_noise = {0.7};
  EXPECT_THROW(grid_search(base, g, small_synthetic()), DataError);
  EXPECT_THROW(grid_search(base, GridSpec{{}, {0.1}, {}, {}}, small_synthetic(), "auc"),
               UsageError);
}

TEST(Grid, SelectionUsesOnlyTrainingLearners) {
  // Test-learner events must not influence the chosen configuration.
  const auto events = small_synthetic();
  std::set<std::string> ids;
  for (const auto& e : events) ids.insert(e.learner_id);
  const auto split = split_learners({ids.begin(), ids.end()}, 0.7, 9);
  auto train = filter_learners(events, split.train);
  auto tampered = events;
  for (auto& e : tampered) {
    if (std::find(split.test.begin(), split.test.end(), e.learner_id) != split.test.end()) {
      e.label = e.label == kPos ? kNeg : kPos;
    }
  }
  const auto grid = GridSpec::defaults_for(ModelKind::kTrueLearnFixedDepth);
  const ModelConfig base = ModelConfig::defaults_for(ModelKind::kTrueLearnFixedDepth);
  const auto a = grid_search(base, grid, train, "f1", 4);
  const auto b = grid_search(base, grid, filter_learners(tampered, split.train), "f1", 4);
  EXPECT_EQ(a.best().config, b.best().config);
  EXPECT_EQ(sweep_to_csv(a), sweep_to_csv(b));
}

TEST(Grid, CsvLayout) {
  ModelConfig base;
  base.kind = ModelKind::kTrueLearnNovelty;
  GridSpec g;
  g.init_variance = {0.1, 0.3};
  const auto csv = sweep_to_csv(grid_search(base, g, small_synthetic()));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "model,init_variance,kt_noise,tau,beta,use_negative,accuracy,precision,recall,f1,"
            "error");
  EXPECT_NE(csv.find("\ntruelearn-novelty,0.1,"), std::string::npos);
  EXPECT_NE(csv.find("\ntruelearn-novelty,0.3,"), std::string::npos);
}

TEST(Report, JsonRoundTrip) {
  auto r = evaluate_sequential(ModelConfig{}, small_synthetic());
  r.split = SplitInfo{7, 0.7, {"a", "b"}, {"c"}};
  const std::string text = report_to_json(r);
  EXPECT_EQ(report_from_json(text), r);
  EXPECT_EQ(report_to_json(report_from_json(text)), text);
  r.split.reset();
  EXPECT_EQ(report_from_json(report_to_json(r)), r);

  std::string bumped = text;
  bumped.replace(bumped.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
  EXPECT_THROW(report_from_json(bumped), DataError);
  EXPECT_THROW(report_from_json("{}"), DataError);
}

TEST(Report, Tables) {
  std::vector<EvalReport> reports;
  for (const ModelKind k : {ModelKind::kMajority, ModelKind::kTrueLearnNovelty}) {
    reports.push_back(evaluate_sequential(ModelConfig::defaults_for(k), small_synthetic()));
  }
  const std::string cmp = comparison_table(reports);
  EXPECT_NE(cmp.find("Algorithm"), std::string::npos);
  EXPECT_NE(cmp.find("majority"), std::string::npos);
  EXPECT_NE(cmp.find("truelearn-novelty"), std::string::npos);
  EXPECT_NE(report_to_table(reports[1]).find("truelearn-novelty"), std::string::npos);
}

TEST(ParallelFor, CoversRangeAndPropagates) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(100, 4,
                            [](std::size_t i) {
                              if (i == 37) throw DataError("boom");
                            }),
               DataError);
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}
