#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/oracle.hpp"
#include "truelearn/error.hpp"
#include "truelearn/models.hpp"

using namespace truelearn;

namespace {

EngagementEvent event(std::size_t order, std::vector<EventTopic> topics, Label label,
                      const std::string& lecture = "L", std::size_t fragment = 0) {
  return {"u", lecture, fragment, order, std::move(topics), label};
}

constexpr Label kPos = Label::kPositive;
constexpr Label kNeg = Label::kNegative;

// Independent reference for one member of a conditioned sum.
Gaussian1D share(const Gaussian1D& member, double sign, long double prior_mean,
                 long double prior_var, const oracle::Moments& post) {
  const long double k = member.variance / prior_var;
  return {static_cast<double>(member.mean + sign * k * (post.mean - prior_mean)),
          static_cast<double>(member.variance + k * k * (post.variance - prior_var))};
}

}  // namespace

TEST(Baselines, PersistenceAndMajority) {
  std::vector<Label> h;
  EXPECT_EQ(predict_persistence(h).label, kPos);
  EXPECT_DOUBLE_EQ(predict_persistence(h, 0.3).probability, 0.3);
  h = {kPos, kNeg};
  EXPECT_EQ(predict_persistence(h).label, kNeg);
  EXPECT_DOUBLE_EQ(predict_persistence(h).probability, 0.0);

  EXPECT_EQ(predict_majority({}).label, kPos);
  h = {kPos, kNeg, kNeg};
  EXPECT_EQ(predict_majority(h).label, kNeg);
  EXPECT_NEAR(predict_majority(h).probability, 1.0 / 3.0, 1e-15);
  h = {kPos, kNeg};  // tie goes to engagement
  EXPECT_EQ(predict_majority(h).label, kPos);
}

TEST(TeamModels, PredictGreaterExample) {
  EXPECT_NEAR(predict_greater({1.0, 0.0}, {0.0, 0.0}, 1, 0.5), 0.921350396474857, 1e-12);
  EXPECT_DOUBLE_EQ(predict_greater({0.3, 1.0}, {0.3, 0.5}, 3, 0.5), 0.5);
}

TEST(TeamModels, PredictNoveltyExample) {
  EXPECT_NEAR(predict_novelty({0.0, 0.5}, {0.0, 0.0}, 1, 0.5, 1.0), 0.682689492137086, 1e-12);
  EXPECT_THROW(predict_novelty({0.0, 0.5}, {0.0, 0.0}, 1, 0.5, 0.0), DomainError);
  EXPECT_DOUBLE_EQ(
      predict_novelty({0, 1}, {0, 0}, 1, 0.5, std::numeric_limits<double>::infinity()), 1.0);
}

TEST(TeamModels, DeriveMargin) {
  MarginTracker fresh;
  EXPECT_DOUBLE_EQ(fresh.smoothed_rate(), 0.5);
  EXPECT_NEAR(derive_margin(fresh, 1, 0.5), 0.337244875098041, 1e-12);
  EXPECT_NEAR(derive_margin(fresh, 2, 0.5), std::sqrt(2.0) * 0.337244875098041, 1e-12);
  MarginTracker t;
  t.record(kPos);
  t.record(kPos);
  t.record(kNeg);
  EXPECT_EQ(t.engaged, 2u);
  EXPECT_EQ(t.total, 3u);
  EXPECT_DOUBLE_EQ(t.smoothed_rate(), 0.6);
  EXPECT_THROW(derive_margin(t, 0, 0.5), DomainError);
  EXPECT_THROW(derive_margin(t, 2, 0.0), DomainError);
}

TEST(TeamModels, MarginRoundTripsThroughPrediction) {
  // Zero mean difference and zero belief variance: probability equals P.
  for (std::size_t engaged = 0; engaged <= 6; ++engaged) {
    const MarginTracker t{engaged, 6};
    for (std::size_t k = 1; k <= 4; ++k) {
      const double m = derive_margin(t, 2 * k, 0.5);
      EXPECT_NEAR(predict_novelty({0, 0}, {0, 0}, k, 0.5, m), t.smoothed_rate(), 1e-12);
    }
  }
}

TEST(UpdateGreater, SingleTopicMatchesFrozenOracle) {
  GaussianSkillState s;
  ModelConfig cfg;
  update_greater(s, event(0, {{4, 0.0}}, kPos), cfg);
  const auto& b = s.skills.at(4).belief;
  EXPECT_NEAR(b.mean, 0.65147001587056, 1e-12);
  EXPECT_NEAR(b.variance, 0.575586818421612, 1e-12);

  GaussianSkillState neg;
  update_greater(neg, event(0, {{4, 0.0}}, kNeg), cfg);
  EXPECT_NEAR(neg.skills.at(4).belief.mean, -0.65147001587056, 1e-12);
  EXPECT_NEAR(neg.skills.at(4).belief.variance, 0.575586818421612, 1e-12);
}

TEST(UpdateGreater, MultiTopicAgainstQuadrature) {
  GaussianSkillState s;
  s.skills[1] = {{0.4, 0.8}, 0};
  ModelConfig cfg;
  const auto e = event(0, {{1, 0.7}, {2, 0.2}}, kPos);
  update_greater(s, e, cfg);
  // D = (x1 + x2) - (0.7 + 0.2), var = 0.8 + 1 + 4 * 0.25.
  const long double mu = 0.4L - 0.9L, var = 2.8L;
  const auto post = oracle::truncated(mu, var, 0, 1e9);
  const Gaussian1D e1 = share({0.4, 0.8}, 1, mu, var, post);
  const Gaussian1D e2 = share({0.0, 1.0}, 1, mu, var, post);
  EXPECT_NEAR(s.skills.at(1).belief.mean, e1.mean, 1e-10);
  EXPECT_NEAR(s.skills.at(1).belief.variance, e1.variance, 1e-10);
  EXPECT_NEAR(s.skills.at(2).belief.mean, e2.mean, 1e-10);
  EXPECT_NEAR(s.skills.at(2).belief.variance, e2.variance, 1e-10);
}

TEST(UpdateGreater, PositiveOnlySkipsNegatives) {
  GaussianSkillState s;
  ModelConfig cfg;
  cfg.use_negative = false;
  update_greater(s, event(0, {{1, 0.5}}, kNeg), cfg);
  EXPECT_TRUE(s.skills.empty());
  EXPECT_THROW(update_greater(s, event(0, {}, kPos), cfg), DataError);
}

TEST(UpdateNovelty, ThreeEventCompositionalOracle) {
  // Each step recomputed from the reference truncation and share rule.
  ModelConfig cfg;
  GaussianSkillState s;
  MarginTracker tracker;
  std::map<KcId, Gaussian1D> expect;
  const auto belief = [&](KcId kc) {
    const auto it = expect.find(kc);
    return it == expect.end() ? Gaussian1D{0.0, 1.0} : it->second;
  };
  const std::vector<EngagementEvent> events{event(0, {{1, 0.6}, {2, 0.3}}, kPos),
                                            event(1, {{2, 0.9}}, kNeg),
                                            event(2, {{1, 0.1}, {3, 0.5}}, kPos)};
  std::size_t engaged = 0, total = 0;
  for (const auto& e : events) {
    long double mu = 0, var = 0;
    for (const auto& t : e.topics) {
      mu += belief(t.kc_id).mean - t.cosine;
      var += belief(t.kc_id).variance + 2 * 0.25L;
    }
    const long double p = (engaged + 1.0L) / (total + 2.0L);
    const long double margin =
        std::sqrt(2.0L * e.topics.size()) * 0.5L * oracle::quantile((p + 1) / 2);
    oracle::Moments post{};
    if (e.label == kPos) {
      post = oracle::truncated(mu, var, -margin, margin);
    } else if (mu >= 0) {
      post = oracle::truncated(mu, var, margin, 1e9);
    } else {
      post = oracle::truncated(mu, var, -1e9, -margin);
    }
    std::map<KcId, Gaussian1D> next;
    for (const auto& t : e.topics) next[t.kc_id] = share(belief(t.kc_id), 1, mu, var, post);
    for (const auto& [kc, g] : next) expect[kc] = g;
    ++total;
    if (e.label == kPos) ++engaged;

    update_novelty(s, tracker, e, cfg);
  }
  EXPECT_EQ(tracker.engaged, 2u);
  EXPECT_EQ(tracker.total, 3u);
  ASSERT_EQ(s.skills.size(), 3u);
  for (const auto& [kc, g] : expect) {
    EXPECT_NEAR(s.skills.at(kc).belief.mean, g.mean, 1e-9) << kc;
    EXPECT_NEAR(s.skills.at(kc).belief.variance, g.variance, 1e-9) << kc;
  }
}

TEST(UpdateNovelty, Properties) {
  ModelConfig cfg;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mean(-2, 2), var(0.05, 2), cos(0, 1);
  for (int i = 0; i < 200; ++i) {
    GaussianSkillState s;
    s.skills[1] = {{mean(rng), var(rng)}, 0};
    const Gaussian1D before = s.skills[1].belief;
    const double depth = cos(rng);
    MarginTracker t{static_cast<std::size_t>(i % 5), 5};
    const Label label = i % 2 ? kPos : kNeg;
    update_novelty(s, t, event(0, {{1, depth}}, label), cfg);
    const Gaussian1D after = s.skills[1].belief;
    // Conditioning never increases the variance.
    EXPECT_LE(after.variance, before.variance);
    EXPECT_GT(after.variance, 0.0);
    // +1 pulls the skill towards the depth; -1 pushes it away.
    const double gap_before = std::fabs(before.mean - depth);
    const double gap_after = std::fabs(after.mean - depth);
    if (label == kPos) {
      EXPECT_LE(gap_after, gap_before + 1e-12);
    } else {
      EXPECT_GE(gap_after, gap_before - 1e-12);
    }
  }
}

TEST(KnowledgeTracing, Examples) {
  BernoulliSkillState s;
  EXPECT_DOUBLE_EQ(predict_kt(s, event(0, {{1, 0.5}}, kPos), 0.1), 0.5);
  update_kt(s, event(0, {{1, 0.5}}, kPos), 0.1, true);
  EXPECT_NEAR(s.skills.at(1).pi, 0.9, 1e-15);
  BernoulliSkillState n;
  update_kt(n, event(0, {{1, 0.5}}, kNeg), 0.1, true);
  EXPECT_NEAR(n.skills.at(1).pi, 0.1, 1e-15);
  BernoulliSkillState pair;
  update_kt(pair, event(0, {{1, 0.5}, {2, 0.5}}, kPos), 0.1, true);
  EXPECT_NEAR(pair.skills.at(1).pi, 0.833333333333333, 1e-14);
  EXPECT_NEAR(pair.skills.at(2).pi, 0.833333333333333, 1e-14);

  BernoulliSkillState skip;
  update_kt(skip, event(0, {{1, 0.5}}, kNeg), 0.1, false);
  EXPECT_TRUE(skip.skills.empty());
}

TEST(KnowledgeTracing, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pi(0.01, 0.99), noise(0.0, 0.45);
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(i % 8);
    BernoulliSkillState s;
    std::vector<EventTopic> topics;
    std::vector<long double> pis;
    for (std::size_t h = 0; h < k; ++h) {
      const double p = pi(rng);
      s.skills[static_cast<KcId>(h)] = {p, 0};
      pis.push_back(p);
      topics.push_back({static_cast<KcId>(h), 0.5});
    }
    const double eps = noise(rng);
    const bool positive = i % 3 != 0;
    update_kt(s, event(0, topics, positive ? kPos : kNeg), eps, true);
    const auto ref = oracle::kt_posterior(pis, eps, positive);
    for (std::size_t h = 0; h < k; ++h) {
      EXPECT_NEAR(s.skills.at(static_cast<KcId>(h)).pi, static_cast<double>(ref[h]), 1e-12);
    }
  }
}

TEST(KnowledgeTracing, EdgeCases) {
  std::vector<EventTopic> many;
  for (KcId i = 0; i < 11; ++i) many.push_back({i, 0.5});
  BernoulliSkillState s;
  EXPECT_THROW(update_kt(s, event(0, many, kPos), 0.1, true), DomainError);
  // Zero noise with a certain non-mastery: the +1 has no support and the
  // state is left as it was.
  s.skills[1] = {0.0, 0};
  update_kt(s, event(0, {{1, 0.5}}, kPos), 0.0, true);
  EXPECT_DOUBLE_EQ(s.skills.at(1).pi, 0.0);
}

TEST(Drift, Examples) {
  EXPECT_EQ(drift(Gaussian1D{1.0, 0.5}, 4, 0.1), (Gaussian1D{1.0, 0.5 + 4 * 0.01}));
  EXPECT_EQ(drift(Gaussian1D{1.0, 0.5}, 0, 0.1), (Gaussian1D{1.0, 0.5}));
  EXPECT_NEAR(drift(0.9, 3, 0.1), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(drift(0.9, 10, 0.1), 0.5);
  EXPECT_NEAR(drift(0.2, 1, 0.1), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(drift(0.5, 5, 0.1), 0.5);

  GaussianSkillState g;
  g.skills[1] = {{0, 1}, 0};
  apply_drift(g, 2, 0.5);
  EXPECT_DOUBLE_EQ(g.skills[1].belief.variance, 1.5);
  BernoulliSkillState b;
  b.skills[1] = {0.8, 0};
  apply_drift(b, 1, 0.1);
  EXPECT_NEAR(b.skills[1].pi, 0.7, 1e-15);
}

TEST(Drift, LazyPerSkillGap) {
  ModelConfig cfg;
  cfg.kind = ModelKind::kTrueLearnFixedDepth;
  cfg.tau = 0.1;
  Model m(cfg);
  LearnerState s;
  m.update(s, event(0, {{1, 0.2}}, kPos));
  const double v0 = s.gaussian.skills.at(1).belief.variance;
  m.update(s, event(1, {{2, 0.2}}, kPos));
  EXPECT_DOUBLE_EQ(s.gaussian.skills.at(1).belief.variance, v0);  // not touched
  // Skill 1 is seen again 3 orders later: its prior gains 3 * tau^2.
  GaussianSkillState ref;
  ref.skills[1] = {{s.gaussian.skills.at(1).belief.mean, v0 + 3 * 0.01}, 3};
  ModelConfig plain = cfg;
  plain.tau = 0.0;
  update_greater(ref, event(3, {{1, 0.2}}, kPos), plain);
  m.update(s, event(3, {{1, 0.2}}, kPos));
  EXPECT_NEAR(s.gaussian.skills.at(1).belief.mean, ref.skills.at(1).belief.mean, 1e-15);
  EXPECT_NEAR(s.gaussian.skills.at(1).belief.variance, ref.skills.at(1).belief.variance, 1e-15);
  EXPECT_EQ(s.gaussian.skills.at(1).last_order, 3u);
}

TEST(ModelKinds, NamesRoundTrip) {
  for (const ModelKind k : kAllModelKinds) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_model_kind("trueskill"), UsageError);
  EXPECT_TRUE(is_global(ModelKind::kTrueLearnDynamicDepth));
  EXPECT_FALSE(is_global(ModelKind::kTrueLearnNovelty));
  EXPECT_TRUE(is_baseline(ModelKind::kMajority));
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.init_variance = 0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.kt_noise = 0.5;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.kind = ModelKind::kMultiSkillKt;
  bad.top_k = 11;
  EXPECT_THROW(bad.validate(), UsageError);
  EXPECT_THROW(Model{bad}, UsageError);
  const auto v = ModelConfig::defaults_for(ModelKind::kVanillaTrueSkill);
  EXPECT_DOUBLE_EQ(v.init_mean, 25.0);
  EXPECT_DOUBLE_EQ(v.beta, 25.0 / 6.0);
}

TEST(Model, DispatchMatchesFreeFunctions) {
  const auto e = event(0, {{1, 0.6}, {2, 0.3}}, kPos);
  {
    ModelConfig cfg;
    cfg.kind = ModelKind::kTrueLearnNovelty;
    Model m(cfg);
    LearnerState s;
    const double p = m.predict(s, e).probability;
    const double margin = derive_margin({}, 4, 0.5);
    EXPECT_DOUBLE_EQ(p, predict_novelty({0, 2}, {0.9, 0}, 2, 0.5, margin));
    m.update(s, e);
    GaussianSkillState ref;
    MarginTracker t;
    update_novelty(ref, t, e, cfg);
    EXPECT_EQ(s.gaussian, ref);
    EXPECT_EQ(s.tracker, t);
  }
  {
    ModelConfig cfg;
    cfg.kind = ModelKind::kMultiSkillKt;
    Model m(cfg);
    LearnerState s;
    EXPECT_NEAR(m.predict(s, e).probability, 0.9 * 0.25 + 0.1 * 0.75, 1e-15);
    m.update(s, e);
    EXPECT_NEAR(s.bernoulli.skills.at(1).pi, 0.833333333333333, 1e-14);
  }
}

TEST(Model, VanillaSharesResourceBeliefs) {
  ModelConfig cfg = ModelConfig::defaults_for(ModelKind::kVanillaTrueSkill);
  Model m(cfg);
  LearnerState a, b;
  auto e = event(0, {{1, 0.5}}, kPos, "L1", 2);
  EXPECT_DOUBLE_EQ(m.predict(a, e).probability, 0.5);
  m.update(a, e);
  const ResourceKey key{"L1", 2, ResourceKey::kNoKc};
  ASSERT_EQ(m.resources().count(key), 1u);
  EXPECT_LT(m.resources().at(key).mean, 25.0);
  EXPECT_GT(m.predict(b, e).probability, 0.5);  // resource now looks easier

  Model video(ModelConfig::defaults_for(ModelKind::kVanillaTrueSkillVideo));
  video.update(a, e);
  EXPECT_EQ(video.resources().count({"L1", ResourceKey::kWholeLecture, ResourceKey::kNoKc}),
            1u);
}

TEST(Model, DynamicDepthLearnsPerTopicResources) {
  ModelConfig cfg;
  cfg.kind = ModelKind::kTrueLearnDynamicDepth;
  Model m(cfg);
  LearnerState s;
  m.update(s, event(0, {{1, 0.6}, {2, 0.3}}, kNeg));
  EXPECT_EQ(m.resources().size(), 2u);
  EXPECT_GT(m.resources().at({"L", 0, 1}).mean, 0.6);
}

TEST(Model, PositiveOnlyLeavesStateUntouched) {
  for (const ModelKind k : kAllModelKinds) {
    if (is_baseline(k)) continue;
    ModelConfig cfg = ModelConfig::defaults_for(k);
    cfg.use_negative = false;
    cfg.tau = 0.05;
    Model m(cfg);
    LearnerState s;
    m.update(s, event(0, {{1, 0.6}}, kPos));
    const LearnerState before = s;
    const ResourceTable res = m.resources();
    m.update(s, event(1, {{1, 0.6}, {2, 0.1}}, kNeg));
    EXPECT_EQ(s, before) << to_string(k);
    EXPECT_EQ(m.resources(), res) << to_string(k);
  }
}

TEST(Model, Deterministic) {
  std::mt19937_64 rng(3);
  std::vector<EngagementEvent> events;
  for (std::size_t i = 0; i < 200; ++i) {
    events.push_back(event(i, {{static_cast<KcId>(rng() % 7), 0.3}, {7, 0.8}},
                           rng() % 3 ? kPos : kNeg, "L" + std::to_string(rng() % 4)));
  }
  for (const ModelKind k : kAllModelKinds) {
    std::vector<double> first, second;
    for (auto* out : {&first, &second}) {
      Model m(ModelConfig::defaults_for(k));
      LearnerState s;
      for (const auto& e : events) out->push_back(m.predict_and_update(s, e).probability);
    }
    EXPECT_EQ(first, second) << to_string(k);
  }
}
