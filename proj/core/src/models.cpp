#include "truelearn/models.hpp"

#include <algorithm>
#include <cmath>

#include "truelearn/error.hpp"

namespace truelearn {

namespace {

struct KindName {
  ModelKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ModelKind::kPersistence, "persistence"},
    {ModelKind::kMajority, "majority"},
    {ModelKind::kVanillaTrueSkill, "vanilla-trueskill"},
    {ModelKind::kVanillaTrueSkillVideo, "vanilla-trueskill-video"},
    {ModelKind::kMultiSkillKt, "multi-skill-kt"},
    {ModelKind::kTrueLearnDynamicDepth, "truelearn-dynamic-depth"},
    {ModelKind::kTrueLearnFixedDepth, "truelearn-fixed-depth"},
    {ModelKind::kTrueLearnNovelty, "truelearn-novelty"},
};

Prediction threshold(double probability) {
  return {probability, probability >= 0.5 ? Label::kPositive : Label::kNegative};
}

std::string event_context(const EngagementEvent& e) {
  return "learner " + e.learner_id + ", order " + std::to_string(e.order) +
         ", lecture " + e.lecture_id + "#" + std::to_string(e.fragment_index);
}

void require_topics(const EngagementEvent& event) {
  if (event.topics.empty()) {
    throw DataError("event without topics (" + event_context(event) + ")");
  }
}

Gaussian1D learner_belief(const GaussianSkillState& state, KcId kc,
                          std::size_t order, const ModelConfig& cfg) {
  const auto it = state.skills.find(kc);
  if (it == state.skills.end()) return {cfg.init_mean, cfg.init_variance};
  const std::size_t steps = order > it->second.last_order ? order - it->second.last_order : 0;
  return drift(it->second.belief, steps, cfg.tau);
}

double learner_pi(const BernoulliSkillState& state, KcId kc, std::size_t order,
                  double tau) {
  const auto it = state.skills.find(kc);
  if (it == state.skills.end()) return 0.5;
  const std::size_t steps = order > it->second.last_order ? order - it->second.last_order : 0;
  return drift(it->second.pi, steps, tau);
}

// Posterior marginals of the noisy-AND model by joint enumeration.
// Returns false when the observed label has zero probability.
bool kt_posterior(std::span<const double> pis, double noise, Label label,
                  std::vector<double>& out) {
  const std::size_t n = pis.size();
  const std::size_t full = (std::size_t{1} << n) - 1;
  const double like_all = label == Label::kPositive ? 1.0 - noise : noise;
  const double like_not_all = label == Label::kPositive ? noise : 1.0 - noise;
  std::vector<double> marginal(n, 0.0);
  double evidence = 0.0;
  for (std::size_t mask = 0; mask <= full; ++mask) {
    double p = 1.0;
    for (std::size_t h = 0; h < n; ++h) {
      p *= (mask >> h & 1U) ? pis[h] : 1.0 - pis[h];
    }
    p *= (mask == full) ? like_all : like_not_all;
    evidence += p;
    for (std::size_t h = 0; h < n; ++h) {
      if (mask >> h & 1U) marginal[h] += p;
    }
  }
  if (!(evidence > 0.0)) return false;
  out.resize(n);
  for (std::size_t h = 0; h < n; ++h) out[h] = marginal[h] / evidence;
  return true;
}

Gaussian1D condition_difference(const Gaussian1D& diff, TeamOutcome outcome,
                                double margin) {
  switch (outcome) {
    case TeamOutcome::kGreater:
      return truncate_above(diff, 0.0);
    case TeamOutcome::kLess: {
      const auto post = truncate_above({-diff.mean, diff.variance}, 0.0);
      return {-post.mean, post.variance};
    }
    case TeamOutcome::kWithin:
      return truncate_within(diff, margin);
    case TeamOutcome::kBeyondAbove: {
      const auto post = truncate_above({diff.mean - margin, diff.variance}, 0.0);
      return {post.mean + margin, post.variance};
    }
    case TeamOutcome::kBeyondBelow: {
      const auto post = truncate_above({-diff.mean - margin, diff.variance}, 0.0);
      return {-(post.mean + margin), post.variance};
    }
  }
  throw DomainError("unknown outcome");
}

std::vector<Gaussian1D> cosine_depths(const EngagementEvent& event) {
  std::vector<Gaussian1D> depths;
  depths.reserve(event.topics.size());
  for (const auto& t : event.topics) depths.push_back({t.cosine, 0.0});
  return depths;
}

std::vector<Gaussian1D> learner_team(const GaussianSkillState& state,
                                     const EngagementEvent& event,
                                     const ModelConfig& cfg) {
  std::vector<Gaussian1D> team;
  team.reserve(event.topics.size());
  for (const auto& t : event.topics) {
    team.push_back(learner_belief(state, t.kc_id, event.order, cfg));
  }
  return team;
}

void store_learner_team(GaussianSkillState& state, const EngagementEvent& event,
                        const std::vector<Gaussian1D>& team) {
  for (std::size_t i = 0; i < team.size(); ++i) {
    state.skills[event.topics[i].kc_id] = {team[i], event.order};
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "unknown";
}

std::string valid_model_names() {
  std::string names;
  for (const auto& kn : kKindNames) {
    if (!names.empty()) names += ", ";
    names += kn.name;
  }
  return names;
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& kn : kKindNames) {
    if (kn.name == name) return kn.kind;
  }
  throw UsageError("unknown model '" + std::string(name) +
                   "'; valid kinds: " + valid_model_names());
}

bool is_global(ModelKind kind) {
  return kind == ModelKind::kVanillaTrueSkill ||
         kind == ModelKind::kVanillaTrueSkillVideo ||
         kind == ModelKind::kTrueLearnDynamicDepth;
}

bool is_baseline(ModelKind kind) {
  return kind == ModelKind::kPersistence || kind == ModelKind::kMajority;
}

void ModelConfig::validate() const {
  if (!(init_variance > 0.0) || !std::isfinite(init_variance)) {
    throw UsageError("initial variance must be positive");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("beta must be positive");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw UsageError("tau must be nonnegative");
  if (!(kt_noise >= 0.0 && kt_noise < 0.5)) {
    throw UsageError("KT noise must lie in [0, 0.5)");
  }
  if (top_k == 0) throw UsageError("top-k must be at least 1");
  if (kind == ModelKind::kMultiSkillKt && top_k > kMaxKtTopics) {
    throw UsageError("multi-skill-kt supports at most " +
                     std::to_string(kMaxKtTopics) + " topics per event");
  }
  if (!(default_engagement_rate >= 0.0 && default_engagement_rate <= 1.0)) {
    throw UsageError("default engagement rate must lie in [0, 1]");
  }
  if (!std::isfinite(init_mean)) throw UsageError("initial mean must be finite");
}

ModelConfig ModelConfig::defaults_for(ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  if (kind == ModelKind::kVanillaTrueSkill ||
      kind == ModelKind::kVanillaTrueSkillVideo) {
    constexpr double mu = 25.0;
    cfg.init_mean = mu;
    cfg.init_variance = (mu / 3.0) * (mu / 3.0);
    cfg.beta = mu / 6.0;
    cfg.tau = mu / 300.0;
  }
  return cfg;
}

double MarginTracker::smoothed_rate() const {
  return (static_cast<double>(engaged) + 1.0) / (static_cast<double>(total) + 2.0);
}

void MarginTracker::record(Label label) {
  ++total;
  if (label == Label::kPositive) ++engaged;
}

// ---------------------------------------------------------------------------

Prediction predict_persistence(std::span<const Label> history, double default_rate) {
  if (history.empty()) return {default_rate, Label::kPositive};
  const Label last = history.back();
  return {last == Label::kPositive ? 1.0 : 0.0, last};
}

Prediction predict_majority(std::span<const Label> history, double default_rate) {
  if (history.empty()) return threshold(default_rate);
  const auto engaged = std::count(history.begin(), history.end(), Label::kPositive);
  return threshold(static_cast<double>(engaged) / static_cast<double>(history.size()));
}

Gaussian1D team_sum(std::span<const Gaussian1D> members) {
  Gaussian1D sum{0.0, 0.0};
  for (const auto& m : members) {
    sum.mean += m.mean;
    sum.variance += m.variance;
  }
  return sum;
}

double predict_greater(const Gaussian1D& learner_team, const Gaussian1D& resource_team,
                       std::size_t team_size, double beta) {
  const double c = std::sqrt(learner_team.variance + resource_team.variance +
                             2.0 * static_cast<double>(team_size) * beta * beta);
  return std_cdf((learner_team.mean - resource_team.mean) / c);
}

double predict_novelty(const Gaussian1D& learner_team, const Gaussian1D& resource_team,
                       std::size_t team_size, double beta, double margin) {
  if (!(margin > 0.0)) throw DomainError("engagement margin must be positive");
  const double c = std::sqrt(learner_team.variance + resource_team.variance +
                             2.0 * static_cast<double>(team_size) * beta * beta);
  const double diff = learner_team.mean - resource_team.mean;
  if (std::isinf(margin)) return 1.0;
  return std_cdf_interval((-margin - diff) / c, (margin - diff) / c);
}

double derive_margin(const MarginTracker& tracker, std::size_t players, double beta) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (players == 0) throw DomainError("margin needs at least one player");
  const double rate = tracker.smoothed_rate();
  return std::sqrt(static_cast<double>(players)) * beta *
         std_quantile(0.5 * (rate + 1.0));
}

void condition_teams(std::span<Gaussian1D> learner, std::span<Gaussian1D> resource,
                     double beta, TeamOutcome outcome, double margin) {
  const Gaussian1D l = team_sum(learner);
  const Gaussian1D r = team_sum(resource);
  const double players = static_cast<double>(learner.size() + resource.size());
  const Gaussian1D diff{l.mean - r.mean, l.variance + r.variance + players * beta * beta};
  const Gaussian1D post = condition_difference(diff, outcome, margin);
  for (auto& m : learner) m = distribute_correction(m, diff, post, 1.0);
  for (auto& m : resource) m = distribute_correction(m, diff, post, -1.0);
}

void update_greater(GaussianSkillState& state, const EngagementEvent& event,
                    const ModelConfig& cfg) {
  require_topics(event);
  if (event.label == Label::kNegative && !cfg.use_negative) return;
  auto team = learner_team(state, event, cfg);
  auto depths = cosine_depths(event);
  const auto outcome =
      event.label == Label::kPositive ? TeamOutcome::kGreater : TeamOutcome::kLess;
  try {
    condition_teams(team, depths, cfg.beta, outcome);
  } catch (const DegenerateEvidence& e) {
    throw DegenerateEvidence(std::string(e.what()) + " (" + event_context(event) + ")");
  }
  store_learner_team(state, event, team);
}

void update_novelty(GaussianSkillState& state, MarginTracker& tracker,
                    const EngagementEvent& event, const ModelConfig& cfg) {
  require_topics(event);
  if (event.label == Label::kNegative && !cfg.use_negative) return;
  auto team = learner_team(state, event, cfg);
  auto depths = cosine_depths(event);
  const double margin = derive_margin(tracker, 2 * team.size(), cfg.beta);
  TeamOutcome outcome = TeamOutcome::kWithin;
  if (event.label == Label::kNegative) {
    const double diff = team_sum(team).mean - team_sum(depths).mean;
    outcome = diff >= 0.0 ? TeamOutcome::kBeyondAbove : TeamOutcome::kBeyondBelow;
  }
  try {
    condition_teams(team, depths, cfg.beta, outcome, margin);
  } catch (const DegenerateEvidence& e) {
    throw DegenerateEvidence(std::string(e.what()) + " (" + event_context(event) + ")");
  }
  store_learner_team(state, event, team);
  tracker.record(event.label);
}

double predict_kt(const BernoulliSkillState& state, const EngagementEvent& event,
                  double noise) {
  require_topics(event);
  double all = 1.0;
  for (const auto& t : event.topics) {
    const auto it = state.skills.find(t.kc_id);
    all *= it == state.skills.end() ? 0.5 : it->second.pi;
  }
  return (1.0 - noise) * all + noise * (1.0 - all);
}

void update_kt(BernoulliSkillState& state, const EngagementEvent& event, double noise,
               bool use_negative, std::size_t order) {
  require_topics(event);
  if (event.topics.size() > kMaxKtTopics) {
    throw DomainError("KT enumeration supports at most " +
                      std::to_string(kMaxKtTopics) + " topics, event has " +
                      std::to_string(event.topics.size()));
  }
  if (event.label == Label::kNegative && !use_negative) return;
  std::vector<double> pis;
  pis.reserve(event.topics.size());
  for (const auto& t : event.topics) {
    const auto it = state.skills.find(t.kc_id);
    pis.push_back(it == state.skills.end() ? 0.5 : it->second.pi);
  }
  std::vector<double> post;
  if (!kt_posterior(pis, noise, event.label, post)) return;
  for (std::size_t i = 0; i < post.size(); ++i) {
    state.skills[event.topics[i].kc_id] = {post[i], order};
  }
}

Gaussian1D drift(const Gaussian1D& belief, std::size_t steps, double tau) {
  return {belief.mean, belief.variance + static_cast<double>(steps) * tau * tau};
}

double drift(double pi, std::size_t steps, double tau) {
  const double step = static_cast<double>(steps) * tau;
  if (pi > 0.5) return std::max(0.5, pi - step);
  if (pi < 0.5) return std::min(0.5, pi + step);
  return pi;
}

void apply_drift(GaussianSkillState& state, std::size_t elapsed_steps, double tau) {
  for (auto& [kc, skill] : state.skills) {
    skill.belief = drift(skill.belief, elapsed_steps, tau);
  }
}

void apply_drift(BernoulliSkillState& state, std::size_t elapsed_steps, double tau) {
  for (auto& [kc, skill] : state.skills) skill.pi = drift(skill.pi, elapsed_steps, tau);
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Gaussian1D Model::learner_prior(const GaussianSkillState& s, KcId kc,
                                std::size_t order) const {
  return learner_belief(s, kc, order, cfg_);
}

Gaussian1D Model::resource_prior(const ResourceKey& key, double cosine) const {
  const bool vanilla = cfg_.kind == ModelKind::kVanillaTrueSkill ||
                       cfg_.kind == ModelKind::kVanillaTrueSkillVideo;
  const auto it = resources_.find(key);
  if (it != resources_.end()) {
    return vanilla ? drift(it->second, 1, cfg_.tau) : it->second;
  }
  if (vanilla) return {cfg_.init_mean, cfg_.init_variance};
  return {cosine, cfg_.init_variance};
}

Model::Teams Model::gather_teams(const LearnerState& state,
                                 const EngagementEvent& event) const {
  Teams teams;
  switch (cfg_.kind) {
    case ModelKind::kVanillaTrueSkill:
    case ModelKind::kVanillaTrueSkillVideo: {
      ResourceKey key{event.lecture_id,
                      cfg_.kind == ModelKind::kVanillaTrueSkill
                          ? event.fragment_index
                          : ResourceKey::kWholeLecture,
                      ResourceKey::kNoKc};
      teams.learner_keys.push_back(kSingleSkillKc);
      teams.learner.push_back(learner_prior(state.gaussian, kSingleSkillKc, event.order));
      teams.resource.push_back(resource_prior(key, 0.0));
      teams.resource_keys.push_back(std::move(key));
      break;
    }
    case ModelKind::kTrueLearnDynamicDepth:
      require_topics(event);
      for (const auto& t : event.topics) {
        teams.learner_keys.push_back(t.kc_id);
        teams.learner.push_back(learner_prior(state.gaussian, t.kc_id, event.order));
        ResourceKey key{event.lecture_id, event.fragment_index, t.kc_id};
        teams.resource.push_back(resource_prior(key, t.cosine));
        teams.resource_keys.push_back(std::move(key));
      }
      break;
    case ModelKind::kTrueLearnFixedDepth:
    case ModelKind::kTrueLearnNovelty:
      require_topics(event);
      for (const auto& t : event.topics) {
        teams.learner_keys.push_back(t.kc_id);
        teams.learner.push_back(learner_prior(state.gaussian, t.kc_id, event.order));
        teams.resource.push_back({t.cosine, 0.0});
      }
      break;
    default:
      break;
  }
  return teams;
}

Prediction Model::predict(const LearnerState& state, const EngagementEvent& event) const {
  switch (cfg_.kind) {
    case ModelKind::kPersistence:
      if (!state.last_label) return {cfg_.default_engagement_rate, Label::kPositive};
      return {*state.last_label == Label::kPositive ? 1.0 : 0.0, *state.last_label};
    case ModelKind::kMajority:
      if (state.tracker.total == 0) return threshold(cfg_.default_engagement_rate);
      return threshold(static_cast<double>(state.tracker.engaged) /
                       static_cast<double>(state.tracker.total));
    case ModelKind::kMultiSkillKt: {
      require_topics(event);
      double all = 1.0;
      for (const auto& t : event.topics) {
        all *= learner_pi(state.bernoulli, t.kc_id, event.order, cfg_.tau);
      }
      return threshold((1.0 - cfg_.kt_noise) * all + cfg_.kt_noise * (1.0 - all));
    }
    case ModelKind::kTrueLearnNovelty: {
      const Teams teams = gather_teams(state, event);
      const std::size_t k = teams.learner.size();
      const double margin = derive_margin(state.tracker, 2 * k, cfg_.beta);
      return threshold(predict_novelty(team_sum(teams.learner), team_sum(teams.resource),
                                       k, cfg_.beta, margin));
    }
    default: {
      const Teams teams = gather_teams(state, event);
      return threshold(predict_greater(team_sum(teams.learner), team_sum(teams.resource),
                                       teams.learner.size(), cfg_.beta));
    }
  }
}

void Model::update(LearnerState& state, const EngagementEvent& event) {
  const ModelKind kind = cfg_.kind;
  if (!is_baseline(kind) && event.label == Label::kNegative && !cfg_.use_negative) {
    return;
  }
  switch (kind) {
    case ModelKind::kPersistence:
    case ModelKind::kMajority:
      break;
    case ModelKind::kMultiSkillKt: {
      // Commit the drifted priors, then condition.
      require_topics(event);
      for (const auto& t : event.topics) {
        const double pi = learner_pi(state.bernoulli, t.kc_id, event.order, cfg_.tau);
        state.bernoulli.skills[t.kc_id] = {pi, event.order};
      }
      update_kt(state.bernoulli, event, cfg_.kt_noise, cfg_.use_negative, event.order);
      break;
    }
    case ModelKind::kTrueLearnFixedDepth:
      update_greater(state.gaussian, event, cfg_);
      break;
    case ModelKind::kTrueLearnNovelty:
      update_novelty(state.gaussian, state.tracker, event, cfg_);
      state.last_label = event.label;
      return;
    default: {
      Teams teams = gather_teams(state, event);
      const auto outcome = event.label == Label::kPositive ? TeamOutcome::kGreater
                                                           : TeamOutcome::kLess;
      try {
        condition_teams(teams.learner, teams.resource, cfg_.beta, outcome);
      } catch (const DegenerateEvidence& e) {
        throw DegenerateEvidence(std::string(e.what()) + " (" + event_context(event) + ")");
      }
      for (std::size_t i = 0; i < teams.learner.size(); ++i) {
        state.gaussian.skills[teams.learner_keys[i]] = {teams.learner[i], event.order};
      }
      for (std::size_t i = 0; i < teams.resource.size(); ++i) {
        resources_[teams.resource_keys[i]] = teams.resource[i];
      }
      break;
    }
  }
  state.tracker.record(event.label);
  state.last_label = event.label;
}

Prediction Model::predict_and_update(LearnerState& state, const EngagementEvent& event) {
  const Prediction p = predict(state, event);
  update(state, event);
  return p;
}

}  // namespace truelearn
