#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "truelearn/corpus.hpp"
#include "truelearn/gaussmath.hpp"

namespace truelearn {

enum class ModelKind {
  kPersistence,
  kMajority,
  kVanillaTrueSkill,
  kVanillaTrueSkillVideo,
  kMultiSkillKt,
  kTrueLearnDynamicDepth,
  kTrueLearnFixedDepth,
  kTrueLearnNovelty,
};

inline constexpr ModelKind kAllModelKinds[] = {
    ModelKind::kPersistence,           ModelKind::kMajority,
    ModelKind::kVanillaTrueSkill,      ModelKind::kVanillaTrueSkillVideo,
    ModelKind::kMultiSkillKt,          ModelKind::kTrueLearnDynamicDepth,
    ModelKind::kTrueLearnFixedDepth,   ModelKind::kTrueLearnNovelty,
};

std::string_view to_string(ModelKind kind);
// Throws UsageError listing the valid names.
ModelKind parse_model_kind(std::string_view name);
std::string valid_model_names();

// Models whose resource beliefs are shared across learners and must see
// all events as one globally ordered stream.
bool is_global(ModelKind kind);
bool is_baseline(ModelKind kind);

struct ModelConfig {
  ModelKind kind = ModelKind::kTrueLearnNovelty;
  double init_mean = 0.0;
  double init_variance = 1.0;  // sigma_0^2
  double beta = 0.5;           // performance noise standard deviation
  double tau = 0.0;            // drift per step
  bool use_negative = true;    // learn from -1 labels
  std::size_t top_k = 5;
  double kt_noise = 0.1;
  double default_engagement_rate = 0.5;

  // Throws UsageError on out-of-range values.
  void validate() const;

  // Original rating-system defaults for the vanilla variants
  // (mu 25, sigma 25/3, beta 25/6, tau 25/300); library defaults otherwise.
  static ModelConfig defaults_for(ModelKind kind);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Prediction {
  double probability = 0.5;
  Label label = Label::kPositive;
};

struct GaussianSkill {
  Gaussian1D belief;
  std::size_t last_order = 0;

  friend bool operator==(const GaussianSkill&, const GaussianSkill&) = default;
};

struct BernoulliSkill {
  double pi = 0.5;
  std::size_t last_order = 0;

  friend bool operator==(const BernoulliSkill&, const BernoulliSkill&) = default;
};

// Absent kc == prior N(init_mean, init_variance).
struct GaussianSkillState {
  std::map<KcId, GaussianSkill> skills;
  friend bool operator==(const GaussianSkillState&, const GaussianSkillState&) = default;
};

// Absent kc == Bernoulli(0.5).
struct BernoulliSkillState {
  std::map<KcId, BernoulliSkill> skills;
  friend bool operator==(const BernoulliSkillState&, const BernoulliSkillState&) = default;
};

struct MarginTracker {
  std::size_t engaged = 0;
  std::size_t total = 0;

  // Laplace-smoothed engagement rate (engaged + 1) / (total + 2).
  double smoothed_rate() const;
  void record(Label label);

  friend bool operator==(const MarginTracker&, const MarginTracker&) = default;
};

struct LearnerState {
  GaussianSkillState gaussian;
  BernoulliSkillState bernoulli;
  MarginTracker tracker;
  std::optional<Label> last_label;

  friend bool operator==(const LearnerState&, const LearnerState&) = default;
};

// Key of a shared resource belief. fragment_index == kWholeLecture for
// per-lecture beliefs; kc_id == kNoKc for beliefs not tied to a topic.
struct ResourceKey {
  static constexpr std::size_t kWholeLecture = static_cast<std::size_t>(-1);
  static constexpr KcId kNoKc = -1;

  std::string lecture_id;
  std::size_t fragment_index = kWholeLecture;
  KcId kc_id = kNoKc;

  friend auto operator<=>(const ResourceKey& a, const ResourceKey& b) {
    return std::tie(a.lecture_id, a.fragment_index, a.kc_id) <=>
           std::tie(b.lecture_id, b.fragment_index, b.kc_id);
  }
  friend bool operator==(const ResourceKey&, const ResourceKey&) = default;
};

using ResourceTable = std::map<ResourceKey, Gaussian1D>;

// Key under which the vanilla variants store the learner's single skill.
inline constexpr KcId kSingleSkillKc = -1;

// ---------------------------------------------------------------------------
// Baselines

Prediction predict_persistence(std::span<const Label> history,
                               double default_rate = 0.5);
Prediction predict_majority(std::span<const Label> history,
                            double default_rate = 0.5);

// ---------------------------------------------------------------------------
// Gaussian team models

// Sum of independent beliefs.
Gaussian1D team_sum(std::span<const Gaussian1D> members);

// P(learner performance > resource performance) with each of the
// 2 * team_size players adding N(0, beta^2) performance noise.
double predict_greater(const Gaussian1D& learner_team,
                       const Gaussian1D& resource_team, std::size_t team_size,
                       double beta);

// P(|learner performance - resource performance| <= margin).
double predict_novelty(const Gaussian1D& learner_team,
                       const Gaussian1D& resource_team, std::size_t team_size,
                       double beta, double margin);

// Inverse of the margin/probability relation:
//   margin = sqrt(players) * beta * quantile((P + 1) / 2)
// with P the tracker's smoothed engagement rate.
double derive_margin(const MarginTracker& tracker, std::size_t players,
                     double beta);

// Outcome observed on the performance difference
// D = sum(learner) - sum(resource) + noise.
enum class TeamOutcome {
  kGreater,      // D > 0
  kLess,         // D < 0
  kWithin,       // |D| <= margin
  kBeyondAbove,  // D > margin
  kBeyondBelow,  // D < -margin
};

// Conditions both teams on `outcome` and writes the moment-matched
// posteriors back into the members. Zero-variance members stay fixed.
void condition_teams(std::span<Gaussian1D> learner, std::span<Gaussian1D> resource,
                     double beta, TeamOutcome outcome, double margin = 0.0);

// One density-filtering step of the fixed-depth greater-than model: the
// learner's topic skills play against the event's cosine depths.
// A -1 label is skipped when cfg.use_negative is false.
void update_greater(GaussianSkillState& state, const EngagementEvent& event,
                    const ModelConfig& cfg);

// One novelty step: +1 conditions on |D| <= margin; -1 on D beyond the
// margin on the side of the current mean difference. Updates the tracker.
void update_novelty(GaussianSkillState& state, MarginTracker& tracker,
                    const EngagementEvent& event, const ModelConfig& cfg);

// ---------------------------------------------------------------------------
// Knowledge tracing with Bernoulli skills

inline constexpr std::size_t kMaxKtTopics = 10;

// Noisy-AND: (1 - noise) * prod(pi) + noise * (1 - prod(pi)).
double predict_kt(const BernoulliSkillState& state, const EngagementEvent& event,
                  double noise);

// Exact posterior marginals over the event's skills by enumerating all
// 2^|K| joint mastery states. Throws DomainError when |K| > kMaxKtTopics.
void update_kt(BernoulliSkillState& state, const EngagementEvent& event,
               double noise, bool use_negative, std::size_t order = 0);

// ---------------------------------------------------------------------------
// Dynamics

Gaussian1D drift(const Gaussian1D& belief, std::size_t steps, double tau);
double drift(double pi, std::size_t steps, double tau);

void apply_drift(GaussianSkillState& state, std::size_t elapsed_steps, double tau);
void apply_drift(BernoulliSkillState& state, std::size_t elapsed_steps, double tau);

// ---------------------------------------------------------------------------
// Uniform online interface

// All model kinds behind one predict/update contract. Per-learner kinds keep
// no mutable state of their own, so distinct learners may be processed
// concurrently. Global kinds own the resource table and must be driven by
// a single thread in global event order.
class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }

  Prediction predict(const LearnerState& state, const EngagementEvent& event) const;

  // Consumes the label. Positive-only Bayesian variants leave the state
  // untouched on -1 labels.
  void update(LearnerState& state, const EngagementEvent& event);

  // Prediction strictly before the label is consumed.
  Prediction predict_and_update(LearnerState& state, const EngagementEvent& event);

  const ResourceTable& resources() const { return resources_; }
  ResourceTable& resources() { return resources_; }

 private:
  struct Teams {
    std::vector<Gaussian1D> learner;
    std::vector<Gaussian1D> resource;
    std::vector<KcId> learner_keys;
    std::vector<ResourceKey> resource_keys;
  };

  Teams gather_teams(const LearnerState& state, const EngagementEvent& event) const;
  Gaussian1D learner_prior(const GaussianSkillState& s, KcId kc,
                           std::size_t order) const;
  Gaussian1D resource_prior(const ResourceKey& key, double cosine) const;

  ModelConfig cfg_;
  ResourceTable resources_;
};

// ---------------------------------------------------------------------------
// State snapshots: versioned line-delimited JSON, one learner per line,
// then one line per shared resource belief.

inline constexpr int kSnapshotVersion = 1;

struct ModelSnapshot {
  ModelKind kind = ModelKind::kTrueLearnNovelty;
  std::map<std::string, LearnerState> learners;
  ResourceTable resources;
};

void write_snapshot(std::ostream& out, const ModelSnapshot& snapshot);
// Throws DataError on unknown versions or malformed lines.
ModelSnapshot read_snapshot(std::istream& in);

}  // namespace truelearn
