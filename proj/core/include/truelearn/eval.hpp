#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "truelearn/corpus.hpp"
#include "truelearn/models.hpp"

namespace truelearn {

// Positive class = engaged.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  void add(Label predicted, Label actual);
  ConfusionCounts& operator+=(const ConfusionCounts& o);

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  // Throws UsageError for names other than accuracy/precision/recall/f1.
  double get(std::string_view name) const;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// Standard definitions; zero denominators give 0. Throws DataError when
// the counts are empty.
Metrics compute_metrics(const ConfusionCounts& c);

struct LearnerResult {
  std::string learner_id;
  std::size_t events = 0;
  std::size_t evaluated = 0;  // events after the learner's first
  std::size_t unique_kcs = 0;
  ConfusionCounts counts;
  Metrics metrics;  // all zero when nothing was evaluated
  double weight = 0.0;

  friend bool operator==(const LearnerResult&, const LearnerResult&) = default;
};

struct SplitInfo {
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  std::vector<std::string> train_learners;
  std::vector<std::string> test_learners;

  friend bool operator==(const SplitInfo&, const SplitInfo&) = default;
};

inline constexpr int kReportSchemaVersion = 1;

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  ModelConfig config;
  DatasetSummary dataset;
  std::optional<SplitInfo> split;
  std::vector<LearnerResult> learners;  // sorted by learner_id
  ConfusionCounts totals;
  Metrics weighted;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Activity-weighted mean of per-learner metrics; weight = evaluated events
// over all evaluated events. Fills each result's `weight`.
Metrics weighted_metrics(std::vector<LearnerResult>& learners);

struct EvalOptions {
  std::size_t jobs = 1;
  // When set, receive the final per-learner states and shared resources.
  std::map<std::string, LearnerState>* final_states = nullptr;
  ResourceTable* final_resources = nullptr;
};

// Sequential protocol: each event is predicted from the learner's earlier
// events, then its label updates the state. The first event of every
// learner is predicted but not counted. Per-learner models run learners in
// parallel; global models make one pass in stream order.
// Throws DataError on ordering violations, with event context on model errors.
EvalReport evaluate_sequential(const ModelConfig& cfg,
                               const std::vector<EngagementEvent>& events,
                               const EvalOptions& options = {});

struct LearnerSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Deterministic shuffle of the sorted ids; floor(fraction * n) train
// learners, clamped so both sides are non-empty.
LearnerSplit split_learners(std::vector<std::string> learner_ids,
                            double train_fraction, std::uint64_t seed);

std::vector<EngagementEvent> filter_learners(const std::vector<EngagementEvent>& events,
                                             const std::vector<std::string>& learners);

// Values per hyperparameter; an empty dimension keeps the base value.
struct GridSpec {
  std::vector<double> init_variance;
  std::vector<double> kt_noise;
  std::vector<double> tau;
  std::vector<double> beta;

  std::size_t size() const;
  bool empty() const;
  std::vector<ModelConfig> expand(const ModelConfig& base) const;

  // Ranges used when tuning the reformulated models: sigma_0^2 in
  // [0.1, 2] step 0.1, KT noise in [0, 0.3] step 0.05, tau in
  // {0, 0.01, 0.05, 0.1}; beta fixed.
  static GridSpec defaults_for(ModelKind kind);
};

struct SweepRow {
  ModelConfig config;
  std::optional<Metrics> metrics;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best_index = 0;
  const SweepRow& best() const { return rows.at(best_index); }
};

// Evaluates every grid point on `train_events` and selects the best by
// `objective`; ties prefer smaller sigma_0^2, then noise, then tau, then
// beta. Failing points are recorded and skipped. Throws DataError when no
// point succeeds, UsageError on an empty grid.
SweepResult grid_search(const ModelConfig& base, const GridSpec& grid,
                        const std::vector<EngagementEvent>& train_events,
                        std::string_view objective = "f1", std::size_t jobs = 1);

std::string sweep_to_csv(const SweepResult& sweep);

// Report serialization.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_table(const EvalReport& report);

// Model comparison with one row per report: model, negative-evidence flag,
// accuracy, precision, recall, F1.
std::string comparison_table(std::span<const EvalReport> reports);

// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

}  // namespace truelearn
