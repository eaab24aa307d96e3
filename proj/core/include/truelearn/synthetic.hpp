#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "truelearn/corpus.hpp"

namespace truelearn {

// Parameters of the novelty generative model used for synthetic streams.
//
// The vocabulary is split into clusters of `kcs_per_learner` topics. Each
// resource fragment draws `topics_per_event` distinct topics from one
// cluster with cosine depths uniform in [min_depth, 1]. Each learner is
// interested in one cluster, holds a skill N(skill_mean, skill_sd^2) per
// topic in it and an engagement margin uniform in [margin_min, margin_max].
// An event is engaged iff |sum(skills) - sum(depths) + noise| <= margin,
// with noise ~ N(0, 2 * |K| * beta^2).
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t learners = 50;
  std::size_t total_events = 50 * 200;  // split as evenly as possible
  std::size_t vocabulary = 200;
  std::size_t kcs_per_learner = 25;
  std::size_t topics_per_event = 5;
  std::size_t resources_per_cluster = 60;
  double min_depth = 0.05;
  double skill_mean = 0.5;
  double skill_sd = 0.4;
  double beta = 0.5;
  double margin_min = 0.75;
  double margin_max = 3.0;
};

struct SyntheticData {
  // Round-robin global order; orders gap-free per learner.
  std::vector<EngagementEvent> events;
  std::map<std::string, std::map<KcId, double>> skills;
  std::map<std::string, double> margins;
};

// Deterministic for a given spec. Throws DomainError on inconsistent sizes.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace truelearn
