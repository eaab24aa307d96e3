#include "truelearn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "truelearn/error.hpp"

namespace truelearn {

namespace {

struct Resource {
  std::string lecture_id;
  std::size_t fragment_index;
  std::vector<EventTopic> topics;
};

std::string padded(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& s) {
  if (s.learners == 0 || s.total_events < s.learners) {
    throw DomainError("synthetic stream needs at least one event per learner");
  }
  if (s.kcs_per_learner == 0 || s.vocabulary < s.kcs_per_learner ||
      s.topics_per_event == 0 || s.topics_per_event > s.kcs_per_learner) {
    throw DomainError("inconsistent synthetic vocabulary sizes");
  }
  if (!(s.beta > 0.0) || !(s.margin_min > 0.0) || s.margin_max < s.margin_min ||
      s.skill_sd < 0.0 || s.min_depth < 0.0 || s.min_depth > 1.0 ||
      s.resources_per_cluster == 0) {
    throw DomainError("invalid synthetic model parameters");
  }

  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t clusters = s.vocabulary / s.kcs_per_learner;
  const auto cluster_kcs = [&](std::size_t c) {
    std::vector<KcId> kcs(s.kcs_per_learner);
    std::iota(kcs.begin(), kcs.end(), static_cast<KcId>(c * s.kcs_per_learner));
    return kcs;
  };

  // Resource pool; a lecture holds up to 4 fragments of one cluster.
  std::vector<std::vector<Resource>> pool(clusters);
  std::size_t lecture = 0;
  for (std::size_t c = 0; c < clusters; ++c) {
    auto kcs = cluster_kcs(c);
    for (std::size_t r = 0; r < s.resources_per_cluster; ++r) {
      if (r % 4 == 0) ++lecture;
      std::shuffle(kcs.begin(), kcs.end(), rng);
      Resource res{padded("L", lecture, 5), r % 4, {}};
      for (std::size_t t = 0; t < s.topics_per_event; ++t) {
        res.topics.push_back({kcs[t], s.min_depth + (1.0 - s.min_depth) * unit(rng)});
      }
      std::sort(res.topics.begin(), res.topics.end(),
                [](const EventTopic& a, const EventTopic& b) { return a.kc_id < b.kc_id; });
      pool[c].push_back(std::move(res));
    }
  }

  SyntheticData data;
  const int width = static_cast<int>(std::to_string(s.learners).size());
  std::vector<std::string> ids(s.learners);
  std::vector<std::size_t> cluster_of(s.learners);
  std::vector<std::size_t> n_events(s.learners, s.total_events / s.learners);
  for (std::size_t i = 0; i < s.total_events % s.learners; ++i) ++n_events[i];

  for (std::size_t l = 0; l < s.learners; ++l) {
    ids[l] = padded("u", l, width);
    cluster_of[l] = static_cast<std::size_t>(rng() % clusters);
    auto& skills = data.skills[ids[l]];
    for (KcId kc : cluster_kcs(cluster_of[l])) {
      skills[kc] = s.skill_mean + s.skill_sd * normal(rng);
    }
    data.margins[ids[l]] = s.margin_min + (s.margin_max - s.margin_min) * unit(rng);
  }

  const double noise_sd = s.beta * std::sqrt(2.0 * static_cast<double>(s.topics_per_event));
  const std::size_t max_events = *std::max_element(n_events.begin(), n_events.end());
  data.events.reserve(s.total_events);
  for (std::size_t step = 0; step < max_events; ++step) {
    for (std::size_t l = 0; l < s.learners; ++l) {
      if (step >= n_events[l]) continue;
      const auto& options = pool[cluster_of[l]];
      const Resource& res = options[static_cast<std::size_t>(rng() % options.size())];
      const auto& skills = data.skills[ids[l]];
      double diff = noise_sd * normal(rng);
      for (const auto& t : res.topics) diff += skills.at(t.kc_id) - t.cosine;

      EngagementEvent e;
      e.learner_id = ids[l];
      e.lecture_id = res.lecture_id;
      e.fragment_index = res.fragment_index;
      e.order = step;
      e.topics = res.topics;
      e.label = std::abs(diff) <= data.margins[ids[l]] ? Label::kPositive : Label::kNegative;
      data.events.push_back(std::move(e));
    }
  }
  return data;
}

}  // namespace truelearn
