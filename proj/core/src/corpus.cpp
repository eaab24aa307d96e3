#include "truelearn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "truelearn/error.hpp"

namespace truelearn {

using nlohmann::json;

Label label_from_int(int value) {
  if (value == 1) return Label::kPositive;
  if (value == -1) return Label::kNegative;
  throw DataError("label must be +1 or -1, got " + std::to_string(value));
}

Label label_engagement(double watch_ratio) {
  if (!std::isfinite(watch_ratio) || watch_ratio < 0.0 || watch_ratio > 1.0) {
    throw DomainError("watch ratio must lie in [0, 1]");
  }
  return watch_ratio >= kEngagedWatchRatio ? Label::kPositive : Label::kNegative;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

std::vector<Interval> union_intervals(std::vector<Interval> xs) {
  std::sort(xs.begin(), xs.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& x : xs) {
    if (!out.empty() && x.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, x.hi);
    } else {
      out.push_back(x);
    }
  }
  return out;
}

double covered(const std::vector<Interval>& merged, double lo, double hi) {
  double total = 0.0;
  for (const auto& x : merged) {
    total += std::max(0.0, std::min(hi, x.hi) - std::max(lo, x.lo));
  }
  return total;
}

struct PendingEvent {
  std::int64_t timestamp;
  EngagementEvent event;
};

}  // namespace

EventDataset build_events(const std::vector<ViewLogRecord>& logs,
                          const AnnotationSet& annotations, std::size_t k) {
  if (k == 0) throw DomainError("k must be at least 1");

  // Viewing key -> indices of its log records.
  using ViewKey = std::tuple<std::string, std::string, std::int64_t>;
  std::map<ViewKey, std::vector<std::size_t>> views;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& r = logs[i];
    if (!(r.start_seconds >= 0.0) || !(r.end_seconds >= r.start_seconds) ||
        !std::isfinite(r.end_seconds)) {
      throw DataError("invalid play interval for learner " + r.learner_id +
                      " on lecture " + r.lecture_id);
    }
    auto& bucket = views[{r.learner_id, r.lecture_id, r.timestamp}];
    for (std::size_t j : bucket) {
      if (logs[j] == r) {
        throw DataError("duplicate log record: learner " + r.learner_id +
                        ", lecture " + r.lecture_id + ", timestamp " +
                        std::to_string(r.timestamp));
      }
    }
    bucket.push_back(i);
  }

  std::vector<PendingEvent> pending;
  std::size_t skipped = 0;
  for (const auto& [key, members] : views) {
    const auto& [learner, lecture, timestamp] = key;
    const auto lec = annotations.find(lecture);
    if (lec == annotations.end()) {
      throw DataError("missing annotation for lecture " + lecture);
    }
    const LectureAnnotations& la = lec->second;
    std::vector<Interval> chars;
    for (std::size_t i : members) {
      const double lo = logs[i].start_seconds * la.chars_per_second;
      const double hi = std::min(logs[i].end_seconds * la.chars_per_second,
                                 static_cast<double>(la.total_chars));
      if (hi > lo) chars.push_back({lo, hi});
    }
    const auto merged = union_intervals(std::move(chars));
    if (merged.empty()) continue;

    const std::size_t target = std::max<std::size_t>(1, la.fragment_chars);
    const auto first = static_cast<std::size_t>(merged.front().lo) / target;
    const auto last_pos = std::max(merged.back().hi - 1e-9, merged.front().lo);
    const auto last = static_cast<std::size_t>(last_pos) / target;
    for (std::size_t f = first; f <= last; ++f) {
      const auto frag = la.fragments.find(f);
      if (frag == la.fragments.end()) {
        throw DataError("missing annotation for lecture " + lecture +
                        " fragment " + std::to_string(f));
      }
      const FragmentAnnotation& fa = frag->second;
      const double lo = static_cast<double>(fa.span.start);
      const double hi = static_cast<double>(fa.span.end);
      const double cov = covered(merged, lo, hi);
      if (cov <= 0.0) continue;
      const double ratio = std::min(1.0, cov / (hi - lo));

      EngagementEvent e;
      e.learner_id = learner;
      e.lecture_id = lecture;
      e.fragment_index = f;
      e.label = label_engagement(ratio);
      std::unordered_set<KcId> seen;
      const std::size_t take = std::min(k, fa.topics.size());
      for (std::size_t t = 0; t < take; ++t) {
        const auto& ts = fa.topics[t];
        if (seen.insert(ts.kc.kc_id).second) {
          e.topics.push_back({ts.kc.kc_id, ts.cosine});
        }
      }
      if (e.topics.empty()) {
        ++skipped;
        continue;
      }
      pending.push_back({timestamp, std::move(e)});
    }
  }

  std::sort(pending.begin(), pending.end(),
            [](const PendingEvent& a, const PendingEvent& b) {
              return std::tie(a.timestamp, a.event.learner_id, a.event.lecture_id,
                              a.event.fragment_index) <
                     std::tie(b.timestamp, b.event.learner_id, b.event.lecture_id,
                              b.event.fragment_index);
            });

  EventDataset out;
  std::unordered_map<std::string, std::size_t> next_order;
  out.events.reserve(pending.size());
  for (auto& p : pending) {
    p.event.order = next_order[p.event.learner_id]++;
    out.events.push_back(std::move(p.event));
  }
  out.summary = summarize(out.events);
  out.summary.view_log_entries = logs.size();
  out.summary.skipped_without_topics = skipped;
  return out;
}

DatasetSummary summarize(const std::vector<EngagementEvent>& events) {
  DatasetSummary s;
  std::unordered_set<std::string> learners;
  std::unordered_set<std::string> lectures;
  std::unordered_set<KcId> kcs;
  for (const auto& e : events) {
    learners.insert(e.learner_id);
    lectures.insert(e.lecture_id);
    for (const auto& t : e.topics) kcs.insert(t.kc_id);
    if (e.label == Label::kPositive) ++s.positive_events;
  }
  s.events = events.size();
  s.learners = learners.size();
  s.lectures = lectures.size();
  s.unique_kcs = kcs.size();
  return s;
}

std::vector<EngagementEvent> select_cohort(const std::vector<EngagementEvent>& events,
                                           std::size_t top_n) {
  if (top_n == 0) throw DomainError("cohort size must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& e : events) ++counts[e.learner_id];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  std::unordered_set<std::string> keep;
  for (const auto& [id, n] : ranked) keep.insert(id);
  std::vector<EngagementEvent> out;
  for (const auto& e : events) {
    if (keep.count(e.learner_id)) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

json event_to_json(const EngagementEvent& e) {
  json topics = json::array();
  for (const auto& t : e.topics) {
    topics.push_back({{"kc_id", t.kc_id}, {"cosine", t.cosine}});
  }
  return {{"learner_id", e.learner_id},     {"lecture_id", e.lecture_id},
          {"fragment_index", e.fragment_index}, {"order", e.order},
          {"topics", std::move(topics)},     {"label", to_int(e.label)}};
}

EngagementEvent event_from_json(const json& j) {
  EngagementEvent e;
  e.learner_id = j.at("learner_id").get<std::string>();
  e.lecture_id = j.at("lecture_id").get<std::string>();
  e.fragment_index = j.at("fragment_index").get<std::size_t>();
  e.order = j.at("order").get<std::size_t>();
  for (const auto& t : j.at("topics")) {
    e.topics.push_back({t.at("kc_id").get<KcId>(), t.at("cosine").get<double>()});
  }
  e.label = label_from_int(j.at("label").get<int>());
  return e;
}

}  // namespace

std::vector<ViewLogRecord> read_view_logs(std::istream& in) {
  std::vector<ViewLogRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("learner_id", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) {
      throw DataError("view log line " + std::to_string(line_no) +
                      ": expected 5 fields, got " + std::to_string(f.size()));
    }
    try {
      out.push_back({f[0], f[1], std::stoll(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::logic_error&) {
      throw DataError("view log line " + std::to_string(line_no) +
                      ": non-numeric timestamp or interval");
    }
  }
  return out;
}

void write_event(std::ostream& out, const EngagementEvent& event) {
  out << event_to_json(event).dump() << '\n';
}

void write_events(std::ostream& out, const std::vector<EngagementEvent>& events) {
  for (const auto& e : events) write_event(out, e);
}

std::vector<EngagementEvent> read_events(std::istream& in) {
  std::vector<EngagementEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("events line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_annotation_set(std::ostream& out, const AnnotationSet& set) {
  for (const auto& [lecture, la] : set) {
    for (const auto& [index, fa] : la.fragments) {
      json topics = json::array();
      for (const auto& t : fa.topics) {
        topics.push_back({{"kc_id", t.kc.kc_id},
                          {"title", t.kc.title},
                          {"url", t.kc.page_url},
                          {"pagerank", t.pagerank},
                          {"cosine", t.cosine}});
      }
      out << json{{"lecture_id", lecture},
                  {"fragment_index", index},
                  {"start", fa.span.start},
                  {"end", fa.span.end},
                  {"total_chars", la.total_chars},
                  {"fragment_chars", la.fragment_chars},
                  {"topics", std::move(topics)}}
                 .dump()
          << '\n';
    }
  }
}

AnnotationSet read_annotation_set(std::istream& in) {
  AnnotationSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "annotations line " + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      FragmentAnnotation fa;
      fa.lecture_id = j.at("lecture_id").get<std::string>();
      fa.fragment_index = j.at("fragment_index").get<std::size_t>();
      fa.span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
      if (fa.span.end <= fa.span.start) throw DataError(where + ": empty span");
      for (const auto& t : j.at("topics")) {
        TopicScore ts;
        ts.kc = {t.at("kc_id").get<KcId>(), t.value("title", std::string{}),
                 t.value("url", std::string{})};
        ts.pagerank = t.at("pagerank").get<double>();
        ts.cosine = t.at("cosine").get<double>();
        fa.topics.push_back(std::move(ts));
      }
      const auto total = j.at("total_chars").get<std::size_t>();
      const auto frag_chars = j.value("fragment_chars", kDefaultFragmentChars);
      auto [it, fresh] = set.try_emplace(fa.lecture_id);
      LectureAnnotations& la = it->second;
      if (fresh) {
        la.total_chars = total;
        la.fragment_chars = frag_chars;
      } else if (la.total_chars != total || la.fragment_chars != frag_chars) {
        throw DataError(where + ": inconsistent lengths for lecture " + fa.lecture_id);
      }
      if (fa.span.end > total) throw DataError(where + ": span beyond lecture end");
      const std::size_t index = fa.fragment_index;
      if (!la.fragments.emplace(index, std::move(fa)).second) {
        throw DataError(where + ": duplicate fragment");
      }
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return set;
}

std::string summary_to_json(const DatasetSummary& s) {
  return json{{"view_log_entries", s.view_log_entries},
              {"learners", s.learners},
              {"lectures", s.lectures},
              {"events", s.events},
              {"positive_events", s.positive_events},
              {"unique_kcs", s.unique_kcs},
              {"skipped_without_topics", s.skipped_without_topics}}
      .dump(2);
}

DatasetSummary summary_from_json(const std::string& text) {
  const json j = json::parse(text);
  DatasetSummary s;
  s.view_log_entries = j.value("view_log_entries", std::size_t{0});
  s.learners = j.at("learners").get<std::size_t>();
  s.lectures = j.value("lectures", std::size_t{0});
  s.events = j.at("events").get<std::size_t>();
  s.positive_events = j.value("positive_events", std::size_t{0});
  s.unique_kcs = j.at("unique_kcs").get<std::size_t>();
  s.skipped_without_topics = j.value("skipped_without_topics", std::size_t{0});
  return s;
}

void validate_event_stream(const std::vector<EngagementEvent>& events) {
  std::unordered_map<std::string, std::size_t> expected;
  for (const auto& e : events) {
    auto& next = expected[e.learner_id];
    if (e.order != next) {
      throw DataError("ordering violation for learner " + e.learner_id +
                      ": expected order " + std::to_string(next) + ", got " +
                      std::to_string(e.order));
    }
    ++next;
    if (e.topics.empty()) {
      throw DataError("event without topics: learner " + e.learner_id +
                      ", order " + std::to_string(e.order));
    }
    std::unordered_set<KcId> seen;
    for (const auto& t : e.topics) {
      if (!seen.insert(t.kc_id).second) {
        throw DataError("duplicate kc_id " + std::to_string(t.kc_id) +
                        " in event of learner " + e.learner_id);
      }
      if (!(t.cosine >= 0.0 && t.cosine <= 1.0)) {
        throw DataError("cosine outside [0, 1] in event of learner " + e.learner_id);
      }
    }
  }
}

}  // namespace truelearn
