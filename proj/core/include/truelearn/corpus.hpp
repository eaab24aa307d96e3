#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "truelearn/content.hpp"

namespace truelearn {

// Engagement outcome: +1 engaged, -1 not engaged.
enum class Label : int { kNegative = -1, kPositive = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }
Label label_from_int(int value);

struct EventTopic {
  KcId kc_id = -1;
  double cosine = 0.0;

  friend bool operator==(const EventTopic&, const EventTopic&) = default;
};

struct EngagementEvent {
  std::string learner_id;
  std::string lecture_id;
  std::size_t fragment_index = 0;
  std::size_t order = 0;  // per-learner position, gap-free from 0
  std::vector<EventTopic> topics;
  Label label = Label::kPositive;

  friend bool operator==(const EngagementEvent&, const EngagementEvent&) = default;
};

inline constexpr double kEngagedWatchRatio = 0.75;

// +1 iff ratio >= 0.75. Throws DomainError outside [0, 1].
Label label_engagement(double watch_ratio);

struct ViewLogRecord {
  std::string learner_id;
  std::string lecture_id;
  std::int64_t timestamp = 0;
  double start_seconds = 0.0;
  double end_seconds = 0.0;

  friend bool operator==(const ViewLogRecord&, const ViewLogRecord&) = default;
};

// Annotated fragments of one lecture plus the time-to-text mapping.
struct LectureAnnotations {
  std::size_t total_chars = 0;
  std::size_t fragment_chars = kDefaultFragmentChars;
  // Uniform speech rate; 5,000 characters per five minutes by default.
  double chars_per_second = 5000.0 / 300.0;
  std::map<std::size_t, FragmentAnnotation> fragments;
};

using AnnotationSet = std::map<std::string, LectureAnnotations>;

struct DatasetSummary {
  std::size_t view_log_entries = 0;
  std::size_t learners = 0;
  std::size_t lectures = 0;
  std::size_t events = 0;
  std::size_t positive_events = 0;
  std::size_t unique_kcs = 0;
  std::size_t skipped_without_topics = 0;

  friend bool operator==(const DatasetSummary&, const DatasetSummary&) = default;
};

struct EventDataset {
  // Global chronological order (timestamp, learner, lecture, fragment).
  // Global-state models consume the events in this order.
  std::vector<EngagementEvent> events;
  DatasetSummary summary;
};

// Joins view logs with fragment annotations. Records sharing
// (learner, lecture, timestamp) form one viewing whose play intervals are
// unioned; each touched fragment yields one event labelled by the covered
// share of its characters. Topics are the top `k` of each annotation.
// Throws DataError on duplicate records or unannotated fragments.
EventDataset build_events(const std::vector<ViewLogRecord>& logs,
                          const AnnotationSet& annotations, std::size_t k);

// Events of the `top_n` most active learners (ties by learner_id ascending),
// in their original order.
std::vector<EngagementEvent> select_cohort(const std::vector<EngagementEvent>& events,
                                           std::size_t top_n);

DatasetSummary summarize(const std::vector<EngagementEvent>& events);

// CSV `learner_id,lecture_id,timestamp,start_seconds,end_seconds` with a
// header row.
std::vector<ViewLogRecord> read_view_logs(std::istream& in);

// Line-delimited JSON, one event per line.
void write_event(std::ostream& out, const EngagementEvent& event);
void write_events(std::ostream& out, const std::vector<EngagementEvent>& events);
std::vector<EngagementEvent> read_events(std::istream& in);

// Annotated fragments as line-delimited JSON, one fragment per line:
// {lecture_id, fragment_index, start, end, total_chars, fragment_chars,
//  topics: [{kc_id, title, url, pagerank, cosine}]}
void write_annotation_set(std::ostream& out, const AnnotationSet& set);
// Throws DataError on malformed lines or inconsistent lecture lengths.
AnnotationSet read_annotation_set(std::istream& in);

std::string summary_to_json(const DatasetSummary& summary);
DatasetSummary summary_from_json(const std::string& text);

// Throws DataError unless each learner's order values are 0, 1, 2, ...
// in stream order and every event has unique, non-empty topics.
void validate_event_stream(const std::vector<EngagementEvent>& events);

}  // namespace truelearn
