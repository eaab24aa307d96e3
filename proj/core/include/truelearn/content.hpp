#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace truelearn {

using KcId = std::int64_t;

// One Wikipedia page treated as an atomic knowledge component.
struct KnowledgeComponent {
  KcId kc_id = -1;
  std::string title;
  std::string page_url;

  friend bool operator==(const KnowledgeComponent&,
                         const KnowledgeComponent&) = default;
};

struct TopicScore {
  KnowledgeComponent kc;
  double pagerank = 0.0;
  double cosine = 0.0;

  friend bool operator==(const TopicScore&, const TopicScore&) = default;
};

// Half-open range [start, end) measured in Unicode code points.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct FragmentAnnotation {
  std::string lecture_id;
  std::size_t fragment_index = 0;
  CharSpan span;
  std::vector<TopicScore> topics;  // ranked, at most k entries
};

inline constexpr std::size_t kDefaultFragmentChars = 5000;
inline constexpr std::size_t kMinFragmentChars = 1000;

// Number of code points in UTF-8 text.
std::size_t utf8_length(std::string_view text);

// Byte substring of `text` covering the code-point span.
std::string_view utf8_slice(std::string_view text, CharSpan span);

// Hard cuts every `target_len` code points; the last span keeps the
// remainder. Throws DataError on empty text, DomainError when
// target_len < kMinFragmentChars.
std::vector<CharSpan> fragment_transcript(
    std::string_view text, std::size_t target_len = kDefaultFragmentChars);

struct RankWeights {
  double pagerank = 0.4;
  double cosine = 0.6;
};

double combined_score(const TopicScore& s, const RankWeights& w);

// Top `k` by combined score, ties by kc_id ascending. Fewer than k inputs
// returns all of them ranked.
std::vector<TopicScore> rank_topics(std::vector<TopicScore> scores,
                                    std::size_t k, const RankWeights& w = {});

}  // namespace truelearn
