#include "truelearn/content.hpp"

#include <algorithm>
#include <cmath>

#include "truelearn/error.hpp"

namespace truelearn {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Byte offset of each code point boundary, plus the end.
std::vector<std::size_t> code_point_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_continuation(static_cast<unsigned char>(text[i]))) {
      offsets.push_back(i);
    }
  }
  offsets.push_back(text.size());
  return offsets;
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(
      text.begin(), text.end(),
      [](char c) { return !is_continuation(static_cast<unsigned char>(c)); }));
}

std::string_view utf8_slice(std::string_view text, CharSpan span) {
  const auto offsets = code_point_offsets(text);
  const std::size_t n = offsets.size() - 1;
  if (span.start > span.end || span.end > n) {
    throw DomainError("span outside text");
  }
  return text.substr(offsets[span.start], offsets[span.end] - offsets[span.start]);
}

std::vector<CharSpan> fragment_transcript(std::string_view text,
                                          std::size_t target_len) {
  if (text.empty()) throw DataError("cannot fragment an empty transcript");
  if (target_len < kMinFragmentChars) {
    throw DomainError("fragment length must be at least " +
                      std::to_string(kMinFragmentChars));
  }
  const std::size_t n = utf8_length(text);
  std::vector<CharSpan> spans;
  for (std::size_t start = 0; start < n; start += target_len) {
    spans.push_back({start, std::min(start + target_len, n)});
  }
  return spans;
}

double combined_score(const TopicScore& s, const RankWeights& w) {
  return w.pagerank * s.pagerank + w.cosine * s.cosine;
}

std::vector<TopicScore> rank_topics(std::vector<TopicScore> scores,
                                    std::size_t k, const RankWeights& w) {
  if (!(w.pagerank >= 0.0 && w.cosine >= 0.0 && w.pagerank + w.cosine > 0.0)) {
    throw DomainError("rank weights must be nonnegative with a positive sum");
  }
  if (k == 0) throw DomainError("k must be at least 1");
  // Normalizing the weights makes the order invariant to their common scale.
  const double total = w.pagerank + w.cosine;
  const RankWeights unit{w.pagerank / total, w.cosine / total};
  std::stable_sort(scores.begin(), scores.end(),
                   [&](const TopicScore& a, const TopicScore& b) {
                     const double sa = combined_score(a, unit);
                     const double sb = combined_score(b, unit);
                     if (sa != sb) return sa > sb;
                     return a.kc.kc_id < b.kc.kc_id;
                   });
  if (scores.size() > k) scores.resize(k);
  return scores;
}

}  // namespace truelearn
