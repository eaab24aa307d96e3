#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "truelearn/content.hpp"

namespace truelearn {

// A concept as reported by the entity-linking service, before a kc_id is
// assigned.
struct RawTopic {
  std::string title;
  std::string page_url;
  double pagerank = 0.0;
  double cosine = 0.0;

  friend bool operator==(const RawTopic&, const RawTopic&) = default;
};

// 64-bit FNV-1a of the fragment text, as 16 lowercase hex digits.
std::string content_hash(std::string_view text);

// Parses a service response body. Reads the `annotations` array and, per
// entry, `title`, `url`, `pageRank` and `cosine`; other fields are ignored.
// Throws ServiceError (non-retryable) on malformed input.
std::vector<RawTopic> extract_topics(std::string_view response_body);

// Title -> kc_id map; ids are assigned in first-seen order and persisted as
// TSV `kc_id<TAB>title<TAB>page_url`.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  KcId intern(const std::string& title, const std::string& page_url);
  std::optional<KcId> find(const std::string& title) const;
  const KnowledgeComponent& at(KcId id) const;
  std::size_t size() const { return entries_.size(); }

  TopicScore resolve(const RawTopic& raw);

 private:
  std::vector<KnowledgeComponent> entries_;
  std::unordered_map<std::string, KcId> by_title_;
};

struct CacheRecord {
  std::string hash;
  std::string lecture_id;
  std::size_t fragment_index = 0;
  // Service response with field names as received; stored as a JSON value,
  // so whitespace is not preserved.
  std::string response;
  std::vector<RawTopic> topics;
};

// Append-only line-delimited JSON store of service responses keyed by
// content hash, with a sidecar `<path>.idx` of `hash<TAB>byte_offset`.
// One writer, many readers; all members are internally synchronized.
class AnnotationCache {
 public:
  explicit AnnotationCache(std::filesystem::path path);

  std::optional<CacheRecord> lookup(const std::string& hash) const;
  bool contains(const std::string& hash) const;

  // No-op if the hash is already present.
  void store(const CacheRecord& record);

  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void load_index();
  void rebuild_index();

  std::filesystem::path path_;
  std::filesystem::path index_path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::uint64_t> offsets_;
};

// Transport to an entity-linking service. Returns the raw response body.
class EntityLinker {
 public:
  virtual ~EntityLinker() = default;
  virtual std::string annotate(std::string_view text,
                               std::string_view language) = 0;
  virtual std::size_t max_chars() const = 0;
};

struct WikifierOptions {
  std::string endpoint = "http://www.wikifier.org/annotate-article";
  std::string api_key;
  std::chrono::seconds timeout{60};
  std::size_t max_chars = 25000;
  std::map<std::string, std::string> extra_params{
      {"pageRankSqThreshold", "0.8"},
      {"applyPageRankSqThreshold", "false"},
      {"nTopDfValuesToIgnore", "200"},
      {"wikiDataClasses", "false"},
      {"wikiDataClassIds", "false"},
      {"support", "false"},
      {"ranges", "false"},
      {"includeCosines", "true"},
  };
};

// HTTP client for a Wikifier-compatible endpoint (POST form:
// text, lang, userKey plus extra_params).
class WikifierClient : public EntityLinker {
 public:
  explicit WikifierClient(WikifierOptions options);
  std::string annotate(std::string_view text, std::string_view language) override;
  std::size_t max_chars() const override { return options_.max_chars; }

 private:
  WikifierOptions options_;
  std::string host_;
  std::string path_;
};

// Blocking token bucket; `rate` tokens per second, up to `burst` stored.
class TokenBucket {
 public:
  TokenBucket(double rate, double burst);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mutex_;
};

// Returns the fragment's concepts, from the cache when present; otherwise
// calls the linker once and appends the response to the cache.
// Throws DataError on empty or over-length text; ServiceError from the
// linker or on a malformed response.
std::vector<RawTopic> annotate_fragment(std::string_view fragment_text,
                                        AnnotationCache& cache,
                                        EntityLinker& linker,
                                        const std::string& lecture_id = {},
                                        std::size_t fragment_index = 0,
                                        std::string_view language = "en");

struct AnnotationJob {
  std::string lecture_id;
  std::size_t fragment_index = 0;
  std::string text;
};

struct AnnotationStats {
  std::size_t cache_hits = 0;
  std::size_t service_calls = 0;
  std::vector<std::string> failures;  // "lecture#fragment: message"
};

struct AnnotationRunOptions {
  std::size_t concurrency = 4;
  double requests_per_second = 2.0;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  std::string language = "en";
};

// Annotates every job, at most `concurrency` in flight. Failures are
// collected rather than thrown so a rerun resumes from the cache.
AnnotationStats annotate_all(const std::vector<AnnotationJob>& jobs,
                             AnnotationCache& cache, EntityLinker* linker,
                             const AnnotationRunOptions& options);

}  // namespace truelearn
