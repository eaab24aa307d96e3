#include "truelearn/annotation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "truelearn/error.hpp"

namespace truelearn {

using nlohmann::json;

std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

double unit_score(const json& entry, const char* key) {
  const auto it = entry.find(key);
  if (it == entry.end() || !it->is_number()) {
    throw ServiceError(std::string("malformed response: annotation without numeric '") +
                           key + "'",
                       false);
  }
  const double value = it->get<double>();
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    throw ServiceError(std::string("malformed response: '") + key +
                           "' outside [0, 1]",
                       false);
  }
  return value;
}

std::vector<RawTopic> topics_from_json(const json& body) {
  if (!body.is_object()) {
    throw ServiceError("malformed response: expected a JSON object", false);
  }
  const auto it = body.find("annotations");
  if (it == body.end() || !it->is_array()) {
    throw ServiceError("malformed response: missing 'annotations' array", false);
  }
  std::vector<RawTopic> topics;
  topics.reserve(it->size());
  for (const auto& entry : *it) {
    if (!entry.is_object() || !entry.contains("title") ||
        !entry["title"].is_string()) {
      throw ServiceError("malformed response: annotation without 'title'", false);
    }
    RawTopic t;
    t.title = entry["title"].get<std::string>();
    if (auto url = entry.find("url"); url != entry.end() && url->is_string()) {
      t.page_url = url->get<std::string>();
    }
    t.pagerank = unit_score(entry, "pageRank");
    t.cosine = unit_score(entry, "cosine");
    topics.push_back(std::move(t));
  }
  return topics;
}

json topics_to_json(const std::vector<RawTopic>& topics) {
  json arr = json::array();
  for (const auto& t : topics) {
    arr.push_back({{"title", t.title},
                   {"url", t.page_url},
                   {"pagerank", t.pagerank},
                   {"cosine", t.cosine}});
  }
  return arr;
}

std::vector<RawTopic> topics_from_record(const json& arr) {
  std::vector<RawTopic> topics;
  for (const auto& e : arr) {
    topics.push_back({e.at("title").get<std::string>(), e.at("url").get<std::string>(),
                      e.at("pagerank").get<double>(), e.at("cosine").get<double>()});
  }
  return topics;
}

CacheRecord record_from_json(const json& j) {
  CacheRecord r;
  r.hash = j.at("hash").get<std::string>();
  r.lecture_id = j.at("lecture_id").get<std::string>();
  r.fragment_index = j.at("fragment_index").get<std::size_t>();
  r.response = j.at("response").dump();
  if (auto it = j.find("topics"); it != j.end()) {
    r.topics = topics_from_record(*it);
  } else {
    r.topics = topics_from_json(j.at("response"));
  }
  return r;
}

}  // namespace

std::vector<RawTopic> extract_topics(std::string_view response_body) {
  json body = json::parse(response_body, nullptr, false);
  if (body.is_discarded()) {
    throw ServiceError("malformed response: not valid JSON", false);
  }
  return topics_from_json(body);
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  Vocabulary vocab;
  std::ifstream in(path);
  if (!in) return vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected kc_id<TAB>title<TAB>page_url");
    }
    const KcId id = std::stoll(line.substr(0, tab1));
    if (id != static_cast<KcId>(vocab.entries_.size())) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": kc_ids must be contiguous from 0");
    }
    vocab.intern(line.substr(tab1 + 1, tab2 - tab1 - 1), line.substr(tab2 + 1));
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    for (const auto& kc : entries_) {
      out << kc.kc_id << '\t' << kc.title << '\t' << kc.page_url << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

KcId Vocabulary::intern(const std::string& title, const std::string& page_url) {
  if (title.find_first_of("\t\n") != std::string::npos) {
    throw DataError("title contains a tab or newline: " + title);
  }
  if (auto it = by_title_.find(title); it != by_title_.end()) return it->second;
  const auto id = static_cast<KcId>(entries_.size());
  entries_.push_back({id, title, page_url});
  by_title_.emplace(title, id);
  return id;
}

std::optional<KcId> Vocabulary::find(const std::string& title) const {
  if (auto it = by_title_.find(title); it != by_title_.end()) return it->second;
  return std::nullopt;
}

const KnowledgeComponent& Vocabulary::at(KcId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw DataError("unknown kc_id " + std::to_string(id));
  }
  return entries_[static_cast<std::size_t>(id)];
}

TopicScore Vocabulary::resolve(const RawTopic& raw) {
  const KcId id = intern(raw.title, raw.page_url);
  return {at(id), raw.pagerank, raw.cosine};
}

// ---------------------------------------------------------------------------
// AnnotationCache

AnnotationCache::AnnotationCache(std::filesystem::path path)
    : path_(std::move(path)), index_path_(path_.string() + ".idx") {
  if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  load_index();
}

void AnnotationCache::load_index() {
  offsets_.clear();
  if (!std::filesystem::exists(path_)) {
    std::filesystem::remove(index_path_);
    return;
  }
  std::ifstream idx(index_path_);
  const bool have_index = idx.is_open();
  std::uint64_t indexed_end = 0;
  if (have_index) {
    std::string hash;
    std::uint64_t offset;
    while (idx >> hash >> offset) {
      offsets_[hash] = offset;
      indexed_end = std::max(indexed_end, offset);
    }
  }
  // A partial run may have appended records after the last index flush.
  std::ifstream data(path_, std::ios::binary);
  data.seekg(static_cast<std::streamoff>(indexed_end));
  std::string line;
  if (!offsets_.empty()) std::getline(data, line);  // last indexed record
  const bool stale = data.good() && data.peek() != EOF;
  if (!have_index || stale) rebuild_index();
}

void AnnotationCache::rebuild_index() {
  offsets_.clear();
  std::ifstream data(path_, std::ios::binary);
  std::ofstream idx(index_path_, std::ios::trunc);
  std::string line;
  std::uint64_t offset = 0;
  while (std::getline(data, line)) {
    const std::uint64_t next = offset + line.size() + 1;
    json j = json::parse(line, nullptr, false);
    // A torn final line from an interrupted write is dropped.
    if (!j.is_discarded() && j.contains("hash")) {
      const auto hash = j["hash"].get<std::string>();
      if (offsets_.emplace(hash, offset).second) {
        idx << hash << '\t' << offset << '\n';
      }
    }
    offset = next;
  }
}

std::optional<CacheRecord> AnnotationCache::lookup(const std::string& hash) const {
  std::uint64_t offset;
  {
    std::lock_guard lock(mutex_);
    auto it = offsets_.find(hash);
    if (it == offsets_.end()) return std::nullopt;
    offset = it->second;
  }
  std::ifstream data(path_, std::ios::binary);
  data.seekg(static_cast<std::streamoff>(offset));
  std::string line;
  std::getline(data, line);
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw DataError("corrupt cache record at offset " + std::to_string(offset) +
                    " in " + path_.string());
  }
  return record_from_json(j);
}

bool AnnotationCache::contains(const std::string& hash) const {
  std::lock_guard lock(mutex_);
  return offsets_.count(hash) != 0;
}

void AnnotationCache::store(const CacheRecord& record) {
  json response = json::parse(record.response, nullptr, false);
  if (response.is_discarded()) response = record.response;
  json j = {{"hash", record.hash},
            {"lecture_id", record.lecture_id},
            {"fragment_index", record.fragment_index},
            {"response", std::move(response)},
            {"topics", topics_to_json(record.topics)}};
  const std::string line = j.dump();

  std::lock_guard lock(mutex_);
  if (offsets_.count(record.hash) != 0) return;
  std::uint64_t offset = 0;
  if (std::filesystem::exists(path_)) offset = std::filesystem::file_size(path_);
  {
    std::ofstream data(path_, std::ios::binary | std::ios::app);
    if (!data) throw DataError("cannot append to " + path_.string());
    data << line << '\n';
    data.flush();
    if (!data) throw DataError("write failed on " + path_.string());
  }
  {
    std::ofstream idx(index_path_, std::ios::app);
    idx << record.hash << '\t' << offset << '\n';
  }
  offsets_.emplace(record.hash, offset);
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(mutex_);
  return offsets_.size();
}

// ---------------------------------------------------------------------------
// WikifierClient

WikifierClient::WikifierClient(WikifierOptions options)
    : options_(std::move(options)) {
  const auto& url = options_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw UsageError("endpoint must be an absolute http(s) URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  host_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string WikifierClient::annotate(std::string_view text,
                                     std::string_view language) {
  httplib::Client client(host_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);

  httplib::Params params;
  params.emplace("text", std::string(text));
  params.emplace("lang", std::string(language));
  params.emplace("userKey", options_.api_key);
  for (const auto& [k, v] : options_.extra_params) params.emplace(k, v);

  auto res = client.Post(path_, params);
  if (!res) {
    throw ServiceError("entity-linking service unreachable at " + options_.endpoint +
                           ": " + httplib::to_string(res.error()),
                       true);
  }
  if (res->status >= 500 || res->status == 429) {
    throw ServiceError("entity-linking service returned HTTP " +
                           std::to_string(res->status),
                       true);
  }
  if (res->status != 200) {
    throw ServiceError("entity-linking service returned HTTP " +
                           std::to_string(res->status) + ": " + res->body,
                       false);
  }
  return res->body;
}

// ---------------------------------------------------------------------------
// TokenBucket

TokenBucket::TokenBucket(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(burst_), last_(Clock::now()) {
  if (!(rate > 0.0)) throw DomainError("rate limit must be positive");
}

void TokenBucket::acquire() {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto now = Clock::now();
    tokens_ = std::min(burst_, tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------

std::vector<RawTopic> annotate_fragment(std::string_view fragment_text,
                                        AnnotationCache& cache,
                                        EntityLinker& linker,
                                        const std::string& lecture_id,
                                        std::size_t fragment_index,
                                        std::string_view language) {
  if (fragment_text.empty()) throw DataError("cannot annotate empty text");
  if (utf8_length(fragment_text) > linker.max_chars()) {
    throw DataError("fragment exceeds the service limit of " +
                    std::to_string(linker.max_chars()) + " characters");
  }
  const std::string hash = content_hash(fragment_text);
  if (auto hit = cache.lookup(hash)) return hit->topics;

  CacheRecord record;
  record.hash = hash;
  record.lecture_id = lecture_id;
  record.fragment_index = fragment_index;
  record.response = linker.annotate(fragment_text, language);
  record.topics = extract_topics(record.response);
  cache.store(record);
  return record.topics;
}

AnnotationStats annotate_all(const std::vector<AnnotationJob>& jobs,
                             AnnotationCache& cache, EntityLinker* linker,
                             const AnnotationRunOptions& options) {
  AnnotationStats stats;
  std::vector<const AnnotationJob*> pending;
  std::unordered_map<std::string, bool> seen;
  for (const auto& job : jobs) {
    const auto hash = content_hash(job.text);
    if (cache.contains(hash)) {
      ++stats.cache_hits;
    } else if (seen.emplace(hash, true).second) {
      pending.push_back(&job);
    }
  }
  if (pending.empty()) return stats;
  if (linker == nullptr) {
    throw ServiceError(std::to_string(pending.size()) +
                           " fragments are not cached and no service is configured",
                       false);
  }

  TokenBucket bucket(options.requests_per_second,
                     std::max(1.0, options.requests_per_second));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  std::mutex failures_mutex;
  std::vector<std::pair<std::size_t, std::string>> failures;

  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const AnnotationJob& job = *pending[i];
      for (int attempt = 1;; ++attempt) {
        try {
          bucket.acquire();
          ++calls;
          annotate_fragment(job.text, cache, *linker, job.lecture_id,
                            job.fragment_index, options.language);
          break;
        } catch (const ServiceError& e) {
          if (e.retryable() && attempt < options.max_attempts) {
            std::this_thread::sleep_for(options.backoff * attempt);
            continue;
          }
          std::lock_guard lock(failures_mutex);
          failures.emplace_back(i, job.lecture_id + "#" +
                                       std::to_string(job.fragment_index) + ": " +
                                       e.what());
          break;
        } catch (const Error& e) {
          std::lock_guard lock(failures_mutex);
          failures.emplace_back(i, job.lecture_id + "#" +
                                       std::to_string(job.fragment_index) + ": " +
                                       e.what());
          break;
        }
      }
    }
  };

  const std::size_t n_threads =
      std::clamp<std::size_t>(options.concurrency, 1, pending.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  std::sort(failures.begin(), failures.end());
  for (auto& f : failures) stats.failures.push_back(std::move(f.second));
  stats.service_calls = calls;
  return stats;
}

}  // namespace truelearn
