#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "truelearn/config.hpp"
#include "truelearn/corpus.hpp"
#include "truelearn/error.hpp"
#include "truelearn/eval.hpp"
#include "truelearn/synthetic.hpp"

#ifndef TRUELEARN_VERSION
#define TRUELEARN_VERSION "unknown"
#endif

namespace truelearn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Environment default_environment() {
  Environment env;
  env.getenv = [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  env.make_linker = [](const WikifierOptions& o) -> std::unique_ptr<EntityLinker> {
    return std::make_unique<WikifierClient>(o);
  };
  return env;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

using Clock = std::chrono::steady_clock;

class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), args_(args) {}

  void input(const fs::path& path, const std::string& content) {
    inputs_[path.string()] = content_hash(content);
  }
  void output(const fs::path& path) { outputs_.push_back(path.filename().string()); }
  void set_config(const std::string& text) { config_ = text; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }

  // Times the phase ending now, measured from the previous call.
  void lap(const std::string& phase) {
    const auto now = Clock::now();
    timings_[phase] = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }

  void write(const fs::path& dir) const {
    json j = {{"tool", "truelearn"},
              {"version", TRUELEARN_VERSION},
              {"command", command_},
              {"arguments", args_},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"timings_ms", timings_}};
    j["config"] = config_ ? json(*config_) : json(nullptr);
    j["seed"] = seed_ ? json(*seed_) : json(nullptr);
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::optional<std::string> config_;
  std::optional<std::uint64_t> seed_;
  std::map<std::string, double> timings_;
  json extra_ = json::object();
  Clock::time_point last_ = Clock::now();
};

// Options shared by evaluate and sweep.
struct ModelOptions {
  std::string model;
  std::string config_path;
  bool use_negative = false;
  bool positive_only = false;
  std::size_t top_k = 0;
  std::size_t jobs = 1;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--model", model, "Model kind: " + valid_model_names());
    cmd.add_option("--config", config_path, "Config file (key = value)")
        ->check(CLI::ExistingFile);
    auto* neg = cmd.add_flag("--use-negative", use_negative,
                             "Learn from negative engagement (default)");
    cmd.add_flag("--positive-only", positive_only, "Learn from positive engagement only")
        ->excludes(neg);
    cmd.add_option("--top-k", top_k, "Topics per event (overrides config)");
    cmd.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  }

  // Precedence: model defaults < config file < flags.
  ModelConfig resolve(Manifest& manifest) const {
    ModelConfig cfg;
    if (!model.empty()) cfg = ModelConfig::defaults_for(parse_model_kind(model));
    if (!config_path.empty()) {
      const std::string text = read_file(config_path);
      manifest.input(config_path, text);
      const ModelConfig from_file = parse_config(text, cfg);
      if (!model.empty() && from_file.kind != cfg.kind) {
        throw UsageError("--model " + model + " conflicts with the config file's model " +
                         std::string(to_string(from_file.kind)));
      }
      cfg = from_file;
    } else if (model.empty()) {
      throw UsageError("--model is required (valid: " + valid_model_names() + ")");
    }
    if (use_negative) cfg.use_negative = true;
    if (positive_only) cfg.use_negative = false;
    if (top_k > 0) cfg.top_k = top_k;
    cfg.validate();
    manifest.set_config(config_to_text(cfg));
    return cfg;
  }
};

std::vector<EngagementEvent> load_events(const fs::path& path, Manifest& manifest) {
  const std::string text = read_file(path);
  manifest.input(path, text);
  std::istringstream in(text);
  auto events = read_events(in);
  if (events.empty()) throw DataError(path.string() + " contains no events");
  return events;
}

// Events carry ranked topics; keep the first k.
void truncate_topics(std::vector<EngagementEvent>& events, std::size_t k) {
  for (auto& e : events) {
    if (e.topics.size() > k) e.topics.resize(k);
  }
}

std::vector<std::string> learner_ids(const std::vector<EngagementEvent>& events) {
  std::vector<std::string> ids;
  for (const auto& e : events) ids.push_back(e.learner_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// ---------------------------------------------------------------------------

struct AnnotateArgs {
  std::string transcripts;
  std::string cache;
  std::string vocab;
  std::string out;
  std::string key_env = kDefaultApiKeyEnv;
  std::string endpoint = WikifierOptions{}.endpoint;
  std::string language = "en";
  std::size_t concurrency = 4;
  double rps = 2.0;
  std::size_t fragment_chars = kDefaultFragmentChars;
};

int cmd_annotate(const AnnotateArgs& a, const std::vector<std::string>& raw,
                 const Environment& env, std::ostream& out, std::ostream& err) {
  Manifest manifest("annotate", raw);
  const fs::path out_dir = a.out;
  const fs::path cache_path = a.cache.empty() ? out_dir / "cache.jsonl" : fs::path(a.cache);
  const fs::path vocab_path = a.vocab.empty() ? out_dir / "vocabulary.tsv" : fs::path(a.vocab);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.transcripts)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .txt transcripts in " + a.transcripts);

  struct Lecture {
    std::string id;
    std::size_t total_chars;
    std::vector<CharSpan> spans;
  };
  std::vector<Lecture> lectures;
  std::vector<AnnotationJob> jobs;
  for (const auto& f : files) {
    const std::string text = read_file(f);
    manifest.input(f, text);
    Lecture lec{f.stem().string(), utf8_length(text), {}};
    try {
      lec.spans = fragment_transcript(text, a.fragment_chars);
    } catch (const DataError& e) {
      throw DataError(f.string() + ": " + e.what());
    }
    for (std::size_t i = 0; i < lec.spans.size(); ++i) {
      jobs.push_back({lec.id, i, std::string(utf8_slice(text, lec.spans[i]))});
    }
    lectures.push_back(std::move(lec));
  }

  AnnotationCache cache(cache_path);
  const auto misses = static_cast<std::size_t>(std::count_if(
      jobs.begin(), jobs.end(),
      [&](const AnnotationJob& j) { return !cache.contains(content_hash(j.text)); }));

  std::unique_ptr<EntityLinker> linker;
  if (misses > 0) {
    const auto key = env.getenv(a.key_env);
    if (!key) {
      throw UsageError(std::to_string(misses) +
                       " fragments are not cached; set the API key in the " + a.key_env +
                       " environment variable (or choose another with --api-key-env)");
    }
    WikifierOptions wo;
    wo.endpoint = a.endpoint;
    wo.api_key = *key;
    linker = env.make_linker(wo);
  }
  manifest.lap("prepare");

  AnnotationRunOptions ro;
  ro.concurrency = a.concurrency;
  ro.requests_per_second = a.rps;
  ro.language = a.language;
  const AnnotationStats stats = annotate_all(jobs, cache, linker.get(), ro);
  manifest.lap("annotate");
  out << "fragments: " << jobs.size() << "  cache hits: " << stats.cache_hits
      << "  service calls: " << stats.service_calls << '\n';
  manifest.set("fragments", jobs.size());
  manifest.set("cache_hits", stats.cache_hits);
  manifest.set("service_calls", stats.service_calls);
  if (!stats.failures.empty()) {
    for (const auto& f : stats.failures) err << "failed: " << f << '\n';
    manifest.set("failures", stats.failures);
    manifest.write(out_dir);
    throw ServiceError(std::to_string(stats.failures.size()) +
                           " fragments failed; rerun to resume from the cache",
                       false);
  }

  Vocabulary vocab = Vocabulary::load(vocab_path);
  AnnotationSet set;
  std::size_t job_index = 0;
  for (const auto& lec : lectures) {
    LectureAnnotations& la = set[lec.id];
    la.total_chars = lec.total_chars;
    la.fragment_chars = a.fragment_chars;
    for (std::size_t i = 0; i < lec.spans.size(); ++i, ++job_index) {
      const auto record = cache.lookup(content_hash(jobs[job_index].text));
      if (!record) throw DataError("cache lost fragment " + lec.id + "#" + std::to_string(i));
      FragmentAnnotation fa{lec.id, i, lec.spans[i], {}};
      std::vector<TopicScore> scores;
      for (const auto& raw : record->topics) scores.push_back(vocab.resolve(raw));
      const std::size_t n = scores.size();
      fa.topics = rank_topics(std::move(scores), std::max<std::size_t>(n, 1));
      la.fragments.emplace(i, std::move(fa));
    }
  }
  vocab.save(vocab_path);
  std::ostringstream ann;
  write_annotation_set(ann, set);
  write_file(out_dir / "annotations.jsonl", ann.str());
  manifest.output(out_dir / "annotations.jsonl");
  manifest.output(vocab_path);
  manifest.lap("write");
  manifest.write(out_dir);
  out << "vocabulary: " << vocab.size() << " knowledge components\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct BuildArgs {
  std::string annotations;
  std::string logs;
  std::string durations;
  std::string out;
  std::size_t top_k = 5;
  std::size_t cohort = 0;
  double w_pagerank = 0.4;
  double w_cosine = 0.6;
};

int cmd_build(const BuildArgs& a, const std::vector<std::string>& raw, std::ostream& out) {
  Manifest manifest("build", raw);
  if (a.top_k == 0) throw UsageError("--top-k must be at least 1");
  if (a.w_pagerank < 0.0 || a.w_cosine < 0.0 || a.w_pagerank + a.w_cosine <= 0.0) {
    throw UsageError("ranking weights must be nonnegative with a positive sum");
  }
  const std::string ann_text = read_file(a.annotations);
  manifest.input(a.annotations, ann_text);
  std::istringstream ann_in(ann_text);
  AnnotationSet set = read_annotation_set(ann_in);

  const RankWeights weights{a.w_pagerank, a.w_cosine};
  for (auto& [lecture, la] : set) {
    for (auto& [index, fa] : la.fragments) {
      fa.topics = rank_topics(std::move(fa.topics), a.top_k, weights);
    }
  }

  if (!a.durations.empty()) {
    const std::string text = read_file(a.durations);
    manifest.input(a.durations, text);
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || (line_no == 1 && line.rfind("lecture_id", 0) == 0)) continue;
      const auto bad = [&] {
        return DataError(a.durations + ":" + std::to_string(line_no) +
                         ": expected lecture_id,duration_seconds");
      };
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw bad();
      double seconds = 0.0;
      try {
        seconds = std::stod(line.substr(comma + 1));
      } catch (const std::logic_error&) {
        throw bad();
      }
      if (!(seconds > 0.0) || !std::isfinite(seconds)) throw bad();
      auto it = set.find(line.substr(0, comma));
      if (it != set.end()) {
        it->second.chars_per_second = static_cast<double>(it->second.total_chars) / seconds;
      }
    }
  }

  const std::string logs_text = read_file(a.logs);
  manifest.input(a.logs, logs_text);
  std::istringstream logs_in(logs_text);
  const auto logs = read_view_logs(logs_in);
  manifest.lap("read");

  EventDataset data = build_events(logs, set, a.top_k);
  if (a.cohort > 0) {
    data.events = select_cohort(data.events, a.cohort);
    const auto skipped = data.summary.skipped_without_topics;
    data.summary = summarize(data.events);
    data.summary.view_log_entries = logs.size();
    data.summary.skipped_without_topics = skipped;
  }
  manifest.lap("build");

  const fs::path out_dir = a.out;
  std::ostringstream ev;
  write_events(ev, data.events);
  write_file(out_dir / "events.jsonl", ev.str());
  write_file(out_dir / "summary.json", summary_to_json(data.summary) + "\n");
  manifest.output(out_dir / "events.jsonl");
  manifest.output(out_dir / "summary.json");
  manifest.set("top_k", a.top_k);
  manifest.set("cohort", a.cohort);
  manifest.lap("write");
  manifest.write(out_dir);
  out << summary_to_json(data.summary) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  ModelOptions model;
  std::string events;
  std::string out;
  bool save_state = false;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& raw,
                 std::ostream& out) {
  Manifest manifest("evaluate", raw);
  const ModelConfig cfg = a.model.resolve(manifest);
  auto events = load_events(a.events, manifest);
  truncate_topics(events, cfg.top_k);
  manifest.lap("read");

  std::map<std::string, LearnerState> states;
  ResourceTable resources;
  EvalOptions opts;
  opts.jobs = a.model.jobs;
  if (a.save_state) {
    opts.final_states = &states;
    opts.final_resources = &resources;
  }
  const EvalReport report = evaluate_sequential(cfg, events, opts);
  manifest.lap("evaluate");

  const fs::path out_dir = a.out;
  write_file(out_dir / "report.json", report_to_json(report));
  const std::string table = report_to_table(report);
  write_file(out_dir / "report.txt", table);
  manifest.output(out_dir / "report.json");
  manifest.output(out_dir / "report.txt");
  if (a.save_state) {
    std::ostringstream s;
    write_snapshot(s, {cfg.kind, std::move(states), std::move(resources)});
    write_file(out_dir / "state.jsonl", s.str());
    manifest.output(out_dir / "state.jsonl");
  }
  manifest.lap("write");
  manifest.write(out_dir);
  out << table;
  return kOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  ModelOptions model;
  std::string events;
  std::string grid;
  std::string out;
  std::string objective = "f1";
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
};

int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& raw, std::ostream& out) {
  Manifest manifest("sweep", raw);
  const ModelConfig base = a.model.resolve(manifest);
  Metrics{}.get(a.objective);
  GridSpec grid;
  if (!a.grid.empty()) {
    const std::string text = read_file(a.grid);
    manifest.input(a.grid, text);
    grid = parse_grid(text);
    if (grid.empty()) throw UsageError("grid file " + a.grid + " defines no values");
  } else {
    grid = GridSpec::defaults_for(base.kind);
    if (grid.empty()) grid.beta = {base.beta};
  }
  auto events = load_events(a.events, manifest);
  truncate_topics(events, base.top_k);
  manifest.set_seed(a.seed);
  manifest.lap("read");

  const LearnerSplit split = split_learners(learner_ids(events), a.train_fraction, a.seed);
  const auto train = filter_learners(events, split.train);
  const auto test = filter_learners(events, split.test);
  const SweepResult sweep = grid_search(base, grid, train, a.objective, a.model.jobs);
  manifest.lap("sweep");

  EvalOptions opts;
  opts.jobs = a.model.jobs;
  EvalReport report = evaluate_sequential(sweep.best().config, test, opts);
  report.split = SplitInfo{a.seed, a.train_fraction, split.train, split.test};
  manifest.lap("test");

  const fs::path out_dir = a.out;
  write_file(out_dir / "sweep.csv", sweep_to_csv(sweep));
  write_file(out_dir / "best_config.toml", config_to_text(sweep.best().config));
  write_file(out_dir / "report.json", report_to_json(report));
  const std::string table = report_to_table(report);
  write_file(out_dir / "report.txt", table);
  for (const char* f : {"sweep.csv", "best_config.toml", "report.json", "report.txt"}) {
    manifest.output(out_dir / f);
  }
  manifest.set("grid_points", sweep.rows.size());
  manifest.set("objective", a.objective);
  manifest.lap("write");
  manifest.write(out_dir);
  out << "grid points: " << sweep.rows.size() << "  train learners: " << split.train.size()
      << "  test learners: " << split.test.size() << "\nbest config:\n"
      << config_to_text(sweep.best().config) << '\n'
      << table;
  return kOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> reports;
  std::string out;
};

constexpr const char* kSparsityNote =
    "topic_sparsity = unique knowledge components / events, per learner";

int cmd_report(const ReportArgs& a, const std::vector<std::string>& raw, std::ostream& out) {
  Manifest manifest("report", raw);
  std::vector<EvalReport> reports;
  for (const auto& path : a.reports) {
    const std::string text = read_file(path);
    manifest.input(path, text);
    try {
      reports.push_back(report_from_json(text));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  const std::string table = comparison_table(reports);

  const auto shortest = [](double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
  };
  std::ostringstream csv;
  csv << "# " << kSparsityNote << '\n'
      << "model,use_negative,learner_id,events,evaluated,unique_kcs,topic_sparsity,f1\n";
  for (const auto& r : reports) {
    for (const auto& l : r.learners) {
      const double sparsity = l.events == 0 ? 0.0
                                            : static_cast<double>(l.unique_kcs) /
                                                  static_cast<double>(l.events);
      csv << to_string(r.config.kind) << ',' << (r.config.use_negative ? "true" : "false")
          << ',' << l.learner_id << ',' << l.events << ',' << l.evaluated << ','
          << l.unique_kcs << ',' << shortest(sparsity) << ',' << shortest(l.metrics.f1) << '\n';
    }
  }

  if (!a.out.empty()) {
    const fs::path out_dir = a.out;
    write_file(out_dir / "comparison.txt", std::string("# ") + kSparsityNote + "\n" + table);
    write_file(out_dir / "learners.csv", csv.str());
    manifest.output(out_dir / "comparison.txt");
    manifest.output(out_dir / "learners.csv");
    manifest.lap("write");
    manifest.write(out_dir);
  }
  out << table;
  return kOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::string out;
};

int cmd_synth(const SynthArgs& a, const std::vector<std::string>& raw, std::ostream& out) {
  Manifest manifest("synth", raw);
  manifest.set_seed(a.spec.seed);
  const SyntheticData data = generate_synthetic(a.spec);
  manifest.lap("generate");

  const fs::path out_dir = a.out;
  std::ostringstream ev;
  write_events(ev, data.events);
  write_file(out_dir / "events.jsonl", ev.str());

  json truth = json::object();
  for (const auto& [id, skills] : data.skills) {
    json s = json::object();
    for (const auto& [kc, v] : skills) s[std::to_string(kc)] = v;
    truth[id] = {{"margin", data.margins.at(id)}, {"skills", std::move(s)}};
  }
  write_file(out_dir / "truth.json", truth.dump(2) + "\n");
  manifest.output(out_dir / "events.jsonl");
  manifest.output(out_dir / "truth.json");
  manifest.lap("write");
  manifest.write(out_dir);
  out << summary_to_json(summarize(data.events)) << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env) {
  CLI::App app{"Online engagement modelling: annotate, build, evaluate, sweep, report",
               "truelearn"};
  app.set_version_flag("--version", TRUELEARN_VERSION);
  app.require_subcommand(1);

  AnnotateArgs an;
  auto* annotate = app.add_subcommand("annotate", "Fragment transcripts and annotate them");
  annotate->add_option("--transcripts", an.transcripts, "Directory of <lecture_id>.txt files")
      ->required()
      ->check(CLI::ExistingDirectory);
  annotate->add_option("--out", an.out, "Output directory")->required();
  annotate->add_option("--cache", an.cache, "Annotation cache (default <out>/cache.jsonl)");
  annotate->add_option("--vocab", an.vocab, "Vocabulary TSV (default <out>/vocabulary.tsv)");
  annotate->add_option("--api-key-env", an.key_env, "Environment variable holding the API key")
      ->capture_default_str();
  annotate->add_option("--endpoint", an.endpoint, "Entity-linking endpoint")
      ->capture_default_str();
  annotate->add_option("--lang", an.language, "Transcript language")->capture_default_str();
  annotate->add_option("--concurrency", an.concurrency, "Requests in flight")
      ->check(CLI::PositiveNumber);
  annotate->add_option("--rps", an.rps, "Requests per second")->check(CLI::PositiveNumber);
  annotate->add_option("--fragment-chars", an.fragment_chars, "Fragment length")
      ->capture_default_str();

  BuildArgs bu;
  auto* build = app.add_subcommand("build", "Join view logs with annotations into events");
  build->add_option("--annotations", bu.annotations, "annotations.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--logs", bu.logs, "View-log CSV")->required()->check(CLI::ExistingFile);
  build->add_option("--durations", bu.durations, "CSV lecture_id,duration_seconds")
      ->check(CLI::ExistingFile);
  build->add_option("--top-k", bu.top_k, "Topics per event")->capture_default_str();
  build->add_option("--cohort", bu.cohort, "Keep the N most active learners (0 = all)");
  build->add_option("--w-pagerank", bu.w_pagerank, "Ranking weight of PageRank")
      ->capture_default_str();
  build->add_option("--w-cosine", bu.w_cosine, "Ranking weight of cosine")
      ->capture_default_str();
  build->add_option("--out", bu.out, "Output directory")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Sequential evaluation of one model");
  ev.model.add_to(*evaluate);
  evaluate->add_option("--events", ev.events, "events.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--out", ev.out, "Output directory")->required();
  evaluate->add_flag("--save-state", ev.save_state, "Write final model state to state.jsonl");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Grid search on train learners, test on the rest");
  sw.model.add_to(*sweep);
  sweep->add_option("--events", sw.events, "events.jsonl")->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", sw.grid, "Grid file (default ranges when omitted)")
      ->check(CLI::ExistingFile);
  sweep->add_option("--seed", sw.seed, "Split seed")->capture_default_str();
  sweep->add_option("--train-fraction", sw.train_fraction, "Share of train learners")
      ->capture_default_str();
  sweep->add_option("--objective", sw.objective, "accuracy, precision, recall or f1")
      ->capture_default_str();
  sweep->add_option("--out", sw.out, "Output directory")->required();

  ReportArgs re;
  auto* report = app.add_subcommand("report", "Compare reports and emit per-learner data");
  report->add_option("reports", re.reports, "report.json files")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", re.out, "Output directory");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event stream");
  synth->add_option("--seed", sy.spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--learners", sy.spec.learners, "Learners")->capture_default_str();
  synth->add_option("--events", sy.spec.total_events, "Total events")->capture_default_str();
  synth->add_option("--out", sy.out, "Output directory")->required();

  std::vector<const char*> argv{"truelearn"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*annotate) return cmd_annotate(an, args, env, out, err);
    if (*build) return cmd_build(bu, args, out);
    if (*evaluate) return cmd_evaluate(ev, args, out);
    if (*sweep) return cmd_sweep(sw, args, out);
    if (*report) return cmd_report(re, args, out);
    if (*synth) return cmd_synth(sy, args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ServiceError& e) {
    err << "service error: " << e.what() << '\n';
    return kServiceError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace truelearn::cli
