#include "truelearn/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "truelearn/error.hpp"

namespace truelearn {

using nlohmann::json;

void ConfusionCounts::add(Label predicted, Label actual) {
  const bool p = predicted == Label::kPositive;
  const bool a = actual == Label::kPositive;
  if (p && a) ++tp;
  else if (p) ++fp;
  else if (a) ++fn;
  else ++tn;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

double Metrics::get(std::string_view name) const {
  if (name == "accuracy") return accuracy;
  if (name == "precision") return precision;
  if (name == "recall") return recall;
  if (name == "f1") return f1;
  throw UsageError("unknown metric '" + std::string(name) +
                   "'; valid: accuracy, precision, recall, f1");
}

Metrics compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("cannot compute metrics from empty counts");
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

Metrics weighted_metrics(std::vector<LearnerResult>& learners) {
  std::size_t total = 0;
  for (const auto& l : learners) total += l.evaluated;
  Metrics w;
  if (total == 0) return w;
  for (auto& l : learners) {
    l.weight = static_cast<double>(l.evaluated) / static_cast<double>(total);
    w.accuracy += l.weight * l.metrics.accuracy;
    w.precision += l.weight * l.metrics.precision;
    w.recall += l.weight * l.metrics.recall;
    w.f1 += l.weight * l.metrics.f1;
  }
  return w;
}

void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

namespace {

struct LearnerRun {
  std::string learner_id;
  std::vector<const EngagementEvent*> events;
};

LearnerResult finish(const std::string& id, std::size_t events,
                     const ConfusionCounts& counts, std::size_t unique_kcs) {
  LearnerResult r;
  r.learner_id = id;
  r.events = events;
  r.evaluated = counts.total();
  r.unique_kcs = unique_kcs;
  r.counts = counts;
  if (r.evaluated > 0) r.metrics = compute_metrics(counts);
  return r;
}

std::string context(const EngagementEvent& e) {
  return " (learner " + e.learner_id + ", order " + std::to_string(e.order) + ")";
}

template <typename Fn>
auto with_context(const EngagementEvent& e, Fn&& fn) {
  try {
    return fn();
  } catch (const DegenerateEvidence&) {
    throw;
  } catch (const DataError& err) {
    throw DataError(err.what() + context(e));
  } catch (const DomainError& err) {
    throw DataError(err.what() + context(e));
  }
}

}  // namespace

EvalReport evaluate_sequential(const ModelConfig& cfg,
                               const std::vector<EngagementEvent>& events,
                               const EvalOptions& options) {
  cfg.validate();
  validate_event_stream(events);

  EvalReport report;
  report.config = cfg;
  report.dataset = summarize(events);

  if (is_global(cfg.kind)) {
    Model model(cfg);
    std::map<std::string, LearnerState> states;
    std::map<std::string, ConfusionCounts> counts;
    std::map<std::string, std::size_t> n_events;
    std::map<std::string, std::unordered_set<KcId>> kcs;
    for (const auto& e : events) {
      auto& state = states[e.learner_id];
      const Prediction p = with_context(e, [&] { return model.predict_and_update(state, e); });
      auto& c = counts[e.learner_id];
      if (e.order > 0) c.add(p.label, e.label);
      ++n_events[e.learner_id];
      for (const auto& t : e.topics) kcs[e.learner_id].insert(t.kc_id);
    }
    for (const auto& [id, c] : counts) {
      report.learners.push_back(finish(id, n_events[id], c, kcs[id].size()));
    }
    if (options.final_states) *options.final_states = std::move(states);
    if (options.final_resources) *options.final_resources = model.resources();
  } else {
    std::vector<LearnerRun> runs;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& e : events) {
      auto [it, inserted] = index.emplace(e.learner_id, runs.size());
      if (inserted) runs.push_back({e.learner_id, {}});
      runs[it->second].events.push_back(&e);
    }
    std::sort(runs.begin(), runs.end(), [](const LearnerRun& a, const LearnerRun& b) {
      return a.learner_id < b.learner_id;
    });
    std::vector<LearnerResult> results(runs.size());
    std::vector<LearnerState> finals(options.final_states ? runs.size() : 0);
    parallel_for(runs.size(), options.jobs, [&](std::size_t i) {
      Model model(cfg);
      LearnerState state;
      ConfusionCounts c;
      std::unordered_set<KcId> kcs;
      for (const EngagementEvent* e : runs[i].events) {
        const Prediction p = with_context(*e, [&] { return model.predict_and_update(state, *e); });
        if (e->order > 0) c.add(p.label, e->label);
        for (const auto& t : e->topics) kcs.insert(t.kc_id);
      }
      results[i] = finish(runs[i].learner_id, runs[i].events.size(), c, kcs.size());
      if (options.final_states) finals[i] = std::move(state);
    });
    report.learners = std::move(results);
    if (options.final_states) {
      options.final_states->clear();
      for (std::size_t i = 0; i < runs.size(); ++i) {
        options.final_states->emplace(runs[i].learner_id, std::move(finals[i]));
      }
    }
    if (options.final_resources) options.final_resources->clear();
  }

  for (const auto& l : report.learners) report.totals += l.counts;
  report.weighted = weighted_metrics(report.learners);
  return report;
}

// ---------------------------------------------------------------------------

LearnerSplit split_learners(std::vector<std::string> learner_ids, double train_fraction,
                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("train fraction must lie in (0, 1)");
  }
  std::sort(learner_ids.begin(), learner_ids.end());
  learner_ids.erase(std::unique(learner_ids.begin(), learner_ids.end()), learner_ids.end());
  const std::size_t n = learner_ids.size();
  if (n < 2) throw DataError("a train/test split needs at least 2 learners");

  // Fisher-Yates with an unbiased bounded draw; std::shuffle and
  // uniform_int_distribution are implementation-defined.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(learner_ids[i], learner_ids[draw % bound]);
  }
  auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  LearnerSplit split;
  split.train.assign(learner_ids.begin(), learner_ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(learner_ids.begin() + static_cast<std::ptrdiff_t>(n_train), learner_ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<EngagementEvent> filter_learners(const std::vector<EngagementEvent>& events,
                                             const std::vector<std::string>& learners) {
  const std::unordered_set<std::string> keep(learners.begin(), learners.end());
  std::vector<EngagementEvent> out;
  for (const auto& e : events) {
    if (keep.count(e.learner_id)) out.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

std::size_t GridSpec::size() const {
  const auto dim = [](const std::vector<double>& v) { return std::max<std::size_t>(1, v.size()); };
  return dim(init_variance) * dim(kt_noise) * dim(tau) * dim(beta);
}

bool GridSpec::empty() const {
  return init_variance.empty() && kt_noise.empty() && tau.empty() && beta.empty();
}

std::vector<ModelConfig> GridSpec::expand(const ModelConfig& base) const {
  const auto or_base = [](const std::vector<double>& v, double b) {
    return v.empty() ? std::vector<double>{b} : v;
  };
  std::vector<ModelConfig> out;
  for (double s : or_base(init_variance, base.init_variance)) {
    for (double n : or_base(kt_noise, base.kt_noise)) {
      for (double t : or_base(tau, base.tau)) {
        for (double b : or_base(beta, base.beta)) {
          ModelConfig cfg = base;
          cfg.init_variance = s;
          cfg.kt_noise = n;
          cfg.tau = t;
          cfg.beta = b;
          out.push_back(cfg);
        }
      }
    }
  }
  return out;
}

GridSpec GridSpec::defaults_for(ModelKind kind) {
  GridSpec g;
  if (is_baseline(kind)) return g;
  g.tau = {0.0, 0.01, 0.05, 0.1};
  if (kind == ModelKind::kMultiSkillKt) {
    for (int i = 0; i <= 6; ++i) g.kt_noise.push_back(0.05 * i);
  } else if (kind != ModelKind::kVanillaTrueSkill &&
             kind != ModelKind::kVanillaTrueSkillVideo) {
    for (int i = 1; i <= 20; ++i) g.init_variance.push_back(0.1 * i);
  } else {
    g.tau.clear();
  }
  return g;
}

SweepResult grid_search(const ModelConfig& base, const GridSpec& grid,
                        const std::vector<EngagementEvent>& train_events,
                        std::string_view objective, std::size_t jobs) {
  if (grid.empty()) throw UsageError("empty grid");
  Metrics{}.get(objective);  // validates the name

  const auto configs = grid.expand(base);
  SweepResult result;
  result.rows.resize(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    SweepRow& row = result.rows[i];
    row.config = configs[i];
    try {
      row.metrics = evaluate_sequential(configs[i], train_events).weighted;
    } catch (const Error& e) {
      row.error = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    if (!row.metrics) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& cur = result.rows[*best];
    const double a = row.metrics->get(objective);
    const double b = cur.metrics->get(objective);
    if (a != b) {
      if (a > b) best = i;
      continue;
    }
    const auto key = [](const ModelConfig& c) {
      return std::tie(c.init_variance, c.kt_noise, c.tau, c.beta);
    };
    if (key(row.config) < key(cur.config)) best = i;
  }
  if (!best) throw DataError("every grid point failed; first error: " + result.rows.front().error);
  result.best_index = *best;
  return result;
}

namespace {

std::string shortest(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string sweep_to_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "model,init_variance,kt_noise,tau,beta,use_negative,accuracy,precision,recall,f1,error\n";
  for (const auto& row : sweep.rows) {
    const auto& c = row.config;
    out << to_string(c.kind) << ',' << shortest(c.init_variance) << ','
        << shortest(c.kt_noise) << ',' << shortest(c.tau) << ',' << shortest(c.beta) << ','
        << (c.use_negative ? "true" : "false") << ',';
    if (row.metrics) {
      out << shortest(row.metrics->accuracy) << ',' << shortest(row.metrics->precision) << ','
          << shortest(row.metrics->recall) << ',' << shortest(row.metrics->f1) << ",\n";
    } else {
      std::string err = row.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << ",,,," << err << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

Metrics metrics_from(const json& j) {
  return {j.at("accuracy").get<double>(), j.at("precision").get<double>(),
          j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

ConfusionCounts counts_from(const json& j) {
  return {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
          j.at("tn").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

json config_json(const ModelConfig& c) {
  return {{"model", to_string(c.kind)},
          {"init_mean", c.init_mean},
          {"init_variance", c.init_variance},
          {"beta", c.beta},
          {"tau", c.tau},
          {"use_negative", c.use_negative},
          {"top_k", c.top_k},
          {"kt_noise", c.kt_noise},
          {"default_engagement_rate", c.default_engagement_rate}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.kind = parse_model_kind(j.at("model").get<std::string>());
  c.init_mean = j.at("init_mean").get<double>();
  c.init_variance = j.at("init_variance").get<double>();
  c.beta = j.at("beta").get<double>();
  c.tau = j.at("tau").get<double>();
  c.use_negative = j.at("use_negative").get<bool>();
  c.top_k = j.at("top_k").get<std::size_t>();
  c.kt_noise = j.at("kt_noise").get<double>();
  c.default_engagement_rate = j.at("default_engagement_rate").get<double>();
  return c;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json learners = json::array();
  for (const auto& l : r.learners) {
    learners.push_back({{"learner_id", l.learner_id},
                        {"events", l.events},
                        {"evaluated", l.evaluated},
                        {"unique_kcs", l.unique_kcs},
                        {"counts", counts_json(l.counts)},
                        {"metrics", metrics_json(l.metrics)},
                        {"weight", l.weight}});
  }
  json j = {{"schema_version", r.schema_version},
            {"config", config_json(r.config)},
            {"dataset", json::parse(summary_to_json(r.dataset))},
            {"learners", std::move(learners)},
            {"totals", counts_json(r.totals)},
            {"weighted", metrics_json(r.weighted)}};
  if (r.split) {
    j["split"] = {{"seed", r.split->seed},
                  {"train_fraction", r.split->train_fraction},
                  {"train_learners", r.split->train_learners},
                  {"test_learners", r.split->test_learners}};
  } else {
    j["split"] = nullptr;
  }
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw DataError("unsupported report schema version " + std::to_string(r.schema_version) +
                      " (expected " + std::to_string(kReportSchemaVersion) + ")");
    }
    r.config = config_from(j.at("config"));
    r.dataset = summary_from_json(j.at("dataset").dump());
    for (const auto& l : j.at("learners")) {
      LearnerResult lr;
      lr.learner_id = l.at("learner_id").get<std::string>();
      lr.events = l.at("events").get<std::size_t>();
      lr.evaluated = l.at("evaluated").get<std::size_t>();
      lr.unique_kcs = l.at("unique_kcs").get<std::size_t>();
      lr.counts = counts_from(l.at("counts"));
      lr.metrics = metrics_from(l.at("metrics"));
      lr.weight = l.at("weight").get<double>();
      r.learners.push_back(std::move(lr));
    }
    r.totals = counts_from(j.at("totals"));
    r.weighted = metrics_from(j.at("weighted"));
    if (const auto& s = j.at("split"); !s.is_null()) {
      SplitInfo split;
      split.seed = s.at("seed").get<std::uint64_t>();
      split.train_fraction = s.at("train_fraction").get<double>();
      split.train_learners = s.at("train_learners").get<std::vector<std::string>>();
      split.test_learners = s.at("test_learners").get<std::vector<std::string>>();
      r.split = std::move(split);
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

namespace {

std::string fixed3(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << x;
  return s.str();
}

}  // namespace

std::string report_to_table(const EvalReport& r) {
  std::ostringstream out;
  out << "model: " << to_string(r.config.kind)
      << (r.config.use_negative ? " (positive and negative engagement)" : " (positive engagement only)")
      << "\nlearners: " << r.dataset.learners << "  events: " << r.dataset.events
      << "  unique KCs: " << r.dataset.unique_kcs << "\n\n";
  out << std::left << std::setw(24) << "learner" << std::right << std::setw(8) << "events"
      << std::setw(6) << "tp" << std::setw(6) << "fp" << std::setw(6) << "tn" << std::setw(6)
      << "fn" << std::setw(8) << "acc" << std::setw(8) << "prec" << std::setw(8) << "rec"
      << std::setw(8) << "f1" << '\n';
  for (const auto& l : r.learners) {
    out << std::left << std::setw(24) << l.learner_id << std::right << std::setw(8) << l.events
        << std::setw(6) << l.counts.tp << std::setw(6) << l.counts.fp << std::setw(6)
        << l.counts.tn << std::setw(6) << l.counts.fn << std::setw(8) << fixed3(l.metrics.accuracy)
        << std::setw(8) << fixed3(l.metrics.precision) << std::setw(8)
        << fixed3(l.metrics.recall) << std::setw(8) << fixed3(l.metrics.f1) << '\n';
  }
  out << "\nweighted  acc " << fixed3(r.weighted.accuracy) << "  prec "
      << fixed3(r.weighted.precision) << "  rec " << fixed3(r.weighted.recall) << "  f1 "
      << fixed3(r.weighted.f1) << '\n';
  return out.str();
}

std::string comparison_table(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "Algorithm" << std::setw(10) << "negative" << std::right
      << std::setw(8) << "Acc." << std::setw(8) << "Prec." << std::setw(8) << "Rec."
      << std::setw(8) << "F1" << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(28) << to_string(r.config.kind) << std::setw(10)
        << (r.config.use_negative ? "yes" : "no") << std::right << std::setw(8)
        << fixed3(r.weighted.accuracy) << std::setw(8) << fixed3(r.weighted.precision)
        << std::setw(8) << fixed3(r.weighted.recall) << std::setw(8) << fixed3(r.weighted.f1)
        << '\n';
  }
  return out.str();
}

}  // namespace truelearn
