#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "support/temp_dir.hpp"
#include "truelearn/config.hpp"
#include "truelearn/error.hpp"
#include "truelearn/eval.hpp"

using namespace truelearn;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class CannedLinker : public EntityLinker {
 public:
  std::string annotate(std::string_view text, std::string_view) override {
    if (text.find("FAIL") != std::string_view::npos) throw ServiceError("down", false);
    const bool alt = text.find("beta") != std::string_view::npos;
    json body = {{"annotations",
                  {{{"title", "Topic A"}, {"url", "http://en.wikipedia.org/wiki/A"},
                    {"pageRank", 0.3}, {"cosine", 0.5}},
                   {{"title", alt ? "Topic C" : "Topic B"},
                    {"url", alt ? "http://en.wikipedia.org/wiki/C" : "http://en.wikipedia.org/wiki/B"},
                    {"pageRank", 0.1}, {"cosine", 0.2}}}}};
    return body.dump();
  }
  std::size_t max_chars() const override { return 25000; }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args, bool with_key = true) {
  cli::Environment env;
  env.getenv = [with_key](const std::string&) -> std::optional<std::string> {
    if (with_key) return "secret";
    return std::nullopt;
  };
  env.make_linker = [](const WikifierOptions& o) -> std::unique_ptr<EntityLinker> {
    EXPECT_EQ(o.api_key, "secret");
    return std::make_unique<CannedLinker>();
  };
  std::ostringstream out, err;
  const int code = cli::run(args, out, err, env);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string str(const fs::path& p) { return p.string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
  TempDir dir;
  spit(dir.path() / "e.jsonl", "");
  const auto bad_model = invoke({"evaluate", "--model", "nope", "--events",
                              str(dir.path() / "e.jsonl"), "--out", str(dir.path() / "o")});
  EXPECT_EQ(bad_model.code, cli::kUsage);
  EXPECT_NE(bad_model.err.find("truelearn-novelty"), std::string::npos) << bad_model.err;
  EXPECT_EQ(invoke({"evaluate", "--use-negative", "--positive-only", "--events",
                 str(dir.path() / "e.jsonl"), "--out", str(dir.path() / "o")})
                .code,
            cli::kUsage);
}

TEST(Cli, DataErrors) {
  TempDir dir;
  spit(dir.path() / "e.jsonl", "{not json\n");
  const auto r = invoke({"evaluate", "--model", "majority", "--events", str(dir.path() / "e.jsonl"), "--out",
                      str(dir.path() / "o")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, AnnotateBuildEvaluateReport) {
  TempDir dir;
  const fs::path tr = dir.path() / "transcripts";
  spit(tr / "L1.txt", std::string(6000, 'a') + " alpha");
  spit(tr / "L2.txt", "beta gamma delta");
  const fs::path ann = dir.path() / "ann";

  // Without a key nothing can be annotated.
  const auto nokey = invoke({"annotate", "--transcripts", str(tr), "--out", str(ann)}, false);
  EXPECT_EQ(nokey.code, cli::kUsage);
  EXPECT_NE(nokey.err.find(cli::kDefaultApiKeyEnv), std::string::npos);

  auto r = invoke({"annotate", "--transcripts", str(tr), "--out", str(ann)});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("service calls: 3"), std::string::npos) << r.out;
  // Fully cached: a second run needs no key.
  r = invoke({"annotate", "--transcripts", str(tr), "--out", str(ann)}, false);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("cache hits: 3"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(ann / "vocabulary.tsv"));
  EXPECT_TRUE(fs::exists(ann / "manifest.json"));

  spit(dir.path() / "logs.csv",
       "learner_id,lecture_id,timestamp,start_seconds,end_seconds\n"
       "u1,L1,1,0,300\nu1,L2,2,0,1\nu1,L1,3,0,20\nu2,L2,1,0,0.5\nu2,L1,2,300,400\n");
  const fs::path ev = dir.path() / "ev";
  r = invoke({"build", "--annotations", str(ann / "annotations.jsonl"), "--logs",
           str(dir.path() / "logs.csv"), "--out", str(ev)});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json summary = json::parse(slurp(ev / "summary.json"));
  EXPECT_EQ(summary.at("events"), 5);
  EXPECT_EQ(summary.at("learners"), 2);
  EXPECT_EQ(summary.at("unique_kcs"), 3);

  const fs::path out1 = dir.path() / "run1", out2 = dir.path() / "run2";
  for (const auto& o : {out1, out2}) {
    r = invoke({"evaluate", "--model", "truelearn-novelty", "--events", str(ev / "events.jsonl"),
             "--out", str(o), "--jobs", "2", "--save-state"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
  }
  for (const char* f : {"report.json", "report.txt", "state.jsonl"}) {
    EXPECT_EQ(slurp(out1 / f), slurp(out2 / f)) << f;
  }
  const EvalReport rep = report_from_json(slurp(out1 / "report.json"));
  EXPECT_EQ(rep.config.kind, ModelKind::kTrueLearnNovelty);
  EXPECT_EQ(rep.learners.size(), 2u);

  const json manifest = json::parse(slurp(out1 / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "evaluate");
  EXPECT_TRUE(manifest.contains("inputs"));
  EXPECT_TRUE(manifest.contains("timings_ms"));

  const fs::path base = dir.path() / "base";
  r = invoke({"evaluate", "--model", "majority", "--positive-only", "--events",
           str(ev / "events.jsonl"), "--out", str(base)});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const fs::path cmp = dir.path() / "cmp";
  r = invoke({"report", str(out1 / "report.json"), str(base / "report.json"), "--out", str(cmp)});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("majority"), std::string::npos);
  const std::string csv = slurp(cmp / "learners.csv");
  EXPECT_EQ(csv.rfind("# topic_sparsity", 0), 0u);
  EXPECT_NE(csv.find("\ntruelearn-novelty,true,u1,3,2,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nmajority,false,u2,2,1,"), std::string::npos) << csv;
}

TEST(Cli, AnnotateServiceFailureExitsThree) {
  TempDir dir;
  spit(dir.path() / "t" / "L1.txt", "this will FAIL");
  const auto r = invoke({"annotate", "--transcripts", str(dir.path() / "t"), "--out",
                      str(dir.path() / "a")});
  EXPECT_EQ(r.code, cli::kServiceError) << r.err;
  EXPECT_NE(r.err.find("failed"), std::string::npos);
}

TEST(Cli, SynthAndSweep) {
  TempDir dir;
  const fs::path syn = dir.path() / "syn";
  auto r = invoke({"synth", "--seed", "3", "--learners", "10", "--events", "300", "--out",
                str(syn)});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(fs::exists(syn / "truth.json"));

  spit(dir.path() / "grid.toml", "init_variance = [0.5, 1.0]\ntau = [0.0]\n");
  const fs::path sw1 = dir.path() / "sw1", sw2 = dir.path() / "sw2";
  for (const auto& o : {sw1, sw2}) {
    r = invoke({"sweep", "--model", "truelearn-novelty", "--events", str(syn / "events.jsonl"),
             "--grid", str(dir.path() / "grid.toml"), "--seed", "9", "--out", str(o)});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
  }
  const std::string csv = slurp(sw1 / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv, slurp(sw2 / "sweep.csv"));
  EXPECT_EQ(slurp(sw1 / "report.json"), slurp(sw2 / "report.json"));
  const EvalReport rep = report_from_json(slurp(sw1 / "report.json"));
  ASSERT_TRUE(rep.split.has_value());
  EXPECT_EQ(rep.split->train_learners.size(), 7u);
  EXPECT_EQ(rep.split->test_learners.size(), 3u);
  EXPECT_EQ(rep.learners.size(), 3u);
  EXPECT_EQ(json::parse(slurp(sw1 / "manifest.json")).at("seed"), 9);
  const ModelConfig best = parse_config(slurp(sw1 / "best_config.toml"));
  EXPECT_EQ(best, rep.config);

  spit(dir.path() / "empty.toml", "# nothing\n");
  r = invoke({"sweep", "--events", str(syn / "events.jsonl"), "--grid",
           str(dir.path() / "empty.toml"), "--out", str(dir.path() / "sw3")});
  EXPECT_EQ(r.code, cli::kUsage);
}
