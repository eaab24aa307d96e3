#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "truelearn/eval.hpp"
#include "truelearn/gaussmath.hpp"
#include "truelearn/models.hpp"
#include "truelearn/synthetic.hpp"

using namespace truelearn;

namespace {

std::vector<double> points(std::size_t n, double lo, double hi) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (auto& x : out) x = u(rng);
  return out;
}

void BM_StdCdf(benchmark::State& state) {
  const auto ts = points(1024, -8, 8);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(std_cdf(ts[i++ & 1023]));
}
BENCHMARK(BM_StdCdf);

void BM_VGreater(benchmark::State& state) {
  const auto ts = points(1024, -10, 6);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(v_greater(ts[i++ & 1023]));
}
BENCHMARK(BM_VGreater);

void BM_TruncateWithin(benchmark::State& state) {
  const auto mus = points(1024, -3, 3);
  const double margin = static_cast<double>(state.range(0)) / 100.0;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncate_within({mus[i++ & 1023], 1.5}, margin));
  }
}
// Narrow margins take the quadrature path, wide ones the closed form.
BENCHMARK(BM_TruncateWithin)->Arg(5)->Arg(50)->Arg(300);

void BM_KtUpdate(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  EngagementEvent e{"u", "L", 0, 0, {}, Label::kPositive};
  for (std::size_t h = 0; h < k; ++h) e.topics.push_back({static_cast<KcId>(h), 0.5});
  for (auto _ : state) {
    BernoulliSkillState s;
    update_kt(s, e, 0.1, true);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_KtUpdate)->DenseRange(2, 10, 4);

void BM_Evaluate(benchmark::State& state) {
  SyntheticSpec spec;
  spec.learners = 1000;
  spec.total_events = 20000;
  const auto events = generate_synthetic(spec).events;
  const auto cfg = ModelConfig::defaults_for(static_cast<ModelKind>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_sequential(cfg, events));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
  state.SetLabel(std::string(to_string(cfg.kind)));
}
BENCHMARK(BM_Evaluate)
    ->Arg(static_cast<int>(ModelKind::kMajority))
    ->Arg(static_cast<int>(ModelKind::kMultiSkillKt))
    ->Arg(static_cast<int>(ModelKind::kTrueLearnDynamicDepth))
    ->Arg(static_cast<int>(ModelKind::kTrueLearnNovelty))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
