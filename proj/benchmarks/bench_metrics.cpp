#include <benchmark/benchmark.h>

#include <random>

#include "consortium/metrics.hpp"
#include "consortium/response_table.hpp"
#include "consortium/synthetic_population.hpp"

using namespace consortium;

static void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<std::string> ids(n);
  std::vector<Judgement> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = "q" + std::to_string(i);
    items[i] = {0.1 * static_cast<double>(rng() % 20), rng() % 3 != 0, ids[i]};
  }
  for (auto _ : state) benchmark::DoNotOptimize(auroc(items));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(4)->Range(256, 65536)->Complexity(benchmark::oNLogN);

static void BM_Aurac(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::vector<std::string> ids(n);
  std::vector<Judgement> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = "q" + std::to_string(i);
    items[i] = {0.1 * static_cast<double>(rng() % 20), rng() % 3 != 0, ids[i]};
  }
  for (auto _ : state) benchmark::DoNotOptimize(aurac(items));
}
BENCHMARK(BM_Aurac)->Arg(200)->Arg(2000);

// 200 questions, 4 models x 10 responses each.
static void BM_Bootstrap(benchmark::State& state) {
  PopulationConfig cfg;
  cfg.models = 4;
  auto pop = make_synthetic_population(cfg);
  std::vector<std::string> ids;
  for (const auto& s : pop.specs) ids.push_back(s.id);
  const Consortium team(ids);
  const auto run = run_sampling(team, pop.dataset, SamplingParams{}, plan_budget(team, 40), make_backends(pop));
  const auto table = ResponseTable::build(run, pop.dataset);
  BootstrapConfig boot;
  boot.n_resamples = static_cast<std::size_t>(state.range(0));
  boot.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_all(table, boot));
}
BENCHMARK(BM_Bootstrap)->Arg(100)->Unit(benchmark::kMillisecond);
