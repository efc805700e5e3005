#include <benchmark/benchmark.h>

#include <random>

#include "consortium/clustering.hpp"

using namespace consortium;

namespace {

Question math_question() {
  Question q;
  q.id = "m";
  q.kind = TaskKind::Math;
  q.gold = CanonicalAnswer::number(*parse_number("1024"));
  q.gold_text = "1024";
  return q;
}

std::vector<ResponseSample> responses(std::size_t n, std::uint64_t seed) {
  static const char* forms[] = {"1,024", "$1024.00", "2048/2", "1023", "512", "0.5", "50%", "I am not sure."};
  std::mt19937_64 rng(seed);
  std::vector<ResponseSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    ResponseSample s;
    s.model_id = "m" + std::to_string(i % 4);
    s.question_id = "m";
    s.sample_index = static_cast<int>(i / 4);
    s.text = std::string("Let me work through it step by step. The final answer is ") + forms[rng() % 8];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

static void BM_ExtractAnswer(benchmark::State& state) {
  const auto q = math_question();
  const auto r = responses(64, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(extract_answer(r[i++ % r.size()].text, q));
}
BENCHMARK(BM_ExtractAnswer);

static void BM_ClusterResponses(benchmark::State& state) {
  const auto q = math_question();
  const auto r = responses(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(cluster_responses(r, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClusterResponses)->Arg(40)->Arg(160)->Arg(640);
