#include <doctest.h>

#include <cmath>
#include <set>

#include "consortium/errors.hpp"
#include "consortium/experiments.hpp"
#include "consortium/response_table.hpp"
#include "support.hpp"

using namespace consortium;

namespace {

ModelSpec scored(const std::string& id, std::optional<double> score) {
  ModelSpec s;
  s.id = id;
  s.profile = "unused.json";
  s.mock_benchmark_score = score;
  return s;
}

std::vector<ModelSpec> pool_of(std::initializer_list<double> scores) {
  std::vector<ModelSpec> pool;
  for (double s : scores) pool.push_back(scored("m" + std::to_string(pool.size()), s));
  return pool;
}

}  // namespace

TEST_CASE("baselines and deltas") {
  const auto b = make_baselines({{"a", 0.80}, {"b", 0.75}, {"c", 0.70}});
  CHECK(b.hard == 0.80);
  CHECK(b.standard == 0.75);
  CHECK(b.worst_case == 0.70);
  CHECK(b[Baseline::Standard] == 0.75);
  CHECK(*delta_pct(0.82, b.hard) == doctest::Approx(2.5));
  CHECK(*delta_pct(0.70, 0.80) == doctest::Approx(-12.5));
  CHECK_FALSE(delta_pct(0.5, 0.0));

  CHECK(make_baselines({{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}}).standard == 2.5);
  CHECK_THROWS_AS(make_baselines({}), std::invalid_argument);
  CHECK(to_string(Baseline::WorstCase) == "worst_case");
}

TEST_CASE("a single-model consortium has zero deltas") {
  const auto ds = testing::mc_dataset(12);
  const auto run = testing::make_run(ds, {"a"}, 6, [](auto&, auto q, auto k) { return "AB"[(q + k) % 3 == 0]; });
  const auto table = ResponseTable::build(run, ds);
  const ResponseTable* singles[] = {&table};
  BootstrapConfig cfg;
  cfg.n_resamples = 20;
  const auto r = compare(table, singles, cfg);
  for (const auto& m : r.metrics)
    for (auto b : kAllBaselines) {
      const auto& d = m.delta_pct[static_cast<std::size_t>(b)];
      if (d) CHECK(*d == doctest::Approx(0.0));
    }
  CHECK(r[MetricKind::Accuracy].delta_pct[0].has_value());
}

TEST_CASE("compare on a hand-checked pair") {
  // a always answers A (gold), b always B. The consortium ties A and B on every question;
  // A appears first, so the consortium is always right with entropy ln 2.
  const auto ds = testing::mc_dataset(6);
  const auto joint = testing::make_run(ds, {"a", "b"}, 3, [](auto& m, auto, auto) { return m == "a" ? 'A' : 'B'; });
  const auto ra = testing::make_run(ds, {"a"}, 6, [](auto&, auto, auto) { return 'A'; });
  const auto rb = testing::make_run(ds, {"b"}, 6, [](auto&, auto, auto) { return 'B'; });
  const std::vector<RunRecord> singles = {ra, rb};
  BootstrapConfig cfg;
  cfg.n_resamples = 10;
  const auto r = compare(joint, singles, ds, cfg);
  CHECK(r.consortium_id == "a+b");
  CHECK(r.effective_n == 6);
  const auto& acc = r[MetricKind::Accuracy];
  CHECK(*acc.consortium.mean == 1.0);
  REQUIRE(acc.baselines);
  CHECK(acc.baselines->hard == 1.0);
  CHECK(acc.baselines->standard == 0.5);
  CHECK(acc.baselines->worst_case == 0.0);
  CHECK(*acc.delta_pct[0] == 0.0);
  CHECK(*acc.delta_pct[1] == doctest::Approx(100.0));
  CHECK_FALSE(acc.delta_pct[2]);
  CHECK(acc.improved(Baseline::Standard));
  CHECK_FALSE(acc.improved(Baseline::Hard));
  CHECK_FALSE(r[MetricKind::Auroc].consortium.mean);

  // singles at a different budget are rejected
  const std::vector<RunRecord> short_singles = {truncate(ra, plan_budget(1, 4)), rb};
  CHECK_THROWS_AS(compare(joint, short_singles, ds, cfg), std::invalid_argument);
}

TEST_CASE("enumerate_consortia") {
  const auto four = pool_of({70, 71, 72, 73});
  const auto all = enumerate_consortia(four, {});
  CHECK(all.size() == 11);
  CHECK(all.front().model_ids == std::vector<std::string>{"m0", "m1"});
  CHECK(all[5].model_ids == std::vector<std::string>{"m2", "m3"});
  CHECK(all.back().model_ids.size() == 4);

  SelectionOptions filter;
  filter.max_std = 5;
  filter.min_mean = 70;
  const auto three = pool_of({72, 74, 90});
  const auto kept = enumerate_consortia(three, filter);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].model_ids == std::vector<std::string>{"m0", "m1"});
  CHECK(*kept[0].mean_score == 73);
  CHECK(*kept[0].std_score == 1);

  SelectionOptions high;
  high.min_mean = 70;
  CHECK(enumerate_consortia(pool_of({60, 65}), high).empty());

  const auto pool4 = load_models_config(testing::fixture("pool4.ini"));
  const auto fixture = enumerate_consortia(pool4, filter);
  REQUIRE(fixture.size() == 1);
  CHECK(fixture[0].model_ids == std::vector<std::string>{"alpha", "beta"});

  SelectionOptions sized;
  sized.min_size = 3;
  sized.max_size = 3;
  CHECK(enumerate_consortia(four, sized).size() == 4);

  SelectionOptions sampled;
  sampled.sample = {{5, 9}};
  const auto s1 = enumerate_consortia(four, sampled), s2 = enumerate_consortia(four, sampled);
  REQUIRE(s1.size() == 5);
  std::set<std::vector<std::string>> distinct;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s1[i].model_ids == s2[i].model_ids);
    distinct.insert(s1[i].model_ids);
  }
  CHECK(distinct.size() == 5);
  sampled.sample = {{12, 9}};
  CHECK_THROWS_AS(enumerate_consortia(four, sampled), ConfigError);

  auto unscored = four;
  unscored[2].mock_benchmark_score.reset();
  CHECK_NOTHROW(enumerate_consortia(unscored, {}));
  CHECK_THROWS_AS(enumerate_consortia(unscored, filter), ConfigError);

  std::vector<ModelSpec> big;
  for (int i = 0; i < 31; ++i) big.push_back(scored("x" + std::to_string(i), 70));
  CHECK_THROWS_AS(enumerate_consortia(big, {}), ConfigError);
}

TEST_CASE("mock_benchmark") {
  const auto ds = testing::mc_dataset(10, "bench");
  const std::vector<Dataset> tasks = {ds};

  SyntheticProfile perfect;
  for (const auto& q : ds.questions) perfect.questions[q.id] = {{"A", 1.0}};
  SyntheticBackend p(scored("p", std::nullopt), perfect);
  CHECK(mock_benchmark(p, tasks) == 100.0);

  // greedy decoding takes the mode even when it holds only 60% of the mass
  SyntheticProfile seventy;
  for (std::size_t i = 0; i < ds.size(); ++i)
    seventy.questions[ds.questions[i].id] = i < 7 ? std::map<std::string, double>{{"A", .6}, {"B", .4}}
                                                   : std::map<std::string, double>{{"A", .4}, {"B", .6}};
  SyntheticBackend s(scored("s", std::nullopt), seventy);
  CHECK(mock_benchmark(s, tasks) == doctest::Approx(70.0));

  // averaged over tasks
  const std::vector<Dataset> two = {ds, ds};
  CHECK(mock_benchmark(s, two) == doctest::Approx(70.0));
  CHECK_THROWS_AS(mock_benchmark(s, std::span<const Dataset>{}), std::invalid_argument);
}

TEST_CASE("cost_report") {
  const auto ds = testing::mc_dataset(5);
  const auto one = testing::make_run(ds, {"a"}, 1, [](auto&, auto, auto) { return 'A'; });
  auto spec = scored("a", std::nullopt);
  spec.price_in = 1000;  // 10 input tokens per sample -> $0.01
  spec.price_out = 0;
  const std::vector<ModelSpec> specs = {spec};
  const auto r = cost_report(one, specs);
  CHECK(r.usd_per_query == doctest::Approx(0.01));
  CHECK(r.questions == 5);
  CHECK(r.tokens_in == 50);
  CHECK(r.tokens_out == 25);

  auto free = spec;
  free.price_in = 0;
  CHECK(cost_report(one, std::vector<ModelSpec>{free}).usd_per_query == 0.0);

  // two samples per question double the cost
  const auto two = testing::make_run(ds, {"a"}, 2, [](auto&, auto, auto) { return 'A'; });
  CHECK(cost_report(two, specs).usd_per_query == doctest::Approx(0.02));

  auto unpriced = spec;
  unpriced.price_in.reset();
  CHECK_THROWS_AS(cost_report(one, std::vector<ModelSpec>{unpriced}), ConfigError);

  // replay fixture: m1 at 40 x 1 + 12 x 2 = 64 micro-dollars per sample
  const auto replay_specs = load_models_config(testing::fixture("replay.ini"));
  RunRecord replay = testing::make_run(ds, {"m1"}, 3, [](auto&, auto, auto) { return 'A'; });
  for (auto& s : replay.samples) s.tokens_in = 40, s.tokens_out = 12;
  CHECK(cost_report(replay, replay_specs).usd_per_query == doctest::Approx(3 * 64e-6));
}

TEST_CASE("budget_sweep") {
  const auto ds = testing::mc_dataset(8);
  std::vector<ModelSpec> specs;
  BackendSet backends;
  for (int i = 0; i < 4; ++i) {
    auto spec = scored("m" + std::to_string(i), 70);
    spec.price_in = 0.5 + i;
    spec.price_out = 1.0;
    SyntheticProfile p;
    p.default_correct_prob = 0.4 + 0.1 * i;
    backends.emplace(spec.id, std::make_shared<SyntheticBackend>(spec, p));
    specs.push_back(spec);
  }
  const Consortium c({"m0", "m1", "m2", "m3"});
  const int budgets[] = {8, 16, 40};
  BootstrapConfig cfg;
  cfg.n_resamples = 10;
  RunOptions opt;
  opt.cache_dir = testing::scratch("sweep");
  const auto points = budget_sweep(c, ds, SamplingParams{}, budgets, specs, backends, opt, cfg);
  REQUIRE(points.size() == 3);
  const int per_model[] = {2, 4, 10};
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(points[i].budget.effective == budgets[i]);
    CHECK(points[i].budget.per_model == per_model[i]);
    CHECK(points[i].comparison.effective_n == static_cast<std::size_t>(budgets[i]));
    REQUIRE(points[i].consortium_cost);
    CHECK(points[i].single_model_cost.size() == 4);
    if (i) CHECK(points[i].consortium_cost->usd_per_query > points[i - 1].consortium_cost->usd_per_query);
  }

  // the largest point matches a direct comparison at that budget
  const auto joint = run_sampling(c, ds, SamplingParams{}, plan_budget(c, 40), backends, opt);
  const auto singles = single_model_runs(c, ds, SamplingParams{}, plan_budget(c, 40), backends, opt);
  const auto direct = compare(joint, singles, ds, cfg);
  CHECK(direct[MetricKind::Accuracy].consortium.mean == points[2].comparison[MetricKind::Accuracy].consortium.mean);

  const int too_big[] = {80};
  CHECK_THROWS_AS(budget_sweep(joint, singles, ds, too_big, specs, cfg), std::invalid_argument);
}

TEST_CASE("summarize") {
  std::vector<ComparisonRecord> records(3);
  records[0].metrics[0].delta_pct[1] = 10.0;
  records[1].metrics[0].delta_pct[1] = -2.0;
  const auto s = summarize(records);
  const auto& d = s[0][1];
  CHECK(d.defined == 2);
  CHECK(d.improved == 1);
  CHECK(*d.mean == doctest::Approx(4.0));
  CHECK(*d.std == doctest::Approx(6.0));
  CHECK(d.pct_improved() == 50.0);
  CHECK_FALSE(s[1][0].mean);
  CHECK(s[1][0].pct_improved() == 0.0);
}
