#include "consortium/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "consortium/errors.hpp"
#include "consortium/seeding.hpp"

namespace consortium {

std::string_view to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::Hard: return "hard";
    case Baseline::Standard: return "standard";
    case Baseline::WorstCase: return "worst_case";
  }
  return "unknown";
}

double BaselineSet::operator[](Baseline b) const {
  switch (b) {
    case Baseline::Hard: return hard;
    case Baseline::Standard: return standard;
    case Baseline::WorstCase: return worst_case;
  }
  return standard;
}

BaselineSet make_baselines(const std::map<std::string, double>& per_model_scores) {
  if (per_model_scores.empty()) throw std::invalid_argument("no single-model scores");
  std::vector<double> v;
  for (const auto& [id, score] : per_model_scores) v.push_back(score);
  std::sort(v.begin(), v.end());
  BaselineSet b;
  b.per_model = per_model_scores;
  b.worst_case = v.front();
  b.hard = v.back();
  const std::size_t n = v.size();
  b.standard = n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  return b;
}

std::optional<double> delta_pct(double value, double baseline) {
  if (baseline == 0.0) return std::nullopt;
  return 100.0 * (value - baseline) / baseline;
}

bool MetricComparison::improved(Baseline b) const {
  const auto& d = delta_pct[static_cast<std::size_t>(b)];
  return d && *d > 0.0;
}

const MetricComparison& ComparisonRecord::operator[](MetricKind metric) const {
  return metrics[static_cast<std::size_t>(metric)];
}

ComparisonRecord compare(const ResponseTable& consortium,
                         std::span<const ResponseTable* const> single_models,
                         const BootstrapConfig& config) {
  for (const auto* s : single_models) {
    if (s->model_ids().size() != 1)
      throw std::invalid_argument("baseline tables must hold a single model");
    if (s->total_per_question() != consortium.total_per_question())
      throw std::invalid_argument("baseline " + s->model_ids().front() + " uses N=" +
                                  std::to_string(s->total_per_question()) + ", consortium N=" +
                                  std::to_string(consortium.total_per_question()));
    if (s->questions().size() != consortium.questions().size())
      throw std::invalid_argument("baseline " + s->model_ids().front() +
                                  " was scored on a different dataset");
    for (std::size_t q = 0; q < s->questions().size(); ++q)
      if (s->questions()[q].question->id != consortium.questions()[q].question->id)
        throw std::invalid_argument("baseline " + s->model_ids().front() +
                                    " was scored on a different dataset");
  }

  ComparisonRecord rec;
  rec.model_ids = consortium.model_ids();
  rec.consortium_id = Consortium(rec.model_ids).label();
  rec.effective_n = consortium.total_per_question();

  const auto cons = bootstrap_all(consortium, config);
  std::map<std::string, std::array<MetricValue, 3>> singles;
  for (const auto* s : single_models) singles.emplace(s->model_ids().front(), bootstrap_all(*s, config));

  for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
    MetricComparison& mc = rec.metrics[m];
    mc.metric = kAllMetrics[m];
    mc.consortium = cons[m];
    std::map<std::string, double> scores;
    for (const auto& [id, values] : singles) {
      mc.single_model.emplace(id, values[m]);
      if (values[m].mean) scores.emplace(id, *values[m].mean);
    }
    if (!scores.empty()) mc.baselines = make_baselines(scores);
    if (mc.baselines && mc.consortium.mean) {
      for (Baseline b : kAllBaselines)
        mc.delta_pct[static_cast<std::size_t>(b)] = delta_pct(*mc.consortium.mean, (*mc.baselines)[b]);
    }
  }
  return rec;
}

ComparisonRecord compare(const RunRecord& consortium, std::span<const RunRecord> single_models,
                         const Dataset& dataset, const BootstrapConfig& config) {
  for (const auto& s : single_models) {
    if (s.dataset_hash != consortium.dataset_hash)
      throw std::invalid_argument("run " + s.run_id + " used a different dataset");
    if (s.budget.effective != consortium.budget.effective)
      throw std::invalid_argument("run " + s.run_id + " uses N=" + std::to_string(s.budget.effective) +
                                  ", consortium N=" + std::to_string(consortium.budget.effective));
    if (!(s.params == consortium.params))
      throw std::invalid_argument("run " + s.run_id + " used different sampling parameters");
  }
  const auto table = ResponseTable::build(consortium, dataset);
  std::vector<ResponseTable> tables;
  tables.reserve(single_models.size());
  for (const auto& s : single_models) tables.push_back(ResponseTable::build(s, dataset));
  std::vector<const ResponseTable*> ptrs;
  for (const auto& t : tables) ptrs.push_back(&t);
  return compare(table, ptrs, config);
}

CostReport cost_report(const RunRecord& run, std::span<const ModelSpec> specs) {
  CostReport r;
  r.run_label = run.consortium.label();
  std::set<std::string_view> questions;
  for (const auto& s : run.samples) questions.insert(s.question_id);
  r.questions = questions.size();
  for (const auto& id : run.consortium.model_ids()) {
    auto it = std::find_if(specs.begin(), specs.end(), [&](const ModelSpec& s) { return s.id == id; });
    if (it == specs.end()) throw ConfigError("no model spec for '" + id + "'");
    if (!it->price_in || !it->price_out) throw ConfigError("model '" + id + "' has no pricing");
    ModelCost mc;
    mc.model_id = id;
    double usd = 0.0;
    for (const auto& s : run.samples) {
      if (s.model_id != id) continue;
      ++mc.samples;
      mc.tokens_in += s.tokens_in;
      mc.tokens_out += s.tokens_out;
      usd += (static_cast<double>(s.tokens_in) * *it->price_in +
              static_cast<double>(s.tokens_out) * *it->price_out) /
             1e6;
    }
    mc.usd_per_query = r.questions ? usd / static_cast<double>(r.questions) : 0.0;
    r.usd_per_query += mc.usd_per_query;
    r.tokens_in += mc.tokens_in;
    r.tokens_out += mc.tokens_out;
    r.models.push_back(std::move(mc));
  }
  return r;
}

std::vector<CostReport> cost_report(std::span<const RunRecord> runs, std::span<const ModelSpec> specs) {
  std::vector<CostReport> out;
  for (const auto& r : runs) out.push_back(cost_report(r, specs));
  return out;
}

namespace {

bool priced(const Consortium& c, std::span<const ModelSpec> specs) {
  for (const auto& id : c.model_ids()) {
    auto it = std::find_if(specs.begin(), specs.end(), [&](const ModelSpec& s) { return s.id == id; });
    if (it == specs.end() || !it->price_in || !it->price_out) return false;
  }
  return true;
}

}  // namespace

std::vector<SweepPoint> budget_sweep(const RunRecord& consortium,
                                     std::span<const RunRecord> single_models,
                                     const Dataset& dataset, std::span<const int> budgets,
                                     std::span<const ModelSpec> specs,
                                     const BootstrapConfig& config) {
  std::vector<BudgetPlan> plans;
  for (int b : budgets) {
    const auto plan = plan_budget(consortium.consortium, b);
    if (plan.per_model > consortium.budget.per_model)
      throw std::invalid_argument("budget " + std::to_string(b) + " needs " +
                                  std::to_string(plan.per_model) +
                                  " cached samples per model, the consortium run has " +
                                  std::to_string(consortium.budget.per_model));
    for (const auto& s : single_models)
      if (plan.effective > s.budget.per_model)
        throw std::invalid_argument("budget " + std::to_string(b) + " needs " +
                                    std::to_string(plan.effective) + " cached samples from " +
                                    s.consortium.label() + ", which has " +
                                    std::to_string(s.budget.per_model));
    plans.push_back(plan);
  }

  std::vector<SweepPoint> out;
  for (const auto& plan : plans) {
    SweepPoint p;
    p.budget = plan;
    const RunRecord cons = truncate(consortium, plan);
    std::vector<RunRecord> singles;
    for (const auto& s : single_models)
      singles.push_back(truncate(s, plan_budget(s.consortium, plan.effective)));
    p.comparison = compare(cons, singles, dataset, config);
    if (priced(cons.consortium, specs)) p.consortium_cost = cost_report(cons, specs);
    for (const auto& s : singles)
      if (priced(s.consortium, specs)) p.single_model_cost.emplace(s.consortium.label(), cost_report(s, specs));
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SweepPoint> budget_sweep(const Consortium& consortium, const Dataset& dataset,
                                     const SamplingParams& params, std::span<const int> budgets,
                                     std::span<const ModelSpec> specs, const BackendSet& backends,
                                     const RunOptions& options, const BootstrapConfig& config) {
  if (budgets.empty()) throw std::invalid_argument("no budgets to sweep");
  const int largest = *std::max_element(budgets.begin(), budgets.end());
  const auto plan = plan_budget(consortium, largest);
  const auto run = run_sampling(consortium, dataset, params, plan, backends, options);
  const auto singles = single_model_runs(consortium, dataset, params, plan, backends, options);
  return budget_sweep(run, singles, dataset, budgets, specs, config);
}

std::vector<ConsortiumCandidate> enumerate_consortia(std::span<const ModelSpec> pool,
                                                     const SelectionOptions& options) {
  const std::size_t n = pool.size();
  if (n > 30) throw ConfigError("pool of " + std::to_string(n) + " models is too large to enumerate");
  const bool filtering = options.max_std || options.min_mean;
  if (filtering)
    for (const auto& s : pool)
      if (!s.mock_benchmark_score)
        throw ConfigError("model '" + s.id + "' has no mock_benchmark_score to filter on");
  const std::size_t min_size = std::max<std::size_t>(options.min_size, 1);
  const std::size_t max_size = std::min(options.max_size.value_or(n), n);

  std::vector<ConsortiumCandidate> out;
  for (std::size_t size = min_size; size <= max_size; ++size) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
      ConsortiumCandidate c;
      bool scored = true;
      std::vector<double> scores;
      for (std::size_t i : idx) {
        c.model_ids.push_back(pool[i].id);
        if (pool[i].mock_benchmark_score) scores.push_back(*pool[i].mock_benchmark_score);
        else scored = false;
      }
      if (scored) {
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) /
                            static_cast<double>(scores.size());
        double ss = 0.0;
        for (double s : scores) ss += (s - mean) * (s - mean);
        c.mean_score = mean;
        c.std_score = std::sqrt(ss / static_cast<double>(scores.size()));
      }
      const bool keep = (!options.max_std || *c.std_score <= *options.max_std) &&
                        (!options.min_mean || *c.mean_score >= *options.min_mean);
      if (keep) out.push_back(std::move(c));

      // next combination in lexicographic order
      std::size_t k = size;
      while (k > 0 && idx[k - 1] == n - size + (k - 1)) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }

  if (options.sample) {
    const auto [k, seed] = *options.sample;
    if (k > out.size())
      throw ConfigError("cannot sample " + std::to_string(k) + " consortia from " +
                        std::to_string(out.size()) + " candidates");
    std::vector<ConsortiumCandidate> chosen;
    Rng rng(derive_seed(seed, "selection"));
    std::sample(std::make_move_iterator(out.begin()), std::make_move_iterator(out.end()),
                std::back_inserter(chosen), k, rng);
    return chosen;
  }
  return out;
}

double mock_benchmark(ModelBackend& backend, std::span<const Dataset> benchmarks,
                      const SamplingParams& base) {
  if (benchmarks.empty()) throw std::invalid_argument("mock benchmark needs at least one task");
  SamplingParams greedy = base;
  greedy.temperature = 0.0;
  greedy.top_p = 1.0;
  double sum = 0.0;
  for (const auto& task : benchmarks) {
    if (task.questions.empty()) throw std::invalid_argument("benchmark task '" + task.name + "' is empty");
    std::size_t correct = 0;
    for (const auto& q : task.questions) {
      const auto sample = backend.generate(q, greedy, 0);
      if (equivalent(extract_answer(sample.text, q), q.gold, q.kind)) ++correct;
    }
    sum += static_cast<double>(correct) / static_cast<double>(task.questions.size());
  }
  return 100.0 * sum / static_cast<double>(benchmarks.size());
}

ImprovementSummary summarize(std::span<const ComparisonRecord> records) {
  ImprovementSummary out{};
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<double> deltas;
      DeltaSummary& d = out[m][b];
      for (const auto& r : records) {
        const auto& delta = r.metrics[m].delta_pct[b];
        if (!delta) continue;
        deltas.push_back(*delta);
        if (*delta > 0.0) ++d.improved;
      }
      d.defined = deltas.size();
      if (deltas.empty()) continue;
      const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) /
                          static_cast<double>(deltas.size());
      double ss = 0.0;
      for (double x : deltas) ss += (x - mean) * (x - mean);
      d.mean = mean;
      d.std = std::sqrt(ss / static_cast<double>(deltas.size()));
    }
  }
  return out;
}

}  // namespace consortium
