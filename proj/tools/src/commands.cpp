#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "consortium/clustering.hpp"
#include "consortium/errors.hpp"
#include "consortium/experiments.hpp"
#include "consortium/metrics.hpp"
#include "consortium/orchestrator.hpp"
#include "consortium/response_table.hpp"
#include "consortium/seeding.hpp"
#include "consortium/synthetic_population.hpp"
#include "report.hpp"

namespace fs = std::filesystem;

namespace consortium::cli {
namespace {

// ---- shared option plumbing ---------------------------------------------------

struct Common {
  std::string models;
  std::string dataset;
  std::string consortium;
  int budget = 40;
  double top_p = 0.9;
  double temperature = 0.5;
  std::size_t bootstrap = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string cache = ".consortium-cache";
  bool cache_only = false;
  bool baselines = true;
  std::size_t workers = 0;
  std::string manifest;
};

void add_sampling(CLI::App* cmd, Common& c) {
  cmd->add_option("--models", c.models, "Models config file")->required();
  cmd->add_option("--dataset", c.dataset, "Dataset (JSONL)")->required();
  cmd->add_option("--consortium", c.consortium, "Member model ids, comma separated")->required();
  cmd->add_option("--top-p", c.top_p, "Nucleus sampling threshold")->capture_default_str();
  cmd->add_option("--temperature", c.temperature, "Sampling temperature")->capture_default_str();
  cmd->add_option("--cache", c.cache, "Response cache directory")->capture_default_str();
  cmd->add_flag("--cache-only", c.cache_only, "Never call a backend; fail on missing cells");
  cmd->add_option("--workers", c.workers, "Concurrent requests (0: 4 per model)");
}

void add_seed(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
}

void add_bootstrap(CLI::App* cmd, Common& c) {
  cmd->add_option("--bootstrap", c.bootstrap, "Bootstrap resamples")->capture_default_str();
}

std::vector<std::string> split_ids(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("--consortium lists no model ids");
  return out;
}

SamplingParams sampling_params(const Common& c) {
  SamplingParams p;
  p.top_p = c.top_p;
  p.temperature = c.temperature;
  p.seed = derive_seed(c.seed, "sampling");
  p.validate();
  return p;
}

BootstrapConfig bootstrap_config(std::size_t n, std::uint64_t seed) {
  BootstrapConfig b;
  b.n_resamples = n;
  b.seed = derive_seed(seed, "bootstrap");
  b.validate();
  return b;
}

std::vector<ModelSpec> members(const std::vector<ModelSpec>& specs, const std::vector<std::string>& ids) {
  std::vector<ModelSpec> out;
  for (const auto& id : ids) {
    if (std::none_of(specs.begin(), specs.end(), [&](const ModelSpec& s) { return s.id == id; }))
      throw ConfigError("model '" + id + "' is not defined in the models config");
    out.push_back(find_model(specs, id));
  }
  return out;
}

RunOptions run_options(const Common& c, std::ostream& err) {
  RunOptions o;
  o.cache_dir = c.cache;
  o.cache_only = c.cache_only;
  o.workers = c.workers;
  auto last = std::make_shared<std::size_t>(0);
  o.progress = [&err, last](std::size_t done, std::size_t total) {
    const std::size_t pct = total ? done * 10 / total : 10;
    if (pct > *last || done == total) {
      *last = pct;
      err << "  sampled " << done << "/" << total << "\n";
    }
  };
  return o;
}

json params_json(const SamplingParams& p) {
  return {{"top_p", p.top_p}, {"temperature", p.temperature}, {"max_tokens", p.max_tokens},
          {"cot", p.cot}, {"seed", p.seed}};
}

json budget_json(const BudgetPlan& b) {
  return {{"requested", b.requested}, {"effective", b.effective}, {"per_model", b.per_model}};
}

std::string fmt_pm(const MetricValue& v) {
  if (!v.mean) return "n/a";
  return fixed(v.mean) + " ± " + fixed(v.std);
}

json metric_json(const MetricValue& v) {
  return {{"metric", std::string(to_string(v.name))}, {"raw", opt(v.raw)},     {"mean", opt(v.mean)},
          {"std", v.mean ? json(v.std) : json(nullptr)}, {"resamples_used", v.resamples_used},
          {"resamples_excluded", v.resamples_excluded}, {"unreliable", v.unreliable}};
}

// ---- experiment manifest ------------------------------------------------------

struct Experiment {
  fs::path models;
  fs::path dataset_path;
  Dataset dataset;
  std::vector<ModelSpec> specs;
  Consortium consortium;
  BudgetPlan budget;
  SamplingParams params;
  std::uint64_t seed = 0;
  fs::path cache;
  fs::path consortium_run;
  std::vector<fs::path> baseline_runs;
  fs::path dir;
};

Experiment load_experiment(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
  }
  Experiment x;
  try {
    x.dir = manifest.parent_path();
    x.models = j.at("models").get<std::string>();
    x.dataset_path = j.at("dataset").get<std::string>();
    x.consortium = Consortium(j.at("consortium").get<std::vector<std::string>>());
    x.budget = plan_budget(x.consortium, j.at("budget").at("requested").get<int>());
    const auto& p = j.at("params");
    x.params.top_p = p.at("top_p");
    x.params.temperature = p.at("temperature");
    x.params.max_tokens = p.at("max_tokens");
    x.params.cot = p.at("cot");
    x.params.seed = p.at("seed");
    x.seed = j.at("seed");
    x.cache = j.at("cache").get<std::string>();
    x.consortium_run = j.at("runs").at("consortium").at("dir").get<std::string>();
    for (const auto& b : j.at("runs").at("baselines")) x.baseline_runs.emplace_back(b.at("dir").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + manifest.string() + ": " + e.what());
  }
  x.specs = load_models_config(x.models);
  x.dataset = load_dataset(x.dataset_path);
  return x;
}

RunRecord load_prefix(const fs::path& dir, const Dataset& dataset, const BudgetPlan& plan) {
  RunRecord r = load_run(dir, dataset);
  if (r.budget.per_model < plan.per_model)
    throw DataError("cached run " + dir.string() + " holds " + std::to_string(r.budget.per_model) +
                    " samples per model, " + std::to_string(plan.per_model) + " needed");
  r = truncate(r, plan);
  r.validate(dataset);
  return r;
}

std::vector<RunRecord> load_baselines(const Experiment& x) {
  if (x.baseline_runs.empty())
    throw ConfigError("the experiment has no single-model baselines; rerun `run` with --baselines");
  std::vector<RunRecord> out;
  for (const auto& dir : x.baseline_runs) {
    RunRecord r = load_run(dir, x.dataset);
    out.push_back(load_prefix(dir, x.dataset, plan_budget(r.consortium, x.budget.effective)));
  }
  return out;
}

fs::path out_dir(const std::string& flag, const Experiment& x, const char* fallback) {
  return flag.empty() ? x.dir / fallback : fs::path(flag);
}

// ---- run -------------------------------------------------------------------------

int cmd_run(const Common& c, std::ostream& out, std::ostream& err) {
  const fs::path models = fs::absolute(c.models), dataset_path = fs::absolute(c.dataset);
  const auto specs = load_models_config(models);
  const auto dataset = load_dataset(dataset_path);
  const auto ids = split_ids(c.consortium);
  const auto used = members(specs, ids);
  const Consortium team(ids);
  const auto plan = plan_budget(team, c.budget);
  const auto params = sampling_params(c);
  const fs::path cache = fs::absolute(c.cache);
  const fs::path out_path = c.out.empty() ? fs::path("experiment") : fs::path(c.out);

  std::size_t missing = cache_status(team, dataset, params, plan, cache).missing();
  if (c.baselines && team.size() > 1)
    for (const auto& id : team.model_ids())
      missing += cache_status(Consortium({id}), dataset, params, plan_budget(1, plan.effective), cache).missing();
  if (missing == 0) out << "cache complete, nothing to sample\n";

  out << "consortium " << team.label() << ": N=" << plan.effective << " (" << plan.per_model
      << " per model), " << dataset.size() << " questions\n";
  const BackendSet backends = missing == 0 ? BackendSet{} : make_backends(used);
  RunOptions opts = run_options(c, err);
  // With nothing missing the run only reads the cache.
  if (missing == 0) opts.cache_only = true;
  const auto run = run_sampling(team, dataset, params, plan, backends, opts);
  std::vector<RunRecord> singles;
  if (c.baselines) singles = single_model_runs(team, dataset, params, plan, backends, opts);

  json runs = {{"consortium", {{"run_id", run.run_id},
                               {"dir", run_directory(cache, run.run_id).string()},
                               {"samples", run.samples.size()}}},
               {"baselines", json::array()}};
  for (const auto& s : singles)
    runs["baselines"].push_back({{"model", s.consortium.model_ids().front()},
                                 {"run_id", s.run_id},
                                 {"dir", run_directory(cache, s.run_id).string()},
                                 {"samples", s.samples.size()}});
  const json manifest = {{"models", models.string()},
                         {"dataset", dataset_path.string()},
                         {"dataset_name", dataset.name},
                         {"dataset_hash", content_hash(dataset)},
                         {"consortium", team.model_ids()},
                         {"budget", budget_json(plan)},
                         {"params", params_json(params)},
                         {"seed", c.seed},
                         {"cache", cache.string()},
                         {"runs", runs}};
  const fs::path path = out_path / "manifest.json";
  write_json(path, manifest);
  out << "consortium samples: " << run.samples.size() << "\n";
  for (const auto& s : singles)
    out << "baseline " << s.consortium.label() << " samples: " << s.samples.size() << "\n";
  out << "manifest: " << path.string() << "\n";
  return kExitOk;
}

// ---- score -----------------------------------------------------------------------

json verdict_json(const VerdictRecord& v) {
  json dist = json::array();
  for (const auto& e : v.distribution.entries)
    dist.push_back({{"answer", e.key.is_parseable() ? json(e.key.surface()) : json(nullptr)},
                    {"count", e.count},
                    {"probability", e.probability}});
  return {{"question_id", v.question_id},
          {"voted", v.voted.is_parseable() ? json(v.voted.surface()) : json(nullptr)},
          {"vote_count", v.vote_count},
          {"entropy", v.entropy},
          {"correct", v.correct},
          {"distribution", dist}};
}

Chart curve_chart(const std::string& title, const std::string& xl, const std::string& yl,
                  const CurvePoints& c) {
  return {title, xl, yl, {{"consortium", c.points}}, false};
}

int cmd_score(const Common& c, std::ostream& out, std::ostream&) {
  const auto x = load_experiment(c.manifest);
  const std::uint64_t seed = c.seed;
  const auto run = load_prefix(x.consortium_run, x.dataset, x.budget);
  const auto table = ResponseTable::build(run, x.dataset);
  const auto verdicts = table.score();
  const auto boot = bootstrap_config(c.bootstrap, seed);
  const auto metrics = bootstrap_all(table, boot);
  const fs::path dir = out_dir(c.out, x, "score");

  std::string lines;
  for (const auto& v : verdicts) lines += verdict_json(v).dump() + "\n";
  write_text(dir / "verdicts.jsonl", lines);

  std::string csv = "metric,raw,mean,std,resamples_used,resamples_excluded,unreliable\n";
  json mj = json::array();
  for (const auto& m : metrics) {
    csv += std::string(to_string(m.name)) + "," + num(m.raw) + "," + num(m.mean) + "," +
           (m.mean ? num(m.std) : "") + "," + std::to_string(m.resamples_used) + "," +
           std::to_string(m.resamples_excluded) + "," + (m.unreliable ? "true" : "false") + "\n";
    mj.push_back(metric_json(m));
  }
  write_text(dir / "metrics.csv", csv);
  write_json(dir / "metrics.json",
             {{"run_id", run.run_id},
              {"consortium", x.consortium.model_ids()},
              {"effective_n", x.budget.effective},
              {"questions", x.dataset.size()},
              {"bootstrap",
               {{"resamples", boot.n_resamples},
                {"seed", boot.seed},
                {"scheme", "questions with replacement, then responses within each model's stratum"},
                {"std", "population"}}},
              {"entropy_units", "nats"},
              {"metrics", mj}});

  const auto items = judgements(verdicts);
  const CurveMetadata meta_rej{"rejection_accuracy", "uniform fractions k/n, k=0..n-1", boot.seed};
  const auto rej = rejection_accuracy_curve(items);
  export_curve(dir / "rejection_accuracy.csv", rej, meta_rej);
  write_text(dir / "rejection_accuracy.svg",
             render_svg(curve_chart("Rejection-accuracy curve", "fraction rejected", "accuracy", rej)));
  const bool both = std::any_of(items.begin(), items.end(), [](auto& j) { return j.correct; }) &&
                    std::any_of(items.begin(), items.end(), [](auto& j) { return !j.correct; });
  if (both) {
    const auto roc = roc_curve(items);
    export_curve(dir / "roc.csv", roc, {"roc", "one point per distinct entropy threshold", boot.seed});
    write_text(dir / "roc.svg", render_svg(curve_chart("ROC (positive = incorrect)", "false positive rate",
                                                       "true positive rate", roc)));
  }
  if (std::any_of(items.begin(), items.end(), [](auto& j) { return !j.correct; })) {
    const auto pr = precision_recall_curve(items);
    export_curve(dir / "precision_recall.csv", pr.curve,
                 {"precision_recall", "one point per distinct entropy threshold", boot.seed});
  }

  out << "consortium " << x.consortium.label() << ", N=" << x.budget.effective << ", "
      << x.dataset.size() << " questions, " << boot.n_resamples << " bootstrap resamples\n";
  for (const auto& m : metrics)
    out << "  " << to_string(m.name) << ": " << fmt_pm(m) << (m.unreliable ? " (unreliable)" : "") << "\n";
  out << "reports: " << dir.string() << "\n";
  return kExitOk;
}

// ---- compare -----------------------------------------------------------------------

std::string comparison_csv_header() {
  return "consortium,metric,mean,std,hard,standard,worst_case,delta_hard_pct,delta_standard_pct,"
         "delta_worst_case_pct,improved_hard,improved_standard,improved_worst_case\n";
}

std::string comparison_csv_rows(const ComparisonRecord& r) {
  std::string s;
  for (const auto& m : r.metrics) {
    s += r.consortium_id + "," + std::string(to_string(m.metric)) + "," + num(m.consortium.mean) + "," +
         (m.consortium.mean ? num(m.consortium.std) : "");
    for (Baseline b : kAllBaselines) s += "," + (m.baselines ? num((*m.baselines)[b]) : "");
    for (Baseline b : kAllBaselines) s += "," + num(m.delta_pct[static_cast<std::size_t>(b)]);
    for (Baseline b : kAllBaselines) s += std::string(",") + (m.improved(b) ? "true" : "false");
    s += "\n";
  }
  return s;
}

json comparison_json(const ComparisonRecord& r) {
  json metrics = json::array();
  for (const auto& m : r.metrics) {
    json singles = json::object();
    for (const auto& [id, v] : m.single_model) singles[id] = metric_json(v);
    json baselines = nullptr, deltas = json::object(), improved = json::object();
    if (m.baselines)
      baselines = {{"hard", m.baselines->hard}, {"standard", m.baselines->standard},
                   {"worst_case", m.baselines->worst_case}};
    for (Baseline b : kAllBaselines) {
      deltas[std::string(to_string(b))] = opt(m.delta_pct[static_cast<std::size_t>(b)]);
      improved[std::string(to_string(b))] = m.improved(b);
    }
    metrics.push_back({{"metric", std::string(to_string(m.metric))},
                       {"consortium", metric_json(m.consortium)},
                       {"single_model", singles},
                       {"baselines", baselines},
                       {"delta_pct", deltas},
                       {"improved", improved}});
  }
  return {{"consortium", r.consortium_id}, {"model_ids", r.model_ids}, {"effective_n", r.effective_n},
          {"delta", "relative percent change 100*(consortium-baseline)/baseline"},
          {"metrics", metrics}};
}

int cmd_compare(const Common& c, std::ostream& out, std::ostream&) {
  const auto x = load_experiment(c.manifest);
  const auto run = load_prefix(x.consortium_run, x.dataset, x.budget);
  const auto singles = load_baselines(x);
  const auto rec = compare(run, singles, x.dataset, bootstrap_config(c.bootstrap, c.seed));
  const fs::path dir = out_dir(c.out, x, "compare");
  write_text(dir / "comparison.csv", comparison_csv_header() + comparison_csv_rows(rec));
  std::string per_model = "model,metric,raw,mean,std\n";
  for (const auto& m : rec.metrics)
    for (const auto& [id, v] : m.single_model)
      per_model += id + "," + std::string(to_string(m.metric)) + "," + num(v.raw) + "," + num(v.mean) + "," +
                   (v.mean ? num(v.std) : "") + "\n";
  write_text(dir / "single_models.csv", per_model);
  write_json(dir / "comparison.json", comparison_json(rec));

  out << "consortium " << rec.consortium_id << " vs single models at N=" << rec.effective_n << "\n";
  for (const auto& m : rec.metrics) {
    out << to_string(m.metric) << ": consortium " << fmt_pm(m.consortium) << "\n";
    for (Baseline b : kAllBaselines) {
      out << "  " << to_string(b) << ": "
          << (m.baselines ? fixed((*m.baselines)[b]) : std::string("n/a")) << "  delta "
          << fixed(m.delta_pct[static_cast<std::size_t>(b)], 2) << "%"
          << (m.improved(b) ? "  improved" : "") << "\n";
    }
  }
  out << "reports: " << dir.string() << "\n";
  return kExitOk;
}

// ---- cost --------------------------------------------------------------------------

int cmd_cost(const Common& c, std::ostream& out, std::ostream&) {
  const auto x = load_experiment(c.manifest);
  std::vector<RunRecord> runs{load_prefix(x.consortium_run, x.dataset, x.budget)};
  if (!x.baseline_runs.empty())
    for (auto& r : load_baselines(x)) runs.push_back(std::move(r));
  const auto reports = cost_report(runs, x.specs);
  std::string csv = "run,model,samples,tokens_in,tokens_out,usd_per_query\n";
  json j = json::array();
  for (const auto& r : reports) {
    json models = json::array();
    for (const auto& m : r.models) {
      csv += r.run_label + "," + m.model_id + "," + std::to_string(m.samples) + "," +
             std::to_string(m.tokens_in) + "," + std::to_string(m.tokens_out) + "," + num(m.usd_per_query) + "\n";
      models.push_back({{"model", m.model_id}, {"samples", m.samples}, {"tokens_in", m.tokens_in},
                        {"tokens_out", m.tokens_out}, {"usd_per_query", m.usd_per_query}});
    }
    csv += r.run_label + ",total,," + std::to_string(r.tokens_in) + "," + std::to_string(r.tokens_out) + "," +
           num(r.usd_per_query) + "\n";
    j.push_back({{"run", r.run_label}, {"questions", r.questions}, {"usd_per_query", r.usd_per_query},
                 {"tokens_in", r.tokens_in}, {"tokens_out", r.tokens_out}, {"models", models}});
    char buf[64];
    std::snprintf(buf, sizeof buf, "$%.6f", r.usd_per_query);
    out << r.run_label << ": " << buf << " per query\n";
  }
  const fs::path dir = out_dir(c.out, x, "cost");
  write_text(dir / "cost.csv", csv);
  write_json(dir / "cost.json", {{"effective_n", x.budget.effective}, {"reports", j}});
  out << "reports: " << dir.string() << "\n";
  return kExitOk;
}

// ---- sweep -------------------------------------------------------------------------

std::vector<int> parse_budgets(const std::string& list) {
  std::vector<int> out;
  for (const auto& item : split_ids(list)) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("budget '" + item + "' is not a positive integer");
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int cmd_sweep(const Common& c, const std::string& budget_list, std::ostream& out, std::ostream& err) {
  const auto specs = load_models_config(c.models);
  const auto dataset = load_dataset(c.dataset);
  const auto ids = split_ids(c.consortium);
  const auto used = members(specs, ids);
  const Consortium team(ids);
  const auto budgets = parse_budgets(budget_list);
  const auto params = sampling_params(c);
  const auto opts = run_options(c, err);
  const BackendSet backends = c.cache_only ? BackendSet{} : make_backends(used);
  const auto points = budget_sweep(team, dataset, params, budgets, specs, backends, opts,
                                   bootstrap_config(c.bootstrap, c.seed));

  std::string csv = "requested,effective,per_model";
  for (MetricKind m : kAllMetrics) {
    const std::string n(to_string(m));
    csv += "," + n + "_mean," + n + "_std," + n + "_hard," + n + "_standard," + n + "_worst_case";
  }
  csv += ",consortium_usd_per_query";
  for (const auto& id : team.model_ids()) csv += "," + id + "_usd_per_query";
  csv += "\n";
  json rows = json::array();
  std::array<std::map<std::string, Series>, 3> by_n, by_cost;
  for (const auto& p : points) {
    csv += std::to_string(p.budget.requested) + "," + std::to_string(p.budget.effective) + "," +
           std::to_string(p.budget.per_model);
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& mc = p.comparison.metrics[m];
      csv += "," + num(mc.consortium.mean) + "," + (mc.consortium.mean ? num(mc.consortium.std) : "");
      for (Baseline b : kAllBaselines) csv += "," + (mc.baselines ? num((*mc.baselines)[b]) : "");
      const double n = p.budget.effective;
      if (mc.consortium.mean) {
        by_n[m]["consortium"].points.emplace_back(n, *mc.consortium.mean);
        if (p.consortium_cost) by_cost[m]["consortium"].points.emplace_back(p.consortium_cost->usd_per_query, *mc.consortium.mean);
      }
      for (const auto& [id, v] : mc.single_model) {
        if (!v.mean) continue;
        by_n[m][id].points.emplace_back(n, *v.mean);
        if (auto it = p.single_model_cost.find(id); it != p.single_model_cost.end())
          by_cost[m][id].points.emplace_back(it->second.usd_per_query, *v.mean);
      }
    }
    csv += "," + (p.consortium_cost ? num(p.consortium_cost->usd_per_query) : "");
    json costs = json::object();
    for (const auto& id : team.model_ids()) {
      auto it = p.single_model_cost.find(id);
      csv += "," + (it != p.single_model_cost.end() ? num(it->second.usd_per_query) : "");
      if (it != p.single_model_cost.end()) costs[id] = it->second.usd_per_query;
    }
    csv += "\n";
    rows.push_back({{"budget", budget_json(p.budget)},
                    {"comparison", comparison_json(p.comparison)},
                    {"consortium_usd_per_query", p.consortium_cost ? json(p.consortium_cost->usd_per_query) : json(nullptr)},
                    {"single_model_usd_per_query", costs}});
  }
  const fs::path dir = c.out.empty() ? fs::path("sweep") : fs::path(c.out);
  write_text(dir / "sweep.csv", csv);
  write_json(dir / "sweep.json", {{"consortium", team.model_ids()}, {"points", rows}});
  for (std::size_t m = 0; m < 3; ++m) {
    const std::string name(to_string(kAllMetrics[m]));
    Chart perf{"Performance vs number of samples", "samples per question (N)", name, {}, false};
    for (auto& [id, s] : by_n[m]) perf.series.push_back({id, s.points});
    write_text(dir / ("performance_vs_samples_" + name + ".svg"), render_svg(perf));
    if (!by_cost[m].empty()) {
      Chart cost{"Performance vs API cost", "USD per query", name, {}, false};
      for (auto& [id, s] : by_cost[m]) {
        auto pts = s.points;
        std::sort(pts.begin(), pts.end());
        cost.series.push_back({id, pts});
      }
      write_text(dir / ("performance_vs_cost_" + name + ".svg"), render_svg(cost));
    }
  }
  out << "requested  N   accuracy        AUROC           AURAC           USD/query\n";
  for (const auto& p : points) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%9d %3d   %-15s %-15s %-15s %s\n", p.budget.requested, p.budget.effective,
                  fmt_pm(p.comparison.metrics[0].consortium).c_str(), fmt_pm(p.comparison.metrics[1].consortium).c_str(),
                  fmt_pm(p.comparison.metrics[2].consortium).c_str(),
                  p.consortium_cost ? fixed(p.consortium_cost->usd_per_query, 6).c_str() : "n/a");
    out << buf;
  }
  out << "reports: " << dir.string() << "\n";
  return kExitOk;
}

// ---- select ------------------------------------------------------------------------

struct SelectFlags {
  std::size_t min_size = 2;
  std::optional<std::size_t> max_size;
  std::optional<double> max_std;
  std::optional<double> min_mean;
  std::optional<std::size_t> sample;
};

int cmd_select(const Common& c, const SelectFlags& f, std::ostream& out, std::ostream& err) {
  const auto specs = load_models_config(c.models);
  SelectionOptions sel;
  sel.min_size = f.min_size;
  sel.max_size = f.max_size;
  sel.max_std = f.max_std;
  sel.min_mean = f.min_mean;
  if (f.sample) sel.sample = std::make_pair(*f.sample, c.seed);
  const auto candidates = enumerate_consortia(specs, sel);
  const fs::path dir = c.out.empty() ? fs::path("select") : fs::path(c.out);

  std::string csv = "consortium,size,mean_score,std_score\n";
  json list = json::array();
  for (const auto& cand : candidates) {
    const std::string label = Consortium(cand.model_ids).label();
    csv += label + "," + std::to_string(cand.model_ids.size()) + "," + num(cand.mean_score) + "," +
           num(cand.std_score) + "\n";
    list.push_back({{"consortium", cand.model_ids}, {"mean_score", opt(cand.mean_score)},
                    {"std_score", opt(cand.std_score)}});
  }
  write_text(dir / "candidates.csv", csv);
  write_json(dir / "candidates.json",
             {{"pool", specs.size()}, {"count", candidates.size()}, {"std", "population"},
              {"filter", {{"max_std", opt(f.max_std)}, {"min_mean", opt(f.min_mean)}}},
              {"candidates", list}});
  out << candidates.size() << " candidate consortia from a pool of " << specs.size() << "\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(candidates.size(), 20); ++i)
    out << "  " << Consortium(candidates[i].model_ids).label() << "  mean " << fixed(candidates[i].mean_score, 2)
        << "  std " << fixed(candidates[i].std_score, 2) << "\n";
  if (candidates.size() > 20) out << "  ...\n";

  if (!c.dataset.empty() && !candidates.empty()) {
    // Evaluate every candidate from per-model runs; a consortium takes a prefix of each.
    const auto dataset = load_dataset(c.dataset);
    std::set<std::string> needed;
    for (const auto& cand : candidates) needed.insert(cand.model_ids.begin(), cand.model_ids.end());
    const auto used = members(specs, {needed.begin(), needed.end()});
    const auto params = sampling_params(c);
    const auto opts = run_options(c, err);
    const BackendSet backends = c.cache_only ? BackendSet{} : make_backends(used);
    std::map<std::string, ResponseTable> tables;
    for (const auto& id : needed) {
      const Consortium solo({id});
      err << "sampling " << id << "\n";
      const auto run = run_sampling(solo, dataset, params, plan_budget(solo, c.budget), backends, opts);
      tables.emplace(id, ResponseTable::build(run, dataset));
    }
    const auto boot = bootstrap_config(c.bootstrap, c.seed);
    std::vector<ComparisonRecord> records;
    std::string series = "consortium,size,mean_score,std_score";
    for (MetricKind m : kAllMetrics)
      for (Baseline b : kAllBaselines)
        series += "," + std::string(to_string(m)) + "_delta_" + std::string(to_string(b)) + "_pct";
    series += "\n";
    std::array<Series, 3> scatter;
    for (const auto& cand : candidates) {
      std::vector<const ResponseTable*> parts;
      for (const auto& id : cand.model_ids) parts.push_back(&tables.at(id));
      const auto plan = plan_budget(cand.model_ids.size(), c.budget);
      const auto team = ResponseTable::combine(parts, static_cast<std::size_t>(plan.per_model));
      std::vector<ResponseTable> singles;
      for (const auto* t : parts) singles.push_back(t->truncated(static_cast<std::size_t>(plan.effective)));
      std::vector<const ResponseTable*> ptrs;
      for (const auto& s : singles) ptrs.push_back(&s);
      records.push_back(compare(team, ptrs, boot));
      const auto& r = records.back();
      series += r.consortium_id + "," + std::to_string(cand.model_ids.size()) + "," + num(cand.mean_score) + "," +
                num(cand.std_score);
      for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t b = 0; b < 3; ++b) series += "," + num(r.metrics[m].delta_pct[b]);
        const auto& d = r.metrics[m].delta_pct[static_cast<std::size_t>(Baseline::Standard)];
        if (cand.std_score && d) scatter[m].points.emplace_back(*cand.std_score, *d);
      }
      series += "\n";
    }
    write_text(dir / "consortia.csv", series);
    const auto summary = summarize(records);
    std::string table = "metric,baseline,mean_delta_pct,std_delta_pct,pct_improved,consortia\n";
    out << "evaluated " << records.size() << " consortia at N<=" << c.budget << "\n";
    out << "metric     baseline     mean delta %       improved\n";
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t b = 0; b < 3; ++b) {
        const auto& d = summary[m][b];
        table += std::string(to_string(kAllMetrics[m])) + "," + std::string(to_string(kAllBaselines[b])) + "," +
                 num(d.mean) + "," + num(d.std) + "," + num(d.pct_improved()) + "," + std::to_string(d.defined) + "\n";
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-10s %-11s %8s ± %-7s %6.1f%%\n", std::string(to_string(kAllMetrics[m])).c_str(),
                      std::string(to_string(kAllBaselines[b])).c_str(), fixed(d.mean, 2).c_str(),
                      fixed(d.std, 2).c_str(), d.pct_improved());
        out << buf;
      }
    write_text(dir / "summary.csv", table);
    for (std::size_t m = 0; m < 3; ++m) {
      const std::string name(to_string(kAllMetrics[m]));
      scatter[m].name = "consortia";
      write_text(dir / ("delta_vs_std_" + name + ".svg"),
                 render_svg({"Change vs standard baseline (" + name + ")", "std of mock benchmark scores",
                             "delta %", {scatter[m]}, true}));
    }
  }
  out << "reports: " << dir.string() << "\n";
  return kExitOk;
}

// ---- simulate ----------------------------------------------------------------------

int cmd_simulate(const Common& c, PopulationConfig config, std::ostream& out) {
  config.seed = c.seed;
  auto pop = make_synthetic_population(config);
  measure_mock_scores(pop);
  const fs::path dir = c.out.empty() ? fs::path("population") : fs::path(c.out);
  fs::create_directories(dir / "benchmarks");
  fs::create_directories(dir / "profiles");
  save_dataset(dir / "dataset.jsonl", pop.dataset);
  for (const auto& b : pop.benchmarks) save_dataset(dir / "benchmarks" / (b.name + ".jsonl"), b);
  json slices = json::object();
  for (std::size_t m = 0; m < pop.specs.size(); ++m) {
    auto& spec = pop.specs[m];
    const fs::path rel = fs::path("profiles") / (spec.id + ".json");
    save_synthetic_profile(dir / rel, pop.profiles[m]);
    spec.profile = rel;
    slices[spec.id] = {{"target_accuracy", pop.target_accuracy[m]}, {"hallucination_slice", pop.slices[m]}};
  }
  write_text(dir / "models.ini", format_models_config(pop.specs));
  write_json(dir / "population.json", {{"seed", c.seed}, {"models", slices}});
  out << "synthetic population: " << pop.specs.size() << " models, " << pop.dataset.size() << " questions\n";
  for (const auto& s : pop.specs)
    out << "  " << s.id << "  mock score " << fixed(s.mock_benchmark_score, 1) << "  price " << fixed(s.price_in, 3)
        << "/" << fixed(s.price_out, 3) << "\n";
  out << "files: " << dir.string() << "\n";
  return kExitOk;
}

// ---- mock --------------------------------------------------------------------------

int cmd_mock(const Common& c, const std::vector<std::string>& benchmark_files, const std::string& write,
             std::ostream& out) {
  auto specs = load_models_config(c.models);
  std::vector<Dataset> tasks;
  for (const auto& f : benchmark_files) tasks.push_back(load_dataset(f));
  SamplingParams base;
  base.seed = derive_seed(c.seed, "sampling");
  for (auto& spec : specs) {
    auto backend = make_backend(spec);
    spec.mock_benchmark_score = mock_benchmark(*backend, tasks, base);
    out << spec.id << "  " << fixed(spec.mock_benchmark_score, 2) << "\n";
  }
  if (!write.empty()) {
    write_text(write, format_models_config(specs));
    out << "models config: " << write << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consortium consistency: multi-model voting and entropy for hallucination detection"};
  app.name("consortium");
  app.require_subcommand(1);
  Common c;

  auto* run_cmd = app.add_subcommand("run", "Sample responses for a consortium and its single-model baselines");
  add_sampling(run_cmd, c);
  add_seed(run_cmd, c);
  run_cmd->add_option("--budget", c.budget, "Requested responses per question")->capture_default_str();
  run_cmd->add_option("--out", c.out, "Experiment directory for manifest.json");
  run_cmd->add_flag("--baselines,!--no-baselines", c.baselines, "Also sample single-model baselines")
      ->capture_default_str();

  auto add_manifest = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", c.manifest, "Experiment manifest written by `run`")->required();
    cmd->add_option("--out", c.out, "Report directory");
  };
  auto* score_cmd = app.add_subcommand("score", "Verdicts, metrics with bootstrap std, and curves");
  add_manifest(score_cmd);
  add_bootstrap(score_cmd, c);
  add_seed(score_cmd, c);
  auto* compare_cmd = app.add_subcommand("compare", "Consortium against hard/standard/worst-case baselines");
  add_manifest(compare_cmd);
  add_bootstrap(compare_cmd, c);
  add_seed(compare_cmd, c);
  auto* cost_cmd = app.add_subcommand("cost", "Mean API cost per query");
  add_manifest(cost_cmd);

  std::string budgets = "8,16,40";
  auto* sweep_cmd = app.add_subcommand("sweep", "Metrics and cost across sample budgets");
  add_sampling(sweep_cmd, c);
  add_seed(sweep_cmd, c);
  add_bootstrap(sweep_cmd, c);
  sweep_cmd->add_option("--budgets", budgets, "Comma-separated budgets")->capture_default_str();
  sweep_cmd->add_option("--out", c.out, "Report directory");

  SelectFlags sf;
  auto* select_cmd = app.add_subcommand("select", "Enumerate and filter consortia by mock benchmark scores");
  select_cmd->add_option("--models", c.models, "Models config file (the pool)")->required();
  select_cmd->add_option("--min-size", sf.min_size)->capture_default_str();
  select_cmd->add_option("--max-size", sf.max_size);
  select_cmd->add_option("--max-std", sf.max_std, "Keep consortia whose score std is at most this");
  select_cmd->add_option("--min-mean", sf.min_mean, "Keep consortia whose mean score is at least this");
  select_cmd->add_option("--sample", sf.sample, "Draw this many candidates uniformly");
  select_cmd->add_option("--dataset", c.dataset, "Also evaluate every candidate on this dataset");
  select_cmd->add_option("--budget", c.budget, "Requested responses per question")->capture_default_str();
  select_cmd->add_option("--top-p", c.top_p)->capture_default_str();
  select_cmd->add_option("--temperature", c.temperature)->capture_default_str();
  select_cmd->add_option("--cache", c.cache)->capture_default_str();
  select_cmd->add_flag("--cache-only", c.cache_only);
  select_cmd->add_option("--workers", c.workers);
  select_cmd->add_option("--out", c.out, "Report directory");
  add_seed(select_cmd, c);
  add_bootstrap(select_cmd, c);

  PopulationConfig pc;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a seeded synthetic model pool and dataset");
  sim_cmd->add_option("--out", c.out, "Output directory")->required();
  sim_cmd->add_option("--models", pc.models)->capture_default_str();
  sim_cmd->add_option("--questions", pc.questions)->capture_default_str();
  sim_cmd->add_option("--candidates", pc.candidates)->capture_default_str();
  sim_cmd->add_option("--math-fraction", pc.math_fraction)->capture_default_str();
  sim_cmd->add_option("--min-accuracy", pc.min_accuracy)->capture_default_str();
  sim_cmd->add_option("--max-accuracy", pc.max_accuracy)->capture_default_str();
  sim_cmd->add_option("--slice-fraction", pc.slice_fraction)->capture_default_str();
  sim_cmd->add_option("--consistency", pc.consistency_weight)->capture_default_str();
  add_seed(sim_cmd, c);

  std::vector<std::string> bench_files;
  std::string write_models;
  auto* mock_cmd = app.add_subcommand("mock", "Measure mock benchmark scores under greedy decoding");
  mock_cmd->add_option("--models", c.models, "Models config file")->required();
  mock_cmd->add_option("--benchmarks", bench_files, "Benchmark task datasets")->required()->delimiter(',');
  mock_cmd->add_option("--write", write_models, "Write the config with measured scores here");
  add_seed(mock_cmd, c);

  std::vector<std::string> argv_store{"consortium"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(c, out, err);
    if (*score_cmd) return cmd_score(c, out, err);
    if (*compare_cmd) return cmd_compare(c, out, err);
    if (*cost_cmd) return cmd_cost(c, out, err);
    if (*sweep_cmd) return cmd_sweep(c, budgets, out, err);
    if (*select_cmd) return cmd_select(c, sf, out, err);
    if (*sim_cmd) return cmd_simulate(c, pc, out);
    if (*mock_cmd) return cmd_mock(c, bench_files, write_models, out);
  } catch (const SamplingAborted& e) {
    err << "error: sampling aborted at (" << e.model_id() << ", " << e.question_id() << ", "
        << e.sample_index() << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CacheMismatch& e) {
    err << "cache error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace consortium::cli
