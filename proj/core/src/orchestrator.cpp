#include "consortium/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "consortium/errors.hpp"
#include "consortium/seeding.hpp"
#include "json_io.hpp"

namespace consortium {

using detail::json;

Consortium::Consortium(std::vector<std::string> model_ids) : ids_(std::move(model_ids)) {
  if (ids_.empty()) throw ConfigError("a consortium needs at least one model");
  std::sort(ids_.begin(), ids_.end());
  if (auto dup = std::adjacent_find(ids_.begin(), ids_.end()); dup != ids_.end())
    throw ConfigError("model '" + *dup + "' appears twice in the consortium");
}

std::string Consortium::label() const {
  std::string out;
  for (const auto& id : ids_) {
    if (!out.empty()) out += '+';
    out += id;
  }
  return out;
}

BudgetPlan plan_budget(std::size_t consortium_size, int requested) {
  if (consortium_size == 0) throw ConfigError("a consortium needs at least one model");
  const int m = static_cast<int>(consortium_size);
  if (requested < m)
    throw ConfigError("budget " + std::to_string(requested) + " is smaller than the consortium (" +
                      std::to_string(m) + " models)");
  BudgetPlan plan;
  plan.requested = requested;
  plan.per_model = requested / m;
  plan.effective = plan.per_model * m;
  return plan;
}

BudgetPlan plan_budget(const Consortium& consortium, int requested) {
  return plan_budget(consortium.size(), requested);
}

std::span<const ResponseSample> RunRecord::question_samples(std::size_t question_index) const {
  const std::size_t block = static_cast<std::size_t>(budget.effective);
  if ((question_index + 1) * block > samples.size())
    throw std::out_of_range("run has no samples for question " + std::to_string(question_index));
  return std::span<const ResponseSample>(samples).subspan(question_index * block, block);
}

void RunRecord::validate(const Dataset& dataset) const {
  if (budget.per_model * static_cast<int>(consortium.size()) != budget.effective)
    throw DataError("run " + run_id + ": budget does not match consortium size");
  const std::size_t block = static_cast<std::size_t>(budget.effective);
  if (samples.size() != dataset.size() * block)
    throw DataError("run " + run_id + " has " + std::to_string(samples.size()) +
                    " samples, expected " + std::to_string(dataset.size() * block));
  for (std::size_t q = 0; q < dataset.size(); ++q) {
    std::size_t k = q * block;
    for (const auto& model : consortium.model_ids()) {
      for (int i = 0; i < budget.per_model; ++i, ++k) {
        const auto& s = samples[k];
        if (s.question_id != dataset.questions[q].id || s.model_id != model || s.sample_index != i)
          throw DataError("run " + run_id + " is missing (" + model + ", " +
                          dataset.questions[q].id + ", " + std::to_string(i) + ")");
      }
    }
  }
}

std::string make_run_id(const Consortium& consortium, const SamplingParams& params,
                        std::string_view dataset_name) {
  std::string key = consortium.label();
  key += '|';
  key += detail::to_json(params).dump();
  key += '|';
  key += dataset_name;
  return hex64(fnv1a64(key));
}

RunRecord truncate(const RunRecord& run, const BudgetPlan& budget) {
  if (budget.per_model * static_cast<int>(run.consortium.size()) != budget.effective)
    throw std::invalid_argument("budget plan does not fit the consortium");
  if (budget.per_model > run.budget.per_model)
    throw std::invalid_argument("cannot truncate a run of " + std::to_string(run.budget.per_model) +
                                " samples per model to " + std::to_string(budget.per_model));
  RunRecord out = run;
  out.budget = budget;
  out.samples.clear();
  for (const auto& s : run.samples)
    if (s.sample_index < budget.per_model) out.samples.push_back(s);
  return out;
}

BackendSet make_backends(std::span<const ModelSpec> specs) {
  BackendSet out;
  for (const auto& s : specs) out.emplace(s.id, make_backend(s));
  return out;
}

std::filesystem::path run_directory(const std::filesystem::path& cache_dir,
                                    const std::string& run_id) {
  return cache_dir / run_id;
}

namespace {

using CellKey = std::tuple<std::string, std::string, int>;  // model, question, index

struct CacheContents {
  std::optional<json> manifest;
  std::vector<ResponseSample> samples;
};

CacheContents read_cache(const std::filesystem::path& dir) {
  CacheContents out;
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) return out;
  {
    std::ifstream in(manifest_path);
    try {
      out.manifest = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CacheMismatch("corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
  }
  const auto samples_path = dir / "samples.jsonl";
  std::ifstream in(samples_path);
  if (!in) return out;
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  in.close();
  bool dropped_tail = false;
  std::set<CellKey> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto s = detail::sample_from_json(json::parse(lines[i]), i + 1);
      if (seen.insert({s.model_id, s.question_id, s.sample_index}).second)
        out.samples.push_back(std::move(s));
    } catch (const std::exception&) {
      // A run killed mid-write leaves a partial last line; anything else is corruption.
      if (i + 1 != lines.size())
        throw DataError("corrupt cache line in " + samples_path.string(), i + 1);
      dropped_tail = true;
    }
  }
  if (dropped_tail) {
    std::ofstream rewrite(samples_path, std::ios::trunc);
    for (const auto& s : out.samples) rewrite << detail::to_json(s).dump() << '\n';
  }
  return out;
}

json manifest_json(const std::string& run_id, const Consortium& consortium,
                   const SamplingParams& params, const BudgetPlan& budget, const Dataset& dataset,
                   const std::string& dataset_hash) {
  return {{"run_id", run_id},
          {"consortium", consortium.model_ids()},
          {"params", detail::to_json(params)},
          {"budget",
           {{"requested", budget.requested},
            {"effective", budget.effective},
            {"per_model", budget.per_model}}},
          {"dataset_name", dataset.name},
          {"dataset_hash", dataset_hash},
          {"samples_file", "samples.jsonl"}};
}

void check_manifest(const json& m, const std::string& run_id, const Consortium& consortium,
                    const SamplingParams& params, const Dataset& dataset,
                    const std::string& dataset_hash) {
  auto mismatch = [&](const std::string& what) {
    throw CacheMismatch("cache for run " + run_id + " was written with different " + what +
                        "; refusing to mix samples");
  };
  if (m.value("consortium", std::vector<std::string>{}) != consortium.model_ids())
    mismatch("consortium");
  if (!m.contains("params") || detail::params_from_json(m["params"]) != params)
    mismatch("sampling parameters");
  if (m.value("dataset_name", std::string{}) != dataset.name) mismatch("dataset name");
  if (m.value("dataset_hash", std::string{}) != dataset_hash) mismatch("dataset contents");
}

void sort_samples(std::vector<ResponseSample>& samples, const Dataset& dataset) {
  std::unordered_map<std::string_view, std::size_t> order;
  for (std::size_t i = 0; i < dataset.size(); ++i) order.emplace(dataset.questions[i].id, i);
  std::sort(samples.begin(), samples.end(), [&](const ResponseSample& a, const ResponseSample& b) {
    const auto qa = order.at(a.question_id);
    const auto qb = order.at(b.question_id);
    if (qa != qb) return qa < qb;
    if (a.model_id != b.model_id) return a.model_id < b.model_id;
    return a.sample_index < b.sample_index;
  });
}

}  // namespace

CacheStatus cache_status(const Consortium& consortium, const Dataset& dataset,
                         const SamplingParams& params, const BudgetPlan& budget,
                         const std::filesystem::path& cache_dir) {
  CacheStatus st;
  st.required = dataset.size() * static_cast<std::size_t>(budget.effective);
  if (cache_dir.empty()) return st;
  const auto run_id = make_run_id(consortium, params, dataset.name);
  auto cache = read_cache(run_directory(cache_dir, run_id));
  if (!cache.manifest) return st;
  check_manifest(*cache.manifest, run_id, consortium, params, dataset, content_hash(dataset));
  std::set<std::string_view> questions;
  for (const auto& q : dataset.questions) questions.insert(q.id);
  const auto& ids = consortium.model_ids();
  for (const auto& s : cache.samples)
    if (s.sample_index < budget.per_model && questions.count(s.question_id) &&
        std::binary_search(ids.begin(), ids.end(), s.model_id))
      ++st.cached;
  return st;
}

RunRecord run_sampling(const Consortium& consortium, const Dataset& dataset,
                       const SamplingParams& params, const BudgetPlan& budget,
                       const BackendSet& backends, const RunOptions& options) {
  params.validate();
  if (budget.per_model < 1 || budget.per_model * static_cast<int>(consortium.size()) != budget.effective)
    throw ConfigError("budget plan does not fit a consortium of " +
                      std::to_string(consortium.size()));
  validate(dataset);
  std::vector<ModelBackend*> members;
  for (const auto& id : consortium.model_ids()) {
    auto it = backends.find(id);
    const bool found = it != backends.end() && it->second;
    // Cache-only runs never call a backend, so none is needed.
    if (!found && !options.cache_only) throw ConfigError("no backend for model '" + id + "'");
    members.push_back(found ? it->second.get() : nullptr);
  }

  RunRecord record;
  record.run_id = make_run_id(consortium, params, dataset.name);
  record.consortium = consortium;
  record.budget = budget;
  record.params = params;
  record.dataset_name = dataset.name;
  record.dataset_hash = content_hash(dataset);

  std::set<CellKey> done;
  std::vector<ResponseSample> collected;
  std::ofstream writer;
  const bool cached = !options.cache_dir.empty();
  if (cached) {
    const auto dir = run_directory(options.cache_dir, record.run_id);
    std::filesystem::create_directories(dir);
    auto cache = read_cache(dir);
    BudgetPlan stored = budget;
    if (cache.manifest) {
      check_manifest(*cache.manifest, record.run_id, consortium, params, dataset,
                     record.dataset_hash);
      const int prev = cache.manifest->at("budget").value("per_model", 0);
      if (prev > budget.per_model) stored = plan_budget(consortium, prev * static_cast<int>(consortium.size()));
    }
    std::set<std::string_view> questions;
    for (const auto& q : dataset.questions) questions.insert(q.id);
    for (auto& s : cache.samples) {
      if (!questions.count(s.question_id) ||
          !std::binary_search(consortium.model_ids().begin(), consortium.model_ids().end(),
                              s.model_id))
        continue;
      done.insert({s.model_id, s.question_id, s.sample_index});
      if (s.sample_index < budget.per_model) collected.push_back(std::move(s));
    }
    {
      std::ofstream m(dir / "manifest.json", std::ios::trunc);
      m << manifest_json(record.run_id, consortium, params, stored, dataset, record.dataset_hash)
               .dump(2)
        << '\n';
    }
    writer.open(dir / "samples.jsonl", std::ios::app);
    if (!writer) throw ConfigError("cannot write cache in " + dir.string());
  }

  struct Cell {
    const Question* question;
    std::size_t member;
    int index;
  };
  std::vector<Cell> todo;
  for (const auto& q : dataset.questions)
    for (std::size_t m = 0; m < members.size(); ++m)
      for (int i = 0; i < budget.per_model; ++i)
        if (!done.count({consortium.model_ids()[m], q.id, i})) todo.push_back({&q, m, i});

  const std::size_t total_required = dataset.size() * static_cast<std::size_t>(budget.effective);
  if (!todo.empty() && options.cache_only) {
    const Cell& c = todo.front();
    throw SamplingAborted("cache-only mode: " + std::to_string(todo.size()) +
                              " samples are missing, first (" +
                              consortium.model_ids()[c.member] + ", " + c.question->id + ", " +
                              std::to_string(c.index) + ")",
                          consortium.model_ids()[c.member], c.question->id, c.index);
  }

  const std::size_t limit = std::min(todo.size(), options.max_new_samples.value_or(todo.size()));
  std::size_t workers = options.workers ? options.workers : 4 * members.size();
  workers = std::max<std::size_t>(1, std::min(workers, limit));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::optional<std::pair<std::size_t, std::string>> failure;  // todo index, message
  std::size_t completed = collected.size();

  auto work = [&] {
    while (!stop.load()) {
      const std::size_t k = next.fetch_add(1);
      if (k >= limit) return;
      const Cell& c = todo[k];
      try {
        ResponseSample s = members[c.member]->generate(*c.question, params, c.index);
        s.model_id = consortium.model_ids()[c.member];
        s.question_id = c.question->id;
        s.sample_index = c.index;
        std::lock_guard lock(mu);
        if (writer.is_open()) writer << detail::to_json(s).dump() << '\n' << std::flush;
        collected.push_back(std::move(s));
        ++completed;
        if (options.progress) options.progress(completed, total_required);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure || k < failure->first) failure = {k, e.what()};
        stop = true;
      }
    }
  };

  if (limit > 0) {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }

  if (failure) {
    const Cell& c = todo[failure->first];
    throw SamplingAborted("sampling (" + consortium.model_ids()[c.member] + ", " +
                              c.question->id + ", " + std::to_string(c.index) +
                              ") failed: " + failure->second,
                          consortium.model_ids()[c.member], c.question->id, c.index);
  }
  if (limit < todo.size()) {
    const Cell& c = todo[limit];
    throw SamplingAborted("sampling interrupted after " + std::to_string(limit) +
                              " new samples; rerun to resume",
                          consortium.model_ids()[c.member], c.question->id, c.index);
  }

  sort_samples(collected, dataset);
  record.samples = std::move(collected);
  record.validate(dataset);
  return record;
}

std::vector<RunRecord> single_model_runs(const Consortium& consortium, const Dataset& dataset,
                                         const SamplingParams& params, const BudgetPlan& budget,
                                         const BackendSet& backends, const RunOptions& options) {
  std::vector<RunRecord> out;
  for (const auto& id : consortium.model_ids()) {
    Consortium single({id});
    out.push_back(run_sampling(single, dataset, params, plan_budget(single, budget.effective),
                               backends, options));
  }
  return out;
}

RunRecord load_run(const std::filesystem::path& run_dir, const Dataset& dataset) {
  auto cache = read_cache(run_dir);
  if (!cache.manifest) throw DataError("no manifest.json in " + run_dir.string());
  const json& m = *cache.manifest;
  RunRecord r;
  try {
    r.run_id = m.at("run_id").get<std::string>();
    r.consortium = Consortium(m.at("consortium").get<std::vector<std::string>>());
    r.params = detail::params_from_json(m.at("params"));
    r.budget.requested = m.at("budget").at("requested").get<int>();
    r.budget.effective = m.at("budget").at("effective").get<int>();
    r.budget.per_model = m.at("budget").at("per_model").get<int>();
    r.dataset_name = m.at("dataset_name").get<std::string>();
    r.dataset_hash = m.at("dataset_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest in " + run_dir.string() + ": " + e.what());
  }
  if (r.dataset_hash != content_hash(dataset) || r.dataset_name != dataset.name)
    throw CacheMismatch("run " + r.run_id + " was sampled from a different dataset");
  std::set<std::string_view> questions;
  for (const auto& q : dataset.questions) questions.insert(q.id);
  const auto& ids = r.consortium.model_ids();
  for (auto& s : cache.samples)
    if (s.sample_index < r.budget.per_model && questions.count(s.question_id) &&
        std::binary_search(ids.begin(), ids.end(), s.model_id))
      r.samples.push_back(std::move(s));
  sort_samples(r.samples, dataset);
  r.validate(dataset);
  return r;
}

}  // namespace consortium
