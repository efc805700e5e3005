#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consortium/backends.hpp"
#include "consortium/dataset.hpp"

namespace consortium {

/// Set of distinct model ids kept sorted, so every consortium has one canonical order.
class Consortium {
 public:
  Consortium() = default;
  /// Throws ConfigError on an empty list or duplicate ids.
  explicit Consortium(std::vector<std::string> model_ids);

  const std::vector<std::string>& model_ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }
  /// Ids joined with '+'.
  std::string label() const;

  friend bool operator==(const Consortium&, const Consortium&) = default;

 private:
  std::vector<std::string> ids_;
};

struct BudgetPlan {
  int requested = 40;
  int effective = 0;
  int per_model = 0;

  friend bool operator==(const BudgetPlan&, const BudgetPlan&) = default;
};

/// Largest multiple of the consortium size not exceeding `requested`.
/// Throws ConfigError when requested < consortium size.
BudgetPlan plan_budget(const Consortium& consortium, int requested);
BudgetPlan plan_budget(std::size_t consortium_size, int requested);

struct RunRecord {
  std::string run_id;
  Consortium consortium;
  BudgetPlan budget;
  SamplingParams params;
  std::string dataset_name;
  std::string dataset_hash;
  /// Sorted by dataset question order, then model id, then sample index.
  std::vector<ResponseSample> samples;

  /// Responses to the i-th dataset question (requires a complete record).
  std::span<const ResponseSample> question_samples(std::size_t question_index) const;
  /// Throws DataError unless every question has exactly per_model samples from every model.
  void validate(const Dataset& dataset) const;
};

/// Content hash of (consortium, params, dataset name). The budget is excluded, so larger
/// budgets extend an existing cache.
std::string make_run_id(const Consortium& consortium, const SamplingParams& params,
                        std::string_view dataset_name);

/// Keeps the first `per_model` samples of every (model, question) cell.
RunRecord truncate(const RunRecord& run, const BudgetPlan& budget);

/// Model id -> backend. Backends are shared by concurrent workers.
using BackendSet = std::map<std::string, std::shared_ptr<ModelBackend>>;

BackendSet make_backends(std::span<const ModelSpec> specs);

struct RunOptions {
  /// Runs are cached under cache_dir/<run_id>/. Empty keeps everything in memory.
  std::filesystem::path cache_dir;
  /// 0 selects 4 x number of backends.
  std::size_t workers = 0;
  /// Never call a backend (none needs to be supplied); missing cells are an error.
  bool cache_only = false;
  /// Stop after this many freshly sampled cells, leaving a resumable cache.
  std::optional<std::size_t> max_new_samples;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct CacheStatus {
  std::size_t required = 0;
  std::size_t cached = 0;
  std::size_t missing() const noexcept { return required - cached; }
};

/// Inspects the cache without sampling.
CacheStatus cache_status(const Consortium& consortium, const Dataset& dataset,
                         const SamplingParams& params, const BudgetPlan& budget,
                         const std::filesystem::path& cache_dir);

/// Samples every (question, model, index) cell not already cached. Cells are sampled
/// concurrently and appended to the cache as they complete. Throws SamplingAborted (cache
/// left resumable) on a backend failure or when max_new_samples is reached, and
/// CacheMismatch when the cache was written for other inputs.
RunRecord run_sampling(const Consortium& consortium, const Dataset& dataset,
                       const SamplingParams& params, const BudgetPlan& budget,
                       const BackendSet& backends, const RunOptions& options = {});

/// One run per member, each with the consortium's full effective budget.
std::vector<RunRecord> single_model_runs(const Consortium& consortium, const Dataset& dataset,
                                         const SamplingParams& params, const BudgetPlan& budget,
                                         const BackendSet& backends,
                                         const RunOptions& options = {});

/// Reads a cached run directory (manifest.json + samples.jsonl) and checks it against the
/// dataset it was sampled from. Samples beyond the manifest budget are dropped.
RunRecord load_run(const std::filesystem::path& run_dir, const Dataset& dataset);
std::filesystem::path run_directory(const std::filesystem::path& cache_dir,
                                    const std::string& run_id);

}  // namespace consortium
