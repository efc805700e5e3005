#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "consortium/backends.hpp"
#include "consortium/dataset.hpp"
#include "consortium/metrics.hpp"
#include "consortium/orchestrator.hpp"
#include "consortium/response_table.hpp"

namespace consortium {

enum class Baseline { Hard = 0, Standard = 1, WorstCase = 2 };

inline constexpr std::array<Baseline, 3> kAllBaselines = {Baseline::Hard, Baseline::Standard,
                                                          Baseline::WorstCase};

std::string_view to_string(Baseline baseline);

struct BaselineSet {
  double hard = 0.0;
  double standard = 0.0;  // median; mean of the middle two for an even count
  double worst_case = 0.0;
  std::map<std::string, double> per_model;

  double operator[](Baseline b) const;
};

/// Throws std::invalid_argument on an empty map.
BaselineSet make_baselines(const std::map<std::string, double>& per_model_scores);

/// 100 (value - baseline) / baseline; empty when baseline is 0.
std::optional<double> delta_pct(double value, double baseline);

struct MetricComparison {
  MetricKind metric = MetricKind::Accuracy;
  MetricValue consortium;
  std::map<std::string, MetricValue> single_model;
  /// Built from the single-model bootstrap means; empty if none is defined.
  std::optional<BaselineSet> baselines;
  std::array<std::optional<double>, 3> delta_pct;

  bool improved(Baseline b) const;
};

struct ComparisonRecord {
  std::string consortium_id;
  std::vector<std::string> model_ids;
  std::size_t effective_n = 0;
  std::array<MetricComparison, 3> metrics;

  const MetricComparison& operator[](MetricKind metric) const;
};

/// Consortium against the single-model runs of its members at the same effective budget.
/// Every entity is bootstrapped with the same seed. Throws std::invalid_argument when the
/// tables disagree on dataset or total responses per question.
ComparisonRecord compare(const ResponseTable& consortium,
                         std::span<const ResponseTable* const> single_models,
                         const BootstrapConfig& config);

ComparisonRecord compare(const RunRecord& consortium, std::span<const RunRecord> single_models,
                         const Dataset& dataset, const BootstrapConfig& config);

struct ModelCost {
  std::string model_id;
  double usd_per_query = 0.0;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  std::size_t samples = 0;
};

struct CostReport {
  std::string run_label;
  std::size_t questions = 0;
  std::vector<ModelCost> models;
  double usd_per_query = 0.0;  // sum of the members' shares
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

/// Mean API cost per question. Throws ConfigError when a member has no pricing.
CostReport cost_report(const RunRecord& run, std::span<const ModelSpec> specs);
std::vector<CostReport> cost_report(std::span<const RunRecord> runs,
                                     std::span<const ModelSpec> specs);

struct SweepPoint {
  BudgetPlan budget;
  ComparisonRecord comparison;
  std::optional<CostReport> consortium_cost;
  std::map<std::string, CostReport> single_model_cost;
};

/// Scores each budget by truncating the cached runs to that budget's per-model prefix.
/// `consortium` and `single_models` must hold at least the largest budget; throws
/// std::invalid_argument otherwise. Costs are reported when every member is priced.
std::vector<SweepPoint> budget_sweep(const RunRecord& consortium,
                                     std::span<const RunRecord> single_models,
                                     const Dataset& dataset, std::span<const int> budgets,
                                     std::span<const ModelSpec> specs,
                                     const BootstrapConfig& config);

/// Samples what the largest budget needs (or only reads the cache when options.cache_only),
/// then sweeps.
std::vector<SweepPoint> budget_sweep(const Consortium& consortium, const Dataset& dataset,
                                     const SamplingParams& params, std::span<const int> budgets,
                                     std::span<const ModelSpec> specs, const BackendSet& backends,
                                     const RunOptions& options, const BootstrapConfig& config);

struct ConsortiumCandidate {
  std::vector<std::string> model_ids;
  std::optional<double> mean_score;
  std::optional<double> std_score;  // population standard deviation
};

struct SelectionOptions {
  std::size_t min_size = 2;
  std::optional<std::size_t> max_size;
  std::optional<double> max_std;
  std::optional<double> min_mean;
  /// Uniform sample of k candidates without replacement, drawn with this seed.
  std::optional<std::pair<std::size_t, std::uint64_t>> sample;
};

/// All subsets of the pool with size in [min_size, max_size], ordered by size then by pool
/// position, filtered and optionally sampled.
std::vector<ConsortiumCandidate> enumerate_consortia(std::span<const ModelSpec> pool,
                                                     const SelectionOptions& options);

/// Greedy-decoding accuracy x 100 averaged over the benchmark tasks: one sample per
/// question at temperature 0 and top-p 1.
double mock_benchmark(ModelBackend& backend, std::span<const Dataset> benchmarks,
                      const SamplingParams& base = {});

struct DeltaSummary {
  std::optional<double> mean;
  std::optional<double> std;
  std::size_t defined = 0;
  std::size_t improved = 0;
  double pct_improved() const { return defined == 0 ? 0.0 : 100.0 * improved / defined; }
};

/// Table of mean delta and share of consortia improved, per metric and baseline.
using ImprovementSummary = std::array<std::array<DeltaSummary, 3>, 3>;  // [metric][baseline]

ImprovementSummary summarize(std::span<const ComparisonRecord> records);

}  // namespace consortium
