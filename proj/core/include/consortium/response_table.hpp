#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "consortium/consistency.hpp"
#include "consortium/dataset.hpp"
#include "consortium/orchestrator.hpp"

namespace consortium {

struct QuestionResponses {
  const Question* question = nullptr;
  /// One stratum per model in consortium order, each ordered by sample index, answers filled.
  std::vector<std::vector<ResponseSample>> strata;
  /// Cluster index of every response under the clustering of the full table, parallel to strata.
  std::vector<std::vector<std::uint32_t>> cluster_ids;
  std::vector<CanonicalAnswer> cluster_keys;
  std::vector<std::uint8_t> cluster_parseable;
  std::vector<std::uint8_t> cluster_correct;
};

/// Extracted, clustered responses of one run, arranged for scoring and resampling.
/// Holds pointers into the Dataset it was built from.
class ResponseTable {
 public:
  static ResponseTable build(const RunRecord& run, const Dataset& dataset);
  /// Assembles a consortium from per-model tables by taking each model's first `per_model`
  /// responses. Every table must cover the same dataset with a single model.
  static ResponseTable combine(std::span<const ResponseTable* const> single_model_tables,
                               std::size_t per_model);

  const std::vector<std::string>& model_ids() const noexcept { return model_ids_; }
  std::size_t per_model() const noexcept { return per_model_; }
  std::size_t total_per_question() const noexcept { return per_model_ * model_ids_.size(); }
  const std::vector<QuestionResponses>& questions() const noexcept { return questions_; }

  /// Prefix of every stratum.
  ResponseTable truncated(std::size_t per_model) const;

  /// Clusters and scores every question through the full pipeline.
  std::vector<VerdictRecord> score() const;
  /// Responses in canonical order for one question.
  std::vector<ResponseSample> responses(std::size_t question_index) const;

 private:
  std::vector<std::string> model_ids_;
  std::size_t per_model_ = 0;
  std::vector<QuestionResponses> questions_;
};

}  // namespace consortium
