#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "consortium/answer.hpp"
#include "consortium/backends.hpp"
#include "consortium/dataset.hpp"

namespace consortium {

/// Pulls the final answer out of a raw generation. The last final-answer match in the text
/// wins, since reasoning often mentions rejected candidates first.
CanonicalAnswer extract_answer(std::string_view text, const Question& question);

struct ResponseRef {
  std::string model_id;
  int sample_index = 0;
};

struct Cluster {
  CanonicalAnswer key;
  std::vector<ResponseRef> members;

  std::size_t count() const noexcept { return members.size(); }
};

struct Clustering {
  std::string question_id;
  /// Ordered by first appearance in canonical response order (model id, then sample index).
  std::vector<Cluster> clusters;
  std::size_t total = 0;
};

/// Partitions the responses to one question into semantic equivalence classes. Samples
/// without an extracted answer are extracted here. Each unparseable response is its own
/// singleton cluster. Throws DataError for a sample belonging to another question.
Clustering cluster_responses(std::span<const ResponseSample> samples, const Question& question);

}  // namespace consortium
