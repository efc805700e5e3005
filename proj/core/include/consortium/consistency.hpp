#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "consortium/answer.hpp"
#include "consortium/clustering.hpp"

namespace consortium {

struct DistributionEntry {
  CanonicalAnswer key;
  std::size_t count = 0;
  double probability = 0.0;
};

/// Empirical distribution over equivalence classes, in cluster order.
struct ClusterDistribution {
  std::vector<DistributionEntry> entries;
  std::size_t total = 0;
};

struct Vote {
  CanonicalAnswer answer;
  std::size_t count = 0;
};

struct VerdictRecord {
  std::string question_id;
  CanonicalAnswer voted;
  std::size_t vote_count = 0;
  double entropy = 0.0;  // nats
  bool correct = false;
  ClusterDistribution distribution;
};

/// Majority vote over clusters. Ties go to the cluster that appeared first; unparseable
/// singletons only win when nothing parsed, as an abstention with count 1.
/// Throws std::invalid_argument on an empty clustering.
Vote vote(const Clustering& clustering);

ClusterDistribution distribution(const Clustering& clustering);

/// Shannon entropy in nats.
double semantic_entropy(const ClusterDistribution& dist);

VerdictRecord score_question(const Clustering& clustering, const CanonicalAnswer& gold,
                             TaskKind kind);

/// Index of the winning cluster given counts in first-appearance order. `parseable[i]` is 0
/// for unparseable singletons. Shared by the full scorer and the bootstrap fast path.
std::size_t winning_cluster(std::span<const std::size_t> counts,
                            std::span<const std::uint8_t> parseable);

/// Same value semantic_entropy() yields for the distribution built from these counts.
double entropy_from_counts(std::span<const std::size_t> counts, std::size_t total);

}  // namespace consortium
