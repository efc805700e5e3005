#include "consortium/consistency.hpp"

#include <cmath>
#include <stdexcept>

namespace consortium {

std::size_t winning_cluster(std::span<const std::size_t> counts,
                            std::span<const std::uint8_t> parseable) {
  if (counts.empty()) throw std::invalid_argument("cannot vote on an empty clustering");
  std::size_t best = counts.size();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!parseable[i]) continue;
    if (best == counts.size() || counts[i] > counts[best]) best = i;
  }
  // Nothing parsed: abstain with the first unparseable singleton.
  return best == counts.size() ? 0 : best;
}

double entropy_from_counts(std::span<const std::size_t> counts, std::size_t total) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h + 0.0;  // turns -0.0 into +0.0
}

namespace {

void split_counts(const Clustering& clustering, std::vector<std::size_t>& counts,
                  std::vector<std::uint8_t>& parseable) {
  counts.clear();
  parseable.clear();
  for (const auto& c : clustering.clusters) {
    counts.push_back(c.count());
    parseable.push_back(c.key.is_parseable() ? 1 : 0);
  }
}

}  // namespace

Vote vote(const Clustering& clustering) {
  std::vector<std::size_t> counts;
  std::vector<std::uint8_t> parseable;
  split_counts(clustering, counts, parseable);
  const std::size_t w = winning_cluster(counts, parseable);
  return Vote{clustering.clusters[w].key, counts[w]};
}

ClusterDistribution distribution(const Clustering& clustering) {
  if (clustering.clusters.empty() || clustering.total == 0)
    throw std::invalid_argument("cannot build a distribution from an empty clustering");
  ClusterDistribution dist;
  dist.total = clustering.total;
  const double n = static_cast<double>(clustering.total);
  for (const auto& c : clustering.clusters)
    dist.entries.push_back({c.key, c.count(), static_cast<double>(c.count()) / n});
  return dist;
}

double semantic_entropy(const ClusterDistribution& dist) {
  double h = 0.0;
  for (const auto& e : dist.entries) h -= e.probability * std::log(e.probability);
  return h + 0.0;
}

VerdictRecord score_question(const Clustering& clustering, const CanonicalAnswer& gold,
                             TaskKind kind) {
  const Vote v = vote(clustering);
  VerdictRecord r;
  r.question_id = clustering.question_id;
  r.voted = v.answer;
  r.vote_count = v.count;
  r.distribution = distribution(clustering);
  r.entropy = semantic_entropy(r.distribution);
  r.correct = equivalent(v.answer, gold, kind);
  return r;
}

}  // namespace consortium
