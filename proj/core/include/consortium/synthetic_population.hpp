#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "consortium/backends.hpp"
#include "consortium/dataset.hpp"
#include "consortium/orchestrator.hpp"

namespace consortium {

/// Describes a pool of synthetic models with controlled strength and failure modes.
///
/// Every model knows a subset of the evaluation questions, guesses uniformly on the rest,
/// and hallucinates consistently on its own slice of questions. Slices of different models
/// are disjoint. A "consistent" answer puts `consistency_weight` of point mass on one answer
/// and spreads the remainder uniformly over all candidate answers.
struct PopulationConfig {
  std::size_t models = 8;
  std::size_t questions = 200;
  std::size_t candidates = 4;  // options per question (also distinct values for math)
  double math_fraction = 0.25;
  double min_accuracy = 0.70;
  double max_accuracy = 0.80;
  /// Per-model target accuracies; overrides the seeded draw from [min, max] when non-empty.
  std::vector<double> accuracies;
  double slice_fraction = 0.10;
  double consistency_weight = 0.9;
  std::size_t benchmark_tasks = 2;
  std::size_t benchmark_questions = 50;
  /// (price_in, price_out) per model; defaults to a seeded draw in [0.1, 1.0] USD / 1e6 tokens.
  std::vector<std::pair<double, double>> prices;
  std::uint64_t seed = 0;
};

struct SyntheticPopulation {
  Dataset dataset;
  std::vector<Dataset> benchmarks;
  std::vector<ModelSpec> specs;  // ids "syn-00", "syn-01", ...; mock scores not yet measured
  std::vector<SyntheticProfile> profiles;
  std::vector<double> target_accuracy;
  /// Question ids each model hallucinates on.
  std::vector<std::vector<std::string>> slices;
};

/// Throws ConfigError when the slices cannot be disjoint or accuracies are unreachable.
SyntheticPopulation make_synthetic_population(const PopulationConfig& config);

/// Backends over the population's profiles.
BackendSet make_backends(const SyntheticPopulation& population);

/// Measures every model's mock benchmark score and stores it in the spec.
void measure_mock_scores(SyntheticPopulation& population);

}  // namespace consortium
