#include "consortium/synthetic_population.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "consortium/errors.hpp"
#include "consortium/experiments.hpp"
#include "consortium/seeding.hpp"

namespace consortium {
namespace {

std::string padded(std::size_t i, int width) {
  std::ostringstream os;
  os << std::setw(width) << std::setfill('0') << i;
  return os.str();
}

/// `weight` on `mode`, the rest spread over every candidate.
std::map<std::string, double> consistent(const std::vector<std::string>& candidates,
                                         const std::string& mode, double weight) {
  std::map<std::string, double> d;
  const double rest = (1.0 - weight) / static_cast<double>(candidates.size());
  for (const auto& c : candidates) d[c] = rest;
  d[mode] += weight;
  return d;
}

std::map<std::string, double> uniform(const std::vector<std::string>& candidates) {
  std::map<std::string, double> d;
  for (const auto& c : candidates) d[c] = 1.0 / static_cast<double>(candidates.size());
  return d;
}

struct Item {
  Question question;
  std::vector<std::string> candidates;  // gold first
};

Item make_item(std::string id, TaskKind kind, std::size_t k, Rng& rng) {
  Item item;
  Question& q = item.question;
  q.id = std::move(id);
  q.kind = kind;
  if (kind == TaskKind::MultipleChoice) {
    q.prompt = "Synthetic question " + q.id + ": which option is correct?";
    for (std::size_t i = 0; i < k; ++i) {
      const char label = static_cast<char>('A' + i);
      q.options.emplace_back(label, "Candidate " + std::string(1, label));
    }
    const char gold = static_cast<char>('A' + std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
    q.gold_text = std::string(1, gold);
    item.candidates.push_back(q.gold_text);
    for (const auto& [label, text] : q.options)
      if (label != gold) item.candidates.emplace_back(1, label);
  } else {
    const long gold = std::uniform_int_distribution<long>(10, 999)(rng);
    q.prompt = "Synthetic question " + q.id + ": compute the value.";
    q.gold_text = std::to_string(gold);
    std::set<long> used{gold};
    item.candidates.push_back(q.gold_text);
    std::uniform_int_distribution<long> offset(-20, 20);
    while (item.candidates.size() < k) {
      const long v = gold + offset(rng);
      if (used.insert(v).second) item.candidates.push_back(std::to_string(v));
    }
  }
  const auto labels = q.labels();
  q.gold = parse_gold(q.gold_text, q.kind, labels);
  return item;
}

std::string pick_wrong(const Item& item, Rng& rng) {
  return item.candidates[std::uniform_int_distribution<std::size_t>(1, item.candidates.size() - 1)(rng)];
}

}  // namespace

SyntheticPopulation make_synthetic_population(const PopulationConfig& c) {
  if (c.models == 0 || c.questions == 0) throw ConfigError("population needs models and questions");
  if (c.candidates < 2 || c.candidates > 26) throw ConfigError("candidates must be in [2, 26]");
  if (c.math_fraction < 0.0 || c.math_fraction > 1.0) throw ConfigError("math_fraction must be in [0, 1]");
  if (c.min_accuracy > c.max_accuracy || c.min_accuracy < 0.0 || c.max_accuracy > 1.0)
    throw ConfigError("accuracy range must satisfy 0 <= min <= max <= 1");
  if (c.consistency_weight < 0.0 || c.consistency_weight > 1.0)
    throw ConfigError("consistency_weight must be in [0, 1]");
  if (!c.accuracies.empty() && c.accuracies.size() != c.models)
    throw ConfigError("accuracies must list one value per model");
  if (!c.prices.empty() && c.prices.size() != c.models)
    throw ConfigError("prices must list one (in, out) pair per model");
  const auto slice = static_cast<std::size_t>(std::lround(c.slice_fraction * static_cast<double>(c.questions)));
  if (slice * c.models > c.questions)
    throw ConfigError("slices of " + std::to_string(slice) + " questions for " +
                      std::to_string(c.models) + " models cannot be disjoint");

  Rng rng(derive_seed(c.seed, "population"));
  SyntheticPopulation pop;
  const double k = static_cast<double>(c.candidates);
  const double w = c.consistency_weight;

  // evaluation questions
  const auto n_math = static_cast<std::size_t>(std::lround(c.math_fraction * static_cast<double>(c.questions)));
  std::vector<TaskKind> kinds(c.questions, TaskKind::MultipleChoice);
  std::fill_n(kinds.begin(), n_math, TaskKind::Math);
  std::shuffle(kinds.begin(), kinds.end(), rng);
  std::vector<Item> items;
  pop.dataset.name = "synthetic";
  for (std::size_t i = 0; i < c.questions; ++i) {
    items.push_back(make_item("q" + padded(i, 4), kinds[i], c.candidates, rng));
    pop.dataset.questions.push_back(items.back().question);
  }

  // benchmark tasks (multiple choice)
  std::vector<std::vector<Item>> bench_items(c.benchmark_tasks);
  for (std::size_t t = 0; t < c.benchmark_tasks; ++t) {
    Dataset task;
    task.name = "bench" + std::to_string(t);
    for (std::size_t j = 0; j < c.benchmark_questions; ++j) {
      bench_items[t].push_back(make_item(task.name + "-q" + padded(j, 3), TaskKind::MultipleChoice,
                                         c.candidates, rng));
      task.questions.push_back(bench_items[t].back().question);
    }
    pop.benchmarks.push_back(std::move(task));
  }

  std::vector<std::size_t> order(c.questions);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_real_distribution<double> acc_dist(c.min_accuracy, c.max_accuracy);
  std::uniform_real_distribution<double> price_dist(0.1, 1.0);
  for (std::size_t m = 0; m < c.models; ++m) {
    const double drawn = acc_dist(rng);
    const double a = c.accuracies.empty() ? drawn : c.accuracies[m];
    pop.target_accuracy.push_back(a);

    // Expected accuracy: known questions score ~1, unknown ~1/k, the slice ~0.
    const double Q = static_cast<double>(c.questions);
    const double free_q = static_cast<double>(c.questions - slice);
    const double known_real = (a * Q - free_q / k) / (1.0 - 1.0 / k);
    if (known_real < -0.5 || known_real > free_q + 0.5)
      throw ConfigError("accuracy " + std::to_string(a) + " is unreachable with a slice of " +
                        std::to_string(slice) + " questions");
    const auto known = static_cast<std::size_t>(std::clamp(std::lround(known_real), 0L, static_cast<long>(free_q)));

    std::vector<std::size_t> own(order.begin() + static_cast<long>(m * slice),
                                 order.begin() + static_cast<long>((m + 1) * slice));
    std::set<std::size_t> own_set(own.begin(), own.end());
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < c.questions; ++i)
      if (!own_set.count(i)) rest.push_back(i);
    std::shuffle(rest.begin(), rest.end(), rng);
    std::set<std::size_t> known_set(rest.begin(), rest.begin() + static_cast<long>(known));

    SyntheticProfile profile;
    std::vector<std::string> slice_ids;
    for (std::size_t i = 0; i < c.questions; ++i) {
      const Item& item = items[i];
      auto& dist = profile.questions[item.question.id];
      if (own_set.count(i)) {
        dist = consistent(item.candidates, pick_wrong(item, rng), w);
        slice_ids.push_back(item.question.id);
      } else if (known_set.count(i)) {
        dist = consistent(item.candidates, item.candidates.front(), w);
      } else {
        dist = uniform(item.candidates);
      }
    }
    // Benchmarks: the model answers a share `a` of each task correctly under greedy decoding.
    for (const auto& task : bench_items) {
      const auto right = static_cast<std::size_t>(std::lround(a * static_cast<double>(task.size())));
      std::vector<std::size_t> idx(task.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const Item& item = task[idx[j]];
        const std::string mode = j < right ? item.candidates.front() : pick_wrong(item, rng);
        profile.questions[item.question.id] = consistent(item.candidates, mode, w);
      }
    }

    ModelSpec spec;
    spec.id = "syn-" + padded(m, 2);
    spec.backend = BackendKind::Synthetic;
    if (c.prices.empty()) {
      spec.price_in = price_dist(rng);
      spec.price_out = price_dist(rng);
    } else {
      spec.price_in = c.prices[m].first;
      spec.price_out = c.prices[m].second;
    }
    pop.specs.push_back(std::move(spec));
    pop.profiles.push_back(std::move(profile));
    std::sort(slice_ids.begin(), slice_ids.end());
    pop.slices.push_back(std::move(slice_ids));
  }
  return pop;
}

BackendSet make_backends(const SyntheticPopulation& population) {
  BackendSet out;
  for (std::size_t m = 0; m < population.specs.size(); ++m)
    out.emplace(population.specs[m].id,
                std::make_shared<SyntheticBackend>(population.specs[m], population.profiles[m]));
  return out;
}

void measure_mock_scores(SyntheticPopulation& population) {
  for (std::size_t m = 0; m < population.specs.size(); ++m) {
    SyntheticBackend backend(population.specs[m], population.profiles[m]);
    population.specs[m].mock_benchmark_score = mock_benchmark(backend, population.benchmarks);
  }
}

}  // namespace consortium
