#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "consortium/metrics.hpp"
#include "consortium/response_table.hpp"
#include "consortium/seeding.hpp"

namespace consortium {

std::uint64_t resample_seed(const BootstrapConfig& config, std::size_t index) {
  return derive_seed(derive_seed(config.seed, "bootstrap"), static_cast<std::uint64_t>(index));
}

namespace {

// Walks one resample's draws in a fixed RNG order: for each of the n drawn questions, the
// question index, then per_model response indices for every model stratum.
template <typename OnQuestion, typename OnPick, typename OnQuestionEnd>
void walk_resample(const ResponseTable& table, std::uint64_t stream_seed, OnQuestion&& on_question,
                   OnPick&& on_pick, OnQuestionEnd&& on_end) {
  Rng rng(stream_seed);
  const std::size_t nq = table.questions().size();
  const std::size_t per = table.per_model();
  const std::size_t models = table.model_ids().size();
  std::uniform_int_distribution<std::size_t> question_dist(0, nq - 1);
  std::uniform_int_distribution<std::size_t> pick_dist(0, per - 1);
  for (std::size_t k = 0; k < nq; ++k) {
    const std::size_t q = question_dist(rng);
    on_question(q);
    for (std::size_t m = 0; m < models; ++m)
      for (std::size_t j = 0; j < per; ++j) on_pick(q, m, pick_dist(rng));
    on_end(q);
  }
}

// First-appearance cluster counting over interned ids for one drawn question.
class Tally {
 public:
  void reset(const QuestionResponses& q) {
    q_ = &q;
    slot_of_.assign(q.cluster_keys.size(), kNone);
    counts_.clear();
    parseable_.clear();
    cluster_of_slot_.clear();
    total_ = 0;
  }

  void add(std::size_t model, std::size_t pick) {
    const std::uint32_t c = q_->cluster_ids[model][pick];
    ++total_;
    if (q_->cluster_parseable[c] && slot_of_[c] != kNone) {
      ++counts_[slot_of_[c]];
      return;
    }
    // Unparseable responses never share a cluster, not even with a redraw of themselves.
    if (q_->cluster_parseable[c]) slot_of_[c] = counts_.size();
    counts_.push_back(1);
    parseable_.push_back(q_->cluster_parseable[c]);
    cluster_of_slot_.push_back(c);
  }

  Judgement judge() const {
    const std::size_t w = winning_cluster(counts_, parseable_);
    const bool correct = parseable_[w] && q_->cluster_correct[cluster_of_slot_[w]];
    return Judgement{entropy_from_counts(counts_, total_), correct, q_->question->id};
  }

  VerdictRecord verdict() const {
    const std::size_t w = winning_cluster(counts_, parseable_);
    VerdictRecord v;
    v.question_id = q_->question->id;
    v.voted = q_->cluster_keys[cluster_of_slot_[w]];
    v.vote_count = counts_[w];
    v.correct = parseable_[w] && q_->cluster_correct[cluster_of_slot_[w]];
    v.entropy = entropy_from_counts(counts_, total_);
    v.distribution.total = total_;
    for (std::size_t s = 0; s < counts_.size(); ++s)
      v.distribution.entries.push_back(
          {q_->cluster_keys[cluster_of_slot_[s]], counts_[s],
           static_cast<double>(counts_[s]) / static_cast<double>(total_)});
    return v;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const QuestionResponses* q_ = nullptr;
  std::vector<std::size_t> slot_of_;
  std::vector<std::size_t> counts_;
  std::vector<std::uint8_t> parseable_;
  std::vector<std::uint32_t> cluster_of_slot_;
  std::size_t total_ = 0;
};

std::vector<Judgement> resample_judgements(const ResponseTable& table, std::uint64_t stream_seed) {
  std::vector<Judgement> out;
  out.reserve(table.questions().size());
  Tally tally;
  const auto& qs = table.questions();
  walk_resample(
      table, stream_seed, [&](std::size_t q) { tally.reset(qs[q]); },
      [&](std::size_t, std::size_t m, std::size_t pick) { tally.add(m, pick); },
      [&](std::size_t) { out.push_back(tally.judge()); });
  return out;
}

}  // namespace

ResampleDraw draw_resample(const ResponseTable& table, std::uint64_t stream_seed) {
  ResampleDraw d;
  walk_resample(
      table, stream_seed,
      [&](std::size_t q) {
        d.questions.push_back(q);
        d.picks.emplace_back(table.model_ids().size());
      },
      [&](std::size_t, std::size_t m, std::size_t pick) { d.picks.back()[m].push_back(pick); },
      [](std::size_t) {});
  return d;
}

std::vector<VerdictRecord> score_draw(const ResponseTable& table, const ResampleDraw& draw) {
  std::vector<VerdictRecord> out;
  Tally tally;
  for (std::size_t k = 0; k < draw.questions.size(); ++k) {
    tally.reset(table.questions().at(draw.questions[k]));
    for (std::size_t m = 0; m < draw.picks[k].size(); ++m)
      for (std::size_t pick : draw.picks[k][m]) tally.add(m, pick);
    out.push_back(tally.verdict());
  }
  return out;
}

namespace {

MetricValue summarize_metric(MetricKind metric, std::optional<double> raw,
                             const std::vector<std::optional<double>>& values) {
  MetricValue v;
  v.name = metric;
  v.raw = raw;
  double sum = 0.0;
  for (const auto& x : values) {
    if (x) {
      sum += *x;
      ++v.resamples_used;
    } else {
      ++v.resamples_excluded;
    }
  }
  if (v.resamples_used > 0) {
    const double mean = sum / static_cast<double>(v.resamples_used);
    double ss = 0.0;
    for (const auto& x : values)
      if (x) ss += (*x - mean) * (*x - mean);
    v.mean = mean;
    v.std = std::sqrt(ss / static_cast<double>(v.resamples_used));
  }
  v.unreliable = 2 * v.resamples_excluded > values.size();
  return v;
}

}  // namespace

std::array<MetricValue, 3> bootstrap_all(const ResponseTable& table, const BootstrapConfig& config) {
  config.validate();
  if (table.questions().empty() || table.per_model() == 0)
    throw std::invalid_argument("cannot bootstrap an empty response table");

  const auto raw_verdicts = table.score();
  const auto raw_items = judgements(raw_verdicts);

  std::vector<std::array<std::optional<double>, 3>> results(config.n_resamples);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < config.n_resamples; i = next.fetch_add(1)) {
      const auto items = resample_judgements(table, resample_seed(config, i));
      for (std::size_t m = 0; m < kAllMetrics.size(); ++m)
        results[i][m] = evaluate(kAllMetrics[m], items);
    }
  };
  std::size_t threads = config.threads ? config.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, config.n_resamples);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }

  std::array<MetricValue, 3> out;
  for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
    std::vector<std::optional<double>> column(config.n_resamples);
    for (std::size_t i = 0; i < config.n_resamples; ++i) column[i] = results[i][m];
    out[m] = summarize_metric(kAllMetrics[m], evaluate(kAllMetrics[m], raw_items), column);
  }
  return out;
}

MetricValue bootstrap(const ResponseTable& table, MetricKind metric, const BootstrapConfig& config) {
  const auto all = bootstrap_all(table, config);
  return all[static_cast<std::size_t>(metric)];
}

}  // namespace consortium
