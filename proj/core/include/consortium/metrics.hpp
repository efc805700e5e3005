#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "consortium/consistency.hpp"

namespace consortium {

class ResponseTable;

enum class MetricKind { Accuracy, Auroc, Aurac };

inline constexpr std::array<MetricKind, 3> kAllMetrics = {MetricKind::Accuracy, MetricKind::Auroc,
                                                          MetricKind::Aurac};

std::string_view to_string(MetricKind kind);

/// The part of a verdict the metrics look at. question_id is only used to break ties.
struct Judgement {
  double entropy = 0.0;
  bool correct = false;
  std::string_view question_id;
};

/// Views into `verdicts`, which must outlive the result.
std::vector<Judgement> judgements(std::span<const VerdictRecord> verdicts);

/// Fraction correct. Throws std::invalid_argument on empty input.
double accuracy(std::span<const Judgement> items);

/// Probability that a random incorrect verdict has higher entropy than a random correct one,
/// ties counting one half (Mann-Whitney U over midranks). Incorrect is the positive class.
/// Empty when every verdict has the same label.
std::optional<double> auroc(std::span<const Judgement> items);

enum class CurveKind { Roc, PrecisionRecall, RejectionAccuracy };

struct CurvePoints {
  CurveKind kind = CurveKind::Roc;
  std::vector<std::pair<double, double>> points;
};

/// Rejection fractions {0, 1/n, ..., (n-1)/n}.
std::vector<double> uniform_rejection_grid(std::size_t n);

/// For each fraction f, drops the ceil(f n) highest-entropy verdicts (equal entropies: larger
/// question id dropped first) and records the accuracy of the rest. Fractions that would
/// leave nothing are skipped. The default grid is uniform_rejection_grid(n).
CurvePoints rejection_accuracy_curve(std::span<const Judgement> items,
                                     std::optional<std::span<const double>> grid = std::nullopt);

/// Mean of the rejection-accuracy curve over the uniform grid.
/// Throws std::invalid_argument on empty input.
double aurac(std::span<const Judgement> items);

/// ROC points (false positive rate, true positive rate) from (0,0) to (1,1), one step per
/// distinct entropy threshold. Requires both labels present.
CurvePoints roc_curve(std::span<const Judgement> items);

/// Trapezoidal area under a curve's points.
double trapezoid_area(const CurvePoints& curve);

struct PrecisionRecall {
  CurvePoints curve;  // (recall, precision), recall non-decreasing
  double peak_precision = 0.0;
  double recall_at_peak = 0.0;  // largest recall reaching peak precision
};

/// Flags every verdict with entropy >= t, for each distinct entropy t.
/// Throws std::invalid_argument when no verdict is incorrect.
PrecisionRecall precision_recall_curve(std::span<const Judgement> items);

/// Empty when the metric is undefined for these verdicts (AUROC with one label).
std::optional<double> evaluate(MetricKind metric, std::span<const Judgement> items);

struct BootstrapConfig {
  std::size_t n_resamples = 100;
  std::uint64_t seed = 0;
  /// 0 uses std::thread::hardware_concurrency().
  std::size_t threads = 0;

  void validate() const;
};

struct MetricValue {
  MetricKind name = MetricKind::Accuracy;
  /// Point estimate on the original responses.
  std::optional<double> raw;
  /// Mean and population standard deviation over resamples where the metric was defined.
  std::optional<double> mean;
  double std = 0.0;
  std::size_t resamples_used = 0;
  std::size_t resamples_excluded = 0;
  /// More than half of the resamples were excluded.
  bool unreliable = false;
};

/// Hierarchical bootstrap: questions are drawn with replacement, then within each drawn
/// question every model's responses are redrawn with replacement inside that model's stratum,
/// and the result is re-clustered and re-scored. Deterministic in config.seed; resample i uses
/// its own stream derived from the seed, so results do not depend on thread count.
MetricValue bootstrap(const ResponseTable& table, MetricKind metric, const BootstrapConfig& config);

/// All three metrics from the same resamples.
std::array<MetricValue, 3> bootstrap_all(const ResponseTable& table, const BootstrapConfig& config);

/// The indices one bootstrap resample draws: `questions[k]` is the k-th drawn question and
/// `picks[k][m]` the response indices drawn from model m's stratum for it.
struct ResampleDraw {
  std::vector<std::size_t> questions;
  std::vector<std::vector<std::vector<std::size_t>>> picks;
};

/// The draw bootstrap() makes for the resample with this stream seed.
ResampleDraw draw_resample(const ResponseTable& table, std::uint64_t stream_seed);

/// Verdicts for a draw, computed from the table's precomputed cluster assignments.
std::vector<VerdictRecord> score_draw(const ResponseTable& table, const ResampleDraw& draw);

/// Stream seed of resample `index` under `config`.
std::uint64_t resample_seed(const BootstrapConfig& config, std::size_t index);

struct CurveMetadata {
  std::string metric;
  std::string grid;
  std::uint64_t seed = 0;
};

/// Writes `path` as CSV with header `x,y` and `path` + ".json" with the metadata.
void export_curve(const std::filesystem::path& path, const CurvePoints& curve,
                  const CurveMetadata& metadata);

}  // namespace consortium
