#include "consortium/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "consortium/errors.hpp"
#include "json_io.hpp"

namespace consortium {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::Auroc: return "auroc";
    case MetricKind::Aurac: return "aurac";
  }
  return "unknown";
}

std::vector<Judgement> judgements(std::span<const VerdictRecord> verdicts) {
  std::vector<Judgement> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) out.push_back({v.entropy, v.correct, v.question_id});
  return out;
}

double accuracy(std::span<const Judgement> items) {
  if (items.empty()) throw std::invalid_argument("accuracy of an empty verdict set");
  std::size_t correct = 0;
  for (const auto& j : items) correct += j.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::optional<double> auroc(std::span<const Judgement> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return items[a].entropy < items[b].entropy; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && items[order[j]].entropy == items[order[i]].entropy) ++j;
    // 1-based midrank of the tie group [i, j)
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (!items[order[k]].correct) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

std::vector<double> uniform_rejection_grid(std::size_t n) {
  std::vector<double> grid(n);
  for (std::size_t k = 0; k < n; ++k) grid[k] = static_cast<double>(k) / static_cast<double>(n);
  return grid;
}

namespace {

// Indices sorted so that the verdicts rejected first come last.
std::vector<std::size_t> retention_order(std::span<const Judgement> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].entropy != items[b].entropy) return items[a].entropy < items[b].entropy;
    return items[a].question_id < items[b].question_id;
  });
  return order;
}

// correct_prefix[m] = number correct among the m most-retained verdicts.
std::vector<std::size_t> correct_prefix(std::span<const Judgement> items,
                                        const std::vector<std::size_t>& order) {
  std::vector<std::size_t> prefix(order.size() + 1, 0);
  for (std::size_t i = 0; i < order.size(); ++i)
    prefix[i + 1] = prefix[i] + (items[order[i]].correct ? 1 : 0);
  return prefix;
}

}  // namespace

CurvePoints rejection_accuracy_curve(std::span<const Judgement> items,
                                     std::optional<std::span<const double>> grid) {
  CurvePoints curve;
  curve.kind = CurveKind::RejectionAccuracy;
  const std::size_t n = items.size();
  if (n == 0) return curve;
  const auto order = retention_order(items);
  const auto prefix = correct_prefix(items, order);
  auto point = [&](double f, std::size_t rejected) {
    const std::size_t kept = n - rejected;
    curve.points.emplace_back(f, static_cast<double>(prefix[kept]) / static_cast<double>(kept));
  };
  if (!grid) {
    for (std::size_t k = 0; k < n; ++k)
      point(static_cast<double>(k) / static_cast<double>(n), k);
    return curve;
  }
  std::vector<double> fractions(grid->begin(), grid->end());
  std::sort(fractions.begin(), fractions.end());
  for (double f : fractions) {
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("rejection fraction outside [0, 1]");
    // The epsilon keeps k/n from rounding up to k+1.
    const double scaled = std::ceil(f * static_cast<double>(n) - 1e-9);
    const auto k = static_cast<std::size_t>(std::max(0.0, scaled));
    if (k >= n) continue;
    point(f, k);
  }
  return curve;
}

double aurac(std::span<const Judgement> items) {
  if (items.empty()) throw std::invalid_argument("AURAC of an empty verdict set");
  const auto curve = rejection_accuracy_curve(items);
  double sum = 0.0;
  for (const auto& [x, y] : curve.points) sum += y;
  return sum / static_cast<double>(curve.points.size());
}

namespace {

struct ThresholdStep {
  std::size_t tp;
  std::size_t fp;
};

// Cumulative (tp, fp) after flagging each distinct entropy, highest first.
std::vector<ThresholdStep> threshold_sweep(std::span<const Judgement> items, std::size_t& positives) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return items[a].entropy > items[b].entropy; });
  positives = 0;
  for (const auto& j : items) positives += j.correct ? 0 : 1;
  std::vector<ThresholdStep> steps;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && items[order[j]].entropy == items[order[i]].entropy) {
      if (items[order[j]].correct) ++fp;
      else ++tp;
      ++j;
    }
    steps.push_back({tp, fp});
    i = j;
  }
  return steps;
}

}  // namespace

CurvePoints roc_curve(std::span<const Judgement> items) {
  std::size_t positives = 0;
  const auto steps = threshold_sweep(items, positives);
  const std::size_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0)
    throw std::invalid_argument("ROC curve needs both correct and incorrect verdicts");
  CurvePoints curve;
  curve.kind = CurveKind::Roc;
  curve.points.emplace_back(0.0, 0.0);
  for (const auto& s : steps)
    curve.points.emplace_back(static_cast<double>(s.fp) / static_cast<double>(negatives),
                              static_cast<double>(s.tp) / static_cast<double>(positives));
  return curve;
}

double trapezoid_area(const CurvePoints& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& [x0, y0] = curve.points[i - 1];
    const auto& [x1, y1] = curve.points[i];
    area += (x1 - x0) * (y0 + y1) / 2.0;
  }
  return area;
}

PrecisionRecall precision_recall_curve(std::span<const Judgement> items) {
  std::size_t positives = 0;
  const auto steps = threshold_sweep(items, positives);
  if (positives == 0) throw std::invalid_argument("precision-recall needs an incorrect verdict");
  PrecisionRecall pr;
  pr.curve.kind = CurveKind::PrecisionRecall;
  for (const auto& s : steps) {
    const double precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    const double recall = static_cast<double>(s.tp) / static_cast<double>(positives);
    pr.curve.points.emplace_back(recall, precision);
    if (precision >= pr.peak_precision) {
      pr.peak_precision = precision;
      pr.recall_at_peak = recall;
    }
  }
  return pr;
}

std::optional<double> evaluate(MetricKind metric, std::span<const Judgement> items) {
  if (items.empty()) return std::nullopt;
  switch (metric) {
    case MetricKind::Accuracy: return accuracy(items);
    case MetricKind::Auroc: return auroc(items);
    case MetricKind::Aurac: return aurac(items);
  }
  return std::nullopt;
}

void BootstrapConfig::validate() const {
  if (n_resamples < 1) throw ConfigError("bootstrap needs at least one resample");
}

namespace {

std::string_view curve_name(CurveKind kind) {
  switch (kind) {
    case CurveKind::Roc: return "roc";
    case CurveKind::PrecisionRecall: return "pr";
    case CurveKind::RejectionAccuracy: return "rejection_accuracy";
  }
  return "unknown";
}

}  // namespace

void export_curve(const std::filesystem::path& path, const CurvePoints& curve,
                  const CurveMetadata& metadata) {
  {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "x,y\n";
    char buf[96];
    for (const auto& [x, y] : curve.points) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
      out << buf;
    }
  }
  detail::json meta = {{"curve", std::string(curve_name(curve.kind))},
                       {"metric", metadata.metric},
                       {"grid", metadata.grid},
                       {"seed", metadata.seed},
                       {"points", curve.points.size()}};
  std::ofstream out(path.string() + ".json");
  if (!out) throw ConfigError("cannot write " + path.string() + ".json");
  out << meta.dump(2) << '\n';
}

}  // namespace consortium
