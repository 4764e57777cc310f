#pragma once

// Performance and robustness statistics over per-slide prediction scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "stainbench/conditions.hpp"
#include "stainbench/error.hpp"
#include "stainbench/parallel.hpp"
#include "stainbench/rng.hpp"
#include "stainbench/statistics.hpp"

namespace stainbench {

inline constexpr double kHighPerformingAuc = 0.90;
inline constexpr double kHighlyRobustRange = 0.03;
inline constexpr std::size_t kDefaultBootstrapIterations = 1000;
inline constexpr std::size_t kMinBootstrapSlides = 10;
inline constexpr double kFisherZ95 = 1.959963984540054;
// sqrt of the 95% quantile of chi-square with 2 degrees of freedom, -2 ln 0.05.
inline const double kEllipseScale95 = std::sqrt(-2.0 * std::log(0.05));

struct Prediction {
  std::string model_id;
  std::string slide_id;
  int label = 0;
  Condition condition = Condition::Reference;
  double score = 0.0;

  bool operator==(const Prediction&) const = default;
};

using PredictionTable = std::vector<Prediction>;

// ---------------------------------------------------------------------------
// AUC

namespace detail {

// Twice the Mann-Whitney U statistic of positives over negatives, exact.
template <typename LabelAt, typename ScoreAt>
std::uint64_t twice_u(std::size_t n, LabelAt&& label_at, ScoreAt&& score_at, std::vector<std::size_t>& order) {
  order.resize(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score_at(a) < score_at(b); });
  std::uint64_t result = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < n && score_at(order[j]) == score_at(order[i])) {
      (label_at(order[j]) != 0 ? pos : neg) += 1;
      ++j;
    }
    result += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  return result;
}

}  // namespace detail

// Probability that a random positive outscores a random negative, ties
// credited 0.5.
inline double auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw Error(ErrorKind::InvalidArgument, "labels and scores differ in length");
  }
  std::uint64_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    }
    n_pos += static_cast<std::uint64_t>(l);
  }
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorKind::SingleClass, "AUC needs both classes, got " + std::to_string(n_pos) + " positives and " +
                                            std::to_string(n_neg) + " negatives");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw Error(ErrorKind::InvalidArgument, "scores must be finite");
    }
  }
  std::vector<std::size_t> order;
  const std::uint64_t u2 = detail::twice_u(
      labels.size(), [&](std::size_t i) { return labels[i]; }, [&](std::size_t i) { return scores[i]; }, order);
  return static_cast<double>(u2) / static_cast<double>(2 * n_pos * n_neg);
}

// ---------------------------------------------------------------------------
// Per-model tables

// One model's scores as a dense slide x condition matrix; slides sorted by id.
struct ModelPredictions {
  std::string model_id;
  std::vector<std::string> slides;
  std::vector<int> labels;
  std::array<std::vector<double>, 5> scores;

  std::size_t positives() const noexcept {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  }
};

// Rows grouped by model id, in table order within each model.
inline std::map<std::string, PredictionTable> group_by_model(const PredictionTable& table) {
  std::map<std::string, PredictionTable> out;
  for (const Prediction& row : table) {
    out[row.model_id].push_back(row);
  }
  return out;
}

// Validates one model's rows: every condition present, each condition covering
// the same slides exactly once, and one label per slide.
inline ModelPredictions model_predictions(std::span<const Prediction> rows) {
  if (rows.empty()) {
    throw Error(ErrorKind::EmptyInput, "no predictions for model");
  }
  ModelPredictions out;
  out.model_id = rows.front().model_id;
  std::array<std::map<std::string, double>, 5> by_condition;
  std::map<std::string, int> labels;
  for (const Prediction& row : rows) {
    if (row.model_id != out.model_id) {
      throw Error(ErrorKind::InvalidArgument, "rows from several models passed as one");
    }
    if (row.label != 0 && row.label != 1) {
      throw Error(ErrorKind::InconsistentTable, "model '" + out.model_id + "' slide '" + row.slide_id +
                                                    "' has label " + std::to_string(row.label));
    }
    if (!std::isfinite(row.score)) {
      throw Error(ErrorKind::InconsistentTable,
                  "model '" + out.model_id + "' slide '" + row.slide_id + "' has a non-finite score");
    }
    if (!by_condition[condition_index(row.condition)].emplace(row.slide_id, row.score).second) {
      throw Error(ErrorKind::InconsistentTable, "model '" + out.model_id + "' has duplicate rows for slide '" +
                                                    row.slide_id + "' under " +
                                                    std::string(condition_name(row.condition)));
    }
    const auto [it, inserted] = labels.emplace(row.slide_id, row.label);
    if (!inserted && it->second != row.label) {
      throw Error(ErrorKind::InconsistentTable,
                  "model '" + out.model_id + "' slide '" + row.slide_id + "' has conflicting labels");
    }
  }
  std::string missing;
  for (Condition c : kAllConditions) {
    if (by_condition[condition_index(c)].empty()) {
      missing += (missing.empty() ? "" : ", ") + std::string(condition_name(c));
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::IncompleteConditions, "model '" + out.model_id + "' lacks conditions: " + missing);
  }
  for (const auto& [slide, label] : labels) {
    out.slides.push_back(slide);
    out.labels.push_back(label);
  }
  for (Condition c : kAllConditions) {
    const auto& scores = by_condition[condition_index(c)];
    if (scores.size() != labels.size()) {
      throw Error(ErrorKind::InconsistentTable, "model '" + out.model_id + "' condition " +
                                                    std::string(condition_name(c)) + " covers " +
                                                    std::to_string(scores.size()) + " of " +
                                                    std::to_string(labels.size()) + " slides");
    }
    auto& column = out.scores[condition_index(c)];
    column.reserve(scores.size());
    for (const auto& [slide, score] : scores) {
      column.push_back(score);
    }
  }
  const std::size_t pos = out.positives();
  if (pos == 0 || pos == out.labels.size()) {
    throw Error(ErrorKind::SingleClass, "model '" + out.model_id + "' has labels of one class only");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model results

struct ModelResult {
  std::string model_id;
  std::array<double, 5> auc_by_condition{};
  double reference_auc = 0.0;
  double robustness = 0.0;
  // Indexed by condition_index; the reference entry is 0.
  std::array<double, 5> delta_auc{};
  Condition best_condition = Condition::Reference;
  // Every condition attaining the maximum AUC.
  std::vector<Condition> best_conditions;

  bool high_performing() const noexcept { return reference_auc > kHighPerformingAuc; }
  bool highly_robust() const noexcept { return robustness < kHighlyRobustRange; }
};

inline ModelResult model_result_from_aucs(std::string model_id, const std::array<double, 5>& aucs) {
  ModelResult r;
  r.model_id = std::move(model_id);
  r.auc_by_condition = aucs;
  r.reference_auc = aucs[condition_index(Condition::Reference)];
  const auto [lo, hi] = std::minmax_element(aucs.begin(), aucs.end());
  r.robustness = *hi - *lo;
  for (Condition c : kAllConditions) {
    r.delta_auc[condition_index(c)] = aucs[condition_index(c)] - r.reference_auc;
    if (aucs[condition_index(c)] == *hi) {
      r.best_conditions.push_back(c);
    }
  }
  r.best_condition = r.best_conditions.front();
  return r;
}

// From exact Mann-Whitney counts: delta AUCs and the range are formed from
// integer count differences, so a change of k pairs gives exactly
// -k / (n_pos * n_neg) rather than a difference of two rounded AUCs.
inline ModelResult model_result_from_counts(std::string model_id, const std::array<std::uint64_t, 5>& twice_u,
                                            std::uint64_t twice_pairs) {
  std::array<double, 5> aucs{};
  for (std::size_t c = 0; c < aucs.size(); ++c) {
    aucs[c] = static_cast<double>(twice_u[c]) / static_cast<double>(twice_pairs);
  }
  ModelResult r = model_result_from_aucs(std::move(model_id), aucs);
  const auto [lo, hi] = std::minmax_element(twice_u.begin(), twice_u.end());
  r.robustness = static_cast<double>(*hi - *lo) / static_cast<double>(twice_pairs);
  const std::uint64_t ref = twice_u[condition_index(Condition::Reference)];
  for (std::size_t c = 0; c < aucs.size(); ++c) {
    const double diff = twice_u[c] >= ref ? static_cast<double>(twice_u[c] - ref)
                                          : -static_cast<double>(ref - twice_u[c]);
    r.delta_auc[c] = diff / static_cast<double>(twice_pairs);
  }
  return r;
}

inline ModelResult model_result(const ModelPredictions& preds) {
  std::array<std::uint64_t, 5> counts{};
  std::vector<std::size_t> order;
  const std::size_t n = preds.labels.size();
  for (Condition c : kAllConditions) {
    const auto& column = preds.scores[condition_index(c)];
    counts[condition_index(c)] = detail::twice_u(
        n, [&](std::size_t i) { return preds.labels[i]; }, [&](std::size_t i) { return column[i]; }, order);
  }
  const auto pos = static_cast<std::uint64_t>(preds.positives());
  return model_result_from_counts(preds.model_id, counts, 2 * pos * (n - pos));
}

inline ModelResult model_result(std::span<const Prediction> rows) { return model_result(model_predictions(rows)); }

// ---------------------------------------------------------------------------
// Bootstrap over slides

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

inline Interval percentile_interval(std::span<const double> values, double level = 95.0) {
  const double tail = (100.0 - level) / 2.0;
  return {percentile(values, tail), percentile(values, 100.0 - tail)};
}

struct BootstrapResult {
  std::uint64_t seed = 0;
  std::vector<double> reference_auc;
  std::vector<double> robustness;
  std::size_t redraws = 0;
  Interval reference_ci;
  Interval robustness_ci;
  double mean_reference_auc = 0.0;
  double mean_robustness = 0.0;
};

// Seed for a model's bootstrap, derived from the run seed and the model id.
constexpr std::uint64_t model_seed(std::uint64_t seed, std::string_view model_id) noexcept {
  return SplitMix64::substream(seed, fnv1a(model_id))();
}

// Resamples slides with replacement, applying one resample to all five
// conditions. Iteration i draws from SplitMix64::substream(seed, i), so the
// output does not depend on `workers`. Single-class resamples are redrawn;
// more than 10 * n_iter redraws in total raises DegenerateCohort.
inline BootstrapResult bootstrap_model(const ModelPredictions& preds, std::size_t n_iter = kDefaultBootstrapIterations,
                                       std::uint64_t seed = 0, std::size_t workers = 1) {
  const std::size_t n = preds.labels.size();
  if (n < kMinBootstrapSlides) {
    throw Error(ErrorKind::DegenerateCohort, "bootstrap needs at least " + std::to_string(kMinBootstrapSlides) +
                                                 " slides, model '" + preds.model_id + "' has " + std::to_string(n));
  }
  if (n_iter == 0) {
    throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least one iteration");
  }
  const std::size_t cap = 10 * n_iter;
  BootstrapResult out;
  out.seed = seed;
  out.reference_auc.resize(n_iter);
  out.robustness.resize(n_iter);
  std::vector<std::size_t> redraws(n_iter, 0);
  parallel_for(n_iter, workers, [&](std::size_t it) {
    SplitMix64 rng = SplitMix64::substream(seed, it);
    std::vector<std::size_t> sample(n);
    std::size_t pos = 0;
    for (;;) {
      pos = 0;
      for (auto& s : sample) {
        s = static_cast<std::size_t>(rng.below(n));
        pos += static_cast<std::size_t>(preds.labels[s]);
      }
      if (pos != 0 && pos != n) {
        break;
      }
      if (++redraws[it] > cap) {
        throw Error(ErrorKind::DegenerateCohort, "bootstrap redraw cap exceeded for model '" + preds.model_id + "'");
      }
    }
    const auto neg = static_cast<std::uint64_t>(n - pos);
    std::vector<std::size_t> order;
    double lo = 1.0;
    double hi = 0.0;
    for (Condition c : kAllConditions) {
      const auto& column = preds.scores[condition_index(c)];
      const std::uint64_t u2 = detail::twice_u(
          n, [&](std::size_t i) { return preds.labels[sample[i]]; }, [&](std::size_t i) { return column[sample[i]]; },
          order);
      const double value = static_cast<double>(u2) / static_cast<double>(2 * pos * neg);
      if (c == Condition::Reference) {
        out.reference_auc[it] = value;
      }
      lo = std::min(lo, value);
      hi = std::max(hi, value);
    }
    out.robustness[it] = hi - lo;
  });
  out.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  if (out.redraws > cap) {
    throw Error(ErrorKind::DegenerateCohort, "bootstrap redraw cap exceeded for model '" + preds.model_id + "'");
  }
  out.reference_ci = percentile_interval(out.reference_auc);
  out.robustness_ci = percentile_interval(out.robustness);
  out.mean_reference_auc = mean(out.reference_auc);
  out.mean_robustness = mean(out.robustness);
  return out;
}

// ---------------------------------------------------------------------------
// Correlation and ellipses

struct Correlation {
  double r = 0.0;
  std::size_t n = 0;
  // Absent when n is below the CI threshold.
  std::optional<Interval> ci;
  // |r| = 1: the Fisher interval collapses to [r, r].
  bool degenerate = false;
};

// Pearson r with a Fisher-z 95% interval, tanh(atanh(r) +- 1.96 / sqrt(n - 3)).
inline Correlation correlate(std::span<const double> x, std::span<const double> y, std::size_t min_n_for_ci = 4) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::InvalidArgument, "correlation inputs differ in length");
  }
  if (min_n_for_ci < 4) {
    throw Error(ErrorKind::InvalidArgument, "the Fisher interval needs n >= 4");
  }
  const std::size_t n = x.size();
  if (n < 2) {
    throw Error(ErrorKind::TooFewPoints, "correlation needs at least 2 points, got " + std::to_string(n));
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorKind::DegenerateVariance, "correlation input has zero variance");
  }
  Correlation out;
  out.n = n;
  out.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(out.r) >= 1.0 - 1e-12) {
    out.r = std::copysign(1.0, out.r);
    out.degenerate = true;
  }
  if (n >= min_n_for_ci) {
    if (out.degenerate) {
      out.ci = Interval{out.r, out.r};
    } else {
      const double z = std::atanh(out.r);
      const double half = kFisherZ95 / std::sqrt(static_cast<double>(n) - 3.0);
      out.ci = Interval{std::tanh(z - half), std::tanh(z + half)};
    }
  }
  return out;
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Ellipse {
  Point2 center;
  // Semi-axis lengths, major first, at the 95% level.
  double major = 0.0;
  double minor = 0.0;
  // Angle of the major axis from the x axis, radians in (-pi/2, pi/2].
  double rotation = 0.0;
  std::array<double, 3> covariance{};  // xx, xy, yy
};

inline Ellipse ellipse_summary(std::span<const Point2> points) {
  if (points.size() < 3) {
    throw Error(ErrorKind::TooFewPoints, "an ellipse needs at least 3 points");
  }
  const auto n = static_cast<double>(points.size());
  Ellipse e;
  for (const Point2& p : points) {
    e.center.x += p.x;
    e.center.y += p.y;
  }
  e.center.x /= n;
  e.center.y /= n;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Point2& p : points) {
    const Eigen::Vector2d d(p.x - e.center.x, p.y - e.center.y);
    cov += d * d.transpose();
  }
  cov /= n - 1.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const Eigen::Vector2d values = eig.eigenvalues();
  if (!(values(1) > 0.0) || values(0) <= 1e-12 * values(1)) {
    throw Error(ErrorKind::DegenerateCovariance, "points are collinear or identical");
  }
  e.major = std::sqrt(values(1)) * kEllipseScale95;
  e.minor = std::sqrt(values(0)) * kEllipseScale95;
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);
  double angle = std::atan2(axis.y(), axis.x());
  if (angle <= -std::numbers::pi / 2) {
    angle += std::numbers::pi;
  } else if (angle > std::numbers::pi / 2) {
    angle -= std::numbers::pi;
  }
  e.rotation = angle;
  e.covariance = {cov(0, 0), cov(0, 1), cov(1, 1)};
  return e;
}

// ---------------------------------------------------------------------------
// Cohort summary

struct ConditionSummary {
  Condition condition = Condition::Reference;
  std::size_t best_model_count = 0;
  double median_delta_auc = 0.0;
  Interval delta_ci;
  // Minimum over models of the condition's delta AUC.
  double worst_case_decrease = 0.0;
};

struct CohortReport {
  std::vector<ModelResult> models;
  std::array<ConditionSummary, 5> conditions{};
  // Absent when the cohort is too small or degenerate; see correlation_note.
  std::optional<Correlation> performance_robustness;
  std::string correlation_note;
  std::uint64_t boot_seed = 0;
  std::size_t n_bootstrap = 0;
};

// Per-condition summaries over models. Median delta CIs come from n_boot
// resamples of models, resample i drawn from SplitMix64::substream(seed, i)
// and shared by all conditions.
inline CohortReport cohort_stats(std::span<const ModelResult> results, std::uint64_t boot_seed,
                                 std::size_t n_boot = kDefaultBootstrapIterations, std::size_t min_n_for_ci = 4) {
  if (results.empty()) {
    throw Error(ErrorKind::EmptyInput, "cohort statistics need at least one model");
  }
  if (n_boot == 0) {
    throw Error(ErrorKind::InvalidArgument, "cohort bootstrap needs at least one resample");
  }
  CohortReport report;
  report.models.assign(results.begin(), results.end());
  report.boot_seed = boot_seed;
  report.n_bootstrap = n_boot;
  const std::size_t m = results.size();

  std::vector<std::vector<double>> boot_medians(kAllConditions.size(), std::vector<double>(n_boot));
  std::vector<double> sample(m);
  std::vector<std::size_t> picks(m);
  for (std::size_t it = 0; it < n_boot; ++it) {
    SplitMix64 rng = SplitMix64::substream(boot_seed, it);
    for (auto& p : picks) {
      p = static_cast<std::size_t>(rng.below(m));
    }
    for (Condition c : kAllConditions) {
      for (std::size_t k = 0; k < m; ++k) {
        sample[k] = results[picks[k]].delta_auc[condition_index(c)];
      }
      boot_medians[condition_index(c)][it] = percentile_inplace(sample, 50.0);
    }
  }

  std::vector<double> deltas(m);
  for (Condition c : kAllConditions) {
    ConditionSummary& s = report.conditions[condition_index(c)];
    s.condition = c;
    for (std::size_t k = 0; k < m; ++k) {
      deltas[k] = results[k].delta_auc[condition_index(c)];
      const auto& best = results[k].best_conditions;
      s.best_model_count += static_cast<std::size_t>(std::find(best.begin(), best.end(), c) != best.end());
    }
    s.median_delta_auc = median(deltas);
    s.worst_case_decrease = *std::min_element(deltas.begin(), deltas.end());
    s.delta_ci = percentile_interval(boot_medians[condition_index(c)]);
  }

  std::vector<double> perf(m);
  std::vector<double> robust(m);
  for (std::size_t k = 0; k < m; ++k) {
    perf[k] = results[k].reference_auc;
    robust[k] = results[k].robustness;
  }
  try {
    report.performance_robustness = correlate(perf, robust, min_n_for_ci);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::TooFewPoints && err.kind() != ErrorKind::DegenerateVariance) {
      throw;
    }
    report.correlation_note = err.what();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct ConditionEffect {
  // Added to every positive slide's score.
  double positive_shift = 0.0;
  // Sd of Gaussian noise added to every score.
  double noise = 0.0;
  // Number of rank-adjacent (positive above negative) slide pairs whose
  // scores are exchanged; each lowers the AUC by exactly 1 / (n_pos * n_neg).
  std::size_t swap_pairs = 0;
};

struct CohortSpec {
  std::size_t n_models = 3;
  std::size_t n_pos = 10;
  std::size_t n_neg = 10;
  // Mean score gap between classes, in units of the score sd.
  double separation = 1.5;
  // Sd of the per-model perturbation of `separation`.
  double model_spread = 0.0;
  std::array<ConditionEffect, 5> conditions{};

  void validate() const {
    if (n_models == 0 || n_pos == 0 || n_neg == 0) {
      throw Error(ErrorKind::InvalidSpec, "cohort needs models and slides of both classes");
    }
    if (!std::isfinite(separation) || !(model_spread >= 0.0) || !std::isfinite(model_spread)) {
      throw Error(ErrorKind::InvalidSpec, "separation must be finite and model_spread nonnegative");
    }
    for (const auto& c : conditions) {
      if (!std::isfinite(c.positive_shift) || !(c.noise >= 0.0) || !std::isfinite(c.noise)) {
        throw Error(ErrorKind::InvalidSpec, "condition shifts must be finite and noise nonnegative");
      }
    }
  }
};

inline std::string synthetic_slide_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "slide" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

inline std::string synthetic_model_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "model" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

// Slides 0..n_pos-1 are positive. Model m draws its base scores from
// substream(seed, m); each condition perturbs a copy of them with its own
// substream, then applies its swaps. A condition with zero shift, zero noise
// and zero swaps reproduces the base scores exactly.
inline PredictionTable synth_cohort(const CohortSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n_pos + spec.n_neg;
  PredictionTable table;
  table.reserve(spec.n_models * n * kAllConditions.size());
  for (std::size_t m = 0; m < spec.n_models; ++m) {
    SplitMix64 rng = SplitMix64::substream(seed, m);
    const double gap = spec.separation + spec.model_spread * rng.normal();
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = rng.normal() + (i < spec.n_pos ? gap : 0.0);
    }
    const std::uint64_t condition_seed = rng();
    const std::string model = synthetic_model_id(m);
    for (Condition c : kAllConditions) {
      const ConditionEffect& effect = spec.conditions[condition_index(c)];
      SplitMix64 crng = SplitMix64::substream(condition_seed, condition_index(c));
      std::vector<double> scores = base;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < spec.n_pos) {
          scores[i] += effect.positive_shift;
        }
        if (effect.noise > 0.0) {
          scores[i] += effect.noise * crng.normal();
        }
      }
      if (effect.swap_pairs > 0) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        // Adjacent (positive, negative) pairs cannot overlap, so any subset
        // of them can be swapped independently.
        std::vector<std::pair<std::size_t, std::size_t>> candidates;
        for (std::size_t r = 0; r + 1 < n; ++r) {
          const std::size_t a = order[r];
          const std::size_t b = order[r + 1];
          if (a < spec.n_pos && b >= spec.n_pos && scores[a] > scores[b]) {
            candidates.emplace_back(a, b);
          }
        }
        if (candidates.size() < effect.swap_pairs) {
          throw Error(ErrorKind::InvalidSpec, "condition " + std::string(condition_name(c)) + " of " + model +
                                                  " has only " + std::to_string(candidates.size()) +
                                                  " swappable pairs, " + std::to_string(effect.swap_pairs) +
                                                  " requested");
        }
        crng.shuffle(std::span(candidates));
        for (std::size_t k = 0; k < effect.swap_pairs; ++k) {
          std::swap(scores[candidates[k].first], scores[candidates[k].second]);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        table.push_back({model, synthetic_slide_id(i), i < spec.n_pos ? 1 : 0, c, scores[i]});
      }
    }
  }
  return table;
}

}  // namespace stainbench
