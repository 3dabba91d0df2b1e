#pragma once

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "trendcast/dataset.hpp"
#include "trendcast/errors.hpp"
#include "trendcast/fsvm.hpp"

namespace trendcast {

/// Fraction of positions where the predicted direction matches reality.
inline double directional_accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw ShapeError("directional_accuracy: length mismatch");
  }
  if (predicted.empty()) throw ParameterError("directional_accuracy: empty sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

struct YearScore {
  double accuracy = 0;
  std::size_t n = 0;

  friend bool operator==(const YearScore&, const YearScore&) = default;
};

/// Accuracy within each calendar year present in `dates`. Years without
/// examples never appear.
inline std::map<int, YearScore> per_year_accuracy(std::span<const int> predicted,
                                                  std::span<const int> actual,
                                                  std::span<const Date> dates) {
  if (predicted.size() != actual.size() || predicted.size() != dates.size()) {
    throw ShapeError("per_year_accuracy: length mismatch");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // year -> (hits, n)
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    auto& [hits, n] = counts[dates[i].year];
    hits += predicted[i] == actual[i];
    ++n;
  }
  std::map<int, YearScore> out;
  for (const auto& [year, hn] : counts) {
    out[year] = {static_cast<double>(hn.first) / static_cast<double>(hn.second), hn.second};
  }
  return out;
}

/// Best and worst years by accuracy; ties go to the earlier year.
inline std::pair<int, int> best_worst_years(const std::map<int, YearScore>& per_year) {
  int best = 0, worst = 0;
  double best_acc = -1, worst_acc = 2;
  for (const auto& [year, score] : per_year) {
    if (score.accuracy > best_acc) {
      best_acc = score.accuracy;
      best = year;
    }
    if (score.accuracy < worst_acc) {
      worst_acc = score.accuracy;
      worst = year;
    }
  }
  return {best, worst};
}

/// Root-mean-square residual of the confidences against 0/1 targets, relative
/// to the RMS of the targets themselves (+1 -> 1, -1 -> 0).
inline double relative_rms(std::span<const double> confidences, std::span<const int> actual) {
  if (confidences.size() != actual.size()) throw ShapeError("relative_rms: length mismatch");
  if (confidences.empty()) throw ParameterError("relative_rms: empty sequences");
  double residual = 0, target_power = 0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    if (!(confidences[i] >= 0 && confidences[i] <= 1)) {
      throw ParameterError("relative_rms: confidence outside [0, 1]");
    }
    const double target = actual[i] > 0 ? 1.0 : 0.0;
    const double r = confidences[i] - target;
    residual += r * r;
    target_power += target * target;
  }
  if (target_power == 0) {
    throw DegenerateDenominatorError("relative_rms: no positive targets, denominator is zero");
  }
  const double n = static_cast<double>(confidences.size());
  return std::sqrt(residual / n) / std::sqrt(target_power / n);
}

struct EvalReport {
  std::string split;
  double accuracy = 0;
  std::map<int, YearScore> per_year;
  double relative_rms = 0;
  long tp = 0, tn = 0, fp = 0, fn = 0;
  int best_year = 0, worst_year = 0;

  long n() const { return tp + tn + fp + fn; }
};

/// Scores a trained model on the rows named by `indices`. Rows are normalized
/// with the model's own stats before prediction.
inline EvalReport score_model(const FsvmModel& model, const LabeledDataset& data,
                              std::span<const std::size_t> indices, std::string split_name) {
  if (indices.empty()) throw ParameterError("score_model: empty index list");
  std::vector<int> predicted, actual;
  std::vector<double> confidences;
  std::vector<Date> dates;
  predicted.reserve(indices.size());
  for (std::size_t idx : indices) {
    const auto row = normalize_row(model.norm_stats, data.features[idx]);
    const Prediction p = predict_direction(model, row);
    predicted.push_back(p.direction);
    confidences.push_back(p.confidence);
    actual.push_back(data.labels[idx]);
    dates.push_back(data.dates[idx]);
  }

  EvalReport report;
  report.split = std::move(split_name);
  report.accuracy = directional_accuracy(predicted, actual);
  report.per_year = per_year_accuracy(predicted, actual, dates);
  report.relative_rms = relative_rms(confidences, actual);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (actual[i] > 0) ++(predicted[i] > 0 ? report.tp : report.fn);
    else ++(predicted[i] > 0 ? report.fp : report.tn);
  }
  std::tie(report.best_year, report.worst_year) = best_worst_years(report.per_year);
  return report;
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::vector<std::vector<double>> slice_normalized(const LabeledDataset& data,
                                                         std::span<const std::size_t> indices,
                                                         const NormStats& stats) {
  std::vector<std::vector<double>> rows;
  rows.reserve(indices.size());
  for (std::size_t idx : indices) rows.push_back(normalize_row(stats, data.features[idx]));
  return rows;
}

inline std::vector<int> slice_labels(const LabeledDataset& data,
                                     std::span<const std::size_t> indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t idx : indices) labels.push_back(data.labels[idx]);
  return labels;
}

}  // namespace detail

/// Trains one config on the plan rows named by `indices`, with normalization
/// fitted on those rows only.
inline FsvmModel train_on_indices(const LabeledDataset& data,
                                  std::span<const std::size_t> indices, const TrainConfig& config,
                                  NormMethod method) {
  const NormStats stats = fit_normalizer(data, indices, method);
  const auto rows = detail::slice_normalized(data, indices, stats);
  const auto labels = detail::slice_labels(data, indices);
  return train_fsvm(rows, labels, config, &stats);
}

struct GridRow {
  TrainConfig config;
  double train_accuracy = 0;
  double holdout_accuracy = 0;
  double mean = 0;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;
};

/// Default search grid for one model family: the preset's kernel and
/// membership kind crossed with C, gamma (rbf only) and floor axes.
inline std::vector<TrainConfig> default_grid(const TrainConfig& family) {
  static constexpr double kC[] = {0.1, 1, 10, 100};
  static constexpr double kGamma[] = {0.01, 0.1, 1, 10};
  static constexpr double kFloor[] = {0.3, 0.5, 0.7, 1.0};

  std::vector<TrainConfig> grid;
  for (double c : kC) {
    if (family.kernel.kind == KernelKind::rbf) {
      for (double gamma : kGamma) {
        for (double floor : kFloor) {
          TrainConfig config = family;
          config.C = c;
          config.kernel.gamma = gamma;
          config.membership.floor = floor;
          grid.push_back(config);
        }
      }
    } else {
      for (double floor : kFloor) {
        TrainConfig config = family;
        config.C = c;
        config.membership.floor = floor;
        grid.push_back(config);
      }
    }
  }
  return grid;
}

namespace detail {

inline double effective_gamma(const TrainConfig& config) {
  return config.kernel.kind == KernelKind::rbf ? config.kernel.gamma : 0.0;
}

/// mean desc, then smaller C, smaller gamma, smaller floor, grid order.
inline bool grid_row_beats(const GridRow& a, const GridRow& b) {
  if (a.mean != b.mean) return a.mean > b.mean;
  if (a.config.C != b.config.C) return a.config.C < b.config.C;
  if (effective_gamma(a.config) != effective_gamma(b.config)) {
    return effective_gamma(a.config) < effective_gamma(b.config);
  }
  return a.config.membership.floor < b.config.membership.floor;
}

}  // namespace detail

/// Grid search over the parameter-stage split: trains each config on the
/// plan's train subset, scores train and holdout, ranks by their mean.
/// Rows are evaluated independently (optionally in parallel) and assembled
/// in grid order, so the result is deterministic.
inline GridResult run_parameter_stage(const LabeledDataset& data, const SplitPlan& plan,
                                      const std::vector<TrainConfig>& grid,
                                      NormMethod method = NormMethod::minmax, int jobs = 1) {
  if (grid.empty()) throw ParameterError("run_parameter_stage: empty grid");
  if (plan.train_set.empty() || plan.holdout_set.empty()) {
    throw ParameterError("run_parameter_stage: plan needs nonempty train and holdout subsets");
  }

  const NormStats stats = fit_normalizer(data, plan.train_set, method);
  const auto train_rows = detail::slice_normalized(data, plan.train_set, stats);
  const auto train_labels = detail::slice_labels(data, plan.train_set);
  const auto holdout_rows = detail::slice_normalized(data, plan.holdout_set, stats);
  const auto holdout_labels = detail::slice_labels(data, plan.holdout_set);

  auto accuracy_on = [](const FsvmModel& model, const std::vector<std::vector<double>>& rows,
                        std::span<const int> labels) {
    std::vector<int> predicted;
    predicted.reserve(rows.size());
    for (const auto& row : rows) predicted.push_back(decision_value(model, row) >= 0 ? +1 : -1);
    return directional_accuracy(predicted, labels);
  };

  GridResult result;
  result.rows.resize(grid.size());
  detail::parallel_for(grid.size(), jobs, [&](std::size_t i) {
    GridRow row;
    row.config = grid[i];
    FsvmModel model = train_fsvm(train_rows, train_labels, grid[i], &stats);
    row.train_accuracy = accuracy_on(model, train_rows, train_labels);
    row.holdout_accuracy = accuracy_on(model, holdout_rows, holdout_labels);
    row.mean = 0.5 * (row.train_accuracy + row.holdout_accuracy);
    result.rows[i] = std::move(row);
  });

  result.best = 0;
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (detail::grid_row_beats(result.rows[i], result.rows[result.best])) result.best = i;
  }
  return result;
}

struct ComparisonReport {
  std::string name_a, name_b;
  TrainConfig config_a, config_b;
  EvalReport report_a, report_b;
  double accuracy_difference = 0;  // a minus b, on the comparison holdout
  FsvmModel model_a, model_b;      // the retrained models behind the reports
};

/// Retrains both configs on the comparison train set and scores the holdout.
/// Normalization is fitted on the comparison train rows only; holdout rows
/// are never read before scoring.
inline ComparisonReport run_comparison_stage(const LabeledDataset& data, const SplitPlan& plan,
                                             const TrainConfig& config_a,
                                             const TrainConfig& config_b,
                                             NormMethod method = NormMethod::minmax,
                                             std::string name_a = "model_a",
                                             std::string name_b = "model_b") {
  if (plan.train_set.empty() || plan.holdout_set.empty()) {
    throw ParameterError("run_comparison_stage: plan needs nonempty train and holdout sets");
  }
  const NormStats stats = fit_normalizer(data, plan.train_set, method);
  const auto train_rows = detail::slice_normalized(data, plan.train_set, stats);
  const auto train_labels = detail::slice_labels(data, plan.train_set);

  ComparisonReport report;
  report.name_a = std::move(name_a);
  report.name_b = std::move(name_b);
  report.config_a = config_a;
  report.config_b = config_b;

  report.model_a = train_fsvm(train_rows, train_labels, config_a, &stats);
  report.model_b = train_fsvm(train_rows, train_labels, config_b, &stats);
  report.report_a = score_model(report.model_a, data, plan.holdout_set, "holdout");
  report.report_b = score_model(report.model_b, data, plan.holdout_set, "holdout");
  report.accuracy_difference = report.report_a.accuracy - report.report_b.accuracy;
  return report;
}

}  // namespace trendcast
