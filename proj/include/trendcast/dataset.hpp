#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "trendcast/date.hpp"
#include "trendcast/errors.hpp"
#include "trendcast/indicators.hpp"
#include "trendcast/market_data.hpp"

namespace trendcast {

/// Label on a day whose next close equals today's. The binary framing has no
/// flat class, so ties must land somewhere; default is "not an increase".
enum class TieRule { down, up };

/// Direction labels over the valid bars of a series: label[t] compares
/// close[t+1] against close[t] on the valid subsequence. The final valid bar
/// has no label. Requires at least two valid bars.
inline std::vector<int> label_direction(const PriceSeries& series, TieRule tie = TieRule::down) {
  std::vector<double> closes;
  closes.reserve(series.bars.size());
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    BarRule rule = i < series.flags.size() ? series.flags[i] : classify_bar(series.bars[i]);
    if (rule == BarRule::valid) closes.push_back(series.bars[i].close);
  }
  if (closes.size() < 2) throw ParameterError("label_direction: need at least 2 valid bars");
  std::vector<int> labels;
  labels.reserve(closes.size() - 1);
  for (std::size_t t = 0; t + 1 < closes.size(); ++t) {
    if (closes[t + 1] > closes[t]) labels.push_back(+1);
    else if (closes[t + 1] < closes[t]) labels.push_back(-1);
    else labels.push_back(tie == TieRule::up ? +1 : -1);
  }
  return labels;
}

/// Feature rows joined with next-day direction labels. Row order is
/// chronological; `features[i]` belongs to `dates[i]`.
struct LabeledDataset {
  std::vector<Date> dates;
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::vector<std::string> column_names;

  std::size_t size() const { return labels.size(); }
};

/// Aligns a feature matrix with direction labels. The matrix's final row has
/// no next close and is dropped.
inline LabeledDataset make_labeled_dataset(const PriceSeries& series, const FeatureMatrix& matrix,
                                           TieRule tie = TieRule::down) {
  std::vector<int> labels = label_direction(series, tie);
  LabeledDataset data;
  for (const auto& spec : matrix.columns) data.column_names.push_back(column_name(spec));
  // matrix row r sits at valid index warmup + r; its label needs the next
  // valid close to exist, so the final row is unlabeled.
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    std::size_t valid_index = static_cast<std::size_t>(matrix.warmup) + r;
    if (valid_index >= labels.size()) break;
    data.dates.push_back(matrix.dates[r]);
    data.features.push_back(matrix.values[r]);
    data.labels.push_back(labels[valid_index]);
  }
  if (data.size() == 0) throw ParameterError("make_labeled_dataset: no labeled rows");
  return data;
}

/// Per-(year, class) bookkeeping of a split.
struct YearClassCell {
  int year = 0;
  int label = 0;
  std::size_t total = 0;      // examples in the full set
  std::size_t parameter = 0;  // drawn into the parameter-setting sample
  std::size_t train = 0;
  std::size_t holdout = 0;
};

/// Index partition driving one experiment. For the parameter-setting
/// experiment, parameter_set is the stratified sample and train/holdout
/// partition that sample. For the comparison experiment parameter_set is
/// empty and train/holdout partition the pool.
struct SplitPlan {
  std::vector<std::size_t> parameter_set;
  std::vector<std::size_t> train_set;
  std::vector<std::size_t> holdout_set;
  std::uint64_t seed = 0;
  double parameter_fraction = 0;
  double train_fraction = 0;
  std::vector<YearClassCell> cells;
};

namespace detail {

/// Unbiased bounded draw; rejection sampling keeps the sequence identical on
/// every platform (mt19937_64 output is standard-specified).
inline std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

inline void deterministic_shuffle(std::vector<std::size_t>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded_rand(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

/// Indices grouped by (year, label), iterated in sorted order.
inline std::map<std::pair<int, int>, std::vector<std::size_t>> year_class_cells(
    const LabeledDataset& data) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < data.size(); ++i) {
    cells[{data.dates[i].year, data.labels[i]}].push_back(i);
  }
  return cells;
}

inline std::size_t rounded_quota(double fraction, std::size_t count) {
  auto q = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  return std::min(q, count);
}

}  // namespace detail

/// Draws the stratified parameter-setting sample: per (year, class),
/// round(fraction * count) examples chosen uniformly without replacement,
/// then partitions the sample into the preliminary experiment's train and
/// holdout subsets (per-cell, by train_fraction). Year-class cells with
/// fewer than two examples contribute nothing and are recorded as such.
inline SplitPlan stratified_parameter_split(const LabeledDataset& data, double fraction = 0.10,
                                            double train_fraction = 0.5,
                                            std::uint64_t seed = 0) {
  if (!(fraction > 0 && fraction < 1)) {
    throw ParameterError("stratified_parameter_split: fraction must be in (0, 1)");
  }
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ParameterError("stratified_parameter_split: train_fraction must be in (0, 1)");
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.parameter_fraction = fraction;
  plan.train_fraction = train_fraction;

  std::mt19937_64 rng(seed);
  for (auto& [key, indices] : detail::year_class_cells(data)) {
    YearClassCell cell;
    cell.year = key.first;
    cell.label = key.second;
    cell.total = indices.size();

    std::size_t quota = indices.size() < 2 ? 0 : detail::rounded_quota(fraction, indices.size());
    cell.parameter = quota;
    if (quota > 0) {
      detail::deterministic_shuffle(indices, rng);
      std::size_t n_train = detail::rounded_quota(train_fraction, quota);
      if (quota >= 2) n_train = std::clamp<std::size_t>(n_train, 1, quota - 1);
      else n_train = quota;  // a single drawn example trains
      cell.train = n_train;
      cell.holdout = quota - n_train;
      for (std::size_t i = 0; i < quota; ++i) {
        plan.parameter_set.push_back(indices[i]);
        (i < n_train ? plan.train_set : plan.holdout_set).push_back(indices[i]);
      }
    }
    plan.cells.push_back(cell);
  }
  std::sort(plan.parameter_set.begin(), plan.parameter_set.end());
  std::sort(plan.train_set.begin(), plan.train_set.end());
  std::sort(plan.holdout_set.begin(), plan.holdout_set.end());
  return plan;
}

/// Partitions the pool into the comparison experiment's train and holdout
/// sets, per-year per-class proportional. The holdout keeps at least one
/// example per non-empty cell even as train_fraction approaches 1.
/// `exclude` removes indices (e.g. the parameter sample) from the pool;
/// `chronological` switches to an earlier-train/later-holdout split.
inline SplitPlan comparison_split(const LabeledDataset& data, double train_fraction = 0.8,
                                  std::uint64_t seed = 0,
                                  std::span<const std::size_t> exclude = {},
                                  bool chronological = false) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ParameterError("comparison_split: train_fraction must be in (0, 1)");
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.train_fraction = train_fraction;

  std::unordered_set<std::size_t> excluded(exclude.begin(), exclude.end());

  if (chronological) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!excluded.contains(i)) pool.push_back(i);
    }
    if (pool.size() < 2) throw ParameterError("comparison_split: need at least 2 examples");
    std::size_t n_train =
        std::clamp<std::size_t>(detail::rounded_quota(train_fraction, pool.size()), 1,
                                pool.size() - 1);
    plan.train_set.assign(pool.begin(), pool.begin() + n_train);
    plan.holdout_set.assign(pool.begin() + n_train, pool.end());
    return plan;
  }

  std::mt19937_64 rng(seed);
  for (auto& [key, all_indices] : detail::year_class_cells(data)) {
    std::vector<std::size_t> indices;
    for (std::size_t idx : all_indices) {
      if (!excluded.contains(idx)) indices.push_back(idx);
    }
    if (indices.empty()) continue;

    YearClassCell cell;
    cell.year = key.first;
    cell.label = key.second;
    cell.total = indices.size();

    std::size_t n_train = detail::rounded_quota(train_fraction, indices.size());
    n_train = std::min(n_train, indices.size() - 1);  // holdout keeps >= 1
    cell.train = n_train;
    cell.holdout = indices.size() - n_train;

    detail::deterministic_shuffle(indices, rng);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      (i < n_train ? plan.train_set : plan.holdout_set).push_back(indices[i]);
    }
    plan.cells.push_back(cell);
  }
  std::sort(plan.train_set.begin(), plan.train_set.end());
  std::sort(plan.holdout_set.begin(), plan.holdout_set.end());
  if (plan.train_set.empty() || plan.holdout_set.empty()) {
    throw ParameterError("comparison_split: a split side came out empty");
  }
  return plan;
}

enum class NormMethod { minmax, zscore };

inline std::string_view norm_method_name(NormMethod m) {
  return m == NormMethod::minmax ? "minmax" : "zscore";
}

inline std::optional<NormMethod> norm_method_from_name(std::string_view name) {
  if (name == "minmax") return NormMethod::minmax;
  if (name == "zscore") return NormMethod::zscore;
  return std::nullopt;
}

/// Per-feature affine normalization: value' = (value - location) / scale.
struct NormStats {
  NormMethod method = NormMethod::minmax;
  std::vector<double> location;
  std::vector<double> scale;

  std::size_t cols() const { return location.size(); }

  static NormStats identity(std::size_t columns) {
    NormStats stats;
    stats.location.assign(columns, 0.0);
    stats.scale.assign(columns, 1.0);
    return stats;
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Fits normalization statistics from the rows named by `indices` only.
/// minmax maps the slice's min to 0 and max to 1; zscore maps its mean to 0
/// and (population) standard deviation to 1. A constant column is an error.
inline NormStats fit_normalizer(const std::vector<std::vector<double>>& rows,
                                std::span<const std::size_t> indices, NormMethod method,
                                std::span<const std::string> column_names = {}) {
  if (indices.empty()) throw ParameterError("fit_normalizer: empty index list");
  const std::size_t cols = rows[indices[0]].size();

  auto name_of = [&](std::size_t j) {
    return j < column_names.size() ? column_names[j] : "column " + std::to_string(j);
  };

  NormStats stats;
  stats.method = method;
  stats.location.resize(cols);
  stats.scale.resize(cols);

  for (std::size_t j = 0; j < cols; ++j) {
    if (method == NormMethod::minmax) {
      double lo = rows[indices[0]][j], hi = lo;
      for (std::size_t idx : indices) {
        lo = std::min(lo, rows[idx][j]);
        hi = std::max(hi, rows[idx][j]);
      }
      if (hi - lo <= 0) {
        throw DegenerateFeatureError("fit_normalizer: " + name_of(j) +
                                     " is constant on the training slice");
      }
      stats.location[j] = lo;
      stats.scale[j] = hi - lo;
    } else {
      double mean = 0;
      for (std::size_t idx : indices) mean += rows[idx][j];
      mean /= static_cast<double>(indices.size());
      double var = 0;
      for (std::size_t idx : indices) {
        double d = rows[idx][j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(indices.size());
      double stdev = std::sqrt(var);
      if (stdev <= 0) {
        throw DegenerateFeatureError("fit_normalizer: " + name_of(j) +
                                     " is constant on the training slice");
      }
      stats.location[j] = mean;
      stats.scale[j] = stdev;
    }
  }
  return stats;
}

inline NormStats fit_normalizer(const LabeledDataset& data, std::span<const std::size_t> indices,
                                NormMethod method) {
  return fit_normalizer(data.features, indices, method, data.column_names);
}

inline std::vector<double> normalize_row(const NormStats& stats, std::span<const double> row) {
  if (row.size() != stats.cols()) {
    throw ShapeError("normalize_row: expected " + std::to_string(stats.cols()) +
                     " columns, got " + std::to_string(row.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - stats.location[j]) / stats.scale[j];
  return out;
}

/// Applies the affine map to every row. Holdout values may land outside the
/// training range; no clamping.
inline std::vector<std::vector<double>> apply_normalizer(
    const NormStats& stats, const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(normalize_row(stats, row));
  return out;
}

inline std::vector<double> invert_normalized_row(const NormStats& stats,
                                                 std::span<const double> row) {
  if (row.size() != stats.cols()) {
    throw ShapeError("invert_normalized_row: column count mismatch");
  }
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * stats.scale[j] + stats.location[j];
  return out;
}

}  // namespace trendcast
