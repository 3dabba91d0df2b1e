#pragma once

#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trendcast/dataset.hpp"
#include "trendcast/errors.hpp"
#include "trendcast/evaluation.hpp"
#include "trendcast/fsvm.hpp"
#include "trendcast/indicators.hpp"
#include "trendcast/market_data.hpp"

namespace trendcast {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Validation report: JSON lines, one object per flagged row.
// ---------------------------------------------------------------------------

inline std::string validation_to_jsonl(const ValidationReport& report, const PriceSeries& series) {
  std::string out;
  for (const auto& row : report.flagged) {
    json line = {{"row", row.row},
                 {"date", to_iso(series.bars[row.row].date)},
                 {"rule", bar_rule_name(row.rule)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split plans
// ---------------------------------------------------------------------------

inline json split_plan_to_json(const SplitPlan& plan) {
  json cells = json::array();
  for (const auto& cell : plan.cells) {
    cells.push_back({{"year", cell.year},
                     {"label", cell.label},
                     {"total", cell.total},
                     {"parameter", cell.parameter},
                     {"train", cell.train},
                     {"holdout", cell.holdout}});
  }
  return {{"seed", plan.seed},
          {"parameter_fraction", plan.parameter_fraction},
          {"train_fraction", plan.train_fraction},
          {"parameter_set", plan.parameter_set},
          {"train_set", plan.train_set},
          {"holdout_set", plan.holdout_set},
          {"cells", cells}};
}

inline SplitPlan split_plan_from_json(const json& j) {
  SplitPlan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.parameter_fraction = j.at("parameter_fraction").get<double>();
  plan.train_fraction = j.at("train_fraction").get<double>();
  plan.parameter_set = j.at("parameter_set").get<std::vector<std::size_t>>();
  plan.train_set = j.at("train_set").get<std::vector<std::size_t>>();
  plan.holdout_set = j.at("holdout_set").get<std::vector<std::size_t>>();
  for (const auto& c : j.at("cells")) {
    YearClassCell cell;
    cell.year = c.at("year").get<int>();
    cell.label = c.at("label").get<int>();
    cell.total = c.at("total").get<std::size_t>();
    cell.parameter = c.at("parameter").get<std::size_t>();
    cell.train = c.at("train").get<std::size_t>();
    cell.holdout = c.at("holdout").get<std::size_t>();
    plan.cells.push_back(cell);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Norm stats, kernel/membership/train config
// ---------------------------------------------------------------------------

inline json norm_stats_to_json(const NormStats& stats) {
  return {{"method", std::string(norm_method_name(stats.method))},
          {"location", stats.location},
          {"scale", stats.scale}};
}

inline NormStats norm_stats_from_json(const json& j) {
  NormStats stats;
  auto method = norm_method_from_name(j.at("method").get<std::string>());
  if (!method) throw ParseError("norm_stats: unknown method");
  stats.method = *method;
  stats.location = j.at("location").get<std::vector<double>>();
  stats.scale = j.at("scale").get<std::vector<double>>();
  return stats;
}

inline json train_config_to_json(const TrainConfig& config) {
  return {{"C", config.C},
          {"kernel", std::string(kernel_name(config.kernel.kind))},
          {"gamma", config.kernel.gamma},
          {"membership", std::string(membership_name(config.membership.kind))},
          {"floor", config.membership.floor},
          {"tolerance", config.tolerance},
          {"max_passes", config.max_passes},
          {"seed", config.seed}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig config;
  config.C = j.at("C").get<double>();
  auto kernel = kernel_from_name(j.at("kernel").get<std::string>());
  if (!kernel) throw ParseError("train_config: unknown kernel");
  config.kernel.kind = *kernel;
  config.kernel.gamma = j.at("gamma").get<double>();
  auto membership = membership_from_name(j.at("membership").get<std::string>());
  if (!membership) throw ParseError("train_config: unknown membership");
  config.membership.kind = *membership;
  config.membership.floor = j.at("floor").get<double>();
  config.tolerance = j.at("tolerance").get<double>();
  config.max_passes = j.at("max_passes").get<int>();
  config.seed = j.at("seed").get<std::uint64_t>();
  return config;
}

// ---------------------------------------------------------------------------
// Model: versioned document. nlohmann prints doubles with shortest
// round-trip formatting, so parse(dump(model)) reproduces every coefficient
// bit for bit.
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline json model_to_json(const FsvmModel& model) {
  return {{"format_version", kModelFormatVersion},
          {"kernel", {{"kind", std::string(kernel_name(model.kernel.kind))},
                      {"gamma", model.kernel.gamma}}},
          {"norm_stats", norm_stats_to_json(model.norm_stats)},
          {"config", train_config_to_json(model.config)},
          {"bias", model.bias},
          {"support_vectors", model.support_vectors},
          {"alphas", model.alphas},
          {"labels", model.labels},
          {"memberships", model.memberships},
          {"support_indices", model.support_indices},
          {"diagnostics", {{"iterations", model.diagnostics.iterations},
                           {"final_kkt_violation", model.diagnostics.final_kkt_violation},
                           {"dual_objective", model.diagnostics.dual_objective},
                           {"converged", model.diagnostics.converged}}}};
}

inline FsvmModel model_from_json(const json& j) {
  const int version = j.at("format_version").get<int>();
  if (version != kModelFormatVersion) {
    throw ParseError("model: unsupported format_version " + std::to_string(version));
  }
  FsvmModel model;
  auto kernel = kernel_from_name(j.at("kernel").at("kind").get<std::string>());
  if (!kernel) throw ParseError("model: unknown kernel");
  model.kernel.kind = *kernel;
  model.kernel.gamma = j.at("kernel").at("gamma").get<double>();
  model.norm_stats = norm_stats_from_json(j.at("norm_stats"));
  model.config = train_config_from_json(j.at("config"));
  model.bias = j.at("bias").get<double>();
  model.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
  model.alphas = j.at("alphas").get<std::vector<double>>();
  model.labels = j.at("labels").get<std::vector<int>>();
  model.memberships = j.at("memberships").get<std::vector<double>>();
  model.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
  const auto& d = j.at("diagnostics");
  model.diagnostics.iterations = d.at("iterations").get<int>();
  model.diagnostics.final_kkt_violation = d.at("final_kkt_violation").get<double>();
  model.diagnostics.dual_objective = d.at("dual_objective").get<double>();
  model.diagnostics.converged = d.at("converged").get<bool>();
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation reports and grid results
// ---------------------------------------------------------------------------

inline json eval_report_to_json(const EvalReport& report) {
  json per_year = json::array();
  for (const auto& [year, score] : report.per_year) {
    per_year.push_back({{"year", year}, {"accuracy", score.accuracy}, {"n", score.n}});
  }
  return {{"split", report.split},
          {"accuracy", report.accuracy},
          {"relative_rms", report.relative_rms},
          {"confusion", {{"tp", report.tp}, {"tn", report.tn}, {"fp", report.fp}, {"fn", report.fn}}},
          {"per_year", per_year},
          {"best_year", report.best_year},
          {"worst_year", report.worst_year}};
}

inline json grid_result_to_json(const GridResult& result) {
  json rows = json::array();
  for (const auto& row : result.rows) {
    rows.push_back({{"config", train_config_to_json(row.config)},
                    {"train_accuracy", row.train_accuracy},
                    {"holdout_accuracy", row.holdout_accuracy},
                    {"mean", row.mean}});
  }
  return {{"rows", rows}, {"best", result.best}};
}

inline GridResult grid_result_from_json(const json& j) {
  GridResult result;
  for (const auto& r : j.at("rows")) {
    GridRow row;
    row.config = train_config_from_json(r.at("config"));
    row.train_accuracy = r.at("train_accuracy").get<double>();
    row.holdout_accuracy = r.at("holdout_accuracy").get<double>();
    row.mean = r.at("mean").get<double>();
    result.rows.push_back(row);
  }
  result.best = j.at("best").get<std::size_t>();
  return result;
}

inline std::string grid_result_to_csv(const GridResult& result) {
  std::string out = "C,kernel,gamma,membership,floor,train_accuracy,holdout_accuracy,mean,best\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& row = result.rows[i];
    out += detail::format_double(row.config.C);
    out += ',';
    out += kernel_name(row.config.kernel.kind);
    out += ',';
    out += detail::format_double(row.config.kernel.gamma);
    out += ',';
    out += membership_name(row.config.membership.kind);
    out += ',';
    out += detail::format_double(row.config.membership.floor);
    out += ',';
    out += detail::format_double(row.train_accuracy);
    out += ',';
    out += detail::format_double(row.holdout_accuracy);
    out += ',';
    out += detail::format_double(row.mean);
    out += ',';
    out += (i == result.best ? "1" : "0");
    out += '\n';
  }
  return out;
}

inline json comparison_report_to_json(const ComparisonReport& report) {
  return {{"model_a", {{"name", report.name_a},
                       {"config", train_config_to_json(report.config_a)},
                       {"report", eval_report_to_json(report.report_a)}}},
          {"model_b", {{"name", report.name_b},
                       {"config", train_config_to_json(report.config_b)},
                       {"report", eval_report_to_json(report.report_b)}}},
          {"accuracy_difference", report.accuracy_difference}};
}

/// Two-column gnuplot data: year and accuracy.
inline std::string accuracy_by_year_dat(const EvalReport& report) {
  std::string out = "# year accuracy\n";
  for (const auto& [year, score] : report.per_year) {
    out += std::to_string(year);
    out += ' ';
    out += detail::format_double(score.accuracy);
    out += '\n';
  }
  return out;
}

/// Per-year accuracies of both compared models, one CSV row per year.
inline std::string comparison_per_year_csv(const ComparisonReport& report) {
  std::string out = "year,n," + report.name_a + "_accuracy," + report.name_b + "_accuracy\n";
  for (const auto& [year, score_a] : report.report_a.per_year) {
    out += std::to_string(year);
    out += ',';
    out += std::to_string(score_a.n);
    out += ',';
    out += detail::format_double(score_a.accuracy);
    out += ',';
    auto it = report.report_b.per_year.find(year);
    out += detail::format_double(it == report.report_b.per_year.end() ? 0.0 : it->second.accuracy);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature matrix / labeled dataset CSV
// ---------------------------------------------------------------------------

inline std::string feature_matrix_to_csv(const FeatureMatrix& matrix) {
  std::string out = "date";
  for (const auto& spec : matrix.columns) {
    out += ',';
    out += column_name(spec);
  }
  out += '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out += to_iso(matrix.dates[r]);
    for (double v : matrix.values[r]) {
      out += ',';
      out += detail::format_double(v);
    }
    out += '\n';
  }
  return out;
}

/// Labeled examples with the split memberships of both experiments:
/// `param_split` partitions the parameter sample (rest = unused), and
/// `comparison_split` covers the comparison experiment.
inline std::string labeled_dataset_to_csv(const LabeledDataset& data,
                                          const SplitPlan* parameter_plan = nullptr,
                                          const SplitPlan* comparison_plan = nullptr) {
  auto role_column = [&](const SplitPlan* plan) {
    std::vector<std::string> roles(data.size(), "rest");
    if (!plan) return roles;
    for (std::size_t idx : plan->train_set) roles[idx] = "train";
    for (std::size_t idx : plan->holdout_set) roles[idx] = "holdout";
    return roles;
  };
  const auto param_roles = role_column(parameter_plan);
  const auto comparison_roles = role_column(comparison_plan);

  std::string out = "date";
  for (const auto& name : data.column_names) {
    out += ',';
    out += name;
  }
  out += ",label";
  if (parameter_plan) out += ",param_split";
  if (comparison_plan) out += ",comparison_split";
  out += '\n';

  for (std::size_t i = 0; i < data.size(); ++i) {
    out += to_iso(data.dates[i]);
    for (double v : data.features[i]) {
      out += ',';
      out += detail::format_double(v);
    }
    out += ',';
    out += data.labels[i] > 0 ? "+1" : "-1";
    if (parameter_plan) {
      out += ',';
      out += param_roles[i];
    }
    if (comparison_plan) {
      out += ',';
      out += comparison_roles[i];
    }
    out += '\n';
  }
  return out;
}

/// Reads a labeled CSV back (date, feature columns, label; any split columns
/// are ignored). Inverse of labeled_dataset_to_csv for the data fields.
inline LabeledDataset labeled_dataset_from_csv(std::istream& in) {
  std::string line;
  LabeledDataset data;
  bool header_done = false;
  int label_col = -1;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto fields = detail::split_csv_line(trimmed);
    if (!header_done) {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (fields[i] == "label") {
          label_col = static_cast<int>(i);
          break;
        }
        data.column_names.emplace_back(fields[i]);
      }
      if (fields.empty() || fields[0] != "date" || label_col < 0) {
        throw ParseError("labeled CSV: header must be date,<features...>,label[,...]");
      }
      header_done = true;
      continue;
    }
    auto date = parse_date(fields[0], "%Y-%m-%d");
    if (!date) throw ParseError("labeled CSV row " + std::to_string(line_number) + ": bad date");
    std::vector<double> row;
    for (int j = 1; j < label_col; ++j) {
      auto v = detail::parse_price(fields[j]);
      if (!v) throw ParseError("labeled CSV row " + std::to_string(line_number) + ": bad value");
      row.push_back(*v);
    }
    std::string_view label = fields[label_col];
    int y;
    if (label == "+1" || label == "1") y = +1;
    else if (label == "-1") y = -1;
    else throw ParseError("labeled CSV row " + std::to_string(line_number) + ": bad label");
    data.dates.push_back(*date);
    data.features.push_back(std::move(row));
    data.labels.push_back(y);
  }
  if (!header_done) throw ParseError("labeled CSV: missing header");
  return data;
}

}  // namespace trendcast
