// trendcast: daily OHLCV in, direction forecasts and model comparisons out.
//
// Subcommands compose through the output directory: each stage reads the
// previous stage's artifact, so any stage can be rerun in isolation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trendcast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trendcast;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

PriceSeries read_series_artifact(const RunConfig& config, const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact: " + path.string() + " (run ingest?)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_ohlcv_csv(in, config.date_format, config.symbol);
}

LabeledDataset read_labeled_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact: " + path.string() + " (run split?)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return labeled_dataset_from_csv(in);
}

SplitPlan read_plan_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact: " + path.string() + " (run split?)");
  return split_plan_from_json(read_json_file(path));
}

/// Joins a serialized feature matrix with the series' valid closes to build
/// labeled examples; rows are matched by date.
struct FeatureArtifact {
  std::vector<Date> dates;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> column_names;
};

FeatureArtifact read_features_artifact(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing artifact: " + path.string() + " (run featurize?)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  FeatureArtifact artifact;
  std::string line;
  bool header_done = false;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = detail::split_csv_line(view);
    if (!header_done) {
      if (fields.empty() || fields[0] != "date") {
        throw ParseError(path.string() + ": feature CSV must start with a date column");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) artifact.column_names.emplace_back(fields[i]);
      header_done = true;
      continue;
    }
    auto date = parse_date(fields[0], "%Y-%m-%d");
    if (!date) throw ParseError(path.string() + ":" + std::to_string(line_number) + ": bad date");
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = detail::parse_price(fields[i]);
      if (!v) throw ParseError(path.string() + ":" + std::to_string(line_number) + ": bad value");
      row.push_back(*v);
    }
    artifact.dates.push_back(*date);
    artifact.rows.push_back(std::move(row));
  }
  if (!header_done) throw ParseError(path.string() + ": empty feature CSV");
  return artifact;
}

LabeledDataset label_features(const PriceSeries& series, const FeatureArtifact& features,
                              TieRule tie) {
  std::vector<Date> valid_dates;
  std::vector<double> valid_closes;
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    if (series.flags[i] == BarRule::valid) {
      valid_dates.push_back(series.bars[i].date);
      valid_closes.push_back(series.bars[i].close);
    }
  }
  std::map<Date, std::size_t> by_date;
  for (std::size_t i = 0; i < valid_dates.size(); ++i) by_date[valid_dates[i]] = i;

  LabeledDataset data;
  data.column_names = features.column_names;
  for (std::size_t r = 0; r < features.dates.size(); ++r) {
    auto it = by_date.find(features.dates[r]);
    if (it == by_date.end()) {
      throw ParseError("feature row " + to_iso(features.dates[r]) + " not found in series");
    }
    const std::size_t t = it->second;
    if (t + 1 >= valid_closes.size()) continue;  // final day has no label
    int label;
    if (valid_closes[t + 1] > valid_closes[t]) label = +1;
    else if (valid_closes[t + 1] < valid_closes[t]) label = -1;
    else label = tie == TieRule::up ? +1 : -1;
    data.dates.push_back(features.dates[r]);
    data.features.push_back(features.rows[r]);
    data.labels.push_back(label);
  }
  if (data.size() == 0) throw ParameterError("no labeled rows after joining features and series");
  return data;
}

TrainConfig config_from_grid_file(const fs::path& path) {
  GridResult grid = grid_result_from_json(read_json_file(path));
  if (grid.rows.empty()) throw ParseError(path.string() + ": grid result has no rows");
  if (grid.best >= grid.rows.size()) throw ParseError(path.string() + ": best index out of range");
  return grid.rows[grid.best].config;
}

int run(int argc, char** argv) {
  CLI::App app{"stock trend forecasting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file");

  // every config key is also a flag; flags win over the file
  std::vector<std::pair<std::string, std::string>> overrides;
  RunConfig defaults;
  for (const auto& [key, value] : config_items(defaults)) {
    const std::string flag = "--" + key;
    app.add_option_function<std::string>(
        flag, [&overrides, key = key](const std::string& v) { overrides.emplace_back(key, v); },
        "override config key " + key);
  }

  auto* cmd_ingest = app.add_subcommand("ingest", "parse and validate the input CSV");
  auto* cmd_featurize = app.add_subcommand("featurize", "compute the ten-indicator matrix");
  auto* cmd_split = app.add_subcommand("split", "label examples and draw both split plans");
  auto* cmd_grid = app.add_subcommand("grid", "parameter-stage grid search for one family");
  auto* cmd_train = app.add_subcommand("train", "train one model on a plan's train set");
  auto* cmd_evaluate = app.add_subcommand("evaluate", "score a saved model on a split");
  auto* cmd_compare = app.add_subcommand("compare", "retrain two configs and compare on holdout");
  auto* cmd_full = app.add_subcommand("full", "run the whole two-stage protocol");

  std::string grid_family = "na_fsvm";
  cmd_grid->add_option("--family", grid_family, "model family: fsvm or na_fsvm");

  std::string train_family = "na_fsvm", train_from_grid, train_plan, train_model_out;
  cmd_train->add_option("--family", train_family, "model family preset");
  cmd_train->add_option("--from-grid", train_from_grid, "take the best config from this grid result");
  cmd_train->add_option("--plan", train_plan, "split plan JSON (default split_comparison.json)");
  cmd_train->add_option("--model-out", train_model_out, "output model file name");

  std::string eval_model, eval_plan, eval_split = "holdout", eval_out;
  cmd_evaluate->add_option("--model", eval_model, "model JSON to score");
  cmd_evaluate->add_option("--plan", eval_plan, "split plan JSON");
  cmd_evaluate->add_option("--split", eval_split, "which subset to score: train or holdout");
  cmd_evaluate->add_option("--report-out", eval_out, "output report file name");

  std::string compare_grid_a, compare_grid_b;
  cmd_compare->add_option("--grid-a", compare_grid_a, "grid result for the fsvm side");
  cmd_compare->add_option("--grid-b", compare_grid_b, "grid result for the na_fsvm side");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  RunConfig config = config_path.empty() ? RunConfig{} : load_config_file(config_path);
  for (const auto& [key, value] : overrides) apply_config_value(config, key, value);

  const fs::path out_dir = config.out;
  const int jobs = resolve_jobs(config);
  StageWriter writer(out_dir, config_hash_hex(config), config.seed);

  try {
    if (*cmd_ingest) {
      PriceSeries series = detail::load_series_file(config);
      ValidationReport report = validate_series(series);
      writer.write_text("series.csv", serialize_ohlcv_csv(series, config.date_format));
      writer.write_text("validation.jsonl", validation_to_jsonl(report, series));
      std::cout << "ingested " << report.total_rows << " bars, " << report.valid << " valid, "
                << report.flagged.size() << " flagged\n";
    } else if (*cmd_featurize) {
      PriceSeries series = read_series_artifact(config, out_dir / "series.csv");
      FeatureMatrix matrix =
          compute_feature_matrix(series, default_indicator_set(config.momentum_window));
      writer.write_text("features.csv", feature_matrix_to_csv(matrix));
      std::cout << "features: " << matrix.rows() << " rows x " << matrix.cols()
                << " columns (warmup " << matrix.warmup << ", skipped "
                << matrix.skipped_rows.size() << ")\n";
    } else if (*cmd_split) {
      PriceSeries series = read_series_artifact(config, out_dir / "series.csv");
      FeatureArtifact features = read_features_artifact(out_dir / "features.csv");
      LabeledDataset data = label_features(series, features, config.tie_rule);
      SplitPlan parameter_plan = stratified_parameter_split(
          data, config.param_fraction, config.param_train_fraction, config.seed);
      std::span<const std::size_t> exclude;
      if (config.disjoint_param) exclude = parameter_plan.parameter_set;
      SplitPlan comparison_plan = comparison_split(data, config.train_fraction, config.seed + 1,
                                                   exclude, config.chronological);
      writer.write_json("split_parameter.json", split_plan_to_json(parameter_plan));
      writer.write_json("split_comparison.json", split_plan_to_json(comparison_plan));
      writer.write_text("labeled.csv",
                        labeled_dataset_to_csv(data, &parameter_plan, &comparison_plan));
      std::cout << "labeled " << data.size() << " examples; parameter sample "
                << parameter_plan.parameter_set.size() << ", comparison train "
                << comparison_plan.train_set.size() << " / holdout "
                << comparison_plan.holdout_set.size() << "\n";
    } else if (*cmd_grid) {
      LabeledDataset data = read_labeled_artifact(out_dir / "labeled.csv");
      SplitPlan plan = read_plan_artifact(out_dir / "split_parameter.json");
      TrainConfig preset = family_preset(config, grid_family);
      GridResult grid = run_parameter_stage(
          data, plan, build_grid(preset, config.grid_c, config.grid_gamma, config.grid_floor),
          config.norm_method, jobs);
      writer.write_json("grid_" + grid_family + ".json", grid_result_to_json(grid));
      writer.write_text("grid_" + grid_family + ".csv", grid_result_to_csv(grid));
      const GridRow& best = grid.rows[grid.best];
      std::cout << grid_family << " grid: " << grid.rows.size() << " configs, best mean "
                << best.mean << " (C=" << best.config.C << ", gamma=" << best.config.kernel.gamma
                << ", floor=" << best.config.membership.floor << ")\n";
    } else if (*cmd_train) {
      LabeledDataset data = read_labeled_artifact(out_dir / "labeled.csv");
      const fs::path plan_path =
          train_plan.empty() ? out_dir / "split_comparison.json" : fs::path(train_plan);
      SplitPlan plan = read_plan_artifact(plan_path);
      TrainConfig train_config = train_from_grid.empty()
                                     ? family_preset(config, train_family)
                                     : config_from_grid_file(train_from_grid);
      FsvmModel model = train_on_indices(data, plan.train_set, train_config, config.norm_method);
      const std::string name =
          train_model_out.empty() ? "model_" + train_family + ".json" : train_model_out;
      writer.write_json(name, model_to_json(model));
      std::cout << "trained on " << plan.train_set.size() << " examples: "
                << model.support_vectors.size() << " support vectors, bias " << model.bias
                << ", kkt " << model.diagnostics.final_kkt_violation << "\n";
    } else if (*cmd_evaluate) {
      LabeledDataset data = read_labeled_artifact(out_dir / "labeled.csv");
      const fs::path plan_path =
          eval_plan.empty() ? out_dir / "split_comparison.json" : fs::path(eval_plan);
      SplitPlan plan = read_plan_artifact(plan_path);
      const fs::path model_path =
          eval_model.empty() ? out_dir / "model_na_fsvm.json" : fs::path(eval_model);
      if (!fs::exists(model_path)) throw IoError("missing model: " + model_path.string());
      FsvmModel model = model_from_json(read_json_file(model_path));
      const auto& indices = eval_split == "train" ? plan.train_set : plan.holdout_set;
      if (eval_split != "train" && eval_split != "holdout") {
        throw ConfigError("--split must be train or holdout");
      }
      EvalReport report = score_model(model, data, indices, eval_split);
      const std::string name = eval_out.empty() ? "evaluation_" + eval_split + ".json" : eval_out;
      writer.write_json(name, eval_report_to_json(report));
      writer.write_text("accuracy_by_year.dat", accuracy_by_year_dat(report));
      std::cout << eval_split << " accuracy " << report.accuracy << ", relative rms "
                << report.relative_rms << ", best year " << report.best_year << ", worst year "
                << report.worst_year << "\n";
    } else if (*cmd_compare) {
      LabeledDataset data = read_labeled_artifact(out_dir / "labeled.csv");
      SplitPlan plan = read_plan_artifact(out_dir / "split_comparison.json");
      TrainConfig config_a = compare_grid_a.empty() ? family_preset(config, "fsvm")
                                                    : config_from_grid_file(compare_grid_a);
      TrainConfig config_b = compare_grid_b.empty() ? family_preset(config, "na_fsvm")
                                                    : config_from_grid_file(compare_grid_b);
      ComparisonReport report = run_comparison_stage(data, plan, config_a, config_b,
                                                     config.norm_method, "fsvm", "na_fsvm");
      writer.write_json("model_fsvm.json", model_to_json(report.model_a));
      writer.write_json("model_na_fsvm.json", model_to_json(report.model_b));
      writer.write_json("comparison.json", comparison_report_to_json(report));
      writer.write_text("per_year.csv", comparison_per_year_csv(report));
      writer.write_text("accuracy_by_year_fsvm.dat", accuracy_by_year_dat(report.report_a));
      writer.write_text("accuracy_by_year_na_fsvm.dat", accuracy_by_year_dat(report.report_b));
      std::cout << "holdout accuracy: fsvm " << report.report_a.accuracy << ", na_fsvm "
                << report.report_b.accuracy << " (difference "
                << -report.accuracy_difference << " in favor of na_fsvm)\n";
    } else if (*cmd_full) {
      FullProtocolResult result = run_full_protocol(config);
      std::cout << "full protocol complete: " << result.written.size() << " artifacts in "
                << config.out << "\n"
                << "  fsvm holdout accuracy    " << result.comparison.report_a.accuracy << "\n"
                << "  na_fsvm holdout accuracy " << result.comparison.report_b.accuracy << "\n";
    }
  } catch (...) {
    if (!*cmd_full) writer.remove_written();  // full cleans up its own outputs
    throw;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
