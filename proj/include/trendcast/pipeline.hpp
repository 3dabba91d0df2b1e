#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "trendcast/serialize.hpp"

namespace trendcast {

/// Everything a run needs, resolvable from a flat `key = value` config file
/// with per-key command-line overrides. Defaults reproduce the standard
/// two-stage protocol.
struct RunConfig {
  std::string input;
  std::string out = "out";
  std::string date_format = "%d-%m-%Y";
  std::string symbol = "SERIES";
  std::string mode = "full-protocol";  // parameter-stage | comparison | full-protocol
  int momentum_window = 4;
  double param_fraction = 0.10;
  double param_train_fraction = 0.5;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  NormMethod norm_method = NormMethod::minmax;
  TieRule tie_rule = TieRule::down;
  bool disjoint_param = false;  // comparison pool excludes the parameter sample
  bool chronological = false;   // chronological comparison split instead of stratified
  double tolerance = 1e-3;
  int max_passes = 200000;
  std::vector<double> grid_c = {0.1, 1, 10, 100};
  std::vector<double> grid_gamma = {0.01, 0.1, 1, 10};
  std::vector<double> grid_floor = {0.3, 0.5, 0.7, 1.0};
  int jobs = 0;  // 0 = number of processors
};

namespace detail {

inline std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

inline std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (std::string_view field : split_csv_line(text)) {
    auto v = parse_price(field);
    if (!v) throw ConfigError("bad number in list: '" + std::string(field) + "'");
    out.push_back(*v);
  }
  return out;
}

inline bool parse_bool(std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("expected a boolean, got '" + std::string(text) + "'");
}

}  // namespace detail

/// All keys in canonical order. Each key is also a `--key` CLI flag.
inline std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& c) {
  return {
      {"chronological", c.chronological ? "true" : "false"},
      {"date_format", c.date_format},
      {"disjoint_param", c.disjoint_param ? "true" : "false"},
      {"grid_c", detail::join_doubles(c.grid_c)},
      {"grid_floor", detail::join_doubles(c.grid_floor)},
      {"grid_gamma", detail::join_doubles(c.grid_gamma)},
      {"input", c.input},
      {"jobs", std::to_string(c.jobs)},
      {"max_passes", std::to_string(c.max_passes)},
      {"mode", c.mode},
      {"momentum_window", std::to_string(c.momentum_window)},
      {"norm_method", std::string(norm_method_name(c.norm_method))},
      {"out", c.out},
      {"param_fraction", detail::format_double(c.param_fraction)},
      {"param_train_fraction", detail::format_double(c.param_train_fraction)},
      {"seed", std::to_string(c.seed)},
      {"symbol", c.symbol},
      {"tie_rule", c.tie_rule == TieRule::down ? "down" : "up"},
      {"tolerance", detail::format_double(c.tolerance)},
      {"train_fraction", detail::format_double(c.train_fraction)},
  };
}

inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "input") c.input = value;
    else if (key == "out") c.out = value;
    else if (key == "date_format") c.date_format = value;
    else if (key == "symbol") c.symbol = value;
    else if (key == "mode") {
      if (value != "parameter-stage" && value != "comparison" && value != "full-protocol") {
        throw ConfigError("mode must be parameter-stage, comparison or full-protocol");
      }
      c.mode = value;
    } else if (key == "momentum_window") c.momentum_window = std::stoi(value);
    else if (key == "param_fraction") c.param_fraction = std::stod(value);
    else if (key == "param_train_fraction") c.param_train_fraction = std::stod(value);
    else if (key == "train_fraction") c.train_fraction = std::stod(value);
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "norm_method") {
      auto method = norm_method_from_name(value);
      if (!method) throw ConfigError("norm_method must be minmax or zscore");
      c.norm_method = *method;
    } else if (key == "tie_rule") {
      if (value == "down") c.tie_rule = TieRule::down;
      else if (value == "up") c.tie_rule = TieRule::up;
      else throw ConfigError("tie_rule must be down or up");
    } else if (key == "disjoint_param") c.disjoint_param = detail::parse_bool(value);
    else if (key == "chronological") c.chronological = detail::parse_bool(value);
    else if (key == "tolerance") c.tolerance = std::stod(value);
    else if (key == "max_passes") c.max_passes = std::stoi(value);
    else if (key == "grid_c") c.grid_c = detail::parse_double_list(value);
    else if (key == "grid_gamma") c.grid_gamma = detail::parse_double_list(value);
    else if (key == "grid_floor") c.grid_floor = detail::parse_double_list(value);
    else if (key == "jobs") c.jobs = std::stoi(value);
    else throw ConfigError("unknown config key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
}

/// Parses a flat `key = value` file; `#` starts a comment, blank lines are
/// ignored.
inline RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  RunConfig config;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = detail::trim(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) {
      view = detail::trim(view.substr(0, hash));
    }
    if (view.empty()) continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) +
                        ": expected key = value");
    }
    std::string key(detail::trim(view.substr(0, eq)));
    std::string value(detail::trim(view.substr(eq + 1)));
    apply_config_value(config, key, value);
  }
  return config;
}

inline std::string canonical_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_items(config)) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

/// Keys that define the experiment. File locations and the concurrency level
/// cannot change the numbers, so they stay out of the hash text.
inline std::string hashed_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_items(config)) {
    if (key == "input" || key == "out" || key == "jobs") continue;
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

inline std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Experiment identity: FNV-1a over the hashed parameter text, folded with a
/// digest of the input data when the input file is readable. Equal hashes
/// mean equal parameters and equal input bytes, hence equal numeric output.
inline std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = fnv1a64(hashed_config_text(config));
  if (!config.input.empty()) {
    std::ifstream in(config.input, std::ios::binary);
    if (in) {
      std::ostringstream buffer;
      buffer << in.rdbuf();
      h = fnv1a64(buffer.str(), h ^ 0x9e3779b97f4a7c15ull);
    }
  }
  return h;
}

inline std::string config_hash_hex(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

inline int resolve_jobs(const RunConfig& config) {
  if (config.jobs > 0) return config.jobs;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Builds one model family's search grid from the configured axes.
inline std::vector<TrainConfig> build_grid(const TrainConfig& family,
                                           const std::vector<double>& cs,
                                           const std::vector<double>& gammas,
                                           const std::vector<double>& floors) {
  if (cs.empty() || floors.empty() || (family.kernel.kind == KernelKind::rbf && gammas.empty())) {
    throw ParameterError("build_grid: every grid axis needs at least one value");
  }
  std::vector<TrainConfig> grid;
  for (double c : cs) {
    if (family.kernel.kind == KernelKind::rbf) {
      for (double gamma : gammas) {
        for (double floor : floors) {
          TrainConfig config = family;
          config.C = c;
          config.kernel.gamma = gamma;
          config.membership.floor = floor;
          grid.push_back(config);
        }
      }
    } else {
      for (double floor : floors) {
        TrainConfig config = family;
        config.C = c;
        config.membership.floor = floor;
        grid.push_back(config);
      }
    }
  }
  return grid;
}

/// The two model-family presets with the run's solver settings applied.
inline TrainConfig family_preset(const RunConfig& config, const std::string& family) {
  TrainConfig preset;
  if (family == "fsvm") preset = fsvm_preset();
  else if (family == "na_fsvm") preset = na_fsvm_preset();
  else throw ConfigError("unknown model family '" + family + "' (want fsvm or na_fsvm)");
  preset.tolerance = config.tolerance;
  preset.max_passes = config.max_passes;
  preset.seed = config.seed;
  return preset;
}

/// Writes run outputs under one directory, stamping every file with the
/// config hash and seed. Tracks what it wrote so a failed run can remove its
/// partial outputs.
class StageWriter {
 public:
  StageWriter(std::filesystem::path dir, std::string hash_hex, std::uint64_t seed)
      : dir_(std::move(dir)), hash_hex_(std::move(hash_hex)), seed_(seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory: " + dir_.string());
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  /// Text artifact (CSV, dat): stamped with a leading comment line.
  void write_text(const std::string& name, const std::string& body) {
    std::string stamped = "# config_hash=" + hash_hex_ + " seed=" + std::to_string(seed_) + "\n";
    stamped += body;
    write_raw(name, stamped);
  }

  /// JSON-lines artifact: the stamp is a leading meta object, keeping every
  /// line valid JSON.
  void write_jsonl(const std::string& name, json meta, const std::string& body) {
    meta["config_hash"] = hash_hex_;
    meta["seed"] = seed_;
    write_raw(name, meta.dump() + "\n" + body);
  }

  void write_json(const std::string& name, json j) {
    j["config_hash"] = hash_hex_;
    j["seed"] = seed_;
    write_raw(name, j.dump(2) + "\n");
  }

  const std::vector<std::filesystem::path>& written() const { return written_; }

  /// Removes everything this writer created (error-path cleanup).
  void remove_written() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

 private:
  void write_raw(const std::string& name, const std::string& content) {
    const auto target = path(name);
    std::ofstream out(target, std::ios::binary);
    if (!out) throw IoError("cannot write " + target.string());
    out << content;
    out.close();
    if (!out) throw IoError("failed writing " + target.string());
    written_.push_back(target);
  }

  std::filesystem::path dir_;
  std::string hash_hex_;
  std::uint64_t seed_;
  std::vector<std::filesystem::path> written_;
};

struct FullProtocolResult {
  PriceSeries series;
  ValidationReport validation;
  FeatureMatrix features;
  LabeledDataset data;
  SplitPlan parameter_plan;
  SplitPlan comparison_plan;
  GridResult grid_fsvm;
  GridResult grid_na_fsvm;
  ComparisonReport comparison;
  std::vector<std::filesystem::path> written;
};

namespace detail {

inline PriceSeries load_series_file(const RunConfig& config) {
  if (config.input.empty()) throw ConfigError("no input file configured");
  if (!std::filesystem::exists(config.input)) {
    throw IoError("input file does not exist: " + config.input);
  }
  std::ifstream in(config.input, std::ios::binary);
  if (!in) throw IoError("cannot open input file: " + config.input);
  return parse_ohlcv_csv(in, config.date_format, config.symbol);
}

}  // namespace detail

/// The end-to-end protocol: ingest, featurize, label, split, per-family grid
/// search, winner comparison. Every artifact lands in config.out; on error
/// the partial outputs are removed and the exception rethrown.
inline FullProtocolResult run_full_protocol(const RunConfig& config) {
  StageWriter writer(config.out, config_hash_hex(config), config.seed);
  try {
    FullProtocolResult result;
    result.series = detail::load_series_file(config);
    result.validation = validate_series(result.series);
    writer.write_text("series.csv", serialize_ohlcv_csv(result.series, config.date_format));
    writer.write_jsonl("validation.jsonl",
                       {{"type", "meta"},
                        {"total_rows", result.validation.total_rows},
                        {"valid", result.validation.valid}},
                       validation_to_jsonl(result.validation, result.series));

    result.features =
        compute_feature_matrix(result.series, default_indicator_set(config.momentum_window));
    writer.write_text("features.csv", feature_matrix_to_csv(result.features));

    result.data = make_labeled_dataset(result.series, result.features, config.tie_rule);
    result.parameter_plan = stratified_parameter_split(result.data, config.param_fraction,
                                                       config.param_train_fraction, config.seed);
    std::span<const std::size_t> exclude;
    if (config.disjoint_param) exclude = result.parameter_plan.parameter_set;
    result.comparison_plan = comparison_split(result.data, config.train_fraction, config.seed + 1,
                                              exclude, config.chronological);
    writer.write_json("split_parameter.json", split_plan_to_json(result.parameter_plan));
    writer.write_json("split_comparison.json", split_plan_to_json(result.comparison_plan));
    writer.write_text("labeled.csv", labeled_dataset_to_csv(result.data, &result.parameter_plan,
                                                            &result.comparison_plan));

    TrainConfig preset_fsvm = family_preset(config, "fsvm");
    TrainConfig preset_na = family_preset(config, "na_fsvm");
    TrainConfig winner_fsvm = preset_fsvm;
    TrainConfig winner_na = preset_na;

    const int jobs = resolve_jobs(config);
    if (config.mode != "comparison") {
      result.grid_fsvm = run_parameter_stage(
          result.data, result.parameter_plan,
          build_grid(preset_fsvm, config.grid_c, config.grid_gamma, config.grid_floor),
          config.norm_method, jobs);
      result.grid_na_fsvm = run_parameter_stage(
          result.data, result.parameter_plan,
          build_grid(preset_na, config.grid_c, config.grid_gamma, config.grid_floor),
          config.norm_method, jobs);
      writer.write_json("grid_fsvm.json", grid_result_to_json(result.grid_fsvm));
      writer.write_text("grid_fsvm.csv", grid_result_to_csv(result.grid_fsvm));
      writer.write_json("grid_na_fsvm.json", grid_result_to_json(result.grid_na_fsvm));
      writer.write_text("grid_na_fsvm.csv", grid_result_to_csv(result.grid_na_fsvm));
      winner_fsvm = result.grid_fsvm.rows[result.grid_fsvm.best].config;
      winner_na = result.grid_na_fsvm.rows[result.grid_na_fsvm.best].config;
    }

    if (config.mode != "parameter-stage") {
      result.comparison = run_comparison_stage(result.data, result.comparison_plan, winner_fsvm,
                                               winner_na, config.norm_method, "fsvm", "na_fsvm");
      writer.write_json("model_fsvm.json", model_to_json(result.comparison.model_a));
      writer.write_json("model_na_fsvm.json", model_to_json(result.comparison.model_b));
      writer.write_json("comparison.json", comparison_report_to_json(result.comparison));
      writer.write_text("per_year.csv", comparison_per_year_csv(result.comparison));
      writer.write_text("accuracy_by_year_fsvm.dat",
                        accuracy_by_year_dat(result.comparison.report_a));
      writer.write_text("accuracy_by_year_na_fsvm.dat",
                        accuracy_by_year_dat(result.comparison.report_b));
    }

    // manifest records the hash-covered parameters only, so reruns from
    // different checkouts produce identical bytes
    json manifest;
    manifest["config_text"] = hashed_config_text(config);
    writer.write_json("run_manifest.json", manifest);

    result.written = writer.written();
    return result;
  } catch (...) {
    writer.remove_written();
    throw;
  }
}

}  // namespace trendcast
