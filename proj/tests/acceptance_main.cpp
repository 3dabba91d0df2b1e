// Acceptance suite: one criterion per case, one pass/fail line each.
// Run with no arguments for the whole suite, or name criteria to filter.
//
// Extra maintenance commands (not criteria):
//   write_fixture  regenerate data/synthetic_trend.csv from the committed seed
//   write_golden   rerun the benchmark and overwrite tests/golden/full_run

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qp_reference.hpp"
#include "test_support.hpp"
#include "trendcast/pipeline.hpp"

namespace fs = std::filesystem;
using namespace trendcast;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kSourceDir = TRENDCAST_SOURCE_DIR;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool condition, const std::string& message) {
    if (!condition && ok) {
      ok = false;
      detail = message;
    }
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("trendcast_accept_" + tag + "_" +
                                          std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig benchmark_config(const fs::path& out_dir) {
  RunConfig config = load_config_file(kSourceDir / "data" / "full_config.cfg");
  config.input = (kSourceDir / "data" / "synthetic_trend.csv").string();
  config.out = out_dir.string();
  return config;
}

std::vector<std::string> sorted_file_names(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

void compare_trees(Check& check, const fs::path& left, const fs::path& right) {
  auto left_names = sorted_file_names(left);
  auto right_names = sorted_file_names(right);
  if (left_names != right_names) {
    check.require(false, "file sets differ between " + left.string() + " and " + right.string());
    return;
  }
  for (const auto& name : left_names) {
    if (read_file(left / name) != read_file(right / name)) {
      check.require(false, name + " differs");
      return;
    }
  }
}

// --- criteria -------------------------------------------------------------

Check solver_oracle() {
  Check check;
  const auto start = Clock::now();
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto instance = testing::make_random_instance(seed * 977 + 3);
    FsvmModel model = train_fsvm_with_memberships(instance.features, instance.labels,
                                                  instance.memberships, instance.config);
    std::vector<double> box(instance.memberships.size());
    for (std::size_t i = 0; i < box.size(); ++i) {
      box[i] = instance.memberships[i] * instance.config.C;
    }
    auto reference = testing::solve_dual_reference(instance.features, instance.labels, box,
                                                   instance.config.kernel);
    const double gap = std::abs(model.diagnostics.dual_objective - reference.objective);
    const double scale = std::max(1.0, std::abs(reference.objective));
    check.require(gap <= 1e-6 * scale, "instance " + std::to_string(seed) + ": |smo - pg| = " +
                                           std::to_string(gap) + " (objective " +
                                           std::to_string(reference.objective) + ")");
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  check.require(elapsed < 5.0, "runtime " + std::to_string(elapsed) + "s exceeds 5s");
  return check;
}

Check kkt_suite() {
  Check check;
  auto verify = [&](const FsvmModel& model, const std::vector<std::vector<double>>& rows,
                    const std::vector<int>& labels, const std::vector<double>& memberships,
                    const TrainConfig& config, const std::string& what) {
    const double violation = kkt_max_violation(model, rows, labels, memberships, config.C);
    check.require(violation <= config.tolerance,
                  what + ": kkt violation " + std::to_string(violation) + " > tolerance " +
                      std::to_string(config.tolerance));
  };

  for (std::uint64_t seed = 200; seed < 220; ++seed) {
    auto instance = testing::make_random_instance(seed);
    FsvmModel model = train_fsvm_with_memberships(instance.features, instance.labels,
                                                  instance.memberships, instance.config);
    verify(model, instance.features, instance.labels, instance.memberships, instance.config,
           "random instance " + std::to_string(seed));
  }

  testing::Gaussian g(42);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    int y = i % 2 == 0 ? +1 : -1;
    rows.push_back({g() + 1.2 * y, g() - 0.4 * y});
    labels.push_back(y);
  }
  for (TrainConfig preset : {fsvm_preset(), na_fsvm_preset()}) {
    FsvmModel model = train_fsvm(rows, labels, preset);
    auto memberships = make_memberships(preset.membership, rows, labels);
    verify(model, rows, labels, memberships, preset,
           std::string("preset ") + std::string(membership_name(preset.membership.kind)));
  }
  return check;
}

Check analytic_cases() {
  Check check;
  {
    std::vector<std::vector<double>> x{{-1.0}, {+1.0}};
    std::vector<int> y{-1, +1};
    TrainConfig config;
    config.C = 10;
    config.kernel = {KernelKind::linear, 1.0};
    config.tolerance = 1e-10;
    FsvmModel model = train_fsvm(x, y, config);
    check.require(model.alphas.size() == 2, "two-point problem: expected 2 support vectors");
    if (model.alphas.size() == 2) {
      check.require(std::abs(model.alphas[0] - 0.5) <= 1e-8 &&
                        std::abs(model.alphas[1] - 0.5) <= 1e-8,
                    "two-point alphas are not [0.5, 0.5]");
    }
    check.require(std::abs(model.bias) <= 1e-8, "two-point bias is not 0");
  }
  {
    std::vector<std::vector<double>> x{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    std::vector<int> y{-1, -1, +1, +1};
    TrainConfig config;
    config.C = 10;
    config.kernel = {KernelKind::rbf, 1.0};
    config.tolerance = 1e-6;
    FsvmModel model = train_fsvm(x, y, config);
    for (std::size_t i = 0; i < x.size(); ++i) {
      check.require(predict_direction(model, x[i]).direction == y[i],
                    "xor point " + std::to_string(i) + " misclassified");
    }
    check.require(model.support_vectors.size() == 4, "xor should keep all four support vectors");
  }
  return check;
}

Check reduction_identity() {
  Check check;
  testing::Gaussian g(7);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    int y = i % 2 == 0 ? +1 : -1;
    rows.push_back({g() + y, g() - 0.5 * y});
    labels.push_back(y);
  }
  TrainConfig uniform = na_fsvm_preset();
  uniform.membership = {MembershipKind::uniform, 1.0};
  TrainConfig decay = uniform;
  decay.membership = {MembershipKind::time_decay, 1.0};
  TrainConfig centered = uniform;
  centered.membership = {MembershipKind::class_center, 1.0};

  FsvmModel m_uniform = train_fsvm(rows, labels, uniform);
  FsvmModel m_decay = train_fsvm(rows, labels, decay);
  FsvmModel m_centered = train_fsvm(rows, labels, centered);

  testing::Gaussian probes(8);
  for (int p = 0; p < 50; ++p) {
    std::vector<double> x{2 * probes(), 2 * probes()};
    const double f = decision_value(m_uniform, x);
    check.require(std::abs(decision_value(m_decay, x) - f) <= 1e-6,
                  "time_decay floor=1 drifted from the unweighted machine");
    check.require(std::abs(decision_value(m_centered, x) - f) <= 1e-6,
                  "class_center floor=1 drifted from the unweighted machine");
  }
  return check;
}

Check indicator_oracles() {
  Check check;
  auto series = testing::make_random_walk(31, 400);
  std::span<const OhlcvBar> bars(series.bars);

  for (Indicator which : {Indicator::sma, Indicator::momentum, Indicator::ad_osc}) {
    IndicatorSpec spec;
    if (which == Indicator::sma) spec = {Indicator::sma, 30, {}};
    else if (which == Indicator::momentum) spec = {Indicator::momentum, 4, {}};
    else spec = {Indicator::ad_osc, 1, {{"fallback", 50.0}}};

    IndicatorStream stream(spec);
    std::vector<double> streamed;
    for (const auto& bar : series.bars) {
      if (auto v = stream.push(bar)) streamed.push_back(*v);
    }
    const std::size_t first = static_cast<std::size_t>(lookback(spec));
    check.require(streamed.size() == series.bars.size() - first,
                  column_name(spec) + ": streamed size mismatch");
    for (std::size_t t = first; t < series.bars.size() && check.ok; ++t) {
      const double batch = indicator_value(spec, bars, t);
      check.require(std::abs(streamed[t - first] - batch) <= 1e-12,
                    column_name(spec) + ": stream/batch gap at t=" + std::to_string(t));
    }
  }

  for (const auto& bar : series.bars) {
    if (bar.high == bar.low) continue;
    const double v = ad_oscillator(bar);
    check.require(v >= 0.0 && v <= 100.0, "range oscillator left [0, 100]");
  }

  std::ifstream sample(kSourceDir / "data" / "nasdaq_oct_sample.csv");
  auto nasdaq = parse_ohlcv_csv(sample, "%d-%m-%Y", "NASDAQ");
  auto report = validate_series(nasdaq);
  bool corrupt_row_flagged = false;
  for (const auto& row : report.flagged) {
    if (nasdaq.bars[row.row].date == Date{1993, 10, 1} && row.rule == BarRule::open_below_low) {
      corrupt_row_flagged = true;
    }
  }
  check.require(corrupt_row_flagged, "the corrupt 1993 row was not flagged as open < low");
  return check;
}

Check split_invariants() {
  Check check;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    testing::Gaussian g(5000 + trial);
    std::vector<std::tuple<int, int, int>> years;
    for (int year = 2001; year <= 2005; ++year) {
      years.push_back({year, 10 + static_cast<int>(g.bits() % 300),
                       10 + static_cast<int>(g.bits() % 300)});
    }
    auto data = testing::make_labeled(years, trial, 3);
    const double fraction = 0.1;
    auto plan = stratified_parameter_split(data, fraction, 0.5, trial + 17);
    for (const auto& cell : plan.cells) {
      if (cell.total < 2) continue;
      const double expected = fraction * static_cast<double>(cell.total);
      check.require(std::abs(static_cast<double>(cell.parameter) - expected) <= 1.0,
                    "trial " + std::to_string(trial) + ": cell " + std::to_string(cell.year) +
                        "/" + std::to_string(cell.label) + " drew " +
                        std::to_string(cell.parameter) + " of " + std::to_string(cell.total));
    }
    auto replay = stratified_parameter_split(data, fraction, 0.5, trial + 17);
    check.require(plan.parameter_set == replay.parameter_set &&
                      plan.train_set == replay.train_set &&
                      plan.holdout_set == replay.holdout_set,
                  "identical seeds produced different plans");
  }

  // leakage probe: perturbing holdout rows leaves trained parameters bit-identical
  auto data = testing::make_labeled({{2001, 80, 80}, {2002, 80, 80}}, 99, 3, 1.0);
  auto plan = comparison_split(data, 0.8, 7);
  auto perturbed = data;
  for (std::size_t idx : plan.holdout_set) {
    for (auto& v : perturbed.features[idx]) v += 500.0;
  }
  for (const TrainConfig& preset : {fsvm_preset(), na_fsvm_preset()}) {
    FsvmModel base = train_on_indices(data, plan.train_set, preset, NormMethod::minmax);
    FsvmModel poked = train_on_indices(perturbed, plan.train_set, preset, NormMethod::minmax);
    const bool identical =
        base.alphas.size() == poked.alphas.size() &&
        std::memcmp(base.alphas.data(), poked.alphas.data(),
                    base.alphas.size() * sizeof(double)) == 0 &&
        std::memcmp(&base.bias, &poked.bias, sizeof(double)) == 0 &&
        base.support_indices == poked.support_indices && base.norm_stats == poked.norm_stats;
    check.require(identical, "holdout perturbation leaked into training");
  }
  return check;
}

Check fixture_benchmark() {
  Check check;
  const fs::path out_dir = fresh_temp_dir("benchmark");
  RunConfig config = benchmark_config(out_dir);

  const auto start = Clock::now();
  FullProtocolResult result = run_full_protocol(config);
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

  check.require(elapsed < 60.0, "protocol took " + std::to_string(elapsed) + "s (limit 60s)");
  const double acc_fsvm = result.comparison.report_a.accuracy;
  const double acc_na = result.comparison.report_b.accuracy;
  check.require(acc_na >= 0.60,
                "na_fsvm holdout accuracy " + std::to_string(acc_na) + " below 0.60");
  check.require(acc_na >= acc_fsvm - 0.02, "na_fsvm (" + std::to_string(acc_na) +
                                               ") fell more than 0.02 behind fsvm (" +
                                               std::to_string(acc_fsvm) + ")");

  const fs::path golden = kSourceDir / "tests" / "golden" / "full_run";
  if (!fs::exists(golden)) {
    check.require(false, "golden directory missing: " + golden.string());
  } else {
    compare_trees(check, golden, out_dir);
  }
  fs::remove_all(out_dir);
  return check;
}

Check determinism() {
  Check check;
  const fs::path dir_a = fresh_temp_dir("det_a");
  const fs::path dir_b = fresh_temp_dir("det_b");
  RunConfig config = benchmark_config(dir_a);
  run_full_protocol(config);
  config.out = dir_b.string();
  run_full_protocol(config);
  compare_trees(check, dir_a, dir_b);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  return check;
}

// --- maintenance commands ---------------------------------------------------

int write_fixture() {
  auto series = testing::make_trend_fixture();
  const fs::path target = kSourceDir / "data" / "synthetic_trend.csv";
  std::ofstream out(target, std::ios::binary);
  out << serialize_ohlcv_csv(series, "%d-%m-%Y");
  std::cout << "wrote " << target << " (" << series.size() << " bars)\n";
  return 0;
}

int write_golden() {
  const fs::path golden = kSourceDir / "tests" / "golden" / "full_run";
  fs::remove_all(golden);
  RunConfig config = benchmark_config(golden);
  FullProtocolResult result = run_full_protocol(config);
  std::cout << "wrote " << result.written.size() << " golden files to " << golden << "\n"
            << "  fsvm holdout accuracy    " << result.comparison.report_a.accuracy << "\n"
            << "  na_fsvm holdout accuracy " << result.comparison.report_b.accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> filter(argv + 1, argv + argc);
  if (filter.size() == 1 && filter[0] == "write_fixture") return write_fixture();
  if (filter.size() == 1 && filter[0] == "write_golden") return write_golden();

  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"solver_oracle", solver_oracle},
      {"kkt_suite", kkt_suite},
      {"analytic_cases", analytic_cases},
      {"reduction_identity", reduction_identity},
      {"indicator_oracles", indicator_oracles},
      {"split_invariants", split_invariants},
      {"fixture_benchmark", fixture_benchmark},
      {"determinism", determinism},
  };

  bool all_ok = true;
  for (const auto& [name, run] : criteria) {
    if (!filter.empty() &&
        std::find(filter.begin(), filter.end(), name) == filter.end()) {
      continue;
    }
    Check check;
    try {
      check = run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    if (check.ok) {
      std::cout << "[PASS] " << name << "\n";
    } else {
      std::cout << "[FAIL] " << name << ": " << check.detail << "\n";
      all_ok = false;
    }
  }
  return all_ok ? 0 : 1;
}
