#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "qp_reference.hpp"
#include "test_support.hpp"
#include "trendcast/fsvm.hpp"

using namespace trendcast;
using Catch::Matchers::WithinAbs;

namespace {

/// Two gaussian blobs, one per class.
void make_blobs(std::uint64_t seed, std::size_t n, std::vector<std::vector<double>>& rows,
                std::vector<int>& labels) {
  testing::Gaussian g(seed);
  rows.clear();
  labels.clear();
  for (std::size_t i = 0; i < n; ++i) {
    int y = i % 2 == 0 ? +1 : -1;
    rows.push_back({g() + (y > 0 ? 1.5 : -1.5), g() + (y > 0 ? 0.5 : -0.5)});
    labels.push_back(y);
  }
}

FsvmModel train_analytic_two_point() {
  std::vector<std::vector<double>> x{{-1.0}, {+1.0}};
  std::vector<int> y{-1, +1};
  TrainConfig config;
  config.C = 10;
  config.kernel = {KernelKind::linear, 1.0};
  config.membership = {MembershipKind::uniform, 1.0};
  config.tolerance = 1e-10;
  return train_fsvm(x, y, config);
}

FsvmModel bias_only_model(double bias) {
  FsvmModel model;
  model.bias = bias;
  model.norm_stats = NormStats::identity(1);
  return model;
}

}  // namespace

TEST_CASE("rbf kernel of a point with itself is one") {
  testing::Gaussian g(1);
  for (double gamma : {0.01, 1.0, 25.0}) {
    std::vector<double> x{g(), g(), g()};
    CHECK(kernel_eval({KernelKind::rbf, gamma}, x, x) == 1.0);
  }
}

TEST_CASE("linear kernel is the inner product") {
  std::vector<double> x{1, 2}, z{3, 4};
  CHECK(kernel_eval({KernelKind::linear, 1.0}, x, z) == 11.0);
}

TEST_CASE("rbf kernel is symmetric") {
  testing::Gaussian g(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x{g(), g()}, z{g(), g()};
    CHECK(kernel_eval({KernelKind::rbf, 0.7}, x, z) == kernel_eval({KernelKind::rbf, 0.7}, z, x));
  }
}

TEST_CASE("kernel dimension mismatch raises a shape error") {
  std::vector<double> x{1, 2}, z{3};
  CHECK_THROWS_AS(kernel_eval({KernelKind::linear, 1.0}, x, z), ShapeError);
}

TEST_CASE("time decay weights ramp from floor to one") {
  CHECK(membership_time_decay(1, 0.5) == std::vector<double>{1.0});
  auto w = membership_time_decay(3, 0.5);
  REQUIRE(w.size() == 3);
  CHECK_THAT(w[0], WithinAbs(0.5, 1e-15));
  CHECK_THAT(w[1], WithinAbs(0.75, 1e-15));
  CHECK_THAT(w[2], WithinAbs(1.0, 1e-15));
  for (double v : membership_time_decay(7, 1.0)) CHECK(v == 1.0);
  CHECK_THROWS_AS(membership_time_decay(3, 0.0), ParameterError);
  CHECK_THROWS_AS(membership_time_decay(3, 1.5), ParameterError);
}

TEST_CASE("class-center weights scale with distance from the center") {
  std::vector<std::vector<double>> rows{{0, 0}, {2, 0}, {-2, 0}, {10, 10}, {12, 10}};
  std::vector<int> labels{+1, +1, +1, -1, -1};
  auto w = membership_class_center(rows, labels, 0.4);
  CHECK_THAT(w[0], WithinAbs(1.0, 1e-9));  // exactly at its class center
  // the two symmetric positive points are the farthest: weight ~ floor
  CHECK_THAT(w[1], WithinAbs(0.4, 1e-9));
  CHECK_THAT(w[2], WithinAbs(0.4, 1e-9));
  CHECK_THAT(w[1], WithinAbs(w[2], 1e-12));
  // symmetric negative pair shares a weight
  CHECK_THAT(w[3], WithinAbs(w[4], 1e-12));
}

TEST_CASE("class-center weighting needs both classes") {
  std::vector<std::vector<double>> rows{{0.0}, {1.0}};
  std::vector<int> labels{+1, +1};
  CHECK_THROWS_AS(membership_class_center(rows, labels, 0.5), ClassError);
}

TEST_CASE("two-point problem recovers the analytic solution") {
  FsvmModel model = train_analytic_two_point();
  REQUIRE(model.alphas.size() == 2);
  CHECK_THAT(model.alphas[0], WithinAbs(0.5, 1e-8));
  CHECK_THAT(model.alphas[1], WithinAbs(0.5, 1e-8));
  CHECK_THAT(model.bias, WithinAbs(0.0, 1e-8));

  double alpha_dot_y = 0;
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    alpha_dot_y += model.alphas[i] * model.labels[i];
  }
  CHECK_THAT(alpha_dot_y, WithinAbs(0.0, 1e-8));
}

TEST_CASE("decision values of the analytic model") {
  FsvmModel model = train_analytic_two_point();
  CHECK_THAT(decision_value(model, std::vector<double>{0.0}), WithinAbs(0.0, 1e-8));
  CHECK_THAT(decision_value(model, std::vector<double>{1.0}), WithinAbs(1.0, 1e-8));
  CHECK_THAT(decision_value(model, std::vector<double>{-1.0}), WithinAbs(-1.0, 1e-8));
}

TEST_CASE("xor with the rbf kernel trains to full accuracy") {
  std::vector<std::vector<double>> x{{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  std::vector<int> y{-1, -1, +1, +1};
  TrainConfig config;
  config.C = 10;
  config.kernel = {KernelKind::rbf, 1.0};
  config.membership = {MembershipKind::uniform, 1.0};
  config.tolerance = 1e-6;
  FsvmModel model = train_fsvm(x, y, config);

  CHECK(model.support_vectors.size() == 4);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(predict_direction(model, x[i]).direction == y[i]);
  }
  CHECK(model.diagnostics.converged);
}

TEST_CASE("a low-membership duplicate is capped at its box") {
  // the dual optimum needs 0.5 from the positive side, which is exactly the
  // two duplicates' combined ceiling, so both alphas land on their bounds
  std::vector<std::vector<double>> x{{-1.0}, {+1.0}, {+1.0}};
  std::vector<int> y{-1, +1, +1};
  std::vector<double> memberships{1.0, 0.7, 0.3};
  TrainConfig config;
  config.C = 0.5;
  config.kernel = {KernelKind::linear, 1.0};
  config.tolerance = 1e-8;
  FsvmModel model = train_fsvm_with_memberships(x, y, memberships, config);

  REQUIRE(model.alphas.size() == 3);
  double alpha_low = 0, alpha_high = 0;
  for (std::size_t i = 0; i < model.alphas.size(); ++i) {
    if (model.support_indices[i] == 2) alpha_low = model.alphas[i];
    if (model.support_indices[i] == 1) alpha_high = model.alphas[i];
  }
  CHECK_THAT(alpha_low, WithinAbs(0.3 * 0.5, 1e-8));
  CHECK_THAT(alpha_high, WithinAbs(0.7 * 0.5, 1e-8));
}

TEST_CASE("free support vectors sit on the margin") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  make_blobs(3, 24, rows, labels);
  TrainConfig config;
  config.C = 5;
  config.kernel = {KernelKind::rbf, 0.5};
  config.membership = {MembershipKind::class_center, 0.6};
  config.tolerance = 1e-8;
  FsvmModel model = train_fsvm(rows, labels, config);

  bool saw_free = false;
  for (std::size_t s = 0; s < model.alphas.size(); ++s) {
    const double box = model.memberships[s] * config.C;
    if (model.alphas[s] > 1e-6 && model.alphas[s] < box - 1e-6) {
      saw_free = true;
      const double f = decision_value(model, model.support_vectors[s]);
      CHECK_THAT(model.labels[s] * f, WithinAbs(1.0, 1e-6));
    }
  }
  CHECK(saw_free);
}

TEST_CASE("sigmoid read-out and thresholds") {
  CHECK(predict_direction(bias_only_model(0.0), std::vector<double>{0.0}).confidence == 0.5);
  CHECK(predict_direction(bias_only_model(0.0), std::vector<double>{0.0}).direction == +1);

  auto negative = predict_direction(bias_only_model(-2.0), std::vector<double>{0.0});
  CHECK_THAT(negative.confidence, WithinAbs(0.11920292202211755, 1e-12));
  CHECK(negative.direction == -1);

  auto saturated = predict_direction(bias_only_model(50.0), std::vector<double>{0.0});
  CHECK_THAT(saturated.confidence, WithinAbs(1.0, 1e-12));
  CHECK(saturated.direction == +1);
}

TEST_CASE("direction equals the sign of the decision value") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  make_blobs(4, 30, rows, labels);
  FsvmModel model = train_fsvm(rows, labels, na_fsvm_preset());
  testing::Gaussian g(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> probe{3 * g(), 3 * g()};
    const double f = decision_value(model, probe);
    const Prediction p = predict_direction(model, probe);
    CHECK(p.direction == (f >= 0 ? +1 : -1));
    CHECK(p.direction == (p.confidence >= 0.5 ? +1 : -1));
  }
}

TEST_CASE("freshly trained models satisfy their KKT tolerance") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    make_blobs(seed, 40, rows, labels);
    for (const TrainConfig& preset : {fsvm_preset(), na_fsvm_preset()}) {
      FsvmModel model = train_fsvm(rows, labels, preset);
      auto memberships = make_memberships(preset.membership, rows, labels);
      CHECK(kkt_max_violation(model, rows, labels, memberships, preset.C) <= preset.tolerance);
      CHECK(model.diagnostics.final_kkt_violation <= preset.tolerance);
    }
  }
}

TEST_CASE("an untrained model violates the margin constraints") {
  std::vector<std::vector<double>> rows{{-2.0}, {2.0}};
  std::vector<int> labels{-1, +1};
  std::vector<double> memberships{1.0, 1.0};
  FsvmModel zeroed;  // no supports, bias 0: f == 0 everywhere
  zeroed.kernel = {KernelKind::linear, 1.0};
  CHECK(kkt_max_violation(zeroed, rows, labels, memberships, 10.0) > 0.5);
}

TEST_CASE("the analytic model reports zero violation") {
  FsvmModel model = train_analytic_two_point();
  std::vector<std::vector<double>> rows{{-1.0}, {+1.0}};
  std::vector<int> labels{-1, +1};
  std::vector<double> memberships{1.0, 1.0};
  CHECK(kkt_max_violation(model, rows, labels, memberships, 10.0) <= 1e-10);
}

TEST_CASE("box and equality feasibility on random problems") {
  for (std::uint64_t seed = 100; seed < 112; ++seed) {
    auto instance = testing::make_random_instance(seed);
    FsvmModel model = train_fsvm_with_memberships(instance.features, instance.labels,
                                                  instance.memberships, instance.config);
    double alpha_dot_y = 0;
    for (std::size_t s = 0; s < model.alphas.size(); ++s) {
      const double box = model.memberships[s] * instance.config.C;
      CHECK(model.alphas[s] > 0.0);
      CHECK(model.alphas[s] <= box * (1 + 1e-12) + 1e-15);
      alpha_dot_y += model.alphas[s] * model.labels[s];
    }
    CHECK_THAT(alpha_dot_y, WithinAbs(0.0, 1e-8));
  }
}

TEST_CASE("the dual objective never decreases along the trace") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  make_blobs(6, 36, rows, labels);
  TrainConfig config = na_fsvm_preset();
  config.tolerance = 1e-8;
  FsvmModel model = train_fsvm(rows, labels, config);
  const auto& trace = model.diagnostics.objective_trace;
  REQUIRE(trace.size() > 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] >= trace[i - 1] - 1e-9 * std::max(1.0, std::abs(trace[i - 1])));
  }
}

TEST_CASE("smo matches the projected-gradient reference on small instances") {
  for (std::uint64_t seed = 500; seed < 510; ++seed) {
    auto instance = testing::make_random_instance(seed);
    FsvmModel model = train_fsvm_with_memberships(instance.features, instance.labels,
                                                  instance.memberships, instance.config);
    std::vector<double> box(instance.memberships.size());
    for (std::size_t i = 0; i < box.size(); ++i) box[i] = instance.memberships[i] * instance.config.C;
    auto reference = testing::solve_dual_reference(instance.features, instance.labels, box,
                                                   instance.config.kernel);
    INFO("seed " << seed);
    CHECK_THAT(model.diagnostics.dual_objective,
               WithinAbs(reference.objective, 1e-6 * std::max(1.0, std::abs(reference.objective))));
  }
}

TEST_CASE("floor one reduces every scheme to the unweighted machine") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  make_blobs(7, 50, rows, labels);

  TrainConfig uniform = na_fsvm_preset();
  uniform.membership = {MembershipKind::uniform, 1.0};
  TrainConfig decay = uniform;
  decay.membership = {MembershipKind::time_decay, 1.0};
  TrainConfig centered = uniform;
  centered.membership = {MembershipKind::class_center, 1.0};

  FsvmModel m_uniform = train_fsvm(rows, labels, uniform);
  FsvmModel m_decay = train_fsvm(rows, labels, decay);
  FsvmModel m_centered = train_fsvm(rows, labels, centered);

  testing::Gaussian g(8);
  for (int probe = 0; probe < 50; ++probe) {
    std::vector<double> x{3 * g(), 3 * g()};
    const double f = decision_value(m_uniform, x);
    CHECK_THAT(decision_value(m_decay, x), WithinAbs(f, 1e-6));
    CHECK_THAT(decision_value(m_centered, x), WithinAbs(f, 1e-6));
  }
}

TEST_CASE("training order does not move the decision function") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  make_blobs(9, 40, rows, labels);
  TrainConfig config;
  config.C = 10;
  config.kernel = {KernelKind::rbf, 0.5};
  config.membership = {MembershipKind::class_center, 0.7};  // permutation-covariant
  config.tolerance = 1e-10;

  FsvmModel base = train_fsvm(rows, labels, config);

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(10);
  detail::deterministic_shuffle(order, rng);
  std::vector<std::vector<double>> shuffled_rows;
  std::vector<int> shuffled_labels;
  for (std::size_t idx : order) {
    shuffled_rows.push_back(rows[idx]);
    shuffled_labels.push_back(labels[idx]);
  }
  FsvmModel permuted = train_fsvm(shuffled_rows, shuffled_labels, config);

  testing::Gaussian g(11);
  for (int probe = 0; probe < 20; ++probe) {
    std::vector<double> x{3 * g(), 3 * g()};
    CHECK_THAT(decision_value(permuted, x), WithinAbs(decision_value(base, x), 1e-6));
  }
}

TEST_CASE("training error paths") {
  std::vector<std::vector<double>> rows{{0.0}, {1.0}};
  std::vector<int> one_class{+1, +1};
  CHECK_THROWS_AS(train_fsvm(rows, one_class, fsvm_preset()), ClassError);

  std::vector<int> labels{-1, +1};
  std::vector<double> dust{1e-20, 1e-20};
  CHECK_THROWS_AS(train_fsvm_with_memberships(rows, labels, dust, fsvm_preset()),
                  DegenerateBoxError);

  std::vector<int> bad_labels{0, 1};
  CHECK_THROWS_AS(train_fsvm(rows, bad_labels, fsvm_preset()), ParameterError);

  TrainConfig bad_c = fsvm_preset();
  bad_c.C = 0;
  CHECK_THROWS_AS(train_fsvm(rows, labels, bad_c), ParameterError);
}

TEST_CASE("decision value rejects mismatched dimensions") {
  FsvmModel model = train_analytic_two_point();
  CHECK_THROWS_AS(decision_value(model, std::vector<double>{1.0, 2.0}), ShapeError);
}
