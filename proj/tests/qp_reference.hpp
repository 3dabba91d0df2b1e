#pragma once

// Test-only reference solver for the weighted soft-margin dual:
//
//   maximize  W(a) = sum(a) - 1/2 a' Q a,   Q_ij = y_i y_j k(x_i, x_j)
//   subject to 0 <= a_i <= box_i,  sum(y_i a_i) = 0
//
// Plain projected-gradient ascent on a dense Q. The projection onto the
// box intersected with the hyperplane is computed by bisection on the
// hyperplane multiplier. Deliberately independent of the SMO implementation:
// it shares no state selection, caching or update logic with it.

#include <cmath>
#include <cstdint>
#include <vector>

#include "test_support.hpp"
#include "trendcast/fsvm.hpp"

namespace trendcast::testing {

struct QpSolution {
  std::vector<double> alpha;
  double objective = 0;
};

inline QpSolution solve_dual_reference(const std::vector<std::vector<double>>& features,
                                       const std::vector<int>& labels,
                                       const std::vector<double>& box, const KernelSpec& kernel,
                                       int max_iterations = 200000) {
  const std::size_t n = features.size();
  std::vector<double> q(n * n);
  double trace = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      q[i * n + j] = labels[i] * labels[j] * kernel_eval(kernel, features[i], features[j]);
    }
    trace += q[i * n + i];
  }
  const double step = 1.0 / (trace + 1e-9);

  // project v onto {0 <= a <= box} cut by {y'a = 0}: a_i = clip(v_i - t*y_i)
  // with t chosen by bisection (the constraint residual is monotone in t).
  auto project = [&](const std::vector<double>& v) {
    double bound = 1.0;
    for (std::size_t i = 0; i < n; ++i) bound = std::max(bound, std::abs(v[i]) + box[i] + 1.0);
    auto residual = [&](double t) {
      double r = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double a = std::clamp(v[i] - t * labels[i], 0.0, box[i]);
        r += labels[i] * a;
      }
      return r;
    };
    double lo = -bound, hi = bound;
    for (int it = 0; it < 128; ++it) {
      double mid = 0.5 * (lo + hi);
      (residual(mid) >= 0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(v[i] - t * labels[i], 0.0, box[i]);
    return out;
  };

  std::vector<double> alpha(n, 0.0), v(n);
  for (int iter = 0; iter < max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double qa = 0;
      for (std::size_t j = 0; j < n; ++j) qa += q[i * n + j] * alpha[j];
      v[i] = alpha[i] + step * (1.0 - qa);
    }
    std::vector<double> next = project(v);
    double delta = 0;
    for (std::size_t i = 0; i < n; ++i) delta = std::max(delta, std::abs(next[i] - alpha[i]));
    alpha = std::move(next);
    if (delta < 1e-13) break;
  }

  QpSolution solution;
  solution.alpha = alpha;
  solution.objective = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double qa = 0;
    for (std::size_t j = 0; j < n; ++j) qa += q[i * n + j] * alpha[j];
    solution.objective += alpha[i] - 0.5 * alpha[i] * qa;
  }
  return solution;
}

/// Small random training problem with mixed kernels and membership schemes,
/// used by both the unit tests and the acceptance suite.
struct RandomInstance {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::vector<double> memberships;
  TrainConfig config;
};

inline RandomInstance make_random_instance(std::uint64_t seed) {
  Gaussian g(seed);
  RandomInstance instance;
  const std::size_t n = 3 + g.bits() % 6;  // 3..8
  const std::size_t d = 1 + g.bits() % 3;  // 1..3

  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (auto& x : row) x = g();
    instance.features.push_back(std::move(row));
    instance.labels.push_back(i % 2 == 0 ? +1 : -1);  // both classes guaranteed
  }

  instance.config.C = std::exp(g() * 1.2);  // spread around 1
  instance.config.tolerance = 1e-9;         // tight, so objectives are comparable
  instance.config.seed = seed;
  if (g.bits() % 2 == 0) {
    instance.config.kernel = {KernelKind::rbf, 0.2 + 2.0 * g.uniform()};
  } else {
    instance.config.kernel = {KernelKind::linear, 1.0};
  }
  const double floor = 0.3 + 0.7 * g.uniform();
  switch (g.bits() % 3) {
    case 0: instance.config.membership = {MembershipKind::uniform, 1.0}; break;
    case 1: instance.config.membership = {MembershipKind::time_decay, floor}; break;
    default: instance.config.membership = {MembershipKind::class_center, floor}; break;
  }
  instance.memberships =
      make_memberships(instance.config.membership, instance.features, instance.labels);
  return instance;
}

}  // namespace trendcast::testing
