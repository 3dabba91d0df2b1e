#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trendcast/dataset.hpp"
#include "trendcast/errors.hpp"

namespace trendcast {

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 1.0;  // rbf only

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline std::string_view kernel_name(KernelKind kind) {
  return kind == KernelKind::linear ? "linear" : "rbf";
}

inline std::optional<KernelKind> kernel_from_name(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  return std::nullopt;
}

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> z) {
  if (x.size() != z.size()) {
    throw ShapeError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(z.size()) + ")");
  }
  if (spec.kind == KernelKind::linear) {
    double dot = 0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * z[i];
    return dot;
  }
  if (!(spec.gamma > 0)) throw ParameterError("kernel_eval: rbf gamma must be > 0");
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - z[i];
    d2 += d * d;
  }
  return std::exp(-spec.gamma * d2);
}

enum class MembershipKind { uniform, time_decay, class_center };

/// Per-sample weight scheme. Weights s_i in [floor, 1] scale each sample's
/// slack penalty, so its dual coefficient is boxed by s_i * C.
struct MembershipSpec {
  MembershipKind kind = MembershipKind::uniform;
  double floor = 1.0;

  friend bool operator==(const MembershipSpec&, const MembershipSpec&) = default;
};

inline std::string_view membership_name(MembershipKind kind) {
  switch (kind) {
    case MembershipKind::uniform: return "uniform";
    case MembershipKind::time_decay: return "time_decay";
    case MembershipKind::class_center: return "class_center";
  }
  return "unknown";
}

inline std::optional<MembershipKind> membership_from_name(std::string_view name) {
  if (name == "uniform") return MembershipKind::uniform;
  if (name == "time_decay") return MembershipKind::time_decay;
  if (name == "class_center") return MembershipKind::class_center;
  return std::nullopt;
}

/// Linear ramp from `floor` (oldest sample) to 1 (newest). A single sample
/// gets weight 1; floor = 1 reduces to the unweighted machine.
inline std::vector<double> membership_time_decay(std::size_t n, double floor) {
  if (n < 1) throw ParameterError("membership_time_decay: n must be >= 1");
  if (!(floor > 0 && floor <= 1)) {
    throw ParameterError("membership_time_decay: floor must be in (0, 1]");
  }
  std::vector<double> weights(n, 1.0);
  if (n == 1) return weights;
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = floor + (1.0 - floor) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return weights;
}

/// Distance-to-class-center weighting: the farthest point of each class gets
/// (approximately) `floor`, points at the center get 1.
inline std::vector<double> membership_class_center(const std::vector<std::vector<double>>& rows,
                                                   std::span<const int> labels, double floor) {
  if (rows.size() != labels.size()) {
    throw ShapeError("membership_class_center: rows/labels length mismatch");
  }
  if (!(floor > 0 && floor <= 1)) {
    throw ParameterError("membership_class_center: floor must be in (0, 1]");
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) (y > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw ClassError("membership_class_center: both classes must be present");
  }

  const std::size_t dim = rows.empty() ? 0 : rows[0].size();
  auto center_of = [&](int cls) {
    std::vector<double> center(dim, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (labels[i] != cls) continue;
      for (std::size_t j = 0; j < dim; ++j) center[j] += rows[i][j];
      ++count;
    }
    for (double& c : center) c /= static_cast<double>(count);
    return center;
  };
  auto dist = [&](std::span<const double> a, std::span<const double> b) {
    double d2 = 0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      double d = a[j] - b[j];
      d2 += d * d;
    }
    return std::sqrt(d2);
  };

  const std::vector<double> center_pos = center_of(+1);
  const std::vector<double> center_neg = center_of(-1);
  double radius_pos = 0, radius_neg = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& center = labels[i] > 0 ? center_pos : center_neg;
    double& radius = labels[i] > 0 ? radius_pos : radius_neg;
    radius = std::max(radius, dist(rows[i], center));
  }

  constexpr double kRadiusPad = 1e-12;
  std::vector<double> weights(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& center = labels[i] > 0 ? center_pos : center_neg;
    double radius = labels[i] > 0 ? radius_pos : radius_neg;
    weights[i] = 1.0 - (1.0 - floor) * dist(rows[i], center) / (radius + kRadiusPad);
  }
  return weights;
}

inline std::vector<double> make_memberships(const MembershipSpec& spec,
                                            const std::vector<std::vector<double>>& rows,
                                            std::span<const int> labels) {
  switch (spec.kind) {
    case MembershipKind::uniform: return std::vector<double>(rows.size(), 1.0);
    case MembershipKind::time_decay: return membership_time_decay(rows.size(), spec.floor);
    case MembershipKind::class_center: return membership_class_center(rows, labels, spec.floor);
  }
  throw ParameterError("make_memberships: unknown membership kind");
}

struct TrainConfig {
  double C = 10.0;
  KernelSpec kernel;
  MembershipSpec membership;
  double tolerance = 1e-3;  // max admissible KKT residual
  int max_passes = 200000;  // pairwise update steps before giving up
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Baseline fuzzy machine: linear kernel, class-center weighting.
inline TrainConfig fsvm_preset() {
  TrainConfig config;
  config.C = 10.0;
  config.kernel = {KernelKind::linear, 1.0};
  config.membership = {MembershipKind::class_center, 0.5};
  return config;
}

/// Advanced variant: radial-basis kernel, recency-weighted memberships.
inline TrainConfig na_fsvm_preset() {
  TrainConfig config;
  config.C = 10.0;
  config.kernel = {KernelKind::rbf, 1.0};
  config.membership = {MembershipKind::time_decay, 0.5};
  return config;
}

struct TrainDiagnostics {
  int iterations = 0;
  double final_kkt_violation = 0;
  double dual_objective = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // dual objective after each step; not serialized
};

/// Trained classifier. Only rows with alpha > 0 are stored;
/// `support_indices` names their rows in the training set.
struct FsvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> alphas;
  std::vector<int> labels;
  std::vector<double> memberships;
  std::vector<std::size_t> support_indices;
  double bias = 0;
  KernelSpec kernel;
  NormStats norm_stats;
  TrainConfig config;
  TrainDiagnostics diagnostics;
};

namespace detail {

constexpr std::size_t kKernelCacheLimit = 4096;  // dense cache up to this many rows

struct SmoProblem {
  const std::vector<std::vector<double>>& x;
  std::span<const int> y;
  std::span<const double> box;
  KernelSpec kernel;
  std::vector<double> cache;  // n*n, row-major, empty when n too large
  std::size_t n = 0;

  SmoProblem(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
             std::span<const double> boxes, const KernelSpec& spec)
      : x(rows), y(labels), box(boxes), kernel(spec), n(rows.size()) {
    if (n <= kKernelCacheLimit) {
      cache.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          double v = kernel_eval(kernel, x[i], x[j]);
          cache[i * n + j] = v;
          cache[j * n + i] = v;
        }
      }
    }
  }

  double k(std::size_t i, std::size_t j) const {
    if (!cache.empty()) return cache[i * n + j];
    return kernel_eval(kernel, x[i], x[j]);
  }
};

/// Bias from free support vectors, averaged; with none free, the midpoint of
/// the interval the bound constraints leave feasible.
inline double bias_from_alphas(std::span<const double> alpha, std::span<const double> g,
                               std::span<const int> y, std::span<const double> box) {
  double sum = 0;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double margin = 1e-10 * std::max(1.0, box[i]);
    if (alpha[i] > margin && alpha[i] < box[i] - margin) {
      sum += y[i] - g[i];
      ++free_count;
    }
  }
  if (free_count > 0) return sum / static_cast<double>(free_count);

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double target = y[i] - g[i];  // the b making y_i f(x_i) = 1
    const double margin = 1e-10 * std::max(1.0, box[i]);
    const bool at_zero = alpha[i] <= margin;
    if (at_zero == (y[i] > 0)) lo = std::max(lo, target);
    else hi = std::min(hi, target);
  }
  if (std::isinf(lo) && std::isinf(hi)) return 0.0;
  if (std::isinf(lo)) return hi;
  if (std::isinf(hi)) return lo;
  return 0.5 * (lo + hi);
}

/// KKT residual of one sample: the excess beyond the optimality bound its
/// alpha position demands.
inline double kkt_residual(double alpha, double box_i, double y_times_f) {
  const double bound_margin = 1e-12 * std::max(1.0, box_i);
  if (alpha <= bound_margin) return std::max(0.0, 1.0 - y_times_f);
  if (alpha >= box_i - bound_margin) return std::max(0.0, y_times_f - 1.0);
  return std::abs(y_times_f - 1.0);
}

}  // namespace detail

/// Trains with explicit per-sample weights. The public train_fsvm derives the
/// weights from the config's membership scheme and delegates here.
///
/// Maximizes W(alpha) = sum(alpha) - 1/2 sum alpha_i alpha_j y_i y_j k(x_i,x_j)
/// subject to 0 <= alpha_i <= s_i*C and sum(alpha_i y_i) = 0, by pairwise
/// coordinate ascent: the pair is the largest KKT violator plus the sample
/// maximizing |E_1 - E_2| (seeded-random fallback), each two-variable
/// subproblem solved in closed form.
inline FsvmModel train_fsvm_with_memberships(const std::vector<std::vector<double>>& features,
                                             std::span<const int> labels,
                                             std::span<const double> memberships,
                                             const TrainConfig& config,
                                             const NormStats* norm_stats = nullptr) {
  const std::size_t n = features.size();
  if (n == 0) throw ParameterError("train_fsvm: empty training set");
  if (labels.size() != n || memberships.size() != n) {
    throw ShapeError("train_fsvm: features/labels/memberships length mismatch");
  }
  if (!(config.C > 0)) throw ParameterError("train_fsvm: C must be > 0");
  if (!(config.tolerance > 0)) throw ParameterError("train_fsvm: tolerance must be > 0");
  if (config.max_passes < 1) throw ParameterError("train_fsvm: max_passes must be >= 1");

  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == +1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw ParameterError("train_fsvm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw ClassError("train_fsvm: both classes must be present");

  std::vector<double> box(n);
  double max_box = 0;
  for (std::size_t i = 0; i < n; ++i) {
    box[i] = memberships[i] * config.C;
    max_box = std::max(max_box, box[i]);
  }
  if (max_box < std::numeric_limits<double>::epsilon()) {
    throw DegenerateBoxError("train_fsvm: every membership is below machine epsilon");
  }

  detail::SmoProblem problem(features, labels, box, config.kernel);

  std::vector<double> alpha(n, 0.0);
  std::vector<double> g(n, 0.0);  // g_i = sum_j alpha_j y_j k(x_i, x_j)
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> fallback_order(n);
  for (std::size_t i = 0; i < n; ++i) fallback_order[i] = i;

  TrainDiagnostics diagnostics;
  constexpr std::size_t kTraceCap = 1 << 16;

  auto dual_objective = [&]() {
    double sum = 0, quad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += alpha[i];
      quad += alpha[i] * labels[i] * g[i];
    }
    return sum - 0.5 * quad;
  };

  // Closed-form update of the pair (i, j); returns false when the pair can
  // make no progress (empty box segment, non-positive curvature, tiny step).
  auto try_step = [&](std::size_t i, std::size_t j, double b) {
    const double a1 = alpha[i], a2 = alpha[j];
    const int y1 = labels[i], y2 = labels[j];
    const double c1 = box[i], c2 = box[j];
    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(c2, c1 + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - c1);
      hi = std::min(c2, a1 + a2);
    }
    if (hi - lo < 1e-14 * std::max(1.0, c2)) return false;

    const double k11 = problem.k(i, i), k22 = problem.k(j, j), k12 = problem.k(i, j);
    const double eta = k11 + k22 - 2 * k12;
    if (eta <= 1e-12 * std::max(1.0, k11 + k22)) return false;  // flat pair direction

    const double e1 = g[i] + b - y1;
    const double e2 = g[j] + b - y2;
    double a2_new = std::clamp(a2 + y2 * (e1 - e2) / eta, lo, hi);
    if (std::abs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12)) return false;
    double a1_new = a1 + static_cast<double>(y1 * y2) * (a2 - a2_new);
    a1_new = std::clamp(a1_new, 0.0, c1);

    const double d1 = a1_new - a1, d2 = a2_new - a2;
    alpha[i] = a1_new;
    alpha[j] = a2_new;
    for (std::size_t t = 0; t < n; ++t) {
      g[t] += y1 * d1 * problem.k(i, t) + y2 * d2 * problem.k(j, t);
    }
    return true;
  };

  std::vector<double> violation(n, 0.0);
  std::vector<char> excluded(n, 0);
  int steps = 0;
  double final_violation = 0;
  bool converged = false;

  while (true) {
    const double b = detail::bias_from_alphas(alpha, g, labels, box);
    double max_violation = 0;
    for (std::size_t i = 0; i < n; ++i) {
      violation[i] = detail::kkt_residual(alpha[i], box[i], labels[i] * (g[i] + b));
      max_violation = std::max(max_violation, violation[i]);
    }
    final_violation = max_violation;
    if (max_violation <= config.tolerance) {
      converged = true;
      break;
    }
    if (steps >= config.max_passes) break;

    std::fill(excluded.begin(), excluded.end(), 0);
    bool advanced = false;
    while (!advanced) {
      // first choice: the worst remaining violator
      std::size_t i1 = n;
      double worst = config.tolerance;
      for (std::size_t i = 0; i < n; ++i) {
        if (!excluded[i] && violation[i] > worst) {
          worst = violation[i];
          i1 = i;
        }
      }
      if (i1 == n) break;  // nobody can move: stalled

      const double e1 = g[i1] + b - labels[i1];
      std::size_t best_j = n;
      double best_gap = -1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i1) continue;
        double gap = std::abs(e1 - (g[j] + b - labels[j]));
        if (gap > best_gap) {
          best_gap = gap;
          best_j = j;
        }
      }
      if (best_j < n && try_step(i1, best_j, b)) {
        advanced = true;
        break;
      }
      // seeded-random fallback over the remaining partners
      detail::deterministic_shuffle(fallback_order, rng);
      for (std::size_t j : fallback_order) {
        if (j == i1 || j == best_j) continue;
        if (try_step(i1, j, b)) {
          advanced = true;
          break;
        }
      }
      if (!advanced) excluded[i1] = 1;
    }
    if (!advanced) break;  // no violator can make progress

    ++steps;
    if (diagnostics.objective_trace.size() < kTraceCap) {
      diagnostics.objective_trace.push_back(dual_objective());
    }
  }

  FsvmModel model;
  model.kernel = config.kernel;
  model.config = config;
  model.norm_stats = norm_stats ? *norm_stats
                                : NormStats::identity(features.empty() ? 0 : features[0].size());
  model.bias = detail::bias_from_alphas(alpha, g, labels, box);

  diagnostics.iterations = steps;
  diagnostics.converged = converged;
  diagnostics.dual_objective = dual_objective();
  double final_kkt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    final_kkt = std::max(final_kkt,
                         detail::kkt_residual(alpha[i], box[i], labels[i] * (g[i] + model.bias)));
  }
  diagnostics.final_kkt_violation = final_kkt;
  model.diagnostics = std::move(diagnostics);

  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 1e-14 * box[i] && alpha[i] > 0) {
      model.support_vectors.push_back(features[i]);
      model.alphas.push_back(alpha[i]);
      model.labels.push_back(labels[i]);
      model.memberships.push_back(memberships[i]);
      model.support_indices.push_back(i);
    }
  }
  return model;
}

/// Trains on (already normalized) features; memberships come from the
/// config's scheme. Pass the fitted NormStats so the model can normalize
/// prediction inputs later.
inline FsvmModel train_fsvm(const std::vector<std::vector<double>>& features,
                            std::span<const int> labels, const TrainConfig& config,
                            const NormStats* norm_stats = nullptr) {
  std::vector<double> memberships = make_memberships(config.membership, features, labels);
  return train_fsvm_with_memberships(features, labels, memberships, config, norm_stats);
}

/// f(x) = sum alpha_i y_i k(x_i, x) + b over the stored support vectors.
/// `x` must already be normalized with the model's stats.
inline double decision_value(const FsvmModel& model, std::span<const double> x) {
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    f += model.alphas[i] * model.labels[i] * kernel_eval(model.kernel, model.support_vectors[i], x);
  }
  return f;
}

struct Prediction {
  int direction = 0;        // +1 increase, -1 decrease
  double confidence = 0.5;  // logistic sigmoid of the decision value
};

/// Logistic read-out of the decision value; direction +1 iff confidence >= 0.5
/// (equivalently f(x) >= 0).
inline Prediction predict_direction(const FsvmModel& model, std::span<const double> x) {
  const double f = decision_value(model, x);
  Prediction p;
  p.confidence = 1.0 / (1.0 + std::exp(-f));
  p.direction = f >= 0 ? +1 : -1;
  return p;
}

/// Maximum KKT residual of the model over the training set it was fit on.
/// Independent of the trainer's internal caches: decision values are
/// recomputed from the stored supports.
inline double kkt_max_violation(const FsvmModel& model,
                                const std::vector<std::vector<double>>& features,
                                std::span<const int> labels,
                                std::span<const double> memberships, double C) {
  if (features.size() != labels.size() || features.size() != memberships.size()) {
    throw ShapeError("kkt_max_violation: input length mismatch");
  }
  std::vector<double> alpha(features.size(), 0.0);
  for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
    std::size_t idx = model.support_indices[s];
    if (idx >= alpha.size()) {
      throw ShapeError("kkt_max_violation: support index out of range; wrong training set?");
    }
    alpha[idx] = model.alphas[s];
  }
  double worst = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double f = decision_value(model, features[i]);
    worst = std::max(worst, detail::kkt_residual(alpha[i], memberships[i] * C, labels[i] * f));
  }
  return worst;
}

}  // namespace trendcast
