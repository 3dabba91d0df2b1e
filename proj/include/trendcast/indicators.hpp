#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trendcast/errors.hpp"
#include "trendcast/market_data.hpp"

namespace trendcast {

enum class Indicator {
  sma,         // simple moving average of closes
  wma,         // linearly weighted moving average of closes
  momentum,    // close minus the close n bars back
  stoch_k,     // stochastic %K
  stoch_d,     // smoothed stochastic (SMA of %K)
  rsi,         // relative strength index, simple-average variant
  macd,        // fast EMA minus slow EMA over a bounded trailing window
  williams_r,  // Williams %R
  cci,         // commodity channel index
  ad_osc,      // per-bar accumulation/distribution oscillator
};

inline std::string_view indicator_name(Indicator ind) {
  switch (ind) {
    case Indicator::sma: return "sma";
    case Indicator::wma: return "wma";
    case Indicator::momentum: return "momentum";
    case Indicator::stoch_k: return "stoch_k";
    case Indicator::stoch_d: return "stoch_d";
    case Indicator::rsi: return "rsi";
    case Indicator::macd: return "macd";
    case Indicator::williams_r: return "williams_r";
    case Indicator::cci: return "cci";
    case Indicator::ad_osc: return "ad_osc";
  }
  return "unknown";
}

inline std::optional<Indicator> indicator_from_name(std::string_view name) {
  for (Indicator ind : {Indicator::sma, Indicator::wma, Indicator::momentum, Indicator::stoch_k,
                        Indicator::stoch_d, Indicator::rsi, Indicator::macd, Indicator::williams_r,
                        Indicator::cci, Indicator::ad_osc}) {
    if (indicator_name(ind) == name) return ind;
  }
  return std::nullopt;
}

/// One indicator column: which indicator, its primary window, and any extra
/// parameters (macd: "fast"; stoch_d: "smooth"; ad_osc: "fallback").
struct IndicatorSpec {
  Indicator name = Indicator::sma;
  int window = 1;
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  friend bool operator==(const IndicatorSpec&, const IndicatorSpec&) = default;
};

inline std::string column_name(const IndicatorSpec& spec) {
  return std::string(indicator_name(spec.name)) + "_" + std::to_string(spec.window);
}

/// Number of leading bars with no defined value (first defined index).
/// Every indicator is a pure function of a bounded trailing window, so
/// prepending history never changes already-defined values.
inline int lookback(const IndicatorSpec& spec) {
  switch (spec.name) {
    case Indicator::sma:
    case Indicator::wma:
    case Indicator::stoch_k:
    case Indicator::williams_r:
    case Indicator::cci:
      return spec.window - 1;
    case Indicator::momentum:
    case Indicator::rsi:
      return spec.window;
    case Indicator::stoch_d:
      return spec.window - 1 + static_cast<int>(spec.param("smooth", 3)) - 1;
    case Indicator::macd:
      return 2 * spec.window - 1;  // window is the slow period
    case Indicator::ad_osc:
      return 0;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Scalar / sequence operations
// ---------------------------------------------------------------------------

/// Arithmetic mean of the `window` most recent closes ending at each position.
/// Output[i] is the average over closes[i .. i+window-1]; defined from the
/// (window-1)-th input onward.
inline std::vector<double> moving_average(std::span<const double> closes, int window) {
  if (window < 1) throw ParameterError("moving_average: window must be >= 1");
  if (closes.size() < static_cast<std::size_t>(window)) {
    throw ParameterError("moving_average: need at least " + std::to_string(window) +
                         " closes, got " + std::to_string(closes.size()));
  }
  std::vector<double> out;
  out.reserve(closes.size() - window + 1);
  for (std::size_t t = window - 1; t < closes.size(); ++t) {
    double sum = 0;
    for (std::size_t i = t + 1 - window; i <= t; ++i) sum += closes[i];
    out.push_back(sum / window);
  }
  return out;
}

/// Difference between the close and the close n bars earlier, defined for
/// t >= n.
inline std::vector<double> momentum(std::span<const double> closes, int n) {
  if (n < 1) throw ParameterError("momentum: n must be >= 1");
  if (closes.size() <= static_cast<std::size_t>(n)) {
    throw ParameterError("momentum: need more than " + std::to_string(n) + " closes, got " +
                         std::to_string(closes.size()));
  }
  std::vector<double> out;
  out.reserve(closes.size() - n);
  for (std::size_t t = n; t < closes.size(); ++t) out.push_back(closes[t] - closes[t - n]);
  return out;
}

/// Position of the close within the bar's range, as (high-close)/(high-low)*100.
/// 0 means the close sits at the high, 100 at the low.
inline double ad_oscillator(double high, double low, double close) {
  if (high == low) throw DegenerateRangeError("ad_oscillator: high == low, range is empty");
  return (high - close) / (high - low) * 100.0;
}

inline double ad_oscillator(const OhlcvBar& bar) {
  return ad_oscillator(bar.high, bar.low, bar.close);
}

namespace detail {

inline double weighted_mean_tail(std::span<const double> closes, std::size_t t, int window) {
  double num = 0, den = 0;
  for (int i = 0; i < window; ++i) {
    double w = i + 1;  // oldest weight 1, newest weight `window`
    num += w * closes[t + 1 - window + i];
    den += w;
  }
  return num / den;
}

/// EMA of the last `2*period` values, seeded with the SMA of the first
/// `period` of them. Bounded support keeps the indicator shift-equivariant.
inline double bounded_ema_tail(std::span<const double> closes, std::size_t t, int period) {
  const int span = 2 * period;
  const std::size_t start = t + 1 - span;
  double seed = 0;
  for (int i = 0; i < period; ++i) seed += closes[start + i];
  seed /= period;
  const double alpha = 2.0 / (period + 1.0);
  double ema = seed;
  for (std::size_t i = start + period; i <= t; ++i) ema = alpha * closes[i] + (1 - alpha) * ema;
  return ema;
}

}  // namespace detail

/// Value of one indicator at bar index t over an ordered bar sequence.
/// Requires t >= lookback(spec); callers guarantee the bars are valid.
inline double indicator_value(const IndicatorSpec& spec, std::span<const OhlcvBar> bars,
                              std::size_t t) {
  const int w = spec.window;
  switch (spec.name) {
    case Indicator::sma: {
      double sum = 0;
      for (std::size_t i = t + 1 - w; i <= t; ++i) sum += bars[i].close;
      return sum / w;
    }
    case Indicator::wma: {
      double num = 0, den = 0;
      for (int i = 0; i < w; ++i) {
        double weight = i + 1;
        num += weight * bars[t + 1 - w + i].close;
        den += weight;
      }
      return num / den;
    }
    case Indicator::momentum:
      return bars[t].close - bars[t - w].close;
    case Indicator::stoch_k: {
      double hh = bars[t + 1 - w].high, ll = bars[t + 1 - w].low;
      for (std::size_t i = t + 2 - w; i <= t; ++i) {
        hh = std::max(hh, bars[i].high);
        ll = std::min(ll, bars[i].low);
      }
      if (hh == ll) return 50.0;  // flat window carries no position information
      return 100.0 * (bars[t].close - ll) / (hh - ll);
    }
    case Indicator::stoch_d: {
      const int smooth = static_cast<int>(spec.param("smooth", 3));
      IndicatorSpec k{Indicator::stoch_k, w, {}};
      double sum = 0;
      for (int i = 0; i < smooth; ++i) sum += indicator_value(k, bars, t - i);
      return sum / smooth;
    }
    case Indicator::rsi: {
      double gain = 0, loss = 0;
      for (std::size_t i = t + 1 - w; i <= t; ++i) {
        double change = bars[i].close - bars[i - 1].close;
        if (change > 0) gain += change;
        else loss -= change;
      }
      if (loss == 0) return 100.0;  // no losses: ratio saturates
      double rs = (gain / w) / (loss / w);
      return 100.0 - 100.0 / (1.0 + rs);
    }
    case Indicator::macd: {
      const int fast = static_cast<int>(spec.param("fast", 12));
      std::vector<double> closes(2 * w);
      for (int i = 0; i < 2 * w; ++i) closes[i] = bars[t + 1 - 2 * w + i].close;
      std::span<const double> tail(closes);
      return detail::bounded_ema_tail(tail, closes.size() - 1, fast) -
             detail::bounded_ema_tail(tail, closes.size() - 1, w);
    }
    case Indicator::williams_r: {
      double hh = bars[t + 1 - w].high, ll = bars[t + 1 - w].low;
      for (std::size_t i = t + 2 - w; i <= t; ++i) {
        hh = std::max(hh, bars[i].high);
        ll = std::min(ll, bars[i].low);
      }
      if (hh == ll) return -50.0;
      return -100.0 * (hh - bars[t].close) / (hh - ll);
    }
    case Indicator::cci: {
      auto typical = [&](std::size_t i) {
        return (bars[i].high + bars[i].low + bars[i].close) / 3.0;
      };
      double mean = 0;
      for (std::size_t i = t + 1 - w; i <= t; ++i) mean += typical(i);
      mean /= w;
      double dev = 0;
      for (std::size_t i = t + 1 - w; i <= t; ++i) dev += std::abs(typical(i) - mean);
      dev /= w;
      if (dev == 0) return 0.0;  // price glued to its average
      return (typical(t) - mean) / (0.015 * dev);
    }
    case Indicator::ad_osc: {
      const auto& bar = bars[t];
      if (bar.high == bar.low) return spec.param("fallback", 50.0);
      return ad_oscillator(bar);
    }
  }
  throw ParameterError("indicator_value: unknown indicator");
}

inline std::vector<double> weighted_moving_average(std::span<const double> closes, int window) {
  if (window < 1) throw ParameterError("weighted_moving_average: window must be >= 1");
  if (closes.size() < static_cast<std::size_t>(window)) {
    throw ParameterError("weighted_moving_average: sequence shorter than window");
  }
  std::vector<double> out;
  out.reserve(closes.size() - window + 1);
  for (std::size_t t = window - 1; t < closes.size(); ++t) {
    out.push_back(detail::weighted_mean_tail(closes, t, window));
  }
  return out;
}

/// The default ten-indicator input set. Windows are configurable per spec.
inline std::vector<IndicatorSpec> default_indicator_set(int momentum_window = 4) {
  return {
      {Indicator::sma, 30, {}},
      {Indicator::wma, 10, {}},
      {Indicator::momentum, momentum_window, {}},
      {Indicator::stoch_k, 14, {}},
      {Indicator::stoch_d, 14, {{"smooth", 3}}},
      {Indicator::rsi, 14, {}},
      {Indicator::macd, 26, {{"fast", 12}}},
      {Indicator::williams_r, 14, {}},
      {Indicator::cci, 20, {}},
      {Indicator::ad_osc, 1, {{"fallback", 50.0}}},
  };
}

/// Per-day indicator vectors over the valid bars of a series. Rows with
/// incomplete lookback are dropped and counted in `warmup`; flagged bars are
/// excluded and listed in `skipped_rows`.
struct FeatureMatrix {
  std::vector<Date> dates;
  std::vector<IndicatorSpec> columns;
  std::vector<std::vector<double>> values;  // dates x columns
  int warmup = 0;
  std::vector<std::size_t> skipped_rows;  // indices into the original series
  std::vector<std::string> warnings;

  std::size_t rows() const { return values.size(); }
  std::size_t cols() const { return columns.size(); }
};

inline FeatureMatrix compute_feature_matrix(const PriceSeries& series,
                                            const std::vector<IndicatorSpec>& specs) {
  if (specs.empty()) throw ParameterError("compute_feature_matrix: no indicator specs");

  FeatureMatrix matrix;
  matrix.columns = specs;

  std::vector<OhlcvBar> valid;
  valid.reserve(series.bars.size());
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    BarRule rule = i < series.flags.size() ? series.flags[i] : classify_bar(series.bars[i]);
    if (rule == BarRule::valid) {
      valid.push_back(series.bars[i]);
    } else {
      matrix.skipped_rows.push_back(i);
    }
  }

  int max_lookback = 0;
  for (const auto& spec : specs) {
    if (spec.window < 1) throw ParameterError("compute_feature_matrix: window must be >= 1");
    max_lookback = std::max(max_lookback, lookback(spec));
  }
  matrix.warmup = max_lookback;

  if (valid.size() < static_cast<std::size_t>(max_lookback) + 1) {
    throw ParameterError("compute_feature_matrix: need at least " +
                         std::to_string(max_lookback + 1) + " valid bars, got " +
                         std::to_string(valid.size()));
  }

  std::span<const OhlcvBar> bars(valid);
  for (std::size_t t = max_lookback; t < valid.size(); ++t) {
    std::vector<double> row;
    row.reserve(specs.size());
    for (const auto& spec : specs) {
      if (spec.name == Indicator::ad_osc && valid[t].high == valid[t].low) {
        matrix.warnings.push_back("flat bar on " + to_iso(valid[t].date) +
                                  ": ad_osc fell back to " +
                                  std::to_string(spec.param("fallback", 50.0)));
      }
      double value = indicator_value(spec, bars, t);
      if (!std::isfinite(value)) {
        throw ParameterError("compute_feature_matrix: non-finite " + column_name(spec) +
                             " on " + to_iso(valid[t].date));
      }
      row.push_back(value);
    }
    matrix.dates.push_back(valid[t].date);
    matrix.values.push_back(std::move(row));
  }
  return matrix;
}

/// Incremental evaluation of one indicator, one bar at a time. Emits a value
/// once enough history has been seen; the result matches batch computation.
class IndicatorStream {
 public:
  explicit IndicatorStream(IndicatorSpec spec)
      : spec_(std::move(spec)), capacity_(static_cast<std::size_t>(lookback(spec_)) + 1) {}

  std::optional<double> push(const OhlcvBar& bar) {
    switch (spec_.name) {
      case Indicator::sma: {
        // rolling sum: different arithmetic path from the batch mean
        closes_.push_back(bar.close);
        rolling_sum_ += bar.close;
        if (closes_.size() > static_cast<std::size_t>(spec_.window)) {
          rolling_sum_ -= closes_.front();
          closes_.pop_front();
        }
        if (closes_.size() < static_cast<std::size_t>(spec_.window)) return std::nullopt;
        return rolling_sum_ / spec_.window;
      }
      case Indicator::momentum: {
        closes_.push_back(bar.close);
        if (closes_.size() > static_cast<std::size_t>(spec_.window) + 1) closes_.pop_front();
        if (closes_.size() < static_cast<std::size_t>(spec_.window) + 1) return std::nullopt;
        return closes_.back() - closes_.front();
      }
      case Indicator::ad_osc: {
        if (bar.high == bar.low) return spec_.param("fallback", 50.0);
        return ad_oscillator(bar);
      }
      default: {
        window_.push_back(bar);
        if (window_.size() > capacity_) window_.erase(window_.begin());
        if (window_.size() < capacity_) return std::nullopt;
        return indicator_value(spec_, std::span<const OhlcvBar>(window_), window_.size() - 1);
      }
    }
  }

 private:
  IndicatorSpec spec_;
  std::size_t capacity_;
  std::deque<double> closes_;
  double rolling_sum_ = 0;
  std::vector<OhlcvBar> window_;
};

}  // namespace trendcast
