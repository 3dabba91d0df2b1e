#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trendcast/date.hpp"
#include "trendcast/errors.hpp"

namespace trendcast {

/// One daily market bar. Prices are currency units, volume is shares traded.
struct OhlcvBar {
  Date date;
  double open = 0;
  double high = 0;
  double low = 0;
  double close = 0;
  std::int64_t volume = 0;
  std::optional<double> adj_close;

  friend bool operator==(const OhlcvBar&, const OhlcvBar&) = default;
};

/// First violated consistency rule of a bar, or `valid`.
enum class BarRule {
  valid,
  non_positive_price,
  negative_volume,
  low_above_high,
  open_below_low,
  open_above_high,
  close_below_low,
  close_above_high,
};

inline std::string_view bar_rule_name(BarRule rule) {
  switch (rule) {
    case BarRule::valid: return "valid";
    case BarRule::non_positive_price: return "price <= 0";
    case BarRule::negative_volume: return "volume < 0";
    case BarRule::low_above_high: return "low > high";
    case BarRule::open_below_low: return "open < low";
    case BarRule::open_above_high: return "open > high";
    case BarRule::close_below_low: return "close < low";
    case BarRule::close_above_high: return "close > high";
  }
  return "unknown";
}

/// Checks one bar against the validity rules, reporting the first violation.
inline BarRule classify_bar(const OhlcvBar& b) {
  if (b.open <= 0 || b.high <= 0 || b.low <= 0 || b.close <= 0)
    return BarRule::non_positive_price;
  if (b.volume < 0) return BarRule::negative_volume;
  if (b.low > b.high) return BarRule::low_above_high;
  if (b.open < b.low) return BarRule::open_below_low;
  if (b.open > b.high) return BarRule::open_above_high;
  if (b.close < b.low) return BarRule::close_below_low;
  if (b.close > b.high) return BarRule::close_above_high;
  return BarRule::valid;
}

/// Immutable daily series. Bars are strictly increasing in date; `flags`
/// parallels `bars` and records each bar's validation status at parse time.
struct PriceSeries {
  std::string symbol;
  std::vector<OhlcvBar> bars;
  std::vector<BarRule> flags;

  std::size_t size() const { return bars.size(); }
};

struct FlaggedRow {
  std::size_t row;  // index into PriceSeries::bars
  BarRule rule;
};

struct ValidationReport {
  std::size_t total_rows = 0;
  std::size_t valid = 0;
  std::vector<FlaggedRow> flagged;
};

/// Re-derives every bar's status. Pure: the series is never mutated and the
/// same input always yields the same report.
inline ValidationReport validate_series(const PriceSeries& series) {
  ValidationReport report;
  report.total_rows = series.bars.size();
  for (std::size_t i = 0; i < series.bars.size(); ++i) {
    BarRule rule = classify_bar(series.bars[i]);
    if (rule == BarRule::valid) {
      ++report.valid;
    } else {
      report.flagged.push_back({i, rule});
    }
  }
  return report;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return fields;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::optional<double> parse_price(std::string_view field) {
  double value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

inline std::optional<std::int64_t> parse_volume(std::string_view field) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

}  // namespace detail

/// Parses a `Date,Open,High,Low,Close,Volume[,Adj Close]` CSV. Rows are sorted
/// by date ascending regardless of file order; `#` comment lines and blank
/// lines are skipped. Throws ParseError naming the offending line, or
/// DuplicateDateError when two rows share a date.
inline PriceSeries parse_ohlcv_csv(std::istream& source,
                                   const std::string& date_format = "%d-%m-%Y",
                                   std::string symbol = "") {
  std::string line;
  std::size_t line_number = 0;

  auto next_content_line = [&]() -> bool {
    while (std::getline(source, line)) {
      ++line_number;
      std::string_view trimmed = detail::trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_content_line()) throw ParseError("CSV input is empty: header row required");

  int col_date = -1, col_open = -1, col_high = -1, col_low = -1, col_close = -1,
      col_volume = -1, col_adj = -1;
  {
    auto header = detail::split_csv_line(detail::trim(line));
    for (std::size_t i = 0; i < header.size(); ++i) {
      std::string name = detail::lower(header[i]);
      if (name == "date") col_date = static_cast<int>(i);
      else if (name == "open") col_open = static_cast<int>(i);
      else if (name == "high") col_high = static_cast<int>(i);
      else if (name == "low") col_low = static_cast<int>(i);
      else if (name == "close") col_close = static_cast<int>(i);
      else if (name == "volume") col_volume = static_cast<int>(i);
      else if (name == "adj close" || name == "adj_close" || name == "adjclose")
        col_adj = static_cast<int>(i);
    }
    if (col_date < 0 || col_open < 0 || col_high < 0 || col_low < 0 || col_close < 0 ||
        col_volume < 0) {
      throw ParseError("CSV header must contain Date,Open,High,Low,Close,Volume");
    }
  }
  const int required_fields =
      1 + std::max({col_date, col_open, col_high, col_low, col_close, col_volume});

  PriceSeries series;
  series.symbol = std::move(symbol);

  while (next_content_line()) {
    auto fields = detail::split_csv_line(detail::trim(line));
    if (static_cast<int>(fields.size()) < required_fields) {
      throw ParseError("row " + std::to_string(line_number) + ": expected at least " +
                       std::to_string(required_fields) + " fields, got " +
                       std::to_string(fields.size()));
    }
    auto bad = [&](std::string_view what, std::string_view value) -> ParseError {
      return ParseError("row " + std::to_string(line_number) + ": malformed " +
                        std::string(what) + " '" + std::string(value) + "'");
    };

    OhlcvBar bar;
    auto date = parse_date(fields[col_date], date_format);
    if (!date) throw bad("date", fields[col_date]);
    bar.date = *date;

    auto open = detail::parse_price(fields[col_open]);
    auto high = detail::parse_price(fields[col_high]);
    auto low = detail::parse_price(fields[col_low]);
    auto close = detail::parse_price(fields[col_close]);
    if (!open) throw bad("open", fields[col_open]);
    if (!high) throw bad("high", fields[col_high]);
    if (!low) throw bad("low", fields[col_low]);
    if (!close) throw bad("close", fields[col_close]);
    bar.open = *open;
    bar.high = *high;
    bar.low = *low;
    bar.close = *close;

    auto volume = detail::parse_volume(fields[col_volume]);
    if (!volume) throw bad("volume", fields[col_volume]);
    bar.volume = *volume;

    if (col_adj >= 0 && col_adj < static_cast<int>(fields.size()) && !fields[col_adj].empty()) {
      auto adj = detail::parse_price(fields[col_adj]);
      if (!adj) throw bad("adj close", fields[col_adj]);
      bar.adj_close = *adj;
    }
    series.bars.push_back(bar);
  }

  std::stable_sort(series.bars.begin(), series.bars.end(),
                   [](const OhlcvBar& a, const OhlcvBar& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < series.bars.size(); ++i) {
    if (series.bars[i].date == series.bars[i - 1].date) {
      throw DuplicateDateError("duplicate date " + to_iso(series.bars[i].date));
    }
  }

  series.flags.reserve(series.bars.size());
  for (const auto& bar : series.bars) series.flags.push_back(classify_bar(bar));
  return series;
}

inline PriceSeries parse_ohlcv_csv_text(const std::string& text,
                                        const std::string& date_format = "%d-%m-%Y",
                                        std::string symbol = "") {
  std::istringstream in(text);
  return parse_ohlcv_csv(in, date_format, std::move(symbol));
}

namespace detail {

inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Emits the series back as CSV. parse(serialize(s)) reproduces s exactly:
/// prices use shortest round-trip formatting.
inline std::string serialize_ohlcv_csv(const PriceSeries& series,
                                       const std::string& date_format = "%d-%m-%Y") {
  const bool has_adj = std::any_of(series.bars.begin(), series.bars.end(),
                                   [](const OhlcvBar& b) { return b.adj_close.has_value(); });
  std::string out = "Date,Open,High,Low,Close,Volume";
  if (has_adj) out += ",Adj Close";
  out += '\n';
  for (const auto& bar : series.bars) {
    out += format_date(bar.date, date_format);
    out += ',';
    out += detail::format_double(bar.open);
    out += ',';
    out += detail::format_double(bar.high);
    out += ',';
    out += detail::format_double(bar.low);
    out += ',';
    out += detail::format_double(bar.close);
    out += ',';
    out += std::to_string(bar.volume);
    if (has_adj) {
      out += ',';
      if (bar.adj_close) out += detail::format_double(*bar.adj_close);
    }
    out += '\n';
  }
  return out;
}

}  // namespace trendcast
