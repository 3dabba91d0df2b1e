#pragma once

#include <cctype>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "trendcast/errors.hpp"

namespace trendcast {

/// Calendar date at day precision. Ordering is chronological.
struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  friend auto operator<=>(const Date&, const Date&) = default;
};

inline bool is_leap_year(int year) {
  return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

inline int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

inline bool is_valid_date(const Date& d) {
  return d.year >= 1 && d.month >= 1 && d.month <= 12 && d.day >= 1 &&
         d.day <= days_in_month(d.year, d.month);
}

/// Parses `text` against a strptime-like format containing %d, %m, %Y and
/// literal separators. Returns nullopt on any mismatch or an impossible date.
inline std::optional<Date> parse_date(std::string_view text, std::string_view format) {
  std::size_t ti = 0;
  Date out;
  bool saw_day = false, saw_month = false, saw_year = false;

  auto read_int = [&](int max_digits, int& value) {
    int digits = 0, v = 0;
    while (ti < text.size() && digits < max_digits &&
           std::isdigit(static_cast<unsigned char>(text[ti]))) {
      v = v * 10 + (text[ti] - '0');
      ++ti;
      ++digits;
    }
    if (digits == 0) return false;
    value = v;
    return true;
  };

  for (std::size_t fi = 0; fi < format.size(); ++fi) {
    char c = format[fi];
    if (c == '%' && fi + 1 < format.size()) {
      switch (format[++fi]) {
        case 'd':
          if (!read_int(2, out.day)) return std::nullopt;
          saw_day = true;
          break;
        case 'm':
          if (!read_int(2, out.month)) return std::nullopt;
          saw_month = true;
          break;
        case 'Y':
          if (!read_int(4, out.year)) return std::nullopt;
          saw_year = true;
          break;
        case '%':
          if (ti >= text.size() || text[ti] != '%') return std::nullopt;
          ++ti;
          break;
        default:
          return std::nullopt;  // unsupported conversion
      }
    } else {
      if (ti >= text.size() || text[ti] != c) return std::nullopt;
      ++ti;
    }
  }
  if (ti != text.size() || !saw_day || !saw_month || !saw_year) return std::nullopt;
  if (!is_valid_date(out)) return std::nullopt;
  return out;
}

/// Formats with the same %d/%m/%Y tokens parse_date accepts (zero padded).
inline std::string format_date(const Date& d, std::string_view format) {
  std::string out;
  char buf[8];
  for (std::size_t fi = 0; fi < format.size(); ++fi) {
    char c = format[fi];
    if (c == '%' && fi + 1 < format.size()) {
      switch (format[++fi]) {
        case 'd':
          std::snprintf(buf, sizeof buf, "%02d", d.day);
          out += buf;
          break;
        case 'm':
          std::snprintf(buf, sizeof buf, "%02d", d.month);
          out += buf;
          break;
        case 'Y':
          std::snprintf(buf, sizeof buf, "%04d", d.year);
          out += buf;
          break;
        case '%':
          out += '%';
          break;
        default:
          throw ParameterError("format_date: unsupported conversion in format string");
      }
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string to_iso(const Date& d) { return format_date(d, "%Y-%m-%d"); }

}  // namespace trendcast
