#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ideaflow/error.hpp"
#include "ideaflow/series.hpp"

namespace ideaflow::io {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

constexpr bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

}  // namespace detail

// YYYY-MM-DD to year + (day_of_year - 1) / 365.25. Throws DomainError on a
// malformed or impossible date.
inline double iso_date_to_decimal_year(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_int(s.substr(0, 4), y) ||
      !detail::parse_int(s.substr(5, 2), m) || !detail::parse_int(s.substr(8, 2), d))
    throw DomainError("malformed ISO date '" + std::string(s) + "'");
  static constexpr int days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m < 1 || m > 12) throw DomainError("month out of range in '" + std::string(s) + "'");
  const int month_days = days[m - 1] + (m == 2 && detail::is_leap(y) ? 1 : 0);
  if (d < 1 || d > month_days) throw DomainError("day out of range in '" + std::string(s) + "'");
  int doy = d;
  for (int k = 0; k < m - 1; ++k) doy += days[k] + (k == 1 && detail::is_leap(y) ? 1 : 0);
  return y + (doy - 1) / 365.25;
}

// Parses `t,value` CSV text (LF or CRLF, optional UTF-8 BOM, blank lines
// ignored). `t` is a decimal year or an ISO date. Errors carry the 1-based
// line number.
inline TimeSeries parse_csv(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<double> ts, vs;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t last_line = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      const auto comma = line.find(',');
      if (comma == std::string_view::npos || detail::trim(line.substr(0, comma)) != "t" ||
          detail::trim(line.substr(comma + 1)) != "value")
        throw ParseError("expected header 't,value', found '" + std::string(line) + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected two comma-separated fields", line_no);
    const auto tf = detail::trim(line.substr(0, comma));
    const auto vf = detail::trim(line.substr(comma + 1));
    double t = 0.0, v = 0.0;
    if (tf.size() == 10 && tf[4] == '-' && tf[7] == '-') {
      try {
        t = iso_date_to_decimal_year(tf);
      } catch (const DomainError& e) {
        throw ParseError(e.what(), line_no);
      }
    } else if (!detail::parse_double(tf, t) || !std::isfinite(t)) {
      throw ParseError("bad time '" + std::string(tf) + "'", line_no);
    }
    if (!detail::parse_double(vf, v) || !std::isfinite(v)) throw ParseError("bad value '" + std::string(vf) + "'", line_no);
    if (!(v > 0.0)) throw ParseError("value must be positive, got " + std::string(vf), line_no);
    if (!ts.empty()) {
      if (t == ts.back()) throw ParseError("duplicate timestamp " + std::string(tf), line_no);
      if (t < ts.back()) throw ParseError("rows not sorted by time at " + std::string(tf), line_no);
    }
    ts.push_back(t);
    vs.push_back(v);
    last_line = line_no;
  }
  if (!header_seen) throw ParseError("empty file", 0);
  if (ts.size() < 2) throw ParseError("need at least 2 data rows", last_line);
  return TimeSeries(std::move(ts), std::move(vs));
}

inline TimeSeries read_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ParseError("cannot open " + file.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str());
  } catch (const ParseError& e) {
    throw e.with_context(file.string());
  }
}

// Round-trippable `t,value` text.
inline std::string format_csv(const TimeSeries& s) {
  std::ostringstream out;
  out << "t,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < s.size(); ++i) out << s.time(i) << ',' << s.value(i) << '\n';
  return out.str();
}

inline void write_csv(const std::filesystem::path& file, const TimeSeries& s) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << format_csv(s);
}

}  // namespace ideaflow::io
