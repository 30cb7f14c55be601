/* Copyright 2026 The cnnergy Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cnnergy/error.hpp"

namespace cnnergy::text {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::string> lines(std::string_view s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    auto pos = s.find('\n', start);
    if (pos == std::string_view::npos) {
      if (start < s.size()) out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& l : out)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  return out;
}

// Strict numeric parsing: the whole token must be consumed.
inline bool parse_double(std::string_view s, double& v) {
  s = trim(s);
  if (s.empty()) return false;
  // from_chars rejects a leading '+', strtod-compatible inputs still welcome
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

inline bool parse_int(std::string_view s, long long& v) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

inline double to_double(std::string_view s, Errc code, const std::string& where) {
  double v;
  if (!parse_double(s, v)) throw Error(code, where + ": not a number '" + std::string(s) + "'");
  return v;
}

inline long long to_int(std::string_view s, Errc code, const std::string& where) {
  long long v;
  if (!parse_int(s, v)) throw Error(code, where + ": not an integer '" + std::string(s) + "'");
  return v;
}

/// Six significant digits, locale-independent, "-0" normalised.
inline std::string fmt6(double v) {
  if (v == 0.0) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// A header-addressed CSV table. Quoting is not supported; none of the
/// formats we read need it.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_no;  // 1-based source line for each row

  [[nodiscard]] int column(std::string_view name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline Csv parse_csv(std::string_view body, Errc code = Errc::FormatError) {
  Csv csv;
  int n = 0;
  bool have_header = false;
  for (auto& raw : lines(body)) {
    ++n;
    auto l = trim(raw);
    if (l.empty() || l.front() == '#') continue;
    auto cells = split(l, ',');
    if (!have_header) {
      csv.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != csv.header.size())
      throw Error(code, "line " + std::to_string(n) + ": expected " +
                            std::to_string(csv.header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    csv.rows.push_back(std::move(cells));
    csv.line_no.push_back(n);
  }
  if (!have_header) throw Error(code, "missing header");
  return csv;
}

/// Tabular output rendered either as CSV or as an aligned text table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    auto put = [&](const std::vector<std::string>& r) {
      for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    };
    put(header);
    for (auto& r : rows) put(r);
    return os.str();
  }

  [[nodiscard]] std::string pretty() const {
    std::vector<size_t> w(header.size(), 0);
    auto widen = [&](const std::vector<std::string>& r) {
      for (size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
    };
    widen(header);
    for (auto& r : rows) widen(r);
    std::ostringstream os;
    auto put = [&](const std::vector<std::string>& r) {
      std::string line;
      for (size_t i = 0; i < r.size(); ++i) {
        if (i) line += "  ";
        std::string cell = r[i];
        if (i < w.size() && cell.size() < w[i]) cell.insert(0, w[i] - cell.size(), ' ');
        line += cell;
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      os << line << '\n';
    };
    put(header);
    size_t total = 0;
    for (auto x : w) total += x;
    os << std::string(total + (w.empty() ? 0 : 2 * (w.size() - 1)), '-') << '\n';
    for (auto& r : rows) put(r);
    return os.str();
  }
};

/// key=value documents (device profiles, GPU sets). Repeated keys are kept.
inline std::vector<std::pair<std::string, std::string>> parse_kv(std::string_view body,
                                                                   Errc code) {
  std::vector<std::pair<std::string, std::string>> out;
  int n = 0;
  for (auto& raw : lines(body)) {
    ++n;
    auto l = raw;
    if (auto h = l.find('#'); h != std::string::npos) l.erase(h);
    auto t = trim(l);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw Error(code, "line " + std::to_string(n) + ": expected key=value");
    out.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return out;
}

}  // namespace cnnergy::text
