#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/panel.hpp"
#include "sdmc/weights.hpp"

namespace sdmc::io {

/// Comma-separated table with a header row. Double-quoted fields may contain
/// commas; "" inside quotes is a literal quote.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    fail(ErrorKind::ParseError, source + ": missing column '" + name + "'");
  }

  std::string where(std::size_t row, std::size_t col) const {
    return source + ":" + std::to_string(lines[row]) + ", column '" + header[col] + "'";
  }

  double number(std::size_t row, std::size_t col) const {
    const std::string& s = rows[row][col];
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || s.empty())
      fail(ErrorKind::ParseError, where(row, col) + ": '" + s + "' is not a number");
    return v;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line, const std::string& source,
                                           std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) fail(ErrorKind::ParseError, source + ":" + std::to_string(lineno) + ": unterminated quote");
  out.push_back(trim(cur));
  return out;
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_line(line, source, lineno);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      fail(ErrorKind::ParseError, source + ":" + std::to_string(lineno) + ": expected " +
                                      std::to_string(t.header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (!have_header) fail(ErrorKind::ParseError, source + ": empty file");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write '" + path + "'");
  out.precision(17);
  return out;
}

/// Header `region_id,x,y`.
inline std::vector<Coordinate> read_coordinates(const std::string& path) {
  const auto t = read_csv(path);
  const auto id = t.column("region_id"), x = t.column("x"), y = t.column("y");
  std::vector<Coordinate> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back({t.rows[r][id], t.number(r, x), t.number(r, y)});
  return out;
}

inline void write_coordinates(const std::vector<Coordinate>& coords, const std::string& path) {
  auto out = open_output(path);
  out << "region_id,x,y\n";
  for (const auto& c : coords)
    out << detail::quote(c.region_id) << ',' << detail::format_number(c.x) << ',' << detail::format_number(c.y)
        << '\n';
}

/// Header `region_i,region_j,distance`.
inline std::vector<DistanceEntry> read_distances(const std::string& path) {
  const auto t = read_csv(path);
  const auto a = t.column("region_i"), b = t.column("region_j"), d = t.column("distance");
  std::vector<DistanceEntry> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back({t.rows[r][a], t.rows[r][b], t.number(r, d)});
  return out;
}

/// Header `region_i,region_j`; ids resolved against `region_ids`.
inline std::vector<std::pair<Index, Index>> read_neighbors(const std::string& path,
                                                           const std::vector<std::string>& region_ids) {
  const auto t = read_csv(path);
  const auto a = t.column("region_i"), b = t.column("region_j");
  std::unordered_map<std::string, Index> pos;
  for (std::size_t i = 0; i < region_ids.size(); ++i) pos[region_ids[i]] = static_cast<Index>(i);
  std::vector<std::pair<Index, Index>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto ia = pos.find(t.rows[r][a]), ib = pos.find(t.rows[r][b]);
    if (ia == pos.end() || ib == pos.end())
      fail(ErrorKind::IndexOutOfRange, t.where(r, ia == pos.end() ? a : b) + ": unknown region '" +
                                           (ia == pos.end() ? t.rows[r][a] : t.rows[r][b]) + "'");
    out.emplace_back(ia->second, ib->second);
  }
  return out;
}

inline void write_neighbors(const std::vector<std::pair<Index, Index>>& pairs,
                            const std::vector<std::string>& region_ids, const std::string& path) {
  auto out = open_output(path);
  out << "region_i,region_j\n";
  for (auto [i, j] : pairs) out << detail::quote(region_ids[i]) << ',' << detail::quote(region_ids[j]) << '\n';
}

/// Header `region_id,sector_id,member`. Sectors keep their order of first
/// appearance; a region not listed for a sector is not a member.
inline std::vector<ClusterIndicator> read_clusters(const std::string& path,
                                                   const std::vector<std::string>& region_ids) {
  const auto t = read_csv(path);
  const auto id = t.column("region_id"), sec = t.column("sector_id"), mem = t.column("member");
  std::unordered_map<std::string, Index> pos;
  for (std::size_t i = 0; i < region_ids.size(); ++i) pos[region_ids[i]] = static_cast<Index>(i);
  std::vector<ClusterIndicator> out;
  std::unordered_map<std::string, std::size_t> sector_pos;
  const Index n = static_cast<Index>(region_ids.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto it = pos.find(t.rows[r][id]);
    if (it == pos.end())
      fail(ErrorKind::DimensionMismatch, t.where(r, id) + ": region '" + t.rows[r][id] + "' is not in the panel");
    const double m = t.number(r, mem);
    if (m != 0.0 && m != 1.0) fail(ErrorKind::ParseError, t.where(r, mem) + ": member must be 0 or 1");
    const auto& s = t.rows[r][sec];
    auto [sit, fresh] = sector_pos.emplace(s, out.size());
    if (fresh) out.push_back({s, Eigen::VectorXd::Zero(n)});
    out[sit->second].membership(it->second) = m;
  }
  return out;
}

inline void write_clusters(const std::vector<ClusterIndicator>& clusters,
                           const std::vector<std::string>& region_ids, const std::string& path) {
  auto out = open_output(path);
  out << "region_id,sector_id,member\n";
  for (const auto& c : clusters)
    for (std::size_t i = 0; i < region_ids.size(); ++i)
      out << detail::quote(region_ids[i]) << ',' << detail::quote(c.sector_id) << ','
          << (c.membership(static_cast<Index>(i)) != 0.0 ? 1 : 0) << '\n';
}

/// Square matrix with a `region_id` header column.
inline void write_weights(const WeightMatrix& w, std::ostream& out) {
  const Index n = w.size();
  auto id = [&](Index i) { return w.region_ids().empty() ? std::to_string(i) : w.region_ids()[i]; };
  out << "region_id";
  for (Index j = 0; j < n; ++j) out << ',' << detail::quote(id(j));
  out << '\n';
  for (Index i = 0; i < n; ++i) {
    out << detail::quote(id(i));
    for (Index j = 0; j < n; ++j) out << ',' << detail::format_number(w.matrix()(i, j));
    out << '\n';
  }
}

inline Eigen::MatrixXd read_weights_matrix(const std::string& path, std::vector<std::string>* ids = nullptr) {
  const auto t = read_csv(path);
  const Index n = static_cast<Index>(t.rows.size());
  if (static_cast<Index>(t.header.size()) != n + 1)
    fail(ErrorKind::ParseError, path + ": weight matrix must be square");
  Eigen::MatrixXd m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = t.number(static_cast<std::size_t>(i), static_cast<std::size_t>(j + 1));
  if (ids) {
    ids->clear();
    for (const auto& row : t.rows) ids->push_back(row[0]);
  }
  return m;
}

struct PanelReadOptions {
  /// Dependent variable; defaults to the first variable column.
  std::string dependent;
  /// Regressors to keep; empty keeps every remaining variable column.
  std::vector<std::string> regressors;
  /// Columns replaced by their natural logarithm on ingestion.
  std::vector<std::string> log_variables;
};

/// Header `region_id,period,<var1>,<var2>,...`; exactly one row per
/// (region, period). Regions keep their order of first appearance; periods
/// are sorted numerically when every label is a number.
inline RegionPanel read_panel(const std::string& path, const PanelReadOptions& opt = {}) {
  const auto t = read_csv(path);
  const auto rid = t.column("region_id"), per = t.column("period");
  std::vector<std::size_t> var_cols;
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (j != rid && j != per) var_cols.push_back(j);
  if (var_cols.size() < 2) fail(ErrorKind::ParseError, path + ": need a dependent variable and at least one regressor");
  auto find_col = [&](const std::string& name) {
    for (auto j : var_cols)
      if (t.header[j] == name) return j;
    fail(ErrorKind::UnknownVariable, path + ": unknown variable '" + name + "'");
  };
  const std::size_t dep = opt.dependent.empty() ? var_cols.front() : find_col(opt.dependent);
  std::vector<std::size_t> reg;
  if (opt.regressors.empty()) {
    for (auto j : var_cols)
      if (j != dep) reg.push_back(j);
  } else {
    for (const auto& name : opt.regressors) reg.push_back(find_col(name));
  }
  std::vector<bool> is_log(t.header.size(), false);
  for (const auto& name : opt.log_variables) is_log[find_col(name)] = true;

  std::vector<std::string> regions, periods;
  std::unordered_map<std::string, Index> rpos, ppos;
  for (const auto& row : t.rows) {
    if (rpos.emplace(row[rid], static_cast<Index>(regions.size())).second) regions.push_back(row[rid]);
    if (ppos.emplace(row[per], static_cast<Index>(periods.size())).second) periods.push_back(row[per]);
  }
  const bool numeric = std::all_of(periods.begin(), periods.end(), [](const std::string& s) {
    double v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  });
  if (numeric) {
    std::stable_sort(periods.begin(), periods.end(),
                     [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
    for (std::size_t i = 0; i < periods.size(); ++i) ppos[periods[i]] = static_cast<Index>(i);
  }
  const Index n = static_cast<Index>(regions.size()), tt = static_cast<Index>(periods.size());
  const Index k = static_cast<Index>(reg.size());
  if (static_cast<Index>(t.rows.size()) != n * tt)
    fail(ErrorKind::UnbalancedPanel, path + ": " + std::to_string(t.rows.size()) + " rows for " +
                                         std::to_string(n) + " regions x " + std::to_string(tt) +
                                         " periods; the panel must be balanced");
  Eigen::VectorXd y(n * tt);
  Eigen::MatrixXd x(n * tt, k);
  std::vector<bool> seen(static_cast<std::size_t>(n * tt), false);
  auto value = [&](std::size_t r, std::size_t c) {
    double v = t.number(r, c);
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteValue, t.where(r, c) + ": value is not finite");
    if (is_log[c]) {
      if (!(v > 0.0))
        fail(ErrorKind::NonPositiveLogInput, t.where(r, c) + ": value " + t.rows[r][c] +
                                                 " is not strictly positive and cannot be log-transformed");
      v = std::log(v);
    }
    return v;
  };
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Index row = ppos[t.rows[r][per]] * n + rpos[t.rows[r][rid]];
    if (seen[static_cast<std::size_t>(row)])
      fail(ErrorKind::UnbalancedPanel, path + ":" + std::to_string(t.lines[r]) + ": duplicate observation for region '" +
                                           t.rows[r][rid] + "', period '" + t.rows[r][per] + "'");
    seen[static_cast<std::size_t>(row)] = true;
    y(row) = value(r, dep);
    for (Index j = 0; j < k; ++j) x(row, j) = value(r, reg[j]);
  }
  std::vector<std::string> names;
  std::vector<bool> logs;
  for (auto j : reg) {
    names.push_back(t.header[j]);
    logs.push_back(is_log[j]);
  }
  return RegionPanel(regions, periods, t.header[dep], std::move(y), names, std::move(x), logs, is_log[dep]);
}

inline void write_panel(const RegionPanel& p, const std::string& path) {
  auto out = open_output(path);
  out << "region_id,period," << detail::quote(p.dependent_name());
  for (const auto& v : p.variable_names()) out << ',' << detail::quote(v);
  out << '\n';
  for (Index i = 0; i < p.n(); ++i)
    for (Index per = 0; per < p.t(); ++per) {
      const Index row = p.row(i, per);
      out << detail::quote(p.region_ids()[i]) << ',' << detail::quote(p.period_labels()[per]) << ','
          << detail::format_number(p.y()(row));
      for (Index j = 0; j < p.k(); ++j) out << ',' << detail::format_number(p.x()(row, j));
      out << '\n';
    }
}

}  // namespace sdmc::io
