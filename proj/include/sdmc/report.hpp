#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "sdmc/dgp.hpp"
#include "sdmc/effects.hpp"
#include "sdmc/estimator.hpp"

namespace sdmc {

namespace detail {

inline std::string fixed4(double v) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// "estimate (t)" with four decimals.
inline std::string cell(double estimate, double t) { return fixed4(estimate) + " (" + fixed4(t) + ")"; }

inline std::string render_grid(const std::vector<std::vector<std::string>>& grid) {
  std::vector<std::size_t> width;
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream out;
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string s = row[c];
      if (c + 1 < row.size()) s.resize(width[c] + 2, ' ');
      line += s;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

}  // namespace detail

/// Coefficient table: direct coefficients, dummies and spatial parameters on
/// the first row, then one row of lag coefficients per cluster (or a single
/// "W" row for SDM). Each cell reads "estimate (t)".
inline std::string render_fit_table(const FitResult& f) {
  const Index k = static_cast<Index>(f.variable_names.size());
  std::vector<std::string> spatial;
  for (const auto& label : f.parameter_labels)
    if (label == "rho" || label == "lambda" || label == "theta") spatial.push_back(label);

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"", ""};
  for (const auto& v : f.variable_names) header.push_back(v);
  for (const auto& d : f.dummy_names) header.push_back(d);
  for (const auto& s : spatial) header.push_back(s);
  grid.push_back(header);

  auto param_cell = [&](const std::string& label) {
    const auto idx = f.parameter_index(label);
    return idx ? detail::cell(f.parameters(*idx), f.t_stats(*idx)) : std::string("-");
  };
  std::vector<std::string> direct{"", ""};
  for (const auto& v : f.variable_names) direct.push_back(param_cell(v));
  for (const auto& d : f.dummy_names) direct.push_back(param_cell(d));
  for (const auto& s : spatial) direct.push_back(param_cell(s));
  grid.push_back(direct);

  auto lag_row = [&](const std::string& a, const std::string& b, Index cluster) {
    std::vector<std::string> row{a, b};
    for (Index v = 0; v < k; ++v) {
      const auto c = f.lag_coefficient(cluster, v);
      row.push_back(c ? detail::cell(f.parameters(*c), f.t_stats(*c)) : std::string("-"));
    }
    grid.push_back(row);
  };
  if (f.family == Family::sdm) lag_row("W", "", -1);
  if (f.family == Family::sdm_c)
    for (std::size_t c = 0; c < f.clusters.size(); ++c) lag_row("Cluster", f.clusters[c].sector_id, static_cast<Index>(c));

  std::ostringstream out;
  out << "Estimation output (" << to_string(f.family) << ", N=" << f.n << ", T=" << f.t << ")\n\n";
  out << detail::render_grid(grid) << '\n';
  out << "R2        " << detail::fixed4(f.r2) << '\n';
  out << "Adj. R2   " << detail::fixed4(f.adj_r2) << '\n';
  out << "sigma2    " << detail::fixed4(f.sigma2) << '\n';
  out << "Log-lik.  " << detail::fixed4(f.loglik) << '\n';
  for (const auto& d : f.diagnostics) out << "note: " << d << '\n';
  return out.str();
}

/// Summary-measure table: one row per (cluster, variable) with direct,
/// indirect and total columns, t-statistics in parentheses.
inline std::string render_effects_table(const EffectsTable& t) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Cluster", "Variable", "direct", "indirect", "total"});
  for (const auto& r : t.rows)
    grid.push_back({r.cluster.empty() ? "-" : r.cluster, r.variable, detail::cell(r.point.direct, r.t.direct),
                    detail::cell(r.point.indirect, r.t.indirect), detail::cell(r.point.total, r.t.total)});
  std::ostringstream out;
  out << "Summary measures (" << to_string(t.mode) << ", " << t.draws << " draws, seed " << t.seed << ")\n\n";
  out << detail::render_grid(grid);
  return out.str();
}

inline std::string render_recovery(const RecoveryReport& r) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"parameter", "truth", "mean", "bias", "rmse", "coverage"});
  for (const auto& p : r.parameters)
    grid.push_back({p.name, detail::fixed4(p.truth), detail::fixed4(p.mean), detail::fixed4(p.bias),
                    detail::fixed4(p.rmse), detail::fixed4(p.coverage)});
  std::ostringstream out;
  out << "Recovery (" << to_string(r.generating_family) << " data, " << to_string(r.fitted_family) << " fit, "
      << r.replications << " replications, " << r.failures << " failed)\n\n";
  out << detail::render_grid(grid);
  return out.str();
}

}  // namespace sdmc
