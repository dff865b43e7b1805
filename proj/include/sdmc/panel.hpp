#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/linalg.hpp"

namespace sdmc {

/// Balanced N x T panel. Observations are stored period-major: the row of
/// region i in period t is t * N + i, so each period is a contiguous
/// cross-section.
class RegionPanel {
 public:
  RegionPanel() = default;

  RegionPanel(std::vector<std::string> region_ids, std::vector<std::string> period_labels,
              std::string dependent_name, Eigen::VectorXd y,
              std::vector<std::string> variable_names, Eigen::MatrixXd x,
              std::vector<bool> log_transformed = {}, bool dependent_log = false)
      : region_ids_(std::move(region_ids)),
        period_labels_(std::move(period_labels)),
        dependent_name_(std::move(dependent_name)),
        y_(std::move(y)),
        variable_names_(std::move(variable_names)),
        x_(std::move(x)),
        log_transformed_(std::move(log_transformed)),
        dependent_log_(dependent_log) {
    const Index nt = n() * t();
    if (n() == 0 || t() == 0)
      fail(ErrorKind::InvalidArgument, "panel needs at least one region and one period");
    if (y_.size() != nt || x_.rows() != nt)
      fail(ErrorKind::UnbalancedPanel,
           "panel must hold exactly one observation per (region, period): expected " +
               std::to_string(nt) + " rows");
    if (static_cast<Index>(variable_names_.size()) != x_.cols())
      fail(ErrorKind::DimensionMismatch, "variable name count does not match regressor columns");
    if (log_transformed_.empty()) log_transformed_.assign(variable_names_.size(), false);
    if (log_transformed_.size() != variable_names_.size())
      fail(ErrorKind::DimensionMismatch, "log flag count does not match regressor columns");
    std::unordered_set<std::string> seen;
    for (const auto& id : region_ids_)
      if (!seen.insert(id).second) fail(ErrorKind::UnbalancedPanel, "duplicate region '" + id + "'");
    seen.clear();
    for (const auto& p : period_labels_)
      if (!seen.insert(p).second) fail(ErrorKind::UnbalancedPanel, "duplicate period '" + p + "'");
    seen.clear();
    for (const auto& v : variable_names_)
      if (!seen.insert(v).second) fail(ErrorKind::InvalidArgument, "duplicate variable '" + v + "'");
    if (!y_.allFinite() || !x_.allFinite())
      fail(ErrorKind::NonFiniteValue, "panel contains missing or non-finite values");
  }

  Index n() const { return static_cast<Index>(region_ids_.size()); }
  Index t() const { return static_cast<Index>(period_labels_.size()); }
  Index k() const { return x_.cols(); }
  Index observations() const { return y_.size(); }
  Index row(Index region, Index period) const { return period * n() + region; }

  const std::vector<std::string>& region_ids() const { return region_ids_; }
  const std::vector<std::string>& period_labels() const { return period_labels_; }
  const std::string& dependent_name() const { return dependent_name_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<std::string>& variable_names() const { return variable_names_; }
  const std::vector<bool>& log_transformed() const { return log_transformed_; }
  bool dependent_log() const { return dependent_log_; }

  Index variable_index(const std::string& name) const {
    for (std::size_t j = 0; j < variable_names_.size(); ++j)
      if (variable_names_[j] == name) return static_cast<Index>(j);
    fail(ErrorKind::UnknownVariable, "unknown variable '" + name + "'");
  }

  /// Same layout and labels with replaced values.
  RegionPanel with_values(Eigen::VectorXd y, Eigen::MatrixXd x) const {
    return RegionPanel(region_ids_, period_labels_, dependent_name_, std::move(y),
                       variable_names_, std::move(x), log_transformed_, dependent_log_);
  }

 private:
  std::vector<std::string> region_ids_;
  std::vector<std::string> period_labels_;
  std::string dependent_name_;
  Eigen::VectorXd y_;
  std::vector<std::string> variable_names_;
  Eigen::MatrixXd x_;
  std::vector<bool> log_transformed_;
  bool dependent_log_ = false;
};

/// Per-region time means of a period-major stacked matrix (n rows result).
/// Accumulated as offsets from the first period, so a column that is
/// constant within a region has that constant as its exact mean.
inline Eigen::MatrixXd region_means(const Eigen::MatrixXd& m, Index n) {
  const Index t = m.rows() / n;
  const Eigen::MatrixXd first = m.topRows(n);
  Eigen::MatrixXd offset = Eigen::MatrixXd::Zero(n, m.cols());
  for (Index p = 1; p < t; ++p) offset += m.middleRows(p * n, n) - first;
  return first + offset / static_cast<double>(t);
}

/// Subtracts each region's time mean from every column.
inline Eigen::MatrixXd demean_by_region(const Eigen::MatrixXd& m, Index n) {
  if (n <= 0 || m.rows() % n != 0)
    fail(ErrorKind::DimensionMismatch, "row count is not a multiple of the region count");
  const Eigen::MatrixXd means = region_means(m, n);
  Eigen::MatrixXd out = m;
  for (Index p = 0; p < m.rows() / n; ++p) out.middleRows(p * n, n) -= means;
  return out;
}

inline Eigen::VectorXd demean_by_region(const Eigen::VectorXd& v, Index n) {
  return demean_by_region(Eigen::MatrixXd(v), n).col(0);
}

inline RegionPanel within_transform(const RegionPanel& p) {
  return p.with_values(demean_by_region(p.y(), p.n()), demean_by_region(p.x(), p.n()));
}

struct OlsResult {
  std::vector<std::string> names;
  Eigen::VectorXd coefficients;
  double sigma2 = 0.0;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd residuals;
  Index dof = 0;
  /// Regressors removed because they carry no within-region variation.
  std::vector<std::string> dropped;
  /// Recovered region effects (fixed-effects fits only).
  Eigen::VectorXd fixed_effects;
  /// Quasi-demeaning weight (random-effects fits only).
  double theta = 0.0;
  double sigma2_alpha = 0.0;
  std::vector<std::string> diagnostics;

  std::optional<Index> index_of(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<Index>(j);
    return std::nullopt;
  }
};

namespace detail {

inline OlsResult finish_ols(std::vector<std::string> names, LeastSquares ls, Index dof) {
  OlsResult r;
  r.names = std::move(names);
  r.coefficients = std::move(ls.coefficients);
  r.residuals = std::move(ls.residuals);
  r.dof = dof;
  r.sigma2 = dof > 0 ? r.residuals.squaredNorm() / static_cast<double>(dof) : 0.0;
  r.covariance = r.sigma2 * ls.xtx_inverse;
  r.std_errors = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.t_stats = r.coefficients.cwiseQuotient(r.std_errors);
  return r;
}

inline std::vector<std::string> default_names(Index k) {
  std::vector<std::string> out;
  for (Index j = 0; j < k; ++j) out.push_back("x" + std::to_string(j + 1));
  return out;
}

}  // namespace detail

/// Ordinary least squares of y on X as given (no intercept is added).
/// sigma^2 = RSS / (rows - K).
inline OlsResult pooled_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            std::vector<std::string> names = {}) {
  if (names.empty()) names = detail::default_names(x.cols());
  auto ls = least_squares(x, y, names);
  return detail::finish_ols(std::move(names), std::move(ls), x.rows() - x.cols());
}

/// Within (fixed-effects) estimator. Regressors that are constant over time
/// within every region vanish under the within transformation and are dropped.
inline OlsResult fe_estimate(const RegionPanel& p) {
  const Eigen::VectorXd yw = demean_by_region(p.y(), p.n());
  const Eigen::MatrixXd xw = demean_by_region(p.x(), p.n());
  std::vector<Index> keep;
  std::vector<std::string> names, dropped;
  for (Index j = 0; j < p.k(); ++j) {
    const double scale = std::max(1.0, p.x().col(j).cwiseAbs().maxCoeff());
    if (xw.col(j).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      dropped.push_back(p.variable_names()[j]);
    } else {
      keep.push_back(j);
      names.push_back(p.variable_names()[j]);
    }
  }
  if (keep.empty())
    fail(ErrorKind::AllVariablesTimeInvariant,
         "every regressor is time-invariant and is eliminated by the within transformation");
  Eigen::MatrixXd xk(xw.rows(), static_cast<Index>(keep.size()));
  Eigen::MatrixXd xraw(xw.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    xk.col(j) = xw.col(keep[j]);
    xraw.col(j) = p.x().col(keep[j]);
  }
  auto ls = least_squares(xk, yw, names);
  const Index dof = p.observations() - p.n() - xk.cols();
  OlsResult r = detail::finish_ols(std::move(names), std::move(ls), dof);
  r.dropped = std::move(dropped);
  for (const auto& d : r.dropped) r.diagnostics.push_back("dropped time-invariant regressor '" + d + "'");
  const Eigen::VectorXd ybar = region_means(Eigen::MatrixXd(p.y()), p.n()).col(0);
  const Eigen::MatrixXd xbar = region_means(xraw, p.n());
  r.fixed_effects = ybar - xbar * r.coefficients;
  return r;
}

/// Feasible GLS random-effects estimator with Swamy-Arora variance
/// components. Adds an intercept named "(intercept)".
inline OlsResult re_estimate(const RegionPanel& p) {
  const Index n = p.n(), t = p.t(), k = p.k();
  const OlsResult within = fe_estimate(p);
  const double s2e = within.sigma2;

  const Eigen::MatrixXd ybar = region_means(Eigen::MatrixXd(p.y()), n);
  const Eigen::MatrixXd xbar = region_means(p.x(), n);
  Eigen::MatrixXd zb(n, k + 1);
  zb.col(0).setOnes();
  zb.rightCols(k) = xbar;
  std::vector<std::string> names{"(intercept)"};
  for (const auto& v : p.variable_names()) names.push_back(v);
  if (n <= k + 1)
    fail(ErrorKind::RankDeficient, "between regression needs more regions than coefficients");
  const auto between = least_squares(zb, ybar.col(0), names);
  const double s2b = between.residuals.squaredNorm() / static_cast<double>(n - k - 1);
  double s2a = s2b - s2e / static_cast<double>(t);

  std::vector<std::string> diagnostics;
  if (s2a < 0.0) {
    diagnostics.push_back("NegativeVarianceComponent: estimated region variance " +
                          std::to_string(s2a) + " clamped to 0");
    s2a = 0.0;
  }
  const double theta = 1.0 - std::sqrt(s2e / (static_cast<double>(t) * s2a + s2e));

  Eigen::MatrixXd z(p.observations(), k + 1);
  Eigen::VectorXd ys(p.observations());
  for (Index per = 0; per < t; ++per) {
    z.block(per * n, 0, n, 1).setConstant(1.0 - theta);
    z.block(per * n, 1, n, k) = p.x().middleRows(per * n, n) - theta * xbar;
    ys.segment(per * n, n) = p.y().segment(per * n, n) - theta * ybar.col(0);
  }
  auto ls = least_squares(z, ys, names);
  OlsResult r = detail::finish_ols(std::move(names), std::move(ls), p.observations() - k - 1);
  // GLS covariance uses the idiosyncratic variance component
  if (r.sigma2 > 0.0) r.covariance *= s2e / r.sigma2;
  r.sigma2 = s2e;
  r.std_errors = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.t_stats = r.coefficients.cwiseQuotient(r.std_errors);
  r.theta = theta;
  r.sigma2_alpha = s2a;
  r.diagnostics = std::move(diagnostics);
  return r;
}

}  // namespace sdmc
