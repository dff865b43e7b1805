#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/linalg.hpp"
#include "sdmc/panel.hpp"
#include "sdmc/weights.hpp"

namespace sdmc {

enum class Family { sar, sem, sac, sdm, sdm_c };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::sar: return "sar";
    case Family::sem: return "sem";
    case Family::sac: return "sac";
    case Family::sdm: return "sdm";
    case Family::sdm_c: return "sdm-c";
  }
  return "unknown";
}

inline Family family_from_string(const std::string& s) {
  if (s == "sar") return Family::sar;
  if (s == "sem") return Family::sem;
  if (s == "sac") return Family::sac;
  if (s == "sdm") return Family::sdm;
  if (s == "sdm-c" || s == "sdmc") return Family::sdm_c;
  fail(ErrorKind::InvalidArgument, "unknown model family '" + s + "'");
}

/// 0/1 indicator of one period, entered directly and never spatially lagged.
struct PeriodDummy {
  std::string name;
  std::string period_label;
};

struct ModelSpec {
  Family family = Family::sdm;
  /// Regressors that receive a spatial lag (SDM, SDM-C). Unset means all;
  /// an empty list constrains every lag coefficient to zero.
  std::optional<std::vector<std::string>> lagged_variables;
  std::vector<ClusterIndicator> clusters;
  MaskConvention mask = MaskConvention::source;
  std::vector<PeriodDummy> dummies;
  /// SAC: hold the error coefficient at this value instead of estimating it.
  std::optional<double> fixed_theta;
  /// SAC: weight matrix of the error process; defaults to the lag matrix.
  std::optional<WeightMatrix> error_weights;
};

/// One spatially lagged regressor column: cluster index (-1 when unmasked)
/// and panel variable index.
struct LagTerm {
  Index cluster = -1;
  Index variable = 0;
};

/// Regressor layout: direct X, then one lag column per (cluster, lagged
/// variable) with clusters outermost, then dummies.
struct DesignMatrix {
  Eigen::MatrixXd columns;
  std::vector<std::string> labels;
  Index direct_count = 0;
  std::vector<LagTerm> lag_terms;
  Index dummy_count = 0;
};

/// W applied to each period's cross-section of a period-major stack.
inline Eigen::MatrixXd spatial_lag(const Eigen::MatrixXd& w, const Eigen::MatrixXd& stacked) {
  const Index n = w.rows();
  if (n == 0 || stacked.rows() % n != 0)
    fail(ErrorKind::DimensionMismatch, "stacked rows are not a multiple of the weight dimension");
  Eigen::MatrixXd out(stacked.rows(), stacked.cols());
  for (Index p = 0; p < stacked.rows() / n; ++p)
    out.middleRows(p * n, n).noalias() = w * stacked.middleRows(p * n, n);
  return out;
}

inline Eigen::VectorXd spatial_lag(const Eigen::MatrixXd& w, const Eigen::VectorXd& stacked) {
  return spatial_lag(w, Eigen::MatrixXd(stacked)).col(0);
}

namespace detail {

inline std::vector<Index> lagged_indices(const RegionPanel& p, const ModelSpec& spec) {
  std::vector<Index> out;
  if (spec.family != Family::sdm && spec.family != Family::sdm_c) return out;
  if (!spec.lagged_variables) {
    for (Index j = 0; j < p.k(); ++j) out.push_back(j);
    return out;
  }
  for (const auto& name : *spec.lagged_variables) out.push_back(p.variable_index(name));
  return out;
}

}  // namespace detail

inline DesignMatrix build_design(const RegionPanel& p, const WeightMatrix& w, const ModelSpec& spec) {
  if (w.size() != p.n())
    fail(ErrorKind::DimensionMismatch, "weight matrix is " + std::to_string(w.size()) +
                                           " x " + std::to_string(w.size()) + " but panel has " +
                                           std::to_string(p.n()) + " regions");
  if (spec.family == Family::sdm_c && spec.clusters.empty())
    fail(ErrorKind::ConfigError, "SDM-C requires at least one cluster indicator");
  for (const auto& c : spec.clusters)
    if (c.membership.size() != p.n())
      fail(ErrorKind::DimensionMismatch, "cluster '" + c.sector_id + "' does not cover all " +
                                             std::to_string(p.n()) + " regions");

  const auto lagged = detail::lagged_indices(p, spec);
  std::vector<Eigen::MatrixXd> lag_matrices;
  std::vector<std::string> lag_names;
  if (spec.family == Family::sdm) {
    lag_matrices.push_back(w.matrix());
    lag_names.push_back("");
  } else if (spec.family == Family::sdm_c) {
    for (const auto& c : spec.clusters) {
      lag_matrices.push_back(cluster_mask_matrix(w.matrix(), c, spec.mask));
      lag_names.push_back(c.sector_id);
    }
  }

  std::vector<Index> dummy_period;
  for (const auto& d : spec.dummies) {
    const auto& labels = p.period_labels();
    auto it = std::find(labels.begin(), labels.end(), d.period_label);
    if (it == labels.end())
      fail(ErrorKind::UnknownVariable, "dummy '" + d.name + "' refers to unknown period '" +
                                           d.period_label + "'");
    dummy_period.push_back(static_cast<Index>(it - labels.begin()));
  }

  DesignMatrix dm;
  dm.direct_count = p.k();
  dm.dummy_count = static_cast<Index>(spec.dummies.size());
  const Index cols = p.k() + static_cast<Index>(lag_matrices.size() * lagged.size()) + dm.dummy_count;
  dm.columns.resize(p.observations(), cols);
  dm.columns.leftCols(p.k()) = p.x();
  dm.labels = p.variable_names();
  Index col = p.k();
  for (std::size_t c = 0; c < lag_matrices.size(); ++c) {
    for (Index v : lagged) {
      dm.columns.col(col) = spatial_lag(lag_matrices[c], Eigen::VectorXd(p.x().col(v)));
      const auto& var = p.variable_names()[v];
      dm.labels.push_back(lag_names[c].empty() ? "lag:" + var : "lag[" + lag_names[c] + "]:" + var);
      dm.lag_terms.push_back({spec.family == Family::sdm ? Index{-1} : static_cast<Index>(c), v});
      ++col;
    }
  }
  for (std::size_t d = 0; d < spec.dummies.size(); ++d) {
    auto column = dm.columns.col(col);
    column.setZero();
    column.segment(dummy_period[d] * p.n(), p.n()).setOnes();
    dm.labels.push_back(spec.dummies[d].name);
    ++col;
  }
  return dm;
}

/// log|det(I - rho W)| = sum_i log|1 - rho lambda_i|.
inline double log_det_factor(double rho, const Spectrum& s) {
  if (!s.admissible(rho))
    fail(ErrorKind::RhoOutOfBounds, "rho = " + std::to_string(rho) + " outside (" +
                                        std::to_string(s.rho_lower) + ", " +
                                        std::to_string(s.rho_upper) + ")");
  double acc = 0.0;
  for (const auto& l : s.eigenvalues) acc += std::log(std::abs(1.0 - rho * l));
  return acc;
}

inline double log_det_factor(double rho, const WeightMatrix& w) {
  return log_det_factor(rho, spectrum(w));
}

namespace detail {

inline double log_det_d1(double rho, const Spectrum& s) {
  double acc = 0.0;
  for (const auto& l : s.eigenvalues) acc += (-l / (1.0 - rho * l)).real();
  return acc;
}

inline double log_det_d2(double rho, const Spectrum& s) {
  double acc = 0.0;
  for (const auto& l : s.eigenvalues) {
    const auto q = l / (1.0 - rho * l);
    acc -= (q * q).real();
  }
  return acc;
}

inline double gaussian_profile(double rss, Index nt) {
  const double n = static_cast<double>(nt);
  const double s2 = std::max(rss / n, std::numeric_limits<double>::min());
  return -0.5 * n * (std::log(2.0 * std::numbers::pi) + 1.0) - 0.5 * n * std::log(s2);
}

}  // namespace detail

/// Profile log-likelihood of the spatial lag model at rho: regress
/// (yt - rho * Wyt) on Z, set sigma^2 = RSS / NT, and add T log-determinants.
inline double concentrated_loglik(double rho, const Eigen::VectorXd& yt, const Eigen::VectorXd& wyt,
                                  const Eigen::MatrixXd& z, const Spectrum& s) {
  const Index n = static_cast<Index>(s.eigenvalues.size());
  if (n == 0 || yt.size() % n != 0)
    fail(ErrorKind::DimensionMismatch, "observation count is not a multiple of the region count");
  const double logdet = log_det_factor(rho, s);
  const Eigen::VectorXd target = yt - rho * wyt;
  const auto ls = least_squares(z, target);
  const Index t = yt.size() / n;
  return detail::gaussian_profile(ls.residuals.squaredNorm(), yt.size()) +
         static_cast<double>(t) * logdet;
}

inline double concentrated_loglik(double rho, const Eigen::VectorXd& yt, const Eigen::VectorXd& wyt,
                                  const Eigen::MatrixXd& z, const WeightMatrix& w) {
  return concentrated_loglik(rho, yt, wyt, z, spectrum(w));
}

struct FitResult {
  Family family = Family::sdm;
  Index n = 0;
  Index t = 0;
  std::vector<std::string> variable_names;
  std::vector<std::string> lagged_variables;
  std::vector<LagTerm> lag_terms;
  std::vector<std::string> dummy_names;
  /// Regression coefficients in design order (direct, lags, dummies).
  std::vector<std::string> coefficient_labels;
  Eigen::VectorXd coefficients;
  /// Spatial lag coefficient; for SEM the error autoregressive coefficient.
  double rho = 0.0;
  /// SAC error coefficient.
  std::optional<double> theta;
  double sigma2 = 0.0;
  double loglik = 0.0;
  /// Covariance over parameter_labels: coefficients, rho, [theta], sigma2.
  std::vector<std::string> parameter_labels;
  Eigen::VectorXd parameters;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd t_stats;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  Eigen::VectorXd alpha;
  std::pair<double, double> rho_bounds{-1.0, 1.0};
  std::string sign_convention = "y = (I - rho W)^{-1} (alpha + X beta + W_lag X gamma + e)";
  WeightMatrix weights;
  std::vector<ClusterIndicator> clusters;
  MaskConvention mask = MaskConvention::source;
  std::vector<std::string> diagnostics;

  std::optional<Index> parameter_index(const std::string& label) const {
    for (std::size_t i = 0; i < parameter_labels.size(); ++i)
      if (parameter_labels[i] == label) return static_cast<Index>(i);
    return std::nullopt;
  }

  Index rho_index() const { return coefficients.size(); }

  Index variable_index(const std::string& name) const {
    for (std::size_t j = 0; j < variable_names.size(); ++j)
      if (variable_names[j] == name) return static_cast<Index>(j);
    fail(ErrorKind::UnknownVariable, "unknown variable '" + name + "'");
  }

  Index cluster_index(const std::string& sector) const {
    for (std::size_t c = 0; c < clusters.size(); ++c)
      if (clusters[c].sector_id == sector) return static_cast<Index>(c);
    fail(ErrorKind::UnknownCluster, "unknown cluster '" + sector + "'");
  }

  /// Coefficient position of the lag term for (cluster, variable), if any.
  std::optional<Index> lag_coefficient(Index cluster, Index variable) const {
    for (std::size_t i = 0; i < lag_terms.size(); ++i)
      if (lag_terms[i].cluster == cluster && lag_terms[i].variable == variable)
        return static_cast<Index>(variable_names.size() + i);
    return std::nullopt;
  }
};

/// Within-transformed pieces of a spatial lag problem.
struct LagProblem {
  DesignMatrix design;
  Eigen::VectorXd wy;
  Eigen::VectorXd yt;
  Eigen::VectorXd wyt;
  Eigen::MatrixXd zt;
  Spectrum spec;
};

inline LagProblem prepare_lag_problem(const RegionPanel& p, const WeightMatrix& w,
                                      const ModelSpec& spec) {
  LagProblem lp;
  lp.design = build_design(p, w, spec);
  lp.wy = spatial_lag(w.matrix(), p.y());
  lp.yt = demean_by_region(p.y(), p.n());
  lp.wyt = demean_by_region(lp.wy, p.n());
  lp.zt = demean_by_region(lp.design.columns, p.n());
  lp.spec = spectrum(w);
  return lp;
}

namespace detail {

/// Maximises f over the open interval by a coarse grid followed by Brent's
/// method on the bracket around the best grid point. Ties on the grid go to
/// the smaller |x|.
template <typename F>
double maximize_on_interval(F&& f, double lower, double upper, double* best_value = nullptr) {
  constexpr int kGrid = 50;
  const double width = upper - lower;
  std::vector<double> xs(kGrid), fs(kGrid);
  int best = 0;
  for (int k = 0; k < kGrid; ++k) {
    xs[k] = lower + width * (k + 1) / (kGrid + 1);
    fs[k] = f(xs[k]);
    if (fs[k] > fs[best] || (fs[k] == fs[best] && std::abs(xs[k]) < std::abs(xs[best]))) best = k;
  }
  const double margin = 1e-12 * width;
  const double a = best > 0 ? xs[best - 1] : lower + margin;
  const double b = best + 1 < kGrid ? xs[best + 1] : upper - margin;
  auto neg = [&](double x) { return -f(x); };
  auto res = boost::math::tools::brent_find_minima(neg, a, b, std::numeric_limits<double>::digits / 2);
  double x = res.first, v = -res.second;
  if (fs[best] > v) {
    x = xs[best];
    v = fs[best];
  }
  if (best_value) *best_value = v;
  return x;
}

/// N(T - 1): the within transformation uses up one period of information per
/// region, so sigma^2 and the information matrix are based on this count.
inline double effective_observations(const RegionPanel& p) {
  if (p.t() < 2) fail(ErrorKind::InvalidArgument, "fixed-effects fits need at least two periods");
  return static_cast<double>(p.n() * (p.t() - 1));
}

inline void check_interior(double rho, double lower, double upper, const std::string& name) {
  const double tol = 1e-6 * (upper - lower);
  if (rho - lower < tol || upper - rho < tol)
    fail(ErrorKind::RhoOnBoundary, name + " estimate " + std::to_string(rho) +
                                       " lies on the edge of the admissible interval (" +
                                       std::to_string(lower) + ", " + std::to_string(upper) + ")");
}

inline void finish_covariance(FitResult& r, const Eigen::MatrixXd& hessian) {
  const Index k = hessian.rows();
  Eigen::MatrixXd info = -0.5 * (hessian + hessian.transpose());
  if (!(r.sigma2 > 0.0) || !info.allFinite()) {
    r.covariance = Eigen::MatrixXd::Zero(k, k);
    r.diagnostics.push_back("exact fit: covariance and standard errors unavailable");
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
      r.covariance = llt.solve(Eigen::MatrixXd::Identity(k, k));
    } else {
      r.diagnostics.push_back("information matrix not positive definite; using pseudo-inverse");
      r.covariance = psd_pseudo_inverse(info);
    }
    r.covariance = 0.5 * (r.covariance + r.covariance.transpose());
  }
  r.std_errors = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.t_stats = r.parameters.cwiseQuotient(r.std_errors);
}

inline void fill_common(FitResult& r, const RegionPanel& p, const WeightMatrix& w,
                        const ModelSpec& spec, const DesignMatrix& dm, const Spectrum& s) {
  r.family = spec.family;
  r.n = p.n();
  r.t = p.t();
  r.variable_names = p.variable_names();
  for (Index v : lagged_indices(p, spec)) r.lagged_variables.push_back(p.variable_names()[v]);
  r.lag_terms = dm.lag_terms;
  for (const auto& d : spec.dummies) r.dummy_names.push_back(d.name);
  r.coefficient_labels = dm.labels;
  r.rho_bounds = {s.rho_lower, s.rho_upper};
  r.weights = w;
  if (spec.family == Family::sdm_c) r.clusters = spec.clusters;
  r.mask = spec.mask;
}

inline void fill_fit_stats(FitResult& r, double rss, const Eigen::VectorXd& yt) {
  const double nt = static_cast<double>(yt.size());
  const double tss = yt.squaredNorm();
  r.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  const double dof = nt - static_cast<double>(r.n) - static_cast<double>(r.parameters.size() - 1);
  r.adj_r2 = dof > 0.0 ? 1.0 - (1.0 - r.r2) * (nt - 1.0) / dof : r.r2;
}

/// SAR, SDM and SDM-C share one estimator: y enters through (I - rho W),
/// regressors through the design.
inline FitResult fit_lag_model(const RegionPanel& p, const WeightMatrix& w, const ModelSpec& spec) {
  LagProblem lp = prepare_lag_problem(p, w, spec);
  const Index nt = p.observations(), t = p.t();
  const QrSolver qr(lp.zt, lp.design.labels);
  const Eigen::VectorXd b0 = qr.solve(lp.yt), bl = qr.solve(lp.wyt);
  const Eigen::VectorXd e0 = lp.yt - lp.zt * b0, el = lp.wyt - lp.zt * bl;
  const double e0e0 = e0.squaredNorm(), e0el = e0.dot(el), elel = el.squaredNorm();
  const Spectrum& s = lp.spec;

  auto profile = [&](double rho) {
    const double rss = std::max(0.0, e0e0 - 2.0 * rho * e0el + rho * rho * elel);
    return gaussian_profile(rss, nt) + static_cast<double>(t) * log_det_factor(rho, s);
  };
  const double rho = maximize_on_interval(profile, s.rho_lower, s.rho_upper);
  check_interior(rho, s.rho_lower, s.rho_upper, "rho");

  FitResult r;
  fill_common(r, p, w, spec, lp.design, s);
  r.rho = rho;
  r.coefficients = b0 - rho * bl;
  const Eigen::VectorXd e = lp.yt - rho * lp.wyt - lp.zt * r.coefficients;
  const double rss = e.squaredNorm();
  const double nobs = effective_observations(p), teff = static_cast<double>(t - 1);
  r.sigma2 = rss / nobs;
  r.loglik = profile(rho);

  const Index k = r.coefficients.size();
  r.parameter_labels = r.coefficient_labels;
  r.parameter_labels.push_back("rho");
  r.parameter_labels.push_back("sigma2");
  r.parameters.resize(k + 2);
  r.parameters << r.coefficients, rho, r.sigma2;

  const double s2 = r.sigma2, s4 = s2 * s2;
  Eigen::MatrixXd h(k + 2, k + 2);
  h.topLeftCorner(k, k) = -lp.zt.transpose() * lp.zt / s2;
  h.block(0, k, k, 1) = -lp.zt.transpose() * lp.wyt / s2;
  h.block(0, k + 1, k, 1) = -lp.zt.transpose() * e / s4;
  h(k, k) = teff * log_det_d2(rho, s) - lp.wyt.squaredNorm() / s2;
  h(k, k + 1) = -lp.wyt.dot(e) / s4;
  h(k + 1, k + 1) = nobs / (2.0 * s4) - rss / (s4 * s2);
  h.bottomLeftCorner(2, k + 2) = h.topRightCorner(k + 2, 2).transpose();
  finish_covariance(r, h);
  fill_fit_stats(r, rss, lp.yt);

  const Eigen::VectorXd raw = p.y() - rho * lp.wy - lp.design.columns * r.coefficients;
  r.alpha = region_means(Eigen::MatrixXd(raw), p.n()).col(0);
  return r;
}

inline FitResult fit_error_model(const RegionPanel& p, const WeightMatrix& w, const ModelSpec& spec) {
  const DesignMatrix dm = build_design(p, w, spec);
  const Index nt = p.observations(), t = p.t();
  const Eigen::VectorXd yt = demean_by_region(p.y(), p.n());
  const Eigen::MatrixXd zt = demean_by_region(dm.columns, p.n());
  const Eigen::VectorXd wyt = spatial_lag(w.matrix(), yt);
  const Eigen::MatrixXd wzt = spatial_lag(w.matrix(), zt);
  const Spectrum s = spectrum(w);
  QrSolver(zt, dm.labels);

  auto regress = [&](double lambda) {
    return least_squares(zt - lambda * wzt, yt - lambda * wyt, dm.labels);
  };
  auto profile = [&](double lambda) {
    return gaussian_profile(regress(lambda).residuals.squaredNorm(), nt) +
           static_cast<double>(t) * log_det_factor(lambda, s);
  };
  const double lambda = maximize_on_interval(profile, s.rho_lower, s.rho_upper);
  check_interior(lambda, s.rho_lower, s.rho_upper, "lambda");

  FitResult r;
  fill_common(r, p, w, spec, dm, s);
  r.sign_convention = "u = (I - lambda W)^{-1} e";
  r.rho = lambda;
  const auto ls = regress(lambda);
  r.coefficients = ls.coefficients;
  const Eigen::VectorXd& e = ls.residuals;
  const double rss = e.squaredNorm();
  const double nobs = effective_observations(p), teff = static_cast<double>(t - 1);
  r.sigma2 = rss / nobs;
  r.loglik = profile(lambda);

  const Index k = r.coefficients.size();
  r.parameter_labels = r.coefficient_labels;
  r.parameter_labels.push_back("lambda");
  r.parameter_labels.push_back("sigma2");
  r.parameters.resize(k + 2);
  r.parameters << r.coefficients, lambda, r.sigma2;

  const Eigen::VectorXd u = yt - zt * r.coefficients;
  const Eigen::VectorXd wu = spatial_lag(w.matrix(), u);
  const Eigen::MatrixXd zs = zt - lambda * wzt;
  const double s2 = r.sigma2, s4 = s2 * s2;
  Eigen::MatrixXd h(k + 2, k + 2);
  h.topLeftCorner(k, k) = -zs.transpose() * zs / s2;
  h.block(0, k, k, 1) = -(wzt.transpose() * e + zs.transpose() * wu) / s2;
  h.block(0, k + 1, k, 1) = -zs.transpose() * e / s4;
  h(k, k) = teff * log_det_d2(lambda, s) - wu.squaredNorm() / s2;
  h(k, k + 1) = -wu.dot(e) / s4;
  h(k + 1, k + 1) = nobs / (2.0 * s4) - rss / (s4 * s2);
  h.bottomLeftCorner(2, k + 2) = h.topRightCorner(k + 2, 2).transpose();
  finish_covariance(r, h);
  fill_fit_stats(r, rss, yt);

  const Eigen::VectorXd raw = p.y() - dm.columns * r.coefficients;
  r.alpha = region_means(Eigen::MatrixXd(raw), p.n()).col(0);
  return r;
}

inline FitResult fit_combined_model(const RegionPanel& p, const WeightMatrix& w, const ModelSpec& spec) {
  const WeightMatrix& w2 = spec.error_weights ? *spec.error_weights : w;
  if (w2.size() != w.size())
    fail(ErrorKind::DimensionMismatch, "error weight matrix dimension differs from lag weights");
  const DesignMatrix dm = build_design(p, w, spec);
  const Index nt = p.observations(), t = p.t();
  const double td = static_cast<double>(t);
  const Eigen::VectorXd yt = demean_by_region(p.y(), p.n());
  const Eigen::VectorXd wy = spatial_lag(w.matrix(), p.y());
  const Eigen::VectorXd wyt = demean_by_region(wy, p.n());
  const Eigen::MatrixXd zt = demean_by_region(dm.columns, p.n());
  const Eigen::VectorXd w2yt = spatial_lag(w2.matrix(), yt), w2wyt = spatial_lag(w2.matrix(), wyt);
  const Eigen::MatrixXd w2zt = spatial_lag(w2.matrix(), zt);
  const Spectrum s1 = spectrum(w), s2 = spectrum(w2);
  QrSolver(zt, dm.labels);

  auto regress = [&](double rho, double theta) {
    const Eigen::VectorXd target = (yt - theta * w2yt) - rho * (wyt - theta * w2wyt);
    return least_squares(zt - theta * w2zt, target, dm.labels);
  };
  auto profile = [&](double rho, double theta) {
    return gaussian_profile(regress(rho, theta).residuals.squaredNorm(), nt) +
           td * log_det_factor(rho, s1) + td * log_det_factor(theta, s2);
  };

  double rho = 0.0;
  double theta = spec.fixed_theta.value_or(0.0);
  if (spec.fixed_theta && !s2.admissible(theta))
    fail(ErrorKind::RhoOutOfBounds, "fixed theta outside its admissible interval");
  for (int iter = 0; iter < 200; ++iter) {
    const double rho_new =
        maximize_on_interval([&](double r) { return profile(r, theta); }, s1.rho_lower, s1.rho_upper);
    double theta_new = theta;
    if (!spec.fixed_theta)
      theta_new = maximize_on_interval([&](double q) { return profile(rho_new, q); }, s2.rho_lower,
                                       s2.rho_upper);
    const bool done = std::abs(rho_new - rho) < 1e-9 && std::abs(theta_new - theta) < 1e-9;
    rho = rho_new;
    theta = theta_new;
    if (done || spec.fixed_theta) break;
  }
  check_interior(rho, s1.rho_lower, s1.rho_upper, "rho");
  if (!spec.fixed_theta) check_interior(theta, s2.rho_lower, s2.rho_upper, "theta");

  FitResult r;
  fill_common(r, p, w, spec, dm, s1);
  r.sign_convention = "y = (I - rho W)^{-1} (alpha + X beta + u), u = (I - theta W2)^{-1} e";
  r.rho = rho;
  r.theta = theta;
  const auto ls = regress(rho, theta);
  r.coefficients = ls.coefficients;
  const double rss = ls.residuals.squaredNorm();
  const double nobs = effective_observations(p), teff = td - 1.0;
  r.sigma2 = rss / nobs;
  r.loglik = profile(rho, theta);

  const Index k = r.coefficients.size();
  const bool free_theta = !spec.fixed_theta;
  const Index np = k + (free_theta ? 3 : 2);
  r.parameter_labels = r.coefficient_labels;
  r.parameter_labels.push_back("rho");
  if (free_theta) r.parameter_labels.push_back("theta");
  r.parameter_labels.push_back("sigma2");
  r.parameters.resize(np);
  r.parameters.head(k) = r.coefficients;
  r.parameters(k) = rho;
  if (free_theta) r.parameters(k + 1) = theta;
  r.parameters(np - 1) = r.sigma2;

  auto gradient = [&](const Eigen::VectorXd& par) {
    const Eigen::VectorXd b = par.head(k);
    const double rr = par(k), th = free_theta ? par(k + 1) : theta, sg = par(np - 1);
    const Eigen::VectorXd u = yt - rr * wyt - zt * b;
    const Eigen::VectorXd e = u - th * spatial_lag(w2.matrix(), u);
    Eigen::VectorXd g(np);
    g.head(k) = (zt - th * w2zt).transpose() * e / sg;
    g(k) = teff * detail::log_det_d1(rr, s1) + (wyt - th * w2wyt).dot(e) / sg;
    if (free_theta) g(k + 1) = teff * detail::log_det_d1(th, s2) + spatial_lag(w2.matrix(), u).dot(e) / sg;
    g(np - 1) = -nobs / (2.0 * sg) + e.squaredNorm() / (2.0 * sg * sg);
    return g;
  };
  Eigen::VectorXd steps(np);
  for (Index i = 0; i < np; ++i) steps(i) = 1e-5 * std::max(std::abs(r.parameters(i)), 1e-3);
  if (r.sigma2 > 0.0) steps(np - 1) = 1e-4 * r.sigma2;
  finish_covariance(r, r.sigma2 > 0.0 ? numerical_hessian(gradient, r.parameters, steps)
                                      : Eigen::MatrixXd::Zero(np, np));
  fill_fit_stats(r, rss, yt);

  const Eigen::VectorXd raw = p.y() - rho * wy - dm.columns * r.coefficients;
  r.alpha = region_means(Eigen::MatrixXd(raw), p.n()).col(0);
  return r;
}

}  // namespace detail

/// Fixed-effects quasi-maximum-likelihood fit of any supported family.
inline FitResult fit(const RegionPanel& p, const WeightMatrix& w, const ModelSpec& spec) {
  switch (spec.family) {
    case Family::sar:
    case Family::sdm:
    case Family::sdm_c:
      return detail::fit_lag_model(p, w, spec);
    case Family::sem:
      return detail::fit_error_model(p, w, spec);
    case Family::sac:
      return detail::fit_combined_model(p, w, spec);
  }
  fail(ErrorKind::InvalidArgument, "unsupported model family");
}

inline FitResult fit_sem(const RegionPanel& p, const WeightMatrix& w, ModelSpec spec) {
  spec.family = Family::sem;
  return fit(p, w, spec);
}

inline FitResult fit_sac(const RegionPanel& p, const WeightMatrix& w, ModelSpec spec) {
  spec.family = Family::sac;
  return fit(p, w, spec);
}

}  // namespace sdmc
