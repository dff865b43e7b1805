#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/estimator.hpp"
#include "sdmc/linalg.hpp"

namespace sdmc {

/// S_r(W) = (I - rho W)^{-1} (beta_r I + W_lag gamma_r): entry (i, j) is the
/// derivative of y_i with respect to x_jr.
struct ImpactMatrix {
  std::string variable;
  /// Cluster whose lag term is used; unset means every lag term of the
  /// variable (the unmasked W for SDM).
  std::optional<std::string> cluster;
  Eigen::MatrixXd entries;
};

struct SummaryMeasures {
  double direct = 0.0;
  double indirect = 0.0;
  double total = 0.0;
};

/// direct = tr(S)/n, indirect = (sum of all entries)/n - direct, and total
/// is formed as direct + indirect so the identity holds exactly.
inline SummaryMeasures summary_measures(const Eigen::MatrixXd& s) {
  const double n = static_cast<double>(s.rows());
  SummaryMeasures m;
  m.direct = s.trace() / n;
  m.indirect = s.sum() / n - m.direct;
  m.total = m.direct + m.indirect;
  return m;
}

inline SummaryMeasures summary_measures(const ImpactMatrix& s) { return summary_measures(s.entries); }

/// Builds a row from published direct and indirect values.
inline SummaryMeasures measures_from_components(double direct, double indirect) {
  return SummaryMeasures{direct, indirect, direct + indirect};
}

enum class EffectsMode { per_cluster, aggregate };

inline std::string to_string(EffectsMode m) {
  return m == EffectsMode::per_cluster ? "per-cluster" : "aggregate";
}

inline EffectsMode effects_mode_from_string(const std::string& s) {
  if (s == "per-cluster") return EffectsMode::per_cluster;
  if (s == "aggregate") return EffectsMode::aggregate;
  fail(ErrorKind::InvalidArgument, "unknown effects mode '" + s + "'");
}

namespace detail {

/// Coefficient positions needed to assemble S_r for one row, with lag terms
/// referring to entries of lag_matrices().
struct ImpactRecipe {
  Index variable = 0;
  Index beta = 0;
  std::vector<std::pair<Index, Index>> lags;  // (lag matrix id, coefficient index)
};

inline std::vector<Eigen::MatrixXd> lag_matrices(const FitResult& fit) {
  std::vector<Eigen::MatrixXd> out;
  if (fit.family == Family::sdm) {
    out.push_back(fit.weights.matrix());
  } else if (fit.family == Family::sdm_c) {
    for (const auto& c : fit.clusters) out.push_back(cluster_mask_matrix(fit.weights.matrix(), c, fit.mask));
  }
  return out;
}

inline ImpactRecipe impact_recipe(const FitResult& fit, Index variable, std::optional<Index> cluster) {
  ImpactRecipe r;
  r.variable = variable;
  r.beta = variable;
  for (std::size_t i = 0; i < fit.lag_terms.size(); ++i) {
    const auto& term = fit.lag_terms[i];
    if (term.variable != variable) continue;
    if (cluster && term.cluster != *cluster) continue;
    const Index matrix_id = term.cluster < 0 ? 0 : term.cluster;
    r.lags.emplace_back(matrix_id, static_cast<Index>(fit.variable_names.size() + i));
  }
  return r;
}

/// Lag parameter that multiplies W y in the reduced form.
inline double outcome_lag(const FitResult& fit, double rho) {
  return fit.family == Family::sem ? 0.0 : rho;
}

inline Eigen::MatrixXd impact_entries(const FitResult& fit, const ImpactRecipe& recipe,
                                      const std::vector<Eigen::MatrixXd>& lag_mats,
                                      const Eigen::VectorXd& coefficients, double rho) {
  const Index n = fit.weights.size();
  Eigen::MatrixXd b = coefficients(recipe.beta) * Eigen::MatrixXd::Identity(n, n);
  for (auto [m, c] : recipe.lags) b += coefficients(c) * lag_mats[m];
  const double lag = outcome_lag(fit, rho);
  if (lag == 0.0) return b;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - lag * fit.weights.matrix();
  return a.partialPivLu().solve(b);
}

}  // namespace detail

inline ImpactMatrix impact_matrix(const FitResult& fit, const std::string& variable,
                                  const std::optional<std::string>& cluster = std::nullopt) {
  const Index v = fit.variable_index(variable);
  std::optional<Index> c;
  if (cluster) {
    if (fit.family != Family::sdm_c)
      fail(ErrorKind::UnknownCluster, "cluster '" + *cluster + "' requested but the fit has no clusters");
    c = fit.cluster_index(*cluster);
  }
  const auto recipe = detail::impact_recipe(fit, v, c);
  ImpactMatrix out;
  out.variable = variable;
  out.cluster = cluster;
  out.entries = detail::impact_entries(fit, recipe, detail::lag_matrices(fit), fit.coefficients, fit.rho);
  return out;
}

/// Average own-derivative in excess of the direct coefficient: the part of
/// a region's own effect that returns to it through its neighbours.
inline double feedback_loop_share(const ImpactMatrix& s, const FitResult& fit, const std::string& variable) {
  const Index v = fit.variable_index(variable);
  return s.entries.trace() / static_cast<double>(s.entries.rows()) - fit.coefficients(v);
}

struct EffectsRow {
  /// Sector id, "all" for the aggregate of every cluster, empty when the row
  /// has no cluster dimension.
  std::string cluster;
  std::string variable;
  SummaryMeasures point;
  SummaryMeasures mean;
  SummaryMeasures sd;
  /// point / sd; NaN when sd is zero.
  SummaryMeasures t;
  bool dispersion_available = false;
};

struct EffectsTable {
  std::vector<EffectsRow> rows;
  EffectsMode mode = EffectsMode::per_cluster;
  Index draws = 0;
  Index rejected = 0;
  std::uint64_t seed = 0;
};

struct EffectsOptions {
  Index draws = 1000;
  std::uint64_t seed = 1;
  EffectsMode mode = EffectsMode::per_cluster;
  unsigned threads = default_threads();
};

namespace detail {

struct RowPlan {
  std::string cluster;
  ImpactRecipe recipe;
};

inline std::vector<RowPlan> plan_rows(const FitResult& fit, EffectsMode mode) {
  std::vector<RowPlan> rows;
  const Index k = static_cast<Index>(fit.variable_names.size());
  auto is_lagged = [&](Index v) {
    for (const auto& t : fit.lag_terms)
      if (t.variable == v) return true;
    return false;
  };
  if (fit.family == Family::sdm_c && mode == EffectsMode::per_cluster) {
    for (std::size_t c = 0; c < fit.clusters.size(); ++c)
      for (Index v = 0; v < k; ++v)
        if (is_lagged(v))
          rows.push_back({fit.clusters[c].sector_id, impact_recipe(fit, v, static_cast<Index>(c))});
    for (Index v = 0; v < k; ++v)
      if (!is_lagged(v)) rows.push_back({"", impact_recipe(fit, v, std::nullopt)});
  } else {
    const std::string label = fit.family == Family::sdm_c ? "all" : "";
    for (Index v = 0; v < k; ++v) rows.push_back({label, impact_recipe(fit, v, std::nullopt)});
  }
  return rows;
}

}  // namespace detail

/// Point decomposition for every row, without simulated dispersion.
inline EffectsTable point_effects(const FitResult& fit, EffectsMode mode = EffectsMode::per_cluster) {
  EffectsTable table;
  table.mode = mode;
  const auto lag_mats = detail::lag_matrices(fit);
  for (const auto& plan : detail::plan_rows(fit, mode)) {
    EffectsRow row;
    row.cluster = plan.cluster;
    row.variable = fit.variable_names[plan.recipe.variable];
    row.point = summary_measures(detail::impact_entries(fit, plan.recipe, lag_mats, fit.coefficients, fit.rho));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.mean = row.point;
    row.sd = {nan, nan, nan};
    row.t = {nan, nan, nan};
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Parametric simulation of the summary measures: draws (coefficients, rho)
/// from N(estimate, covariance), rejects draws with rho outside its
/// admissible interval, and recomputes every row per draw. Draw d uses its
/// own generator seeded from (seed, d), so the result does not depend on the
/// thread count.
inline EffectsTable effects_dispersion(const FitResult& fit, const EffectsOptions& opt = {}) {
  if (opt.draws < 2) fail(ErrorKind::InvalidArgument, "effects dispersion needs at least 2 draws");
  EffectsTable table = point_effects(fit, opt.mode);
  table.draws = opt.draws;
  table.seed = opt.seed;
  const auto plans = detail::plan_rows(fit, opt.mode);
  const auto lag_mats = detail::lag_matrices(fit);

  const Index k = fit.coefficients.size();
  const bool with_rho = fit.family != Family::sem;
  const Index m = k + (with_rho ? 1 : 0);
  if (fit.covariance.rows() < m)
    fail(ErrorKind::DimensionMismatch, "fit covariance does not cover the coefficients");
  Eigen::VectorXd centre(m);
  centre.head(k) = fit.coefficients;
  if (with_rho) centre(k) = fit.rho;
  Eigen::MatrixXd cov = fit.covariance.topLeftCorner(m, m);
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-8 * std::max(top, 1e-300) && top > 0.0)
    fail(ErrorKind::NonPsdCovariance, "coefficient covariance is not positive semidefinite");
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  const Index n = fit.weights.size();
  const double nd = static_cast<double>(n);
  const Index rows = static_cast<Index>(plans.size());
  const Index nmat = static_cast<Index>(lag_mats.size());
  std::vector<Eigen::MatrixXd> lag_t;
  std::vector<Eigen::VectorXd> lag_rowsum;
  for (const auto& l : lag_mats) {
    lag_t.push_back(l.transpose());
    lag_rowsum.push_back(l.rowwise().sum());
  }

  // direct and total for every (draw, row)
  Eigen::MatrixXd direct(opt.draws, rows), total(opt.draws, rows);
  std::vector<Index> rejected(opt.draws, 0);
  const double lower = fit.rho_bounds.first, upper = fit.rho_bounds.second;

  parallel_for(opt.draws, opt.threads, [&](Index d) {
    std::mt19937_64 gen(derive_seed(opt.seed, static_cast<std::uint64_t>(d)));
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(m), draw(m);
    for (int attempt = 0;; ++attempt) {
      for (Index i = 0; i < m; ++i) z(i) = normal(gen);
      draw = centre + root * z;
      if (!with_rho || (draw(k) > lower && draw(k) < upper)) break;
      ++rejected[d];
      if (attempt > 10000)
        fail(ErrorKind::RhoOutOfBounds, "could not draw an admissible rho for effects simulation");
    }
    const double rho = with_rho ? draw(k) : 0.0;
    Eigen::MatrixXd a;
    if (rho != 0.0) {
      a = (Eigen::MatrixXd::Identity(n, n) - rho * fit.weights.matrix()).partialPivLu().inverse();
    } else {
      a = Eigen::MatrixXd::Identity(n, n);
    }
    const double tr_a = a.trace(), sum_a = a.sum();
    const Eigen::RowVectorXd colsum = a.colwise().sum();
    std::vector<double> tr_am(nmat), sum_am(nmat);
    for (Index j = 0; j < nmat; ++j) {
      tr_am[j] = a.cwiseProduct(lag_t[j]).sum();
      sum_am[j] = colsum.dot(lag_rowsum[j]);
    }
    for (Index r = 0; r < rows; ++r) {
      const auto& rec = plans[r].recipe;
      const double b = draw(rec.beta);
      double dir = b * tr_a, tot = b * sum_a;
      for (auto [mid, c] : rec.lags) {
        dir += draw(c) * tr_am[mid];
        tot += draw(c) * sum_am[mid];
      }
      direct(d, r) = dir / nd;
      total(d, r) = tot / nd;
    }
  });

  for (Index d = 0; d < opt.draws; ++d) table.rejected += rejected[d];
  const Eigen::MatrixXd indirect = total - direct;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto moments = [&](const Eigen::MatrixXd& v, Index r, double& mean, double& sd) {
    mean = v.col(r).mean();
    const double ss = (v.col(r).array() - mean).square().sum();
    sd = std::sqrt(ss / static_cast<double>(opt.draws - 1));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) sd = 0.0;
  };
  for (Index r = 0; r < rows; ++r) {
    auto& row = table.rows[r];
    moments(direct, r, row.mean.direct, row.sd.direct);
    moments(indirect, r, row.mean.indirect, row.sd.indirect);
    moments(total, r, row.mean.total, row.sd.total);
    row.mean.total = row.mean.direct + row.mean.indirect;
    auto tstat = [&](double point, double sd) { return sd > 0.0 ? point / sd : nan; };
    row.t = {tstat(row.point.direct, row.sd.direct), tstat(row.point.indirect, row.sd.indirect),
             tstat(row.point.total, row.sd.total)};
    row.dispersion_available = row.sd.direct > 0.0 || row.sd.indirect > 0.0 || row.sd.total > 0.0;
  }
  return table;
}

}  // namespace sdmc
