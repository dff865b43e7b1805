#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/estimator.hpp"
#include "sdmc/linalg.hpp"
#include "sdmc/panel.hpp"
#include "sdmc/weights.hpp"

namespace sdmc {

enum class WeightRecipe { ring, random_planar };
enum class ClusterRecipe { all_ones, random };

inline std::string to_string(WeightRecipe r) { return r == WeightRecipe::ring ? "ring" : "random-planar"; }
inline std::string to_string(ClusterRecipe r) { return r == ClusterRecipe::all_ones ? "all-ones" : "random"; }

inline WeightRecipe weight_recipe_from_string(const std::string& s) {
  if (s == "ring") return WeightRecipe::ring;
  if (s == "random-planar") return WeightRecipe::random_planar;
  fail(ErrorKind::ConfigError, "unknown weight recipe '" + s + "'");
}

inline ClusterRecipe cluster_recipe_from_string(const std::string& s) {
  if (s == "all-ones") return ClusterRecipe::all_ones;
  if (s == "random") return ClusterRecipe::random;
  fail(ErrorKind::ConfigError, "unknown cluster recipe '" + s + "'");
}

/// Synthetic panel recipe. For SEM, `rho` is the error autoregressive
/// coefficient; for SAC, `rho` is the outcome lag and `theta` the error one.
/// `gamma` has one row per cluster (SDM-C) or a single row (SDM) and one
/// column per regressor.
struct DgpConfig {
  Family family = Family::sdm_c;
  Index n = 50;
  Index t = 10;
  double rho = 0.3;
  double theta = 0.0;
  Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.6, 1.0).finished();
  Eigen::MatrixXd gamma = (Eigen::MatrixXd(1, 2) << -0.5, 0.2).finished();
  double sigma = 0.05;
  /// Standard deviation of the idiosyncratic part of the region effects.
  double fe_spread = 1.0;
  /// alpha_i = kappa * mean_t,k(x_itk) + fe_spread * N(0, 1).
  double kappa = 0.0;
  WeightRecipe weights = WeightRecipe::random_planar;
  /// Neighbours on each side for the ring recipe.
  Index ring_neighbors = 1;
  double exponent = 1.0;
  Normalization normalization = Normalization::row;
  ClusterRecipe clusters = ClusterRecipe::random;
  double cluster_share = 0.5;
  MaskConvention mask = MaskConvention::source;
  int first_period = 2002;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  RegionPanel panel;
  WeightMatrix weights;
  std::vector<ClusterIndicator> clusters;
  std::vector<Coordinate> coordinates;
  std::vector<std::pair<Index, Index>> neighbors;
  Eigen::VectorXd alpha;
  /// Innovations, N x T.
  Eigen::MatrixXd noise;
  /// Spec that fits the generating family.
  ModelSpec spec;
};

namespace detail {

inline Index gamma_rows(const DgpConfig& cfg) {
  if (cfg.family == Family::sdm) return 1;
  if (cfg.family == Family::sdm_c) return cfg.gamma.rows();
  return 0;
}

inline void check_config(const DgpConfig& cfg) {
  if (cfg.n < 3) fail(ErrorKind::ConfigError, "synthetic panels need at least 3 regions");
  if (cfg.t < 2) fail(ErrorKind::ConfigError, "synthetic panels need at least 2 periods");
  if (cfg.beta.size() < 1) fail(ErrorKind::ConfigError, "at least one regressor is required");
  if (!(cfg.sigma >= 0.0)) fail(ErrorKind::ConfigError, "sigma must be nonnegative");
  if (cfg.family == Family::sdm_c && cfg.gamma.rows() < 1)
    fail(ErrorKind::ConfigError, "SDM-C needs at least one row of cluster lag coefficients");
  if (gamma_rows(cfg) > 0 && (cfg.gamma.cols() != cfg.beta.size() || cfg.gamma.rows() < gamma_rows(cfg)))
    fail(ErrorKind::ConfigError, "gamma must have one column per regressor");
  if (cfg.weights == WeightRecipe::ring && (cfg.ring_neighbors < 1 || 2 * cfg.ring_neighbors >= cfg.n))
    fail(ErrorKind::ConfigError, "ring neighbour count must be in 1..(n-1)/2");
}

}  // namespace detail

/// Draws a panel from the configured family by solving the reduced form
/// period by period. Deterministic given cfg.seed.
inline SyntheticData generate(const DgpConfig& cfg) {
  detail::check_config(cfg);
  std::mt19937_64 gen(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  const Index n = cfg.n, t = cfg.t, k = cfg.beta.size();

  SyntheticData out;
  std::vector<std::string> ids;
  for (Index i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i + 1));

  WeightMatrix w;
  if (cfg.weights == WeightRecipe::ring) {
    for (Index i = 0; i < n; ++i)
      for (Index s = 1; s <= cfg.ring_neighbors; ++s) out.neighbors.emplace_back(i, (i + s) % n);
    w = build_contiguity(out.neighbors, n, ids);
  } else {
    for (Index i = 0; i < n; ++i) out.coordinates.push_back({ids[i], uniform(gen), uniform(gen)});
    w = build_inverse_distance(out.coordinates, cfg.exponent, Metric::euclidean);
  }
  if (cfg.normalization == Normalization::row) w = row_normalize(w);
  const Spectrum spec = spectrum(w);
  const bool lag_outcome = cfg.family != Family::sem;
  if (!spec.admissible(cfg.rho))
    fail(ErrorKind::InadmissibleRho, "rho = " + std::to_string(cfg.rho) + " outside (" +
                                         std::to_string(spec.rho_lower) + ", " +
                                         std::to_string(spec.rho_upper) + ") for the generated W");
  if (cfg.family == Family::sac && !spec.admissible(cfg.theta))
    fail(ErrorKind::InadmissibleRho, "theta outside the admissible interval for the generated W");

  const Index gr = detail::gamma_rows(cfg);
  std::vector<Eigen::MatrixXd> lag_mats;
  if (cfg.family == Family::sdm) {
    lag_mats.push_back(w.matrix());
  } else if (cfg.family == Family::sdm_c) {
    for (Index c = 0; c < gr; ++c) {
      Eigen::VectorXd m(n);
      for (Index i = 0; i < n; ++i)
        m(i) = cfg.clusters == ClusterRecipe::all_ones ? 1.0 : (uniform(gen) < cfg.cluster_share ? 1.0 : 0.0);
      out.clusters.push_back(make_cluster("s" + std::to_string(c + 1), std::move(m)));
      lag_mats.push_back(cluster_mask_matrix(w.matrix(), out.clusters.back(), cfg.mask));
    }
  }

  Eigen::MatrixXd x(n * t, k);
  for (Index p = 0; p < t; ++p)
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < n; ++i) x(p * n + i, j) = normal(gen);
  const Eigen::MatrixXd xbar = region_means(x, n);
  out.alpha.resize(n);
  for (Index i = 0; i < n; ++i) out.alpha(i) = cfg.kappa * xbar.row(i).mean() + cfg.fe_spread * normal(gen);
  out.noise.resize(n, t);
  for (Index p = 0; p < t; ++p)
    for (Index i = 0; i < n; ++i) out.noise(i, p) = cfg.sigma * normal(gen);

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::PartialPivLU<Eigen::MatrixXd> outcome_lu(eye - (lag_outcome ? cfg.rho : 0.0) * w.matrix());
  const double error_coef = cfg.family == Family::sem ? cfg.rho : (cfg.family == Family::sac ? cfg.theta : 0.0);
  const Eigen::PartialPivLU<Eigen::MatrixXd> error_lu(eye - error_coef * w.matrix());

  Eigen::VectorXd y(n * t);
  for (Index p = 0; p < t; ++p) {
    const auto xt = x.middleRows(p * n, n);
    Eigen::VectorXd rhs = out.alpha + xt * cfg.beta;
    for (std::size_t c = 0; c < lag_mats.size(); ++c) rhs += lag_mats[c] * (xt * cfg.gamma.row(c).transpose());
    Eigen::VectorXd u = out.noise.col(p);
    if (error_coef != 0.0) u = error_lu.solve(u);
    y.segment(p * n, n) = lag_outcome && cfg.rho != 0.0 ? Eigen::VectorXd(outcome_lu.solve(rhs + u))
                                                        : Eigen::VectorXd(rhs + u);
  }

  std::vector<std::string> periods, names;
  for (Index p = 0; p < t; ++p) periods.push_back(std::to_string(cfg.first_period + p));
  for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
  out.panel = RegionPanel(ids, periods, "y", std::move(y), names, std::move(x));
  out.weights = std::move(w);
  out.spec.family = cfg.family;
  out.spec.clusters = out.clusters;
  out.spec.mask = cfg.mask;
  return out;
}

/// True value of every parameter label the generating family defines.
inline std::map<std::string, double> true_parameters(const DgpConfig& cfg) {
  std::map<std::string, double> truth;
  for (Index j = 0; j < cfg.beta.size(); ++j) truth["x" + std::to_string(j + 1)] = cfg.beta(j);
  if (cfg.family == Family::sdm)
    for (Index j = 0; j < cfg.beta.size(); ++j) truth["lag:x" + std::to_string(j + 1)] = cfg.gamma(0, j);
  if (cfg.family == Family::sdm_c)
    for (Index c = 0; c < cfg.gamma.rows(); ++c)
      for (Index j = 0; j < cfg.beta.size(); ++j)
        truth["lag[s" + std::to_string(c + 1) + "]:x" + std::to_string(j + 1)] = cfg.gamma(c, j);
  truth[cfg.family == Family::sem ? "lambda" : "rho"] = cfg.rho;
  if (cfg.family == Family::sac) truth["theta"] = cfg.theta;
  truth["sigma2"] = cfg.sigma * cfg.sigma;
  return truth;
}

struct ParameterRecovery {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  /// Share of replications whose estimate +- 1.96 se covers the truth.
  double coverage = 0.0;
  Index replications = 0;
};

struct RecoveryReport {
  Family generating_family = Family::sdm_c;
  Family fitted_family = Family::sdm_c;
  std::vector<ParameterRecovery> parameters;
  Index replications = 0;
  Index failures = 0;
  /// "replication <i>: <message>" for each failed fit.
  std::vector<std::string> failure_messages;

  const ParameterRecovery* find(const std::string& name) const {
    for (const auto& p : parameters)
      if (p.name == name) return &p;
    return nullptr;
  }
};

struct RecoveryOptions {
  /// Family to fit; defaults to the generating family. When it differs only
  /// the direct coefficients are scored.
  std::optional<Family> fit_family;
  unsigned threads = default_threads();
};

/// Seed of replication `index`.
inline std::uint64_t replication_seed(std::uint64_t seed, Index index) {
  return derive_seed(seed, static_cast<std::uint64_t>(index));
}

inline RecoveryReport run_recovery(const DgpConfig& cfg, Index replications, const RecoveryOptions& opt = {}) {
  if (replications < 2) fail(ErrorKind::InvalidArgument, "recovery needs at least 2 replications");
  const Family fitted = opt.fit_family.value_or(cfg.family);
  auto truth = true_parameters(cfg);
  if (fitted != cfg.family) {
    std::map<std::string, double> direct;
    for (Index j = 0; j < cfg.beta.size(); ++j) {
      const auto name = "x" + std::to_string(j + 1);
      direct[name] = truth[name];
    }
    truth = std::move(direct);
  }

  struct Outcome {
    bool ok = false;
    std::string error;
    std::vector<double> estimate, se;
  };
  std::vector<Outcome> outcomes(replications);
  std::vector<std::string> names;
  for (const auto& [name, value] : truth) names.push_back(name);

  parallel_for(replications, opt.threads, [&](Index r) {
    DgpConfig c = cfg;
    c.seed = replication_seed(cfg.seed, r);
    auto& o = outcomes[r];
    try {
      SyntheticData data = generate(c);
      ModelSpec spec = data.spec;
      spec.family = fitted;
      if (fitted == Family::sdm_c && spec.clusters.empty())
        spec.clusters.push_back(make_cluster("all", Eigen::VectorXd::Ones(c.n)));
      const FitResult f = fit(data.panel, data.weights, spec);
      for (const auto& name : names) {
        const auto idx = f.parameter_index(name);
        if (!idx) fail(ErrorKind::UnknownVariable, "fit does not report parameter '" + name + "'");
        o.estimate.push_back(f.parameters(*idx));
        o.se.push_back(f.std_errors(*idx));
      }
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });

  RecoveryReport rep;
  rep.generating_family = cfg.family;
  rep.fitted_family = fitted;
  rep.replications = replications;
  for (Index r = 0; r < replications; ++r)
    if (!outcomes[r].ok) {
      ++rep.failures;
      rep.failure_messages.push_back("replication " + std::to_string(r) + ": " + outcomes[r].error);
    }
  for (std::size_t j = 0; j < names.size(); ++j) {
    ParameterRecovery pr;
    pr.name = names[j];
    pr.truth = truth[names[j]];
    double sum = 0.0, sq = 0.0, covered = 0.0;
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      const double err = o.estimate[j] - pr.truth;
      sum += o.estimate[j];
      sq += err * err;
      if (std::abs(err) <= 1.959963984540054 * o.se[j]) covered += 1.0;
      ++pr.replications;
    }
    if (pr.replications > 0) {
      const double m = static_cast<double>(pr.replications);
      pr.mean = sum / m;
      pr.bias = pr.mean - pr.truth;
      pr.rmse = std::sqrt(sq / m);
      pr.coverage = covered / m;
    }
    rep.parameters.push_back(pr);
  }
  return rep;
}

}  // namespace sdmc
