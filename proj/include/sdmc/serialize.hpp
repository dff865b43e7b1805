#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sdmc/dgp.hpp"
#include "sdmc/effects.hpp"
#include "sdmc/estimator.hpp"
#include "sdmc/inference.hpp"

namespace sdmc {

using Json = nlohmann::json;

namespace detail {

// Non-finite values serialise as null and read back as NaN.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

inline Eigen::VectorXd vector_from(const Json& j) {
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i]);
  return v;
}

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
  return out;
}

inline Eigen::MatrixXd matrix_from(const Json& j) {
  const Index r = static_cast<Index>(j.size());
  const Index c = r ? static_cast<Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(j[i].size()) != c) fail(ErrorKind::ParseError, "ragged matrix in JSON");
    for (Index k = 0; k < c; ++k) m(i, k) = number(j[i][k]);
  }
  return m;
}

inline Json measures_json(const SummaryMeasures& m) {
  return {{"direct", number(m.direct)}, {"indirect", number(m.indirect)}, {"total", number(m.total)}};
}

}  // namespace detail

inline Json to_json(const FitResult& f) {
  Json params = Json::array();
  for (std::size_t i = 0; i < f.parameter_labels.size(); ++i) {
    const auto k = static_cast<Index>(i);
    params.push_back({{"label", f.parameter_labels[i]},
                      {"estimate", detail::number(f.parameters(k))},
                      {"std_error", detail::number(f.std_errors(k))},
                      {"t_stat", detail::number(f.t_stats(k))}});
  }
  Json terms = Json::array();
  for (const auto& t : f.lag_terms) terms.push_back({{"cluster", t.cluster}, {"variable", t.variable}});
  Json clusters = Json::array();
  for (const auto& c : f.clusters)
    clusters.push_back({{"sector_id", c.sector_id}, {"membership", detail::vector_json(c.membership)}});
  Json j;
  j["model"] = to_string(f.family);
  j["n"] = f.n;
  j["t"] = f.t;
  j["sign_convention"] = f.sign_convention;
  j["variables"] = f.variable_names;
  j["lagged_variables"] = f.lagged_variables;
  j["dummies"] = f.dummy_names;
  j["lag_terms"] = terms;
  j["coefficient_labels"] = f.coefficient_labels;
  j["parameters"] = params;
  j["rho"] = f.rho;
  j["theta"] = f.theta ? Json(*f.theta) : Json(nullptr);
  j["sigma2"] = f.sigma2;
  j["loglik"] = detail::number(f.loglik);
  j["r2"] = detail::number(f.r2);
  j["adj_r2"] = detail::number(f.adj_r2);
  j["rho_bounds"] = {f.rho_bounds.first, f.rho_bounds.second};
  j["covariance"] = detail::matrix_json(f.covariance);
  j["alpha"] = detail::vector_json(f.alpha);
  j["weights"] = {{"metric", to_string(f.weights.metric())},
                  {"exponent", f.weights.exponent()},
                  {"normalization", to_string(f.weights.normalization())},
                  {"region_ids", f.weights.region_ids()},
                  {"entries", detail::matrix_json(f.weights.matrix())}};
  j["clusters"] = clusters;
  j["mask_convention"] = to_string(f.mask);
  j["diagnostics"] = f.diagnostics;
  return j;
}

inline FitResult fit_from_json(const Json& j) {
  try {
    FitResult f;
    f.family = family_from_string(j.at("model").get<std::string>());
    f.n = j.at("n").get<Index>();
    f.t = j.at("t").get<Index>();
    f.sign_convention = j.value("sign_convention", f.sign_convention);
    f.variable_names = j.at("variables").get<std::vector<std::string>>();
    f.lagged_variables = j.at("lagged_variables").get<std::vector<std::string>>();
    f.dummy_names = j.at("dummies").get<std::vector<std::string>>();
    for (const auto& t : j.at("lag_terms")) f.lag_terms.push_back({t.at("cluster").get<Index>(), t.at("variable").get<Index>()});
    f.coefficient_labels = j.at("coefficient_labels").get<std::vector<std::string>>();
    const auto& params = j.at("parameters");
    const Index np = static_cast<Index>(params.size());
    f.parameters.resize(np);
    f.std_errors.resize(np);
    f.t_stats.resize(np);
    for (Index i = 0; i < np; ++i) {
      const auto& p = params[static_cast<std::size_t>(i)];
      f.parameter_labels.push_back(p.at("label").get<std::string>());
      f.parameters(i) = detail::number(p.at("estimate"));
      f.std_errors(i) = detail::number(p.at("std_error"));
      f.t_stats(i) = detail::number(p.at("t_stat"));
    }
    const Index k = static_cast<Index>(f.coefficient_labels.size());
    f.coefficients = f.parameters.head(k);
    f.rho = j.at("rho").get<double>();
    if (!j.at("theta").is_null()) f.theta = j.at("theta").get<double>();
    f.sigma2 = j.at("sigma2").get<double>();
    f.loglik = detail::number(j.at("loglik"));
    f.r2 = detail::number(j.at("r2"));
    f.adj_r2 = detail::number(j.at("adj_r2"));
    f.rho_bounds = {j.at("rho_bounds")[0].get<double>(), j.at("rho_bounds")[1].get<double>()};
    f.covariance = detail::matrix_from(j.at("covariance"));
    f.alpha = detail::vector_from(j.at("alpha"));
    const auto& w = j.at("weights");
    f.weights = WeightMatrix(detail::matrix_from(w.at("entries")), metric_from_string(w.at("metric").get<std::string>()),
                             w.at("exponent").get<double>(),
                             normalization_from_string(w.at("normalization").get<std::string>()),
                             w.at("region_ids").get<std::vector<std::string>>());
    for (const auto& c : j.at("clusters"))
      f.clusters.push_back(make_cluster(c.at("sector_id").get<std::string>(), detail::vector_from(c.at("membership"))));
    f.mask = mask_convention_from_string(j.at("mask_convention").get<std::string>());
    f.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    if (f.covariance.rows() != np || f.weights.size() != f.n)
      fail(ErrorKind::ParseError, "fit JSON is internally inconsistent");
    return f;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("malformed fit JSON: ") + e.what());
  }
}

inline Json to_json(const EffectsTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"cluster", r.cluster},
                    {"variable", r.variable},
                    {"estimate", detail::measures_json(r.point)},
                    {"mean", detail::measures_json(r.mean)},
                    {"sd", detail::measures_json(r.sd)},
                    {"t_stat", detail::measures_json(r.t)},
                    {"dispersion_available", r.dispersion_available}});
  }
  return {{"mode", to_string(t.mode)}, {"draws", t.draws}, {"rejected", t.rejected}, {"seed", t.seed}, {"rows", rows}};
}

inline Json to_json(const HausmanResult& h, double alpha = 0.05) {
  return {{"statistic", h.statistic},
          {"df", h.df},
          {"p_value", h.p_value},
          {"coefficients", h.names},
          {"difference", detail::vector_json(h.difference)},
          {"rank", h.rank},
          {"pseudo_inverse", h.pseudo_inverse},
          {"alpha", alpha},
          {"reject", h.rejects(alpha)},
          {"verdict", hausman_verdict(h, alpha)},
          {"diagnostics", h.diagnostics}};
}

inline Json to_json(const RecoveryReport& r) {
  Json params = Json::array();
  for (const auto& p : r.parameters)
    params.push_back({{"name", p.name},
                      {"truth", p.truth},
                      {"mean", p.mean},
                      {"bias", p.bias},
                      {"rmse", p.rmse},
                      {"coverage", p.coverage},
                      {"replications", p.replications}});
  return {{"generating_model", to_string(r.generating_family)},
          {"fitted_model", to_string(r.fitted_family)},
          {"replications", r.replications},
          {"failures", r.failures},
          {"failure_messages", r.failure_messages},
          {"parameters", params}};
}

inline Json to_json(const DgpConfig& c) {
  return {{"model", to_string(c.family)},
          {"n", c.n},
          {"t", c.t},
          {"rho", c.rho},
          {"theta", c.theta},
          {"beta", detail::vector_json(c.beta)},
          {"gamma", detail::matrix_json(c.gamma)},
          {"sigma", c.sigma},
          {"fe_spread", c.fe_spread},
          {"kappa", c.kappa},
          {"weights", to_string(c.weights)},
          {"ring_neighbors", c.ring_neighbors},
          {"exponent", c.exponent},
          {"normalize", to_string(c.normalization)},
          {"clusters", to_string(c.clusters)},
          {"cluster_share", c.cluster_share},
          {"mask_convention", to_string(c.mask)},
          {"first_period", c.first_period},
          {"seed", c.seed}};
}

/// Any key may be omitted and keeps its default.
inline DgpConfig dgp_config_from_json(const Json& j) {
  try {
    DgpConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const Json& v = it.value();
      if (key == "model") c.family = family_from_string(v.get<std::string>());
      else if (key == "n") c.n = v.get<Index>();
      else if (key == "t") c.t = v.get<Index>();
      else if (key == "rho") c.rho = v.get<double>();
      else if (key == "theta") c.theta = v.get<double>();
      else if (key == "beta") c.beta = detail::vector_from(v);
      else if (key == "gamma") c.gamma = v.size() && v[0].is_array() ? detail::matrix_from(v) : Eigen::MatrixXd(detail::vector_from(v).transpose());
      else if (key == "sigma") c.sigma = v.get<double>();
      else if (key == "fe_spread") c.fe_spread = v.get<double>();
      else if (key == "kappa") c.kappa = v.get<double>();
      else if (key == "weights") c.weights = weight_recipe_from_string(v.get<std::string>());
      else if (key == "ring_neighbors") c.ring_neighbors = v.get<Index>();
      else if (key == "exponent") c.exponent = v.get<double>();
      else if (key == "normalize") c.normalization = normalization_from_string(v.get<std::string>());
      else if (key == "clusters") c.clusters = cluster_recipe_from_string(v.get<std::string>());
      else if (key == "cluster_share") c.cluster_share = v.get<double>();
      else if (key == "mask_convention") c.mask = mask_convention_from_string(v.get<std::string>());
      else if (key == "first_period") c.first_period = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else fail(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
  }
}

}  // namespace sdmc
