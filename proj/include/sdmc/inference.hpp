#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>

#include "sdmc/error.hpp"
#include "sdmc/linalg.hpp"
#include "sdmc/panel.hpp"

namespace sdmc {

/// P(chi^2_df > x).
inline double chi2_upper_tail(double x, Index df) {
  if (df <= 0) fail(ErrorKind::InvalidArgument, "chi-squared degrees of freedom must be positive");
  if (!(x >= 0.0)) fail(ErrorKind::InvalidArgument, "chi-squared statistic must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

struct HausmanResult {
  double statistic = 0.0;
  Index df = 0;
  double p_value = 1.0;
  std::vector<std::string> names;
  Eigen::VectorXd difference;
  Eigen::MatrixXd difference_covariance;
  /// Rank of var(d) after symmetrisation and PSD projection.
  Index rank = 0;
  /// var(d) was singular or indefinite and a pseudo-inverse was used.
  bool pseudo_inverse = false;
  std::vector<std::string> diagnostics;

  bool rejects(double alpha) const { return p_value < alpha; }
};

/// h = d' var(d)^+ d on explicit coefficient vectors, where var(d) =
/// var(b_fe) - var(b_re).
inline HausmanResult hausman_test(const Eigen::VectorXd& b_fe, const Eigen::MatrixXd& v_fe,
                                  const Eigen::VectorXd& b_re, const Eigen::MatrixXd& v_re,
                                  std::vector<std::string> names = {}) {
  const Index k = b_fe.size();
  if (k == 0) fail(ErrorKind::NoCommonCoefficients, "no coefficients to compare");
  if (b_re.size() != k || v_fe.rows() != k || v_fe.cols() != k || v_re.rows() != k || v_re.cols() != k)
    fail(ErrorKind::DimensionMismatch, "Hausman inputs disagree in dimension");
  HausmanResult r;
  r.names = std::move(names);
  r.df = k;
  r.difference = b_fe - b_re;
  r.difference_covariance = 0.5 * ((v_fe - v_re) + (v_fe - v_re).transpose());
  bool repaired = false;
  const Eigen::MatrixXd inv = psd_pseudo_inverse(r.difference_covariance, &r.rank, &repaired);
  r.pseudo_inverse = r.rank < k || repaired;
  if (r.pseudo_inverse)
    r.diagnostics.push_back("SingularDifferenceCovariance: var(d) has rank " + std::to_string(r.rank) +
                            " of " + std::to_string(k) + (repaired ? " after PSD repair" : "") +
                            "; pseudo-inverse used");
  r.statistic = std::max(0.0, r.difference.dot(inv * r.difference));
  r.p_value = chi2_upper_tail(r.statistic, r.df);
  return r;
}

/// Compares the slope coefficients that both estimators report, matched by
/// name; the random-effects intercept never has a counterpart.
inline HausmanResult hausman_test(const OlsResult& fe, const OlsResult& re) {
  std::vector<Index> fi, ri;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < fe.names.size(); ++j) {
    if (fe.names[j] == "(intercept)") continue;
    if (auto k = re.index_of(fe.names[j])) {
      fi.push_back(static_cast<Index>(j));
      ri.push_back(*k);
      names.push_back(fe.names[j]);
    }
  }
  if (names.empty())
    fail(ErrorKind::NoCommonCoefficients, "fixed- and random-effects fits share no slope coefficient");
  const Index k = static_cast<Index>(names.size());
  Eigen::VectorXd bf(k), br(k);
  Eigen::MatrixXd vf(k, k), vr(k, k);
  for (Index a = 0; a < k; ++a) {
    bf(a) = fe.coefficients(fi[a]);
    br(a) = re.coefficients(ri[a]);
    for (Index b = 0; b < k; ++b) {
      vf(a, b) = fe.covariance(fi[a], fi[b]);
      vr(a, b) = re.covariance(ri[a], ri[b]);
    }
  }
  return hausman_test(bf, vf, br, vr, std::move(names));
}

inline HausmanResult hausman_test(const RegionPanel& p) {
  return hausman_test(fe_estimate(p), re_estimate(p));
}

/// One-line verdict, e.g. "Hausman test: 24 degrees of freedom, test
/// statistic 487.41, p-value 6.8e-88: reject random effects in favour of
/// fixed effects at the 1% level".
inline std::string hausman_verdict(const HausmanResult& h, double alpha = 0.05) {
  char buf[256];
  const double level = alpha * 100.0;
  std::snprintf(buf, sizeof buf,
                "Hausman test: %lld degrees of freedom, test statistic %.2f, p-value %.4g: %s at the %g%% level",
                static_cast<long long>(h.df), h.statistic, h.p_value,
                h.rejects(alpha) ? "reject random effects in favour of fixed effects"
                                 : "fail to reject random effects",
                level);
  return buf;
}

}  // namespace sdmc
