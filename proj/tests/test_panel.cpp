#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sdmc/panel.hpp"

using namespace sdmc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

RegionPanel make_panel(Index n, Index t, const VectorXd& y, const MatrixXd& x) {
  std::vector<std::string> ids, periods, names;
  for (Index i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  for (Index p = 0; p < t; ++p) periods.push_back(std::to_string(2000 + p));
  for (Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  return RegionPanel(ids, periods, "y", y, names, x);
}

/// y = 1 + sum x + alpha_i + sigma e, alpha_i with spread `alpha_sd`.
RegionPanel random_panel(Index n, Index t, Index k, double alpha_sd, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  VectorXd alpha(n);
  for (Index i = 0; i < n; ++i) alpha(i) = alpha_sd * z(gen);
  MatrixXd x(n * t, k);
  VectorXd y(n * t);
  for (Index p = 0; p < t; ++p)
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < k; ++j) x(p * n + i, j) = z(gen);
      y(p * n + i) = 1.0 + x.row(p * n + i).sum() + alpha(i) + sigma * z(gen);
    }
  return make_panel(n, t, y, x);
}

}  // namespace

TEST(Within, Examples) {
  // one region, three periods
  const auto p1 = make_panel(1, 3, (VectorXd(3) << 1, 2, 3).finished(), (MatrixXd(3, 2) << 5, 1, 5, 4, 5, 2).finished());
  const auto w1 = within_transform(p1);
  EXPECT_EQ(w1.y(), (VectorXd(3) << -1, 0, 1).finished());
  EXPECT_TRUE((w1.x().col(0).array() == 0.0).all());

  // two regions, period-major rows: (r0,p0), (r1,p0), (r0,p1), (r1,p1)
  const auto p2 = make_panel(2, 2, (VectorXd(4) << 1, 10, 3, 10).finished(), (MatrixXd(4, 1) << 1, 2, 3, 5).finished());
  const auto w2 = within_transform(p2);
  EXPECT_EQ(w2.y(), (VectorXd(4) << -1, 0, 1, 0).finished());
}

TEST(Within, RegionBlocksSumToZero) {
  const auto p = random_panel(7, 5, 3, 2.0, 11);
  const auto w = within_transform(p);
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 3; ++j) {
      double s = 0.0;
      for (Index t = 0; t < 5; ++t) s += w.x()(p.row(i, t), j);
      EXPECT_NEAR(s, 0.0, 1e-10);
    }
}

TEST(Within, ConstantColumnsVanishExactly) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  const Index n = 9, t = 7;
  MatrixXd x(n * t, 1);
  for (Index i = 0; i < n; ++i) {
    const double c = u(gen);
    for (Index p = 0; p < t; ++p) x(p * n + i, 0) = c;
  }
  EXPECT_TRUE((demean_by_region(x, n).array() == 0.0).all());
}

TEST(PooledOls, Examples) {
  MatrixXd x(3, 2);
  x << 1, 0, 1, 1, 1, 2;
  const auto r = pooled_ols((VectorXd(3) << 0, 2, 4).finished(), x);
  EXPECT_NEAR(r.coefficients(0), 0.0, 1e-14);
  EXPECT_NEAR(r.coefficients(1), 2.0, 1e-14);

  const VectorXd col = (VectorXd(4) << 1, 2, 3, 4).finished();
  const auto exact = pooled_ols(col, MatrixXd(col));
  EXPECT_NEAR(exact.coefficients(0), 1.0, 1e-14);
  EXPECT_NEAR(exact.sigma2, 0.0, 1e-28);
}

TEST(PooledOls, MatchesExplicitNormalEquations) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> z;
  MatrixXd x(50, 3);
  VectorXd y(50);
  const double b[3] = {0.5, -1.2, 2.0};
  for (Index r = 0; r < 50; ++r) {
    for (Index j = 0; j < 3; ++j) x(r, j) = z(gen);
    y(r) = b[0] * x(r, 0) + b[1] * x(r, 1) + b[2] * x(r, 2) + 0.1 * z(gen);
  }
  // 3x3 inverse by cofactors
  double a[3][3], v[3] = {0, 0, 0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      a[i][j] = 0;
      for (Index r = 0; r < 50; ++r) a[i][j] += x(r, i) * x(r, j);
    }
  for (int i = 0; i < 3; ++i)
    for (Index r = 0; r < 50; ++r) v[i] += x(r, i) * y(r);
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  double inv[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
    }
  const auto r = pooled_ols(y, x);
  for (int i = 0; i < 3; ++i) {
    const double ref = inv[i][0] * v[0] + inv[i][1] * v[1] + inv[i][2] * v[2];
    EXPECT_NEAR(r.coefficients(i), ref, 1e-10);
    EXPECT_LT(std::abs(r.coefficients(i) - b[i]), 5 * r.std_errors(i));
    EXPECT_NEAR(r.covariance(i, i), r.sigma2 * inv[i][i], 1e-12);
  }
}

TEST(PooledOls, SingleRegressorStandardError) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  const Index n = 30;
  MatrixXd x(n, 2);
  VectorXd y(n);
  for (Index r = 0; r < n; ++r) {
    x(r, 0) = 1.0;
    x(r, 1) = z(gen);
    y(r) = 0.3 + 1.7 * x(r, 1) + z(gen);
  }
  const auto fit = pooled_ols(y, x);
  const double xbar = x.col(1).mean();
  const double sxx = (x.col(1).array() - xbar).square().sum();
  const double s2 = fit.residuals.squaredNorm() / static_cast<double>(n - 2);
  EXPECT_NEAR(fit.std_errors(1), std::sqrt(s2 / sxx), 1e-12);

  // replicating the sample grows the denominator and lowers the SE
  MatrixXd x2(2 * n, 2);
  VectorXd y2(2 * n);
  x2 << x, x;
  y2 << y, y;
  const auto twice = pooled_ols(y2, x2);
  EXPECT_LT(twice.std_errors(1), fit.std_errors(1));
  EXPECT_NEAR(twice.coefficients(1), fit.coefficients(1), 1e-12);
}

TEST(PooledOls, RankDeficientNamesColumn) {
  MatrixXd x(5, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10;
  try {
    pooled_ols(VectorXd::Ones(5), x, {"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
    EXPECT_NE(std::string(e.what()).find("collinear columns"), std::string::npos);
  }
}

TEST(FixedEffects, ExactWithinFit) {
  const Index n = 2, t = 4;
  MatrixXd x(n * t, 1);
  VectorXd y(n * t);
  const double alpha[2] = {0.0, 100.0};
  for (Index p = 0; p < t; ++p)
    for (Index i = 0; i < n; ++i) {
      x(p * n + i, 0) = static_cast<double>(p * p + i);
      y(p * n + i) = alpha[i] + 2.0 * x(p * n + i, 0);
    }
  const auto fe = fe_estimate(make_panel(n, t, y, x));
  EXPECT_NEAR(fe.coefficients(0), 2.0, 1e-12);
  EXPECT_NEAR(fe.fixed_effects(1) - fe.fixed_effects(0), 100.0, 1e-10);
}

TEST(FixedEffects, MatchesLsdv) {
  const auto p = random_panel(4, 3, 2, 3.0, 23);
  const auto fe = fe_estimate(p);
  EXPECT_LE((fe.coefficients - oracle::lsdv(p.y(), p.x(), 4)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(fe.dof, 12 - 4 - 2);
}

TEST(FixedEffects, OffsetInvariance) {
  const auto p = random_panel(10, 4, 2, 1.0, 3);
  VectorXd shifted = p.y();
  for (Index r = 0; r < shifted.size(); ++r) shifted(r) += 50.0 * static_cast<double>(r % 10);
  const auto a = fe_estimate(p), b = fe_estimate(p.with_values(shifted, p.x()));
  EXPECT_LE((a.coefficients - b.coefficients).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FixedEffects, ResidualsOrthogonalToWithinRegressors) {
  const auto p = random_panel(12, 5, 3, 1.0, 9);
  const auto fe = fe_estimate(p);
  const MatrixXd xw = demean_by_region(p.x(), p.n());
  EXPECT_LE((xw.transpose() * fe.residuals).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FixedEffects, TimeInvariantRegressors) {
  const auto base = random_panel(5, 4, 1, 1.0, 1);
  MatrixXd x(20, 2);
  x.col(0) = base.x().col(0);
  for (Index r = 0; r < 20; ++r) x(r, 1) = (r % 5) < 2 ? 1.0 : 0.0;
  std::vector<std::string> names{"x1", "cluster"};
  const RegionPanel p(base.region_ids(), base.period_labels(), "y", base.y(), names, x);
  const auto fe = fe_estimate(p);
  EXPECT_EQ(fe.dropped, std::vector<std::string>{"cluster"});
  EXPECT_EQ(fe.names, std::vector<std::string>{"x1"});

  const RegionPanel only(base.region_ids(), base.period_labels(), "y", base.y(), {"cluster"}, x.rightCols(1));
  try {
    fe_estimate(only);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AllVariablesTimeInvariant);
  }
}

TEST(RandomEffects, NoRegionVarianceApproachesPooledOls) {
  const auto p = random_panel(200, 5, 2, 0.0, 41);
  const auto re = re_estimate(p);
  MatrixXd z(p.observations(), 3);
  z.col(0).setOnes();
  z.rightCols(2) = p.x();
  const auto ols = pooled_ols(p.y(), z);
  EXPECT_LT(re.theta, 0.2);
  EXPECT_LE((re.coefficients - ols.coefficients).cwiseAbs().maxCoeff(), 0.01);
}

TEST(RandomEffects, LargeRegionVarianceApproachesFixedEffects) {
  double previous = std::numeric_limits<double>::infinity();
  for (double sd : {1.0, std::sqrt(10.0), std::sqrt(1000.0), std::sqrt(1e5)}) {
    const auto p = random_panel(40, 5, 2, sd, 77);
    const auto fe = fe_estimate(p), re = re_estimate(p);
    const double gap = (re.coefficients.tail(2) - fe.coefficients).norm();
    EXPECT_LT(gap, previous);
    previous = gap;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(RandomEffects, RecoversTruthWithExogenousEffects) {
  const auto p = random_panel(200, 5, 2, 1.0, 2718);
  const auto re = re_estimate(p);
  EXPECT_EQ(re.names.front(), "(intercept)");
  for (Index j = 0; j < 3; ++j) EXPECT_LT(std::abs(re.coefficients(j) - 1.0), 3 * re.std_errors(j));
}

TEST(RandomEffects, NegativeVarianceComponentIsClamped) {
  // region means of y equal those of x exactly, so the between residuals
  // vanish and sigma_alpha^2 comes out negative
  const Index n = 30, t = 6;
  std::mt19937_64 gen(12);
  std::normal_distribution<double> z;
  MatrixXd x(n * t, 1);
  VectorXd y(n * t);
  for (Index p = 0; p < t; ++p)
    for (Index i = 0; i < n; ++i) x(p * n + i, 0) = z(gen);
  for (Index p = 0; p < t; ++p)
    for (Index i = 0; i < n; ++i) y(p * n + i) = x(p * n + i, 0) + (p % 2 ? 1.0 : -1.0) * (i % 2 ? 1.0 : -1.0);
  const auto re = re_estimate(make_panel(n, t, y, x));
  EXPECT_EQ(re.sigma2_alpha, 0.0);
  ASSERT_FALSE(re.diagnostics.empty());
  EXPECT_NE(re.diagnostics[0].find("NegativeVarianceComponent"), std::string::npos);
  EXPECT_EQ(re.theta, 0.0);
}

TEST(RegionPanel, Validation) {
  EXPECT_THROW(make_panel(2, 2, VectorXd::Zero(3), MatrixXd::Zero(3, 1)), Error);
  VectorXd y = VectorXd::Zero(4);
  y(2) = std::numeric_limits<double>::quiet_NaN();
  try {
    make_panel(2, 2, y, MatrixXd::Zero(4, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
  }
  const auto p = random_panel(3, 2, 2, 1.0, 1);
  EXPECT_EQ(p.variable_index("x2"), 1);
  EXPECT_THROW(p.variable_index("nope"), Error);
}
