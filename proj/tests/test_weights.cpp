#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sdmc/weights.hpp"

using namespace sdmc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<Coordinate> line_fixture() { return {{"a", 0, 0}, {"b", 1, 0}, {"c", 3, 0}}; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(InverseDistance, ThreeRegionLine) {
  const auto w = build_inverse_distance(line_fixture(), 1.0);
  MatrixXd expected(3, 3);
  expected << 0, 1, 1.0 / 3, 1, 0, 0.5, 1.0 / 3, 0.5, 0;
  EXPECT_LE((w.matrix() - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(w.region_ids(), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(InverseDistance, UnitDistanceAnyExponent) {
  for (double e : {0.5, 1.0, 2.0, 3.7}) {
    const auto w = build_inverse_distance({{"p", 0, 0}, {"q", 0, 1}}, e);
    EXPECT_DOUBLE_EQ(w.matrix()(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(w.matrix()(1, 0), 1.0);
    EXPECT_EQ(w.matrix()(0, 0), 0.0);
  }
}

TEST(InverseDistance, UnitSquareMatchesBruteForce) {
  const std::vector<std::pair<double, double>> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<Coordinate> coords;
  for (std::size_t i = 0; i < pts.size(); ++i) coords.push_back({"r" + std::to_string(i), pts[i].first, pts[i].second});
  const auto w = build_inverse_distance(coords, 2.0);
  EXPECT_LE((w.matrix() - oracle::brute_inverse_distance(pts, 2.0)).cwiseAbs().maxCoeff(), 1e-15);
  for (Index i = 0; i < 4; ++i) {
    std::vector<double> row;
    for (Index j = 0; j < 4; ++j)
      if (j != i) row.push_back(w.matrix()(i, j));
    std::sort(row.begin(), row.end());
    EXPECT_DOUBLE_EQ(row[0], 0.5);
    EXPECT_DOUBLE_EQ(row[1], 1.0);
    EXPECT_DOUBLE_EQ(row[2], 1.0);
  }
}

TEST(InverseDistance, RandomPointsSymmetricAndMonotone) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<std::pair<double, double>> pts;
  std::vector<Coordinate> coords;
  for (int i = 0; i < 12; ++i) {
    pts.emplace_back(u(gen), u(gen));
    coords.push_back({"r" + std::to_string(i), pts.back().first, pts.back().second});
  }
  const auto w = build_inverse_distance(coords, 1.5);
  EXPECT_TRUE(w.matrix().isApprox(w.matrix().transpose(), 0.0));
  EXPECT_LE((w.matrix() - oracle::brute_inverse_distance(pts, 1.5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(w.matrix().diagonal().cwiseAbs().maxCoeff(), 0.0);
  // closer pairs weigh more
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j)
      for (Index k = 0; k < 12; ++k) {
        if (i == j || i == k || j == k) continue;
        const double dj = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
        const double dk = std::hypot(pts[i].first - pts[k].first, pts[i].second - pts[k].second);
        if (dj < dk) EXPECT_GT(w.matrix()(i, j), w.matrix()(i, k));
      }
}

TEST(InverseDistance, Haversine) {
  // one degree of longitude on the equator
  const auto w = build_inverse_distance({{"a", 0.0, 0.0}, {"b", 1.0, 0.0}}, 1.0, Metric::haversine);
  const double km = 6371.0088 * std::numbers::pi / 180.0;
  EXPECT_NEAR(w.matrix()(0, 1), 1.0 / km, 1e-12);
}

TEST(InverseDistance, Errors) {
  EXPECT_EQ(kind_of([] { build_inverse_distance({{"a", 0, 0}, {"b", 0, 0}}); }), ErrorKind::DuplicateCoordinates);
  EXPECT_EQ(kind_of([] { build_inverse_distance(line_fixture(), 0.0); }), ErrorKind::NonPositiveExponent);
  EXPECT_EQ(kind_of([] { build_inverse_distance(line_fixture(), -1.0); }), ErrorKind::NonPositiveExponent);
}

TEST(FromDistances, MatchesCoordinates) {
  const std::vector<DistanceEntry> d{{"a", "b", 1.0}, {"a", "c", 3.0}, {"c", "b", 2.0}};
  const auto w = build_from_distances({"a", "b", "c"}, d, 1.0);
  EXPECT_LE((w.matrix() - build_inverse_distance(line_fixture()).matrix()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(w.metric(), Metric::supplied);
}

TEST(Contiguity, Examples) {
  const auto w1 = build_contiguity({{0, 1}}, 3);
  MatrixXd e1(3, 3);
  e1 << 0, 1, 0, 1, 0, 0, 0, 0, 0;
  EXPECT_EQ(w1.matrix(), e1);
  EXPECT_EQ(build_contiguity({}, 4).matrix(), MatrixXd::Zero(4, 4));
  const auto chain = build_contiguity({{0, 1}, {1, 2}}, 3);
  EXPECT_EQ(chain.matrix().rowwise().sum(), (VectorXd(3) << 1, 2, 1).finished());
  EXPECT_EQ(kind_of([] { build_contiguity({{1, 1}}, 3); }), ErrorKind::SelfNeighbor);
  EXPECT_EQ(kind_of([] { build_contiguity({{0, 3}}, 3); }), ErrorKind::IndexOutOfRange);
}

TEST(RowNormalize, Examples) {
  const WeightMatrix two((MatrixXd(2, 2) << 0, 2, 2, 0).finished(), Metric::supplied, 1, Normalization::none);
  EXPECT_EQ(row_normalize(two).matrix(), (MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  const WeightMatrix zero(MatrixXd::Zero(3, 3), Metric::supplied, 1, Normalization::none);
  EXPECT_EQ(row_normalize(zero).matrix(), MatrixXd::Zero(3, 3));
  const auto w = row_normalize(build_inverse_distance(line_fixture()));
  for (Index i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (Index j = 0; j < 3; ++j) sum += w.matrix()(i, j);
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
  EXPECT_EQ(w.normalization(), Normalization::row);
  EXPECT_LE((row_normalize(w).matrix() - w.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ClusterMask, Examples) {
  const auto w = build_inverse_distance(line_fixture());
  EXPECT_EQ(cluster_mask_matrix(w.matrix(), make_cluster("s", VectorXd::Ones(3))), w.matrix());
  EXPECT_EQ(cluster_mask_matrix(w.matrix(), make_cluster("s", VectorXd::Zero(3))), MatrixXd::Zero(3, 3));
  const VectorXd c = (VectorXd(3) << 0, 1, 0).finished();
  const auto cl = make_cluster("s", c);
  const MatrixXd source = cluster_mask_matrix(w.matrix(), cl, MaskConvention::source);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      EXPECT_EQ(source(i, j), w.matrix()(i, j) * c(j));
      EXPECT_EQ(cluster_mask_matrix(w.matrix(), cl, MaskConvention::target)(i, j), w.matrix()(i, j) * c(i));
      EXPECT_EQ(cluster_mask_matrix(w.matrix(), cl, MaskConvention::both)(i, j), w.matrix()(i, j) * c(i) * c(j));
    }
  EXPECT_EQ(source, oracle::masked(w.matrix(), c));
  EXPECT_THROW(make_cluster("s", (VectorXd(2) << 0.5, 1).finished()), Error);
}

TEST(Spectrum, Bounds) {
  const auto w = build_contiguity({{0, 1}}, 2);
  const auto s = spectrum(w);
  EXPECT_NEAR(s.rho_lower, -1.0, 1e-12);
  EXPECT_NEAR(s.rho_upper, 1.0, 1e-12);
  const auto rn = spectrum(row_normalize(build_inverse_distance(line_fixture())));
  EXPECT_EQ(rn.rho_lower, -1.0);
  EXPECT_EQ(rn.rho_upper, 1.0);
  // star graph: eigenvalues +-sqrt(3)
  const auto star = spectrum(build_contiguity({{0, 1}, {0, 2}, {0, 3}}, 4));
  EXPECT_NEAR(star.rho_upper, 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(star.rho_lower, -1.0 / std::sqrt(3.0), 1e-12);
}

TEST(WeightMatrix, Validation) {
  EXPECT_THROW(WeightMatrix((MatrixXd(2, 2) << 1, 0, 0, 0).finished(), Metric::supplied, 1, Normalization::none), Error);
  EXPECT_THROW(WeightMatrix((MatrixXd(2, 2) << 0, -1, 0, 0).finished(), Metric::supplied, 1, Normalization::none), Error);
  const auto w = build_inverse_distance(line_fixture());
  const auto r = w.aligned_to({"c", "a", "b"});
  EXPECT_EQ(r.matrix()(0, 1), w.matrix()(2, 0));
  EXPECT_EQ(r.matrix()(1, 2), w.matrix()(0, 1));
  EXPECT_THROW(w.aligned_to({"a", "b", "z"}), Error);
}
