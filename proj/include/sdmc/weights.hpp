#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"

namespace sdmc {

using Index = Eigen::Index;

enum class Metric { euclidean, haversine, supplied, contiguity };
enum class Normalization { none, row };

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::haversine: return "haversine";
    case Metric::supplied: return "supplied";
    case Metric::contiguity: return "contiguity";
  }
  return "unknown";
}

inline std::string to_string(Normalization n) {
  return n == Normalization::row ? "row" : "none";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "haversine") return Metric::haversine;
  if (s == "supplied") return Metric::supplied;
  if (s == "contiguity") return Metric::contiguity;
  fail(ErrorKind::InvalidArgument, "unknown metric '" + s + "'");
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "row") return Normalization::row;
  fail(ErrorKind::InvalidArgument, "unknown normalization '" + s + "'");
}

/// A region location. For Metric::haversine, x is longitude and y latitude,
/// both in degrees.
struct Coordinate {
  std::string region_id;
  double x = 0.0;
  double y = 0.0;
};

/// Dense N x N spatial weight matrix with a zero diagonal and nonnegative,
/// finite entries. Immutable once constructed.
class WeightMatrix {
 public:
  WeightMatrix() = default;

  WeightMatrix(Eigen::MatrixXd entries, Metric metric, double exponent,
               Normalization normalization,
               std::vector<std::string> region_ids = {})
      : entries_(std::move(entries)),
        metric_(metric),
        exponent_(exponent),
        normalization_(normalization),
        region_ids_(std::move(region_ids)) {
    if (entries_.rows() != entries_.cols())
      fail(ErrorKind::DimensionMismatch, "weight matrix must be square");
    if (!region_ids_.empty() &&
        static_cast<Index>(region_ids_.size()) != entries_.rows())
      fail(ErrorKind::DimensionMismatch,
           "weight matrix region id count does not match its dimension");
    for (Index j = 0; j < entries_.cols(); ++j) {
      for (Index i = 0; i < entries_.rows(); ++i) {
        const double v = entries_(i, j);
        if (!std::isfinite(v) || v < 0.0)
          fail(ErrorKind::NonFiniteValue,
               "weight entries must be finite and nonnegative (entry " +
                   std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (entries_(j, j) != 0.0)
        fail(ErrorKind::InvalidArgument,
             "weight matrix diagonal must be zero (row " + std::to_string(j) +
                 ")");
    }
  }

  Index size() const { return entries_.rows(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  Metric metric() const { return metric_; }
  double exponent() const { return exponent_; }
  Normalization normalization() const { return normalization_; }
  const std::vector<std::string>& region_ids() const { return region_ids_; }

  /// Reorders rows and columns so that region i of the result is
  /// `ids[i]`. Every id must be known to this matrix.
  WeightMatrix aligned_to(const std::vector<std::string>& ids) const {
    if (region_ids_.empty()) {
      if (static_cast<Index>(ids.size()) != size())
        fail(ErrorKind::DimensionMismatch,
             "weight matrix has " + std::to_string(size()) +
                 " regions but the panel has " + std::to_string(ids.size()));
      return WeightMatrix(entries_, metric_, exponent_, normalization_, ids);
    }
    if (ids.size() != region_ids_.size())
      fail(ErrorKind::DimensionMismatch,
           "weight matrix has " + std::to_string(size()) +
               " regions but the panel has " + std::to_string(ids.size()));
    std::unordered_map<std::string, Index> pos;
    for (Index i = 0; i < size(); ++i) pos[region_ids_[i]] = i;
    std::vector<Index> perm(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = pos.find(ids[i]);
      if (it == pos.end())
        fail(ErrorKind::DimensionMismatch,
             "region '" + ids[i] + "' has no row in the weight matrix");
      perm[i] = it->second;
    }
    Eigen::MatrixXd out(size(), size());
    for (Index j = 0; j < size(); ++j)
      for (Index i = 0; i < size(); ++i) out(i, j) = entries_(perm[i], perm[j]);
    return WeightMatrix(std::move(out), metric_, exponent_, normalization_, ids);
  }

 private:
  Eigen::MatrixXd entries_;
  Metric metric_ = Metric::supplied;
  double exponent_ = 1.0;
  Normalization normalization_ = Normalization::none;
  std::vector<std::string> region_ids_;
};

namespace detail {

inline void check_exponent(double exponent) {
  if (!(exponent > 0.0) || !std::isfinite(exponent))
    fail(ErrorKind::NonPositiveExponent,
         "distance decay exponent must be a positive real, got " +
             std::to_string(exponent));
}

inline double haversine_km(const Coordinate& a, const Coordinate& b) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double deg = std::numbers::pi / 180.0;
  const double lat1 = a.y * deg, lat2 = b.y * deg;
  const double dlat = lat2 - lat1, dlon = (b.x - a.x) * deg;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

inline std::vector<std::string> check_coordinates(
    const std::vector<Coordinate>& coords) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> ids;
  ids.reserve(coords.size());
  for (const auto& c : coords) {
    if (!seen.insert(c.region_id).second)
      fail(ErrorKind::InvalidArgument,
           "duplicate region id '" + c.region_id + "' in coordinates");
    if (!std::isfinite(c.x) || !std::isfinite(c.y))
      fail(ErrorKind::NonFiniteValue,
           "non-finite coordinate for region '" + c.region_id + "'");
    ids.push_back(c.region_id);
  }
  return ids;
}

}  // namespace detail

/// W_ij = 1 / d_ij^exponent for i != j. Each unordered pair's distance is
/// computed once so the result is exactly symmetric.
inline WeightMatrix build_inverse_distance(const std::vector<Coordinate>& coords,
                                           double exponent = 1.0,
                                           Metric metric = Metric::euclidean) {
  detail::check_exponent(exponent);
  if (coords.size() < 2)
    fail(ErrorKind::InvalidArgument, "need at least two regions");
  if (metric != Metric::euclidean && metric != Metric::haversine)
    fail(ErrorKind::InvalidArgument,
         "coordinates support the euclidean or haversine metric only");
  auto ids = detail::check_coordinates(coords);
  const Index n = static_cast<Index>(coords.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double d =
          metric == Metric::haversine
              ? detail::haversine_km(coords[i], coords[j])
              : std::hypot(coords[i].x - coords[j].x, coords[i].y - coords[j].y);
      if (!(d > 0.0))
        fail(ErrorKind::DuplicateCoordinates,
             "regions '" + coords[i].region_id + "' and '" +
                 coords[j].region_id + "' share a location (distance 0)");
      const double v = 1.0 / std::pow(d, exponent);
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return WeightMatrix(std::move(w), metric, exponent, Normalization::none,
                      std::move(ids));
}

struct DistanceEntry {
  std::string region_i;
  std::string region_j;
  double distance = 0.0;
};

/// Inverse-distance weights from a precomputed distance list. A pair given in
/// one direction only is mirrored; every off-diagonal pair must be covered.
inline WeightMatrix build_from_distances(const std::vector<std::string>& region_ids,
                                         const std::vector<DistanceEntry>& distances,
                                         double exponent = 1.0) {
  detail::check_exponent(exponent);
  const Index n = static_cast<Index>(region_ids.size());
  if (n < 2) fail(ErrorKind::InvalidArgument, "need at least two regions");
  std::unordered_map<std::string, Index> pos;
  for (Index i = 0; i < n; ++i)
    if (!pos.emplace(region_ids[i], i).second)
      fail(ErrorKind::InvalidArgument,
           "duplicate region id '" + region_ids[i] + "'");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, nan);
  for (const auto& e : distances) {
    auto a = pos.find(e.region_i), b = pos.find(e.region_j);
    if (a == pos.end() || b == pos.end())
      fail(ErrorKind::IndexOutOfRange, "distance entry references unknown region '" +
                                           (a == pos.end() ? e.region_i : e.region_j) +
                                           "'");
    if (a->second == b->second) continue;
    if (!std::isfinite(e.distance) || e.distance < 0.0)
      fail(ErrorKind::NonFiniteValue, "invalid distance between '" + e.region_i +
                                          "' and '" + e.region_j + "'");
    d(a->second, b->second) = e.distance;
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double dij = d(i, j);
      if (std::isnan(dij)) dij = d(j, i);
      if (std::isnan(dij))
        fail(ErrorKind::InvalidArgument, "no distance given between '" +
                                             region_ids[i] + "' and '" +
                                             region_ids[j] + "'");
      if (dij == 0.0)
        fail(ErrorKind::DuplicateCoordinates, "regions '" + region_ids[i] +
                                                  "' and '" + region_ids[j] +
                                                  "' are at distance 0");
      w(i, j) = 1.0 / std::pow(dij, exponent);
    }
  }
  return WeightMatrix(std::move(w), Metric::supplied, exponent,
                      Normalization::none, region_ids);
}

/// Binary contiguity: W_ij = W_ji = 1 iff (i, j) or (j, i) is listed.
inline WeightMatrix build_contiguity(const std::vector<std::pair<Index, Index>>& pairs,
                                     Index n,
                                     std::vector<std::string> region_ids = {}) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "region count must be positive");
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      fail(ErrorKind::IndexOutOfRange, "neighbour pair (" + std::to_string(i) +
                                           "," + std::to_string(j) +
                                           ") outside 0.." + std::to_string(n - 1));
    if (i == j)
      fail(ErrorKind::SelfNeighbor,
           "region " + std::to_string(i) + " listed as its own neighbour");
    w(i, j) = 1.0;
    w(j, i) = 1.0;
  }
  return WeightMatrix(std::move(w), Metric::contiguity, 1.0, Normalization::none,
                      std::move(region_ids));
}

/// Divides each nonzero row by its sum; all-zero rows stay zero.
inline WeightMatrix row_normalize(const WeightMatrix& w) {
  Eigen::MatrixXd m = w.matrix();
  for (Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (s > 0.0) m.row(i) /= s;
  }
  return WeightMatrix(std::move(m), w.metric(), w.exponent(), Normalization::row,
                      w.region_ids());
}

/// Membership of each region in one sector's cluster; time-invariant.
struct ClusterIndicator {
  std::string sector_id;
  Eigen::VectorXd membership;
};

inline ClusterIndicator make_cluster(std::string sector_id, Eigen::VectorXd membership) {
  for (Index i = 0; i < membership.size(); ++i)
    if (membership(i) != 0.0 && membership(i) != 1.0)
      fail(ErrorKind::InvalidArgument, "cluster '" + sector_id +
                                           "' membership must be 0 or 1 (region " +
                                           std::to_string(i) + ")");
  return ClusterIndicator{std::move(sector_id), std::move(membership)};
}

/// How the membership vector c is broadcast to the N x N mask C.
///   source: C_ij = c_j (the neighbour j hosts the cluster)
///   target: C_ij = c_i
///   both:   C_ij = c_i * c_j
enum class MaskConvention { source, target, both };

inline std::string to_string(MaskConvention m) {
  switch (m) {
    case MaskConvention::source: return "source";
    case MaskConvention::target: return "target";
    case MaskConvention::both: return "both";
  }
  return "unknown";
}

inline MaskConvention mask_convention_from_string(const std::string& s) {
  if (s == "source") return MaskConvention::source;
  if (s == "target") return MaskConvention::target;
  if (s == "both") return MaskConvention::both;
  fail(ErrorKind::InvalidArgument, "unknown mask convention '" + s + "'");
}

/// Hadamard product W .* C as a plain matrix.
inline Eigen::MatrixXd cluster_mask_matrix(const Eigen::MatrixXd& w,
                                           const ClusterIndicator& c,
                                           MaskConvention conv = MaskConvention::source) {
  if (c.membership.size() != w.rows())
    fail(ErrorKind::DimensionMismatch,
         "cluster '" + c.sector_id + "' covers " +
             std::to_string(c.membership.size()) + " regions, weights have " +
             std::to_string(w.rows()));
  const auto& m = c.membership;
  switch (conv) {
    case MaskConvention::source:
      return w * m.asDiagonal();
    case MaskConvention::target:
      return m.asDiagonal() * w;
    case MaskConvention::both:
      return m.asDiagonal() * w * m.asDiagonal();
  }
  return w;
}

inline WeightMatrix mask_by_cluster(const WeightMatrix& w, const ClusterIndicator& c,
                                    MaskConvention conv = MaskConvention::source) {
  return WeightMatrix(cluster_mask_matrix(w.matrix(), c, conv), w.metric(),
                      w.exponent(), w.normalization(), w.region_ids());
}

/// Eigenvalues of W and the admissible open interval for the spatial
/// autoregressive parameter.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double rho_lower = -1.0;
  double rho_upper = 1.0;

  bool admissible(double rho) const { return rho > rho_lower && rho < rho_upper; }
};

inline Spectrum spectrum(const WeightMatrix& w) {
  Spectrum s;
  const auto& m = w.matrix();
  const Index n = m.rows();
  s.eigenvalues.reserve(n);
  if (m.isApprox(m.transpose(), 0.0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    for (Index i = 0; i < n; ++i) s.eigenvalues.emplace_back(es.eigenvalues()(i), 0.0);
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    for (Index i = 0; i < n; ++i) s.eigenvalues.push_back(es.eigenvalues()(i));
  }
  if (w.normalization() == Normalization::row) {
    s.rho_lower = -1.0;
    s.rho_upper = 1.0;
    return s;
  }
  // Extreme real eigenvalues; imaginary parts below this are roundoff.
  const double scale = std::max(1.0, m.cwiseAbs().rowwise().sum().maxCoeff());
  const double imag_tol = 1e-10 * scale;
  double lmin = 0.0, lmax = 0.0;
  for (const auto& l : s.eigenvalues) {
    if (std::abs(l.imag()) > imag_tol) continue;
    lmin = std::min(lmin, l.real());
    lmax = std::max(lmax, l.real());
  }
  if (lmax > 0.0 && lmin < 0.0) {
    s.rho_lower = 1.0 / lmin;
    s.rho_upper = 1.0 / lmax;
  } else if (lmax > 0.0) {
    s.rho_lower = -1.0 / lmax;
    s.rho_upper = 1.0 / lmax;
  } else if (lmin < 0.0) {
    s.rho_lower = 1.0 / lmin;
    s.rho_upper = -1.0 / lmin;
  }
  return s;
}

}  // namespace sdmc
