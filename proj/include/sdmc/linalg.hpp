#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "sdmc/error.hpp"

namespace sdmc {

using Index = Eigen::Index;

/// Least-squares fit through a column-pivoted QR factorisation.
struct LeastSquares {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  /// (X'X)^{-1}
  Eigen::MatrixXd xtx_inverse;
};

/// Factorises X once and solves against any number of right-hand sides.
/// Throws RankDeficient naming the columns that the pivoted QR found to be
/// linear combinations of the others.
class QrSolver {
 public:
  QrSolver(const Eigen::MatrixXd& x, const std::vector<std::string>& names = {})
      : x_(x), qr_(x) {
    qr_.setThreshold(1e-10);
    if (x.rows() < x.cols())
      fail(ErrorKind::RankDeficient,
           "more coefficients (" + std::to_string(x.cols()) + ") than observations (" +
               std::to_string(x.rows()) + ")");
    const Index rank = qr_.rank();
    if (rank < x.cols()) {
      std::string cols;
      const auto& perm = qr_.colsPermutation().indices();
      for (Index j = rank; j < x.cols(); ++j) {
        const Index c = perm(j);
        if (!cols.empty()) cols += ", ";
        cols += (static_cast<std::size_t>(c) < names.size()) ? names[c]
                                                             : "column " + std::to_string(c);
      }
      fail(ErrorKind::RankDeficient, "design matrix is rank deficient (rank " +
                                         std::to_string(rank) + " of " +
                                         std::to_string(x.cols()) +
                                         "); collinear columns: " + cols);
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& y) const { return qr_.solve(y); }

  LeastSquares fit(const Eigen::VectorXd& y) const {
    LeastSquares out;
    out.coefficients = qr_.solve(y);
    out.residuals = y - x_ * out.coefficients;
    out.xtx_inverse = xtx_inverse();
    return out;
  }

  Eigen::MatrixXd xtx_inverse() const {
    const Index k = x_.cols();
    Eigen::MatrixXd r = qr_.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd inner = rinv * rinv.transpose();
    const auto& p = qr_.colsPermutation();
    Eigen::MatrixXd out = p * inner * p.transpose();
    return 0.5 * (out + out.transpose());
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

inline LeastSquares least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  const std::vector<std::string>& names = {}) {
  if (x.rows() != y.size())
    fail(ErrorKind::DimensionMismatch, "design has " + std::to_string(x.rows()) +
                                           " rows but response has " +
                                           std::to_string(y.size()));
  return QrSolver(x, names).fit(y);
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix after projecting it
/// onto the PSD cone. `rank` receives the number of retained eigenvalues.
inline Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& a, Index* rank = nullptr,
                                          bool* repaired = nullptr) {
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const auto& ev = es.eigenvalues();
  const double top = ev.size() ? std::max(0.0, ev.maxCoeff()) : 0.0;
  const double tol = std::max<double>(sym.rows(), 1) * 1e-12 * top;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  Index r = 0;
  bool fixed = false;
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > tol) {
      inv(i) = 1.0 / ev(i);
      ++r;
    } else if (ev(i) < -tol) {
      fixed = true;
    }
  }
  if (rank) *rank = r;
  if (repaired) *repaired = fixed;
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

/// Central-difference Jacobian of a gradient function, symmetrised. Used where
/// closed-form second derivatives are not worth deriving.
inline Eigen::MatrixXd numerical_hessian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const Eigen::VectorXd& at, const Eigen::VectorXd& steps) {
  const Index k = at.size();
  Eigen::MatrixXd h(k, k);
  for (Index j = 0; j < k; ++j) {
    Eigen::VectorXd up = at, down = at;
    up(j) += steps(j);
    down(j) -= steps(j);
    h.col(j) = (gradient(up) - gradient(down)) / (2.0 * steps(j));
  }
  return 0.5 * (h + h.transpose());
}

/// Independent 64-bit stream seed for item `index` of a run seeded by `seed`.
/// Depends only on the pair, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 gen(seq);
  return gen();
}

inline unsigned default_threads() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to per-index slots by the caller; order of execution is
/// unspecified.
inline void parallel_for(Index count, unsigned threads,
                         const std::function<void(Index)>& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || count <= 1) {
    for (Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Index i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sdmc
