#pragma once

// The 2x2 engine: splitting (1+mu) e(x)e + (1-lambda) f(x)f into a rank-one
// projection plus a multiple of another, and its rebalancing variants.

#include <Eigen/Eigenvalues>

#include <cstddef>
#include <string>
#include <utility>

#include "projsum/error.hpp"
#include "projsum/linalg.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

template <Scalar T>
struct NuRho {
  T nu;
  T rho;
};

/// Mixing weights for the split of (1+mu) e(x)e + (1-lambda) f(x)f.
template <Scalar T>
NuRho<T> nu_rho(const T& mu, const T& lambda) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(!(mu < zero), ErrorCode::InvalidArgument, "nu_rho: mu must be >= 0, got " + to_string(mu));
  require(!(lambda < zero) && !(lambda > one), ErrorCode::InvalidArgument,
          "nu_rho: lambda must lie in [0,1], got " + to_string(lambda));
  if (mu == zero) return {one, zero};
  T nu = (one - lambda) * lambda / ((one + mu - lambda) * (mu + lambda));
  T rho = (one - lambda) * mu / (mu + lambda);
  return {nu, rho};
}

/// Result of splitting the pair (e, f).  Coefficients are on (f, e):
/// w = sqrt(rho) f - sqrt(1-rho) e, v = sqrt(nu) f + sqrt(1-nu) e.
template <Scalar T>
struct PairSplit {
  T nu;
  T rho;
  T remainder_coeff;  // 1 + mu - lambda
  double w_f, w_e;
  double v_f, v_e;
  std::size_t e_index = 0, f_index = 1;

  Vec w_vector(Eigen::Index dim) const {
    Vec x = Vec::Zero(dim);
    x(static_cast<Eigen::Index>(f_index)) = w_f;
    x(static_cast<Eigen::Index>(e_index)) = w_e;
    return x;
  }
  Vec v_vector(Eigen::Index dim) const {
    Vec x = Vec::Zero(dim);
    x(static_cast<Eigen::Index>(f_index)) = v_f;
    x(static_cast<Eigen::Index>(e_index)) = v_e;
    return x;
  }
  /// w and v for arbitrary orthonormal e, f.
  std::pair<Vec, Vec> combine(const Vec& e, const Vec& f) const { return {w_f * f + w_e * e, v_f * f + v_e * e}; }
};

template <Scalar T>
PairSplit<T> split_pair(const T& mu, const T& lambda, std::size_t e_index = 0, std::size_t f_index = 1) {
  require(e_index != f_index, ErrorCode::InvalidArgument, "split_pair: e and f must be distinct coordinates");
  auto [nu, rho] = nu_rho(mu, lambda);
  const T one = make_scalar<T>(1);
  PairSplit<T> s{nu, rho, T(one + mu - lambda), 0, 0, 0, 0, e_index, f_index};
  s.w_f = sqrt_d(rho);
  s.w_e = -sqrt_d(T(one - rho));
  s.v_f = sqrt_d(nu);
  s.v_e = sqrt_d(T(one - nu));
  return s;
}

template <Scalar T>
struct Rebalance {
  T rho;
  T nu;
};

/// Weights for b E + a F = c P- + (a+b-c) P+, with P-/P+ patterned on E, F and
/// a partial isometry between them.
template <Scalar T>
Rebalance<T> rebalance(const T& a, const T& b, const T& c) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(!(a < zero), ErrorCode::InvalidArgument, "rebalance: a must be >= 0");
  require(!(c < a) && !(b < c), ErrorCode::InvalidArgument,
          "rebalance: need a <= c <= b, got a=" + to_string(a) + " b=" + to_string(b) + " c=" + to_string(c));
  if (b == c) return {zero, one};
  if (a == zero) return {zero, zero};
  return {T(a * (b - c) / (c * (b - a))), T(a * (c - a) / ((a + b - c) * (b - a)))};
}

/// Unit vectors of P- and P+ on the pair (E, F).
template <Scalar T>
std::pair<Eigen::Vector2d, Eigen::Vector2d> rebalance_vectors(const Rebalance<T>& r) {
  const T one = make_scalar<T>(1);
  Eigen::Vector2d minus(sqrt_d(T(one - r.rho)), -sqrt_d(r.rho));
  Eigen::Vector2d plus(sqrt_d(T(one - r.nu)), sqrt_d(r.nu));
  return {minus, plus};
}

/// a P + b Q = c P' + (a+b-c) Q' for rank-one P, Q (not necessarily orthogonal).
inline std::pair<RankOneProjection, RankOneProjection> rebalance_rank_one(double a, const RankOneProjection& p, double b,
                                                                          const RankOneProjection& q, double c) {
  require(a >= 0 && a <= c && c <= b, ErrorCode::InvalidArgument, "rebalance_rank_one: need 0 <= a <= c <= b");
  require(p.dim() == q.dim(), ErrorCode::InvalidArgument, "rebalance_rank_one: dimension mismatch");
  const Vec& x = p.vector;
  const Vec& y = q.vector;
  Vec y_perp = y - x.dot(y) * x;
  if (y_perp.norm() < 1e-12) return {p, p};
  y_perp.normalize();
  // 2x2 block of aP + bQ on the orthonormal basis (x, y_perp)
  Eigen::Vector2d xc(1.0, 0.0), yc(x.dot(y), y_perp.dot(y));
  Eigen::Matrix2d block = a * xc * xc.transpose() + b * yc * yc.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(block);
  const double small = eig.eigenvalues()(0), big = eig.eigenvalues()(1);
  const Eigen::Vector2d small_vec = eig.eigenvectors().col(0), big_vec = eig.eigenvectors().col(1);
  Vec e_big = big_vec(0) * x + big_vec(1) * y_perp;
  Vec f_small = small_vec(0) * x + small_vec(1) * y_perp;
  // clamp so that small <= c <= big survives rounding
  auto r = rebalance<double>(std::min(std::max(small, 0.0), c), std::max(big, c), c);
  auto [minus, plus] = rebalance_vectors(r);
  RankOneProjection p_new{minus(0) * e_big + minus(1) * f_small};
  RankOneProjection q_new{plus(0) * e_big + plus(1) * f_small};
  return {p_new, q_new};
}

namespace detail {
// Orthonormal basis of the range of a (numerical) projection matrix.
inline Mat range_frame(const Mat& proj) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (proj + proj.transpose()));
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > 0.5) ++count;
  Mat f(proj.rows(), count);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()(i) > 0.5) f.col(k++) = eig.eigenvectors().col(i);
  return f;
}
}  // namespace detail

/// a P + b Q = c P' + (a+b-c) Q' for commuting projections with
/// rank(P - PQ) = rank(Q - PQ).
inline std::pair<Projection, Projection> rebalance_commuting(double a, const Projection& p, double b, const Projection& q,
                                                             double c) {
  require(a >= 0 && a < b && a <= c && c <= b, ErrorCode::InvalidArgument,
          "rebalance_commuting: need 0 <= a < b and a <= c <= b");
  require(p.dim() == q.dim(), ErrorCode::InvalidArgument, "rebalance_commuting: dimension mismatch");
  const Mat pm = p.matrix(), qm = q.matrix();
  const Mat pq = pm * qm;
  require((pq - qm * pm).norm() <= 1e-10, ErrorCode::Precondition, "rebalance_commuting: P and Q do not commute");
  const Mat only_p = detail::range_frame(pm - pq);
  const Mat only_q = detail::range_frame(qm - pq);
  const Mat common = detail::range_frame(pq);
  require(only_p.cols() == only_q.cols(), ErrorCode::Precondition,
          "rebalance_commuting: rank(P-PQ) = " + std::to_string(only_p.cols()) + " differs from rank(Q-PQ) = " +
              std::to_string(only_q.cols()));
  // b (Q-PQ) + a (P-PQ): Q-PQ plays E, P-PQ plays F, columns paired in order
  auto r = rebalance<double>(a, b, c);
  auto [minus, plus] = rebalance_vectors(r);
  const Eigen::Index r_cols = only_p.cols(), shared = common.cols();
  Projection p_new, q_new;
  p_new.frame.resize(pm.rows(), r_cols + shared);
  q_new.frame.resize(pm.rows(), r_cols + shared);
  for (Eigen::Index k = 0; k < r_cols; ++k) {
    p_new.frame.col(k) = minus(0) * only_q.col(k) + minus(1) * only_p.col(k);
    q_new.frame.col(k) = plus(0) * only_q.col(k) + plus(1) * only_p.col(k);
  }
  p_new.frame.rightCols(shared) = common;
  q_new.frame.rightCols(shared) = common;
  return {p_new, q_new};
}

}  // namespace projsum
