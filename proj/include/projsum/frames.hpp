#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "scalar.hpp"

namespace projsum {

namespace detail {

/// Orthonormal eigenvectors of a symmetric matrix for eigenvalues above
/// `cut`, with each column's largest entry made positive.
inline Mat eigen_frame(const Mat& m, double cut) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = es.eigenvalues().size() - 1; k >= 0; --k)
    if (es.eigenvalues()(k) > cut) keep.push_back(k);
  Mat f(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Vec c = es.eigenvectors().col(keep[k]);
    Eigen::Index at = 0;
    c.cwiseAbs().maxCoeff(&at);
    if (c(at) < 0) c = -c;
    f.col(static_cast<Eigen::Index>(k)) = c;
  }
  return f;
}

inline Mat psd_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
  Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline Mat range_projection(const Mat& a, double cut = 1e-10) {
  Mat f = eigen_frame(a, cut * std::max(1.0, a.norm()));
  return f * f.transpose();
}

}  // namespace detail

/// V maps the space of A into C^n with V^T V = R_A; the E_j are coordinate
/// blocks of C^n summing to the identity.
struct IsometryCertificate {
  Mat v;
  std::vector<Mat> partition;
  double range_residual = 0.0;        // ||V^T V - R_A||
  double compression_residual = 0.0;  // ||sum E_j V A V^T E_j - I||
  long long dimension = 0;            // n = Tr A
};

inline double compression_residual(const Mat& v, const std::vector<Mat>& partition, const Mat& a) {
  const Mat vav = v * a * v.transpose();
  Mat sum = Mat::Zero(vav.rows(), vav.cols());
  for (const auto& e : partition) sum += e * vav * e;
  return (sum - Mat::Identity(vav.rows(), vav.cols())).norm();
}

inline IsometryCertificate decomposition_to_isometry(const Mat& a, const std::vector<Mat>& projections, double tol = 1e-9) {
  require(a.rows() == a.cols(), ErrorCode::InvalidArgument, "decomposition_to_isometry: A must be square");
  Mat sum = Mat::Zero(a.rows(), a.cols());
  for (const auto& p : projections) {
    require(p.rows() == a.rows() && p.cols() == a.cols(), ErrorCode::InvalidArgument, "decomposition_to_isometry: projection shape mismatch");
    sum += p;
  }
  const double trace = a.trace();
  const long long n = std::llround(trace);
  require(std::abs(trace - static_cast<double>(n)) <= tol, ErrorCode::Infeasible,
          "decomposition_to_isometry: Tr A = " + to_string(trace) + " is not an integer");
  require((sum - a).norm() <= tol, ErrorCode::Precondition,
          "decomposition_to_isometry: projections sum to A only up to " + to_string((sum - a).norm()));

  std::vector<Mat> frames;
  Eigen::Index total = 0;
  for (const auto& p : projections) {
    frames.push_back(detail::eigen_frame(p, 0.5));
    total += frames.back().cols();
  }
  require(total == n, ErrorCode::Precondition,
          "decomposition_to_isometry: projection ranks add to " + std::to_string(total) + ", not Tr A = " + std::to_string(n));

  IsometryCertificate cert;
  cert.dimension = n;
  Mat b = Mat::Zero(n, a.cols());
  Eigen::Index offset = 0;
  for (const auto& f : frames) {
    // W_j = C_j F_j^T, C_j the coordinate block at `offset`
    b.middleRows(offset, f.cols()) = f.transpose();
    Mat e = Mat::Zero(n, n);
    for (Eigen::Index k = 0; k < f.cols(); ++k) e(offset + k, offset + k) = 1.0;
    cert.partition.push_back(e);
    offset += f.cols();
  }
  // polar part of B on its row space
  Eigen::JacobiSVD<Mat> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = 1e-10 * std::max(1.0, s.size() ? s(0) : 0.0);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  cert.v = svd.matrixU().leftCols(r) * svd.matrixV().leftCols(r).transpose();
  cert.range_residual = (cert.v.transpose() * cert.v - detail::range_projection(a)).norm();
  cert.compression_residual = compression_residual(cert.v, cert.partition, a);
  return cert;
}

/// P_j = A^{1/2} V^T E_j V A^{1/2}.
inline std::vector<Mat> isometry_to_decomposition(const Mat& v, const std::vector<Mat>& partition, const Mat& a, double tol = 1e-9) {
  require(v.cols() == a.rows() && a.rows() == a.cols(), ErrorCode::InvalidArgument, "isometry_to_decomposition: V and A shapes disagree");
  Mat id_sum = Mat::Zero(v.rows(), v.rows());
  for (const auto& e : partition) {
    require(e.rows() == v.rows() && e.cols() == v.rows(), ErrorCode::InvalidArgument, "isometry_to_decomposition: partition shape mismatch");
    id_sum += e;
  }
  require((id_sum - Mat::Identity(v.rows(), v.rows())).norm() <= tol, ErrorCode::Precondition,
          "isometry_to_decomposition: partition does not sum to the identity (residual " +
              to_string((id_sum - Mat::Identity(v.rows(), v.rows())).norm()) + ")");
  const double range = (v.transpose() * v - detail::range_projection(a)).norm();
  require(range <= tol, ErrorCode::Precondition, "isometry_to_decomposition: V^T V differs from R_A by " + to_string(range));
  const double comp = compression_residual(v, partition, a);
  require(comp <= tol, ErrorCode::Precondition, "isometry_to_decomposition: block compression differs from I by " + to_string(comp));
  const Mat root = detail::psd_sqrt(a);
  std::vector<Mat> out;
  for (const auto& e : partition) out.push_back(root * v.transpose() * e * v * root);
  return out;
}

template <Scalar T>
struct KadisonIndex {
  T a;      // sum of c_n <= 1/2
  T b;      // sum of 1 - c_n over c_n > 1/2
  T index;  // b - a
  bool is_integer = false;
};

template <Scalar T>
KadisonIndex<T> kadison_index(const std::vector<T>& c, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1), half = make_scalar<T>(1, 2);
  KadisonIndex<T> out{zero, zero, zero, false};
  for (std::size_t i = 0; i < c.size(); ++i) {
    require(!(c[i] < zero) && !(c[i] > one), ErrorCode::InvalidArgument,
            "kadison_index: c_" + std::to_string(i) + " = " + to_string(c[i]) + " outside [0, 1]");
    if (c[i] > half)
      out.b += one - c[i];
    else
      out.a += c[i];
  }
  out.index = out.b - out.a;
  out.is_integer = integral_value<T>(out.index, tol).has_value();
  return out;
}

/// Diagonal entries c_n of a projection and unit vectors w_n in the range
/// space with sum c_n w_n w_n^T = identity of rank P.
struct DiagonalExpansion {
  Mat frame;  // isometry onto ran P (columns)
  std::vector<double> c;
  std::vector<Vec> w;

  Mat weighted_sum() const {
    Mat m = Mat::Zero(frame.cols(), frame.cols());
    for (std::size_t n = 0; n < c.size(); ++n) m += c[n] * w[n] * w[n].transpose();
    return m;
  }
};

inline DiagonalExpansion projection_diagonal_expansion(const Mat& p, double tol = 1e-10) {
  require(p.rows() == p.cols(), ErrorCode::InvalidArgument, "projection_diagonal_expansion: square matrix required");
  const double defect = std::max((p * p - p).norm(), (p - p.transpose()).norm());
  require(defect <= tol, ErrorCode::InvalidArgument, "projection_diagonal_expansion: not a projection (residual " + to_string(defect) + ")");
  DiagonalExpansion out;
  out.frame = detail::eigen_frame(p, 0.5);
  const Eigen::Index r = out.frame.cols();
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    const double cn = p(n, n);
    out.c.push_back(cn);
    Vec row = out.frame.row(n).transpose();
    if (cn <= 1e-14 || r == 0)
      out.w.push_back(r == 0 ? Vec() : basis_vector(r, 0));
    else
      out.w.push_back(row / std::sqrt(cn));
  }
  return out;
}

/// Projection onto the span of integer/rational columns, computed exactly by
/// Gram-Schmidt without normalization.
struct ExactProjection {
  std::vector<std::vector<Rational>> entries;
  std::size_t rank = 0;

  std::vector<Rational> diagonal() const {
    std::vector<Rational> d;
    for (std::size_t i = 0; i < entries.size(); ++i) d.push_back(entries[i][i]);
    return d;
  }
  Mat to_matrix() const {
    const auto n = static_cast<Eigen::Index>(entries.size());
    Mat m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) m(i, j) = to_double(entries[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    return m;
  }
};

inline ExactProjection exact_projection(const std::vector<std::vector<Rational>>& columns, std::size_t dim) {
  std::vector<std::vector<Rational>> basis;
  std::vector<Rational> norms;
  for (const auto& col : columns) {
    require(col.size() == dim, ErrorCode::InvalidArgument, "exact_projection: column length differs from the dimension");
    std::vector<Rational> u = col;
    for (std::size_t k = 0; k < basis.size(); ++k) {
      Rational dot = 0;
      for (std::size_t i = 0; i < dim; ++i) dot += basis[k][i] * col[i];
      const Rational f = dot / norms[k];
      for (std::size_t i = 0; i < dim; ++i) u[i] -= f * basis[k][i];
    }
    Rational nn = 0;
    for (const auto& x : u) nn += x * x;
    if (nn == 0) continue;
    basis.push_back(std::move(u));
    norms.push_back(nn);
  }
  ExactProjection out;
  out.rank = basis.size();
  out.entries.assign(dim, std::vector<Rational>(dim, Rational(0)));
  for (std::size_t k = 0; k < basis.size(); ++k)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) out.entries[i][j] += basis[k][i] * basis[k][j] / norms[k];
  return out;
}

}  // namespace projsum
