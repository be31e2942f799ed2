#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

namespace projsum {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat outer(const Vec& v) { return v * v.transpose(); }

inline Vec basis_vector(Eigen::Index dim, Eigen::Index i) {
  Vec v = Vec::Zero(dim);
  v(i) = 1.0;
  return v;
}

/// Rank-one projection v (x) v, stored by its unit vector.
struct RankOneProjection {
  Vec vector;

  Mat matrix() const { return outer(vector); }
  Eigen::Index dim() const { return vector.size(); }
};

/// Projection of arbitrary rank, stored by an orthonormal frame (columns).
struct Projection {
  Mat frame;

  Mat matrix() const { return frame * frame.transpose(); }
  Eigen::Index dim() const { return frame.rows(); }
  Eigen::Index rank() const { return frame.cols(); }

  static Projection from_vector(const Vec& v) {
    Projection p;
    p.frame = v;
    return p;
  }
};

/// Grows a vector with zeros to the requested dimension.
inline Vec padded(const Vec& v, Eigen::Index dim) {
  Vec out = Vec::Zero(dim);
  out.head(v.size()) = v;
  return out;
}

inline Mat diagonal_matrix(const std::vector<double>& d) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = d[i];
  return m;
}

}  // namespace projsum
