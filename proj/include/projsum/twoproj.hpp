#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "scalar.hpp"

namespace projsum {

/// Index pairing between eigenvalues t in (0,1) and 2-t; indices refer to
/// the expanded diagonal.
struct SymmetryPairing {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (t index, 2-t index)
  std::vector<std::size_t> fixed_unit;
  std::vector<std::size_t> doubled;
  std::size_t dim = 0;

  /// Permutation matrix swapping each t coordinate with its 2-t partner.
  Mat flip() const {
    Mat u = Mat::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (auto [a, b] : pairs) {
      const auto i = static_cast<Eigen::Index>(a), j = static_cast<Eigen::Index>(b);
      u(i, i) = u(j, j) = 0.0;
      u(i, j) = u(j, i) = 1.0;
    }
    return u;
  }
};

/// Raised when some t in (0,1) has no matching 2-t.
class AsymmetryError : public Error {
 public:
  AsymmetryError(std::string witness, double witness_value, const std::string& what)
      : Error(ErrorCode::Infeasible, what), witness_(std::move(witness)), value_(witness_value) {}
  const std::string& witness() const noexcept { return witness_; }
  double witness_value() const noexcept { return value_; }

 private:
  std::string witness_;
  double value_;
};

template <Scalar T>
SymmetryPairing symmetry_pairing(const std::vector<T>& values, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1), two = make_scalar<T>(2);
  SymmetryPairing out;
  out.dim = values.size();
  std::vector<std::size_t> below, above;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T& x = values[i];
    require(x > zero && !(x > two) && !approx_eq<T>(x, zero, tol), ErrorCode::InvalidArgument,
            "symmetry_pairing: eigenvalue " + to_string(x) + " outside (0, 2]");
    if (approx_eq<T>(x, one, tol))
      out.fixed_unit.push_back(i);
    else if (approx_eq<T>(x, two, tol))
      out.doubled.push_back(i);
    else
      (x < one ? below : above).push_back(i);
  }
  auto by_value = [&](std::size_t a, std::size_t b) { return values[a] < values[b]; };
  std::sort(below.begin(), below.end(), by_value);
  // partner of ascending t is descending 2-t
  std::sort(above.begin(), above.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<std::size_t> lone_below, lone_above;
  std::size_t i = 0, j = 0;
  while (i < below.size() || j < above.size()) {
    if (j == above.size()) {
      lone_below.push_back(below[i++]);
      continue;
    }
    if (i == below.size()) {
      lone_above.push_back(above[j++]);
      continue;
    }
    const T& t = values[below[i]];
    const T mirror = T(two - values[above[j]]);
    if (approx_eq<T>(t, mirror, tol))
      out.pairs.push_back({below[i++], above[j++]});
    else if (t < mirror)
      lone_below.push_back(below[i++]);
    else
      lone_above.push_back(above[j++]);
  }
  if (!lone_below.empty() || !lone_above.empty()) {
    const T witness = lone_below.empty() ? T(two - values[lone_above.front()]) : values[lone_below.front()];
    throw AsymmetryError(to_string(witness), to_double(witness),
                         "symmetry_pairing: multiplicity of t = " + to_string(witness) + " differs from that of 2 - t = " +
                             to_string(T(two - witness)));
  }
  return out;
}

template <Scalar T>
SymmetryPairing symmetry_pairing(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  spectrum.validate();
  require(spectrum.is_finite(), ErrorCode::InvalidArgument, "symmetry_pairing: finite spectrum required");
  return symmetry_pairing(spectrum.expanded_values(), tol);
}

struct TwoProjections {
  Mat target;
  Projection p;
  Projection q;

  Mat p_matrix() const { return p.matrix(); }
  Mat q_matrix() const { return q.matrix(); }
  double sum_residual() const { return (p_matrix() + q_matrix() - target).norm(); }
};

/// P = P_- + chi{1} + chi{2}, Q = P_+ + chi{2}; on a t / 2-t plane the unit
/// vectors are (sqrt(t/2), -+sqrt(1-t/2)) in (t coord, 2-t coord).
template <Scalar T>
TwoProjections build_two_projections(const std::vector<T>& values, const SymmetryPairing& pairing) {
  require(pairing.dim == values.size(), ErrorCode::InvalidArgument, "build_two_projections: pairing does not match the spectrum");
  const auto dim = static_cast<Eigen::Index>(values.size());
  std::vector<Vec> p_cols, q_cols;
  for (auto [lo, hi] : pairing.pairs) {
    const double t = to_double(values[lo]);
    const double a = std::sqrt(t / 2.0), b = std::sqrt(1.0 - t / 2.0);
    Vec minus = Vec::Zero(dim), plus = Vec::Zero(dim);
    minus(static_cast<Eigen::Index>(lo)) = a;
    minus(static_cast<Eigen::Index>(hi)) = -b;
    plus(static_cast<Eigen::Index>(lo)) = a;
    plus(static_cast<Eigen::Index>(hi)) = b;
    p_cols.push_back(minus);
    q_cols.push_back(plus);
  }
  for (auto i : pairing.fixed_unit) p_cols.push_back(basis_vector(dim, static_cast<Eigen::Index>(i)));
  for (auto i : pairing.doubled) {
    p_cols.push_back(basis_vector(dim, static_cast<Eigen::Index>(i)));
    q_cols.push_back(basis_vector(dim, static_cast<Eigen::Index>(i)));
  }
  auto frame_of = [dim](const std::vector<Vec>& cols) {
    Projection pr;
    pr.frame = Mat::Zero(dim, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) pr.frame.col(static_cast<Eigen::Index>(k)) = cols[k];
    return pr;
  };
  TwoProjections out;
  out.target = Mat::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) out.target(i, i) = to_double(values[static_cast<std::size_t>(i)]);
  out.p = frame_of(p_cols);
  out.q = frame_of(q_cols);
  return out;
}

template <Scalar T>
TwoProjections two_projections(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  auto values = spectrum.expanded_values();
  return build_two_projections(values, symmetry_pairing(spectrum, tol));
}

}  // namespace projsum
