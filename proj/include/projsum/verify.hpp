#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "scalar.hpp"
#include "series.hpp"

namespace projsum {

struct VerifyTolerances {
  double projection = 1e-10;
  double reconstruction = 1e-9;
};

struct SymmetricEigen {
  Vec values;    // descending
  Mat vectors;   // columns, matching values
  Spectrum<double> spectrum;  // strictly positive eigenvalues only
  Mat frame;     // eigenvectors of the positive eigenvalues
  double off_diagonal = 0.0;
  int sweeps = 0;
};

namespace detail {

inline double off_norm(const Mat& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline SymmetricEigen jacobi_eigen(const Mat& input, int max_sweeps = 100) {
  require(input.rows() == input.cols(), ErrorCode::InvalidArgument, "jacobi_eigen: square matrix required");
  const Eigen::Index n = input.rows();
  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);
  SymmetricEigen out;
  for (; out.sweeps < max_sweeps; ++out.sweeps) {
    if (detail::off_norm(a) <= 1e-15 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  out.off_diagonal = detail::off_norm(a);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  out.values = Vec(n);
  out.vectors = Mat(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Entry point for dense positive semidefinite input: eigenvalues above the
/// clipping threshold become the spectrum, the rest count as kernel.
inline SymmetricEigen diagonalize_symmetric(const Mat& m, double tol = 1e-10) {
  require(m.rows() == m.cols(), ErrorCode::InvalidArgument, "diagonalize_symmetric: square matrix required");
  const double scale = std::max(1.0, m.norm());
  require((m - m.transpose()).norm() <= tol * scale, ErrorCode::InvalidArgument,
          "diagonalize_symmetric: input is not symmetric (asymmetry " + to_string((m - m.transpose()).norm()) + ")");
  auto e = jacobi_eigen(m);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    require(e.values(k) >= -tol * scale, ErrorCode::InvalidArgument,
            "diagonalize_symmetric: input is indefinite (eigenvalue " + to_string(e.values(k)) + ")");
    if (e.values(k) > tol * scale) keep.push_back(k);
  }
  e.frame = Mat(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    e.frame.col(static_cast<Eigen::Index>(k)) = e.vectors.col(keep[k]);
    e.spectrum.entries.push_back({e.values(keep[k]), 1.0});
  }
  return e;
}

struct ProjectionCheck {
  double idempotency = 0.0;
  double symmetry = 0.0;
  long long rank = 0;

  double worst() const { return std::max(idempotency, symmetry); }
};

inline ProjectionCheck check_projection(const Mat& p, double tol = 1e-10) {
  require(p.rows() == p.cols(), ErrorCode::InvalidArgument, "check_projection: square matrix required");
  ProjectionCheck c;
  c.idempotency = (p * p - p).norm();
  c.symmetry = (p - p.transpose()).norm();
  auto e = jacobi_eigen(p);
  for (Eigen::Index k = 0; k < e.values.size(); ++k)
    if (std::abs(e.values(k)) > std::max(tol, 1e-12)) ++c.rank;
  return c;
}

inline double reconstruct_and_compare(const std::vector<Mat>& projections, const std::optional<Mat>& remainder, const Mat& target) {
  Mat sum = Mat::Zero(target.rows(), target.cols());
  auto add = [&](const Mat& m) {
    require(m.rows() == target.rows() && m.cols() == target.cols(), ErrorCode::InvalidArgument,
            "reconstruct_and_compare: shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + " does not match target " +
                std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
    sum += m;
  };
  for (const auto& p : projections) add(p);
  if (remainder) add(*remainder);
  return (sum - target).norm();
}

struct OverlapProbe {
  std::size_t q = 0, n = 0;
  double stored = 0.0;       // |(v_n, g_q)| from the stored vector
  double closed_form = 0.0;  // product of sigma factors
  double gap() const { return std::abs(stored - closed_form); }
};

/// n is 1-based (v_1 is the anchor), q is 0-based.
template <Scalar T>
OverlapProbe overlap_probe(const RecursionState<T>& run, std::size_t q, std::size_t n) {
  require(n >= 1 && n <= run.history.size(), ErrorCode::InvalidArgument,
          "overlap_probe: n = " + std::to_string(n) + " outside the " + std::to_string(run.history.size()) + " recorded steps");
  OverlapProbe out{q, n, 0.0, 0.0};
  if (q + 1 > n || q >= run.g.size()) return out;
  out.stored = std::abs(run.history[n - 1].dot(run.g[q].as_vector(run.dim)));
  // sigma_j recomputed from the running deviations
  auto sigma = [&](std::size_t j) {
    const double prev = to_double(run.deltas[j - 2]), cur = to_double(run.deltas[j - 1]);
    return (1.0 + prev) * prev / ((1.0 + cur) * (2.0 * prev - cur));
  };
  if (n == 1) {
    out.closed_form = 1.0;
    return out;
  }
  double c = q == 0 ? 1.0 : std::sqrt(std::max(0.0, 1.0 - sigma(q + 1)));
  for (std::size_t i = q + 2; i <= n; ++i) c *= std::sqrt(std::max(0.0, sigma(i)));
  out.closed_form = c;
  return out;
}

struct BruteForce2x2 {
  double rho = 0.0;  // squared f coefficient of the rank-one summand
  double nu = 0.0;   // squared f coefficient of the remainder direction
};

/// Finds the unit w with diag(1+mu, 1-lambda) - w w^T singular and PSD by
/// bisection on the determinant, then reads the remainder direction.
inline BruteForce2x2 brute_force_2x2(double mu, double lambda) {
  require(mu >= 0 && lambda >= 0 && lambda <= 1, ErrorCode::InvalidArgument, "brute_force_2x2: need mu >= 0, 0 <= lambda <= 1");
  const double de = 1.0 + mu, df = 1.0 - lambda;
  auto det = [&](double r) {
    // w = (sqrt(1-r) on e, sqrt(r) on f)
    const double a = de - (1.0 - r), b = -std::sqrt(r * (1.0 - r)), d = df - r;
    return a * d - b * b;
  };
  double lo = 0.0, hi = 1.0;
  if (det(lo) == 0.0) {
    hi = 0.0;
  } else {
    require(det(lo) > 0 && det(hi) <= 0, ErrorCode::Precondition, "brute_force_2x2: determinant has no sign change");
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      (det(mid) > 0 ? lo : hi) = mid;
    }
  }
  BruteForce2x2 out;
  out.rho = 0.5 * (lo + hi);
  const double a = de - (1.0 - out.rho), d = df - out.rho;
  require(a >= -1e-12 && d >= -1e-12, ErrorCode::Precondition, "brute_force_2x2: remainder is not positive");
  const double tr = a + d;
  out.nu = tr <= 1e-300 ? 1.0 : std::max(0.0, d) / tr;
  return out;
}

struct VerificationReport {
  std::vector<ProjectionCheck> projections;
  double reconstruction = 0.0;
  double trace_target = 0.0;
  double trace_sum = 0.0;
  double trace_gap = 0.0;
  std::vector<OverlapProbe> probes;
  VerifyTolerances tolerances;

  double worst_projection() const {
    double w = 0.0;
    for (const auto& p : projections) w = std::max(w, p.worst());
    return w;
  }
  bool passed() const { return worst_projection() < tolerances.projection && reconstruction < tolerances.reconstruction; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["passed"] = passed();
    j["reconstruction_residual"] = reconstruction;
    j["worst_projection_residual"] = worst_projection();
    j["trace"] = {{"target", trace_target}, {"sum", trace_sum}, {"gap", trace_gap}};
    j["tolerances"] = {{"projection", tolerances.projection}, {"reconstruction", tolerances.reconstruction}};
    auto& ps = j["projections"] = nlohmann::json::array();
    for (const auto& p : projections) ps.push_back({{"idempotency", p.idempotency}, {"symmetry", p.symmetry}, {"rank", p.rank}});
    auto& pr = j["overlap_probes"] = nlohmann::json::array();
    for (const auto& p : probes) pr.push_back({{"q", p.q}, {"n", p.n}, {"stored", p.stored}, {"closed_form", p.closed_form}});
    return j;
  }
};

/// Recomputes every number from the raw matrices.
inline VerificationReport verify_decomposition(const Mat& target, const std::vector<Mat>& projections,
                                               const std::optional<Mat>& remainder = std::nullopt, VerifyTolerances tol = {}) {
  VerificationReport r;
  r.tolerances = tol;
  for (const auto& p : projections) {
    r.projections.push_back(check_projection(p, tol.projection));
    r.trace_sum += p.trace();
  }
  r.reconstruction = reconstruct_and_compare(projections, remainder, target);
  r.trace_target = target.trace();
  r.trace_gap = r.trace_target - r.trace_sum;
  return r;
}

inline std::vector<Mat> rank_one_matrices(const std::vector<RankOneProjection>& ps) {
  std::vector<Mat> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.vector * p.vector.transpose());
  return out;
}

}  // namespace projsum
