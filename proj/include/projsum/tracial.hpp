#pragma once

// Type II machinery at trace level: the balanced iteration for
// (1+mu)E + (1-lambda)F, the three-way split for a strict surplus, the
// water-filling matcher for diagonalizable spectra, and a realization inside
// the N x N matrices with normalized trace.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "projsum/core.hpp"
#include "projsum/error.hpp"
#include "projsum/linalg.hpp"
#include "projsum/pairsplit.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

template <Scalar T>
struct TraceState {
  T mu{}, lambda{}, tauE{}, tauF{};

  bool balanced(double tol = kFloatTol) const { return approx_eq<T>(T(mu * tauE), T(lambda * tauF), tol); }
};

enum class Branch { LowerLambda, LowerMu };  // mu < lambda, mu > lambda

inline const char* to_string(Branch b) { return b == Branch::LowerLambda ? "lower_lambda" : "lower_mu"; }

enum class IterationStatus { TerminatedEqual, Running };

inline const char* to_string(IterationStatus s) { return s == IterationStatus::TerminatedEqual ? "terminated_equal" : "running"; }

template <Scalar T>
struct Iteration {
  std::vector<TraceState<T>> states;  // states[0] is the input
  std::vector<Branch> branches;       // branch taken from states[k] to states[k+1]
  IterationStatus status = IterationStatus::Running;

  std::size_t steps() const { return branches.size(); }
  /// Projections used when terminated: one per step plus the final two.
  std::size_t projection_count() const { return status == IterationStatus::TerminatedEqual ? steps() + 2 : steps(); }
  /// Trace of the projection R_{k+1} split off at step k.
  T split_trace(std::size_t k) const { return branches[k] == Branch::LowerLambda ? states[k].tauF : states[k].tauE; }
};

/// Iterates the balanced state until mu = lambda or max_steps.
template <Scalar T>
Iteration<T> lemma51_iterate(const TraceState<T>& start, std::size_t max_steps, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(start.mu > zero && start.lambda > zero && start.lambda < one, ErrorCode::InvalidArgument,
          "lemma51_iterate: need mu > 0 and 0 < lambda < 1");
  require(start.tauE > zero && start.tauF > zero, ErrorCode::InvalidArgument, "lemma51_iterate: traces must be positive");
  require(start.balanced(tol), ErrorCode::Precondition,
          "lemma51_iterate: unbalanced input, mu tau(E) = " + to_string(T(start.mu * start.tauE)) + " but lambda tau(F) = " +
              to_string(T(start.lambda * start.tauF)));
  Iteration<T> it;
  it.states.push_back(start);
  for (std::size_t k = 0;; ++k) {
    const auto& s = it.states.back();
    const int c = sign_of<T>(T(s.mu - s.lambda), tol);
    if (c == 0) {
      it.status = IterationStatus::TerminatedEqual;
      break;
    }
    if (k >= max_steps) break;
    TraceState<T> next = s;
    if (c < 0) {
      next.lambda = T(s.lambda - s.mu);
      next.tauE = T(s.tauE - s.tauF);
      it.branches.push_back(Branch::LowerLambda);
    } else {
      next.mu = T(s.mu - s.lambda);
      next.tauF = T(s.tauF - s.tauE);
      it.branches.push_back(Branch::LowerMu);
    }
    if constexpr (is_exact_v<T>) {
      require(next.balanced(0.0), ErrorCode::Precondition, "lemma51_iterate: balance lost (internal)");
    }
    it.states.push_back(next);
  }
  return it;
}

/// E = E1 + E2 + E3 for a strict surplus mu tau(E) > lambda tau(F).
template <Scalar T>
struct GeneralSplit {
  T tauE1{}, tauE2{}, tauE3{};
  long long floor_mu = 0;
  TraceState<T> a1;               // (1+mu)E1 + (1-lambda)F; only meaningful if tauE1 > 0
  std::optional<TraceState<T>> a2;  // balanced (1+mu)E3 + (mu - floor mu)E2, absent when mu is an integer
  long long a2_copies = 0;          // mu integer: A2 = (1+mu) E3
  long long a3_copies = 0;          // A3 = (1 + floor mu) E2
};

template <Scalar T>
GeneralSplit<T> lemma51_general_split(const T& mu, const T& lambda, const T& tauE, const T& tauF, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(mu > zero && !(lambda < zero) && lambda < one, ErrorCode::InvalidArgument,
          "lemma51_general_split: need mu > 0 and 0 <= lambda < 1");
  require(tauE > zero && !(tauF < zero), ErrorCode::InvalidArgument, "lemma51_general_split: invalid traces");
  const T surplus = T(mu * tauE - lambda * tauF);
  require(sign_of<T>(surplus, tol) > 0, ErrorCode::Precondition,
          sign_of<T>(surplus, tol) == 0 ? "lemma51_general_split: balanced input, use lemma51_iterate"
                                        : "lemma51_general_split: defect exceeds excess, infeasible");
  GeneralSplit<T> g;
  g.floor_mu = static_cast<long long>(to_double(floor_of(mu)));
  if constexpr (!is_exact_v<T>) {
    if (auto r = integral_value<T>(mu, tol)) g.floor_mu = *r;
  }
  const T fl = make_scalar<T>(g.floor_mu);
  g.tauE1 = T(lambda * tauF / mu);
  g.tauE2 = T(surplus / (one + fl));
  g.tauE3 = T((one - mu + fl) * surplus / (mu * (one + fl)));
  g.a1 = {mu, lambda, g.tauE1, tauF};
  g.a3_copies = 1 + g.floor_mu;
  if (is_zero<T>(T(mu - fl), tol))
    g.a2_copies = 1 + g.floor_mu;
  else
    g.a2 = TraceState<T>{mu, T(one + fl - mu), g.tauE3, g.tauE2};
  return g;
}

template <Scalar T>
struct TracialEntry {
  T coefficient{};
  T trace{};
};

template <Scalar T>
struct TracialSpectrum {
  std::vector<TracialEntry<T>> entries;
  bool finite_factor = true;  // total trace at most 1

  void validate() const {
    T total = make_scalar<T>(0);
    for (const auto& e : entries) {
      require(e.coefficient > make_scalar<T>(0), ErrorCode::InvalidSpectrum, "tracial spectrum: coefficients must be positive");
      require(e.trace > make_scalar<T>(0), ErrorCode::InvalidSpectrum, "tracial spectrum: traces must be positive");
      total += e.trace;
    }
    if (finite_factor)
      require(!(total > make_scalar<T>(1)), ErrorCode::InvalidSpectrum,
              "tracial spectrum: total trace " + to_string(total) + " exceeds 1 in a finite factor");
  }

  static TracialSpectrum from_spectrum(const Spectrum<T>& s) {
    require(s.is_finite(), ErrorCode::InvalidArgument, "tracial spectrum: tails are not supported");
    TracialSpectrum out;
    out.finite_factor = false;
    for (const auto& e : s.entries) out.entries.push_back({e.value, e.multiplicity});
    return out;
  }
};

template <Scalar T>
struct MatchedPair {
  std::size_t excess = 0, defect = 0;  // indices into the excess / defect lists
  T tauE{}, tauF{};
};

template <Scalar T>
struct Matching {
  std::vector<MatchedPair<T>> pairs;
  std::vector<std::pair<std::size_t, T>> leftovers;  // (excess index, unmatched trace), positive only
};

/// Splits every defect across the excess entries, largest remaining capacity
/// mu_j tau(E_j) first, so that lambda_i tau(F_ji) = mu_j tau(E_ji).
template <Scalar T>
Matching<T> theorem52_match(const std::vector<TracialEntry<T>>& excess, const std::vector<TracialEntry<T>>& defect,
                            double tol = kFloatTol) {
  const T zero = make_scalar<T>(0);
  T have = zero, need = zero;
  for (const auto& e : excess) {
    require(e.coefficient > zero && e.trace > zero, ErrorCode::InvalidArgument, "theorem52_match: excess needs mu > 0, trace > 0");
    have += e.coefficient * e.trace;
  }
  for (const auto& f : defect) {
    require(f.coefficient > zero && f.coefficient < make_scalar<T>(1) && f.trace > zero, ErrorCode::InvalidArgument,
            "theorem52_match: defect needs 0 < lambda < 1, trace > 0");
    need += f.coefficient * f.trace;
  }
  require(sign_of<T>(T(have - need), tol) >= 0, ErrorCode::Infeasible,
          "theorem52_match: defect trace " + to_string(need) + " exceeds excess trace " + to_string(have));
  std::vector<T> remaining;
  for (const auto& e : excess) remaining.push_back(e.trace);
  Matching<T> m;
  for (std::size_t i = 0; i < defect.size(); ++i) {
    T want = T(defect[i].coefficient * defect[i].trace);
    while (sign_of<T>(want, tol) > 0) {
      std::size_t best = excess.size();
      T best_cap = zero;
      for (std::size_t j = 0; j < excess.size(); ++j) {
        const T cap = T(excess[j].coefficient * remaining[j]);
        if (cap > best_cap) {
          best_cap = cap;
          best = j;
        }
      }
      require(best < excess.size(), ErrorCode::Infeasible, "theorem52_match: excess exhausted");
      const T take = best_cap < want ? best_cap : want;
      const T tauE = T(take / excess[best].coefficient);
      m.pairs.push_back({best, i, tauE, T(take / defect[i].coefficient)});
      remaining[best] -= tauE;
      want -= take;
    }
  }
  for (std::size_t j = 0; j < excess.size(); ++j)
    if (sign_of<T>(remaining[j], tol) > 0) m.leftovers.push_back({j, remaining[j]});
  return m;
}

/// A sub-projection of an entry's spectral projection, as a trace interval.
template <Scalar T>
struct Segment {
  std::size_t entry = 0;
  T offset{}, length{};
};

/// One summand of the tracial pipeline.
template <Scalar T>
struct TracialPiece {
  enum class Kind { Unit, Balanced, Multiple };
  Kind kind = Kind::Unit;
  Segment<T> e, f;           // Balanced: E and F; Unit/Multiple: e only
  TraceState<T> state;       // Balanced
  Iteration<T> iteration;    // Balanced
  long long copies = 1;      // Multiple
};

template <Scalar T>
struct TracialPlan {
  std::vector<TracialPiece<T>> pieces;
  Matching<T> matching;
  std::vector<std::size_t> excess_entries, defect_entries;  // spectrum index of each list position

  std::size_t projection_count() const {
    std::size_t n = 0;
    for (const auto& p : pieces) {
      if (p.kind == TracialPiece<T>::Kind::Balanced)
        n += p.iteration.projection_count();
      else
        n += static_cast<std::size_t>(p.copies);
    }
    return n;
  }
  /// Every trace value that a realization has to represent.
  std::vector<T> trace_values() const {
    std::vector<T> out;
    for (const auto& p : pieces) {
      out.push_back(p.e.offset);
      out.push_back(p.e.length);
      if (p.kind == TracialPiece<T>::Kind::Balanced) {
        out.push_back(p.f.offset);
        out.push_back(p.f.length);
        for (const auto& s : p.iteration.states) {
          out.push_back(s.tauE);
          out.push_back(s.tauF);
        }
      }
    }
    return out;
  }
};

/// Trace-level decomposition of a diagonalizable spectrum with
/// sum mu tau(E) >= sum lambda tau(F).
template <Scalar T>
TracialPlan<T> tracial_plan(const TracialSpectrum<T>& spectrum, std::size_t max_steps = 100000, double tol = kFloatTol) {
  spectrum.validate();
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  TracialPlan<T> plan;
  std::vector<TracialEntry<T>> excess, defect;
  using Kind = typename TracialPiece<T>::Kind;
  for (std::size_t k = 0; k < spectrum.entries.size(); ++k) {
    const auto& e = spectrum.entries[k];
    const int s = sign_of<T>(T(e.coefficient - one), tol);
    if (s == 0) {
      TracialPiece<T> p;
      p.kind = Kind::Unit;
      p.e = {k, zero, e.trace};
      plan.pieces.push_back(p);
    } else if (s > 0) {
      excess.push_back({T(e.coefficient - one), e.trace});
      plan.excess_entries.push_back(k);
    } else {
      defect.push_back({T(one - e.coefficient), e.trace});
      plan.defect_entries.push_back(k);
    }
  }
  plan.matching = theorem52_match(excess, defect, tol);
  std::vector<T> e_used(excess.size(), zero), f_used(defect.size(), zero);
  for (const auto& pr : plan.matching.pairs) {
    TracialPiece<T> p;
    p.kind = Kind::Balanced;
    p.e = {plan.excess_entries[pr.excess], e_used[pr.excess], pr.tauE};
    p.f = {plan.defect_entries[pr.defect], f_used[pr.defect], pr.tauF};
    e_used[pr.excess] += pr.tauE;
    f_used[pr.defect] += pr.tauF;
    p.state = {excess[pr.excess].coefficient, defect[pr.defect].coefficient, pr.tauE, pr.tauF};
    p.iteration = lemma51_iterate(p.state, max_steps, tol);
    plan.pieces.push_back(std::move(p));
  }
  for (const auto& [j, rest] : plan.matching.leftovers) {
    const std::size_t entry = plan.excess_entries[j];
    auto g = lemma51_general_split(excess[j].coefficient, zero, rest, zero, tol);
    const T e2_off = e_used[j], e3_off = T(e_used[j] + g.tauE2);
    e_used[j] += rest;
    TracialPiece<T> a3;
    a3.kind = Kind::Multiple;
    a3.e = {entry, e2_off, g.tauE2};
    a3.copies = g.a3_copies;
    plan.pieces.push_back(a3);
    if (g.a2) {
      TracialPiece<T> a2;
      a2.kind = Kind::Balanced;
      a2.e = {entry, e3_off, g.tauE3};
      a2.f = {entry, e2_off, g.tauE2};
      a2.state = *g.a2;
      a2.iteration = lemma51_iterate(a2.state, max_steps, tol);
      plan.pieces.push_back(std::move(a2));
    } else {
      TracialPiece<T> a2;
      a2.kind = Kind::Multiple;
      a2.e = {entry, e3_off, g.tauE3};
      a2.copies = g.a2_copies;
      plan.pieces.push_back(a2);
    }
  }
  return plan;
}

/// Concrete realization in the N x N diagonal model.
struct MatrixModel {
  long long n = 0;
  Mat target;
  std::vector<Mat> frames;  // projection i is frames[i] * frames[i]^T
  double residual = 0.0;
  double worst_projection_defect = 0.0;
  bool refined = false;

  Mat projection(std::size_t i) const { return frames[i] * frames[i].transpose(); }
};

namespace detail {

inline BigInt lcm_of_denominators(const std::vector<Rational>& values) {
  BigInt l = 1;
  for (const auto& v : values) l = boost::multiprecision::lcm(l, BigInt(boost::multiprecision::denominator(v)));
  return l;
}

inline Mat columns(long long n, long long from, long long count) {
  Mat m = Mat::Zero(n, count);
  for (long long i = 0; i < count; ++i) m(from + i, i) = 1.0;
  return m;
}

}  // namespace detail

/// Realizes the tracial pipeline with projections of rank tau * N.  N is
/// refined to a multiple of every denominator in the transcript, up to `cap`.
inline MatrixModel realize_matrix_model(const TracialSpectrum<Rational>& spectrum, long long n, long long cap = 4096,
                                        std::size_t max_steps = 100000) {
  require(n >= 1, ErrorCode::InvalidArgument, "realize_matrix_model: N must be positive");
  auto plan = tracial_plan(spectrum, max_steps);
  std::vector<Rational> values;
  for (const auto& e : spectrum.entries) values.push_back(e.trace);
  for (const auto& v : plan.trace_values()) values.push_back(v);
  MatrixModel model;
  const BigInt den = detail::lcm_of_denominators(values);
  BigInt size = boost::multiprecision::lcm(BigInt(n), den);
  if (size != n) {
    Rational offending = 0;
    for (const auto& v : values)
      if (BigInt(n) % BigInt(boost::multiprecision::denominator(v)) != 0) {
        offending = v;
        break;
      }
    require(size <= cap, ErrorCode::NotRepresentable,
            "realize_matrix_model: trace " + to_string(offending) + " is not a multiple of 1/" + std::to_string(n) +
                " and refinement to N = " + size.str() + " exceeds the cap " + std::to_string(cap));
    model.refined = true;
  }
  model.n = size.convert_to<long long>();
  const long long dim = model.n;
  auto rank_of = [&](const Rational& t) {
    Rational r = t * dim;
    require(is_integer(r), ErrorCode::NotRepresentable, "realize_matrix_model: trace " + to_string(t) + " not representable");
    return static_cast<long long>(numerator(r).convert_to<long long>());
  };
  // spectral projections on consecutive index ranges
  std::vector<long long> start;
  long long at = 0;
  for (const auto& e : spectrum.entries) {
    start.push_back(at);
    at += rank_of(e.trace);
  }
  const long long used = at;
  model.target = Mat::Zero(std::max(dim, used), std::max(dim, used));
  const long long full = model.target.rows();
  for (std::size_t k = 0; k < spectrum.entries.size(); ++k)
    for (long long i = 0; i < rank_of(spectrum.entries[k].trace); ++i)
      model.target(start[k] + i, start[k] + i) = to_double(spectrum.entries[k].coefficient);
  auto frame = [&](const Segment<Rational>& s) {
    return detail::columns(full, start[s.entry] + rank_of(s.offset), rank_of(s.length));
  };
  using Kind = TracialPiece<Rational>::Kind;
  for (const auto& p : plan.pieces) {
    if (p.kind != Kind::Balanced) {
      Mat x = frame(p.e);
      for (long long c = 0; c < p.copies; ++c) model.frames.push_back(x);
      continue;
    }
    Mat x = frame(p.e), y = frame(p.f);
    const auto& it = p.iteration;
    for (std::size_t k = 0;; ++k) {
      const auto& s = it.states[k];
      if (k == it.steps()) {
        if (it.status == IterationStatus::TerminatedEqual) {
          auto sp = split_pair(s.mu, s.lambda);
          Mat w = sp.w_f * y + sp.w_e * x, v = sp.v_f * y + sp.v_e * x;
          model.frames.push_back(w);
          model.frames.push_back(v);
        }
        break;
      }
      auto sp = split_pair(s.mu, s.lambda);
      if (it.branches[k] == Branch::LowerLambda) {
        const long long b = y.cols();
        Mat xe = x.leftCols(b);
        Mat w = sp.w_f * y + sp.w_e * xe, v = sp.v_f * y + sp.v_e * xe;
        model.frames.push_back(w);
        Mat rest = x.rightCols(x.cols() - b);
        x = rest;
        y = v;
      } else {
        const long long a = x.cols();
        Mat yf = y.leftCols(a);
        Mat w = sp.w_f * yf + sp.w_e * x, v = sp.v_f * yf + sp.v_e * x;
        model.frames.push_back(w);
        Mat rest = y.rightCols(y.cols() - a);
        y = rest;
        x = v;
      }
    }
  }
  Mat sum = Mat::Zero(full, full);
  for (const auto& w : model.frames) {
    sum.noalias() += w * w.transpose();
    const Mat gram = w.transpose() * w;
    model.worst_projection_defect = std::max(model.worst_projection_defect, (gram - Mat::Identity(gram.rows(), gram.cols())).norm());
  }
  model.residual = (sum - model.target).norm();
  return model;
}

}  // namespace projsum
