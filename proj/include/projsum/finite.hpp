#pragma once

// Finite-rank decomposition into rank-one projections: integer peeling, the
// iterated pair split, Fillmore's feasibility test, and the equal-rank
// multi-split.  The PairChain engine is shared with the series module.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "projsum/core.hpp"
#include "projsum/error.hpp"
#include "projsum/linalg.hpp"
#include "projsum/pairsplit.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

inline constexpr std::size_t kNoSource = std::numeric_limits<std::size_t>::max();

/// One basis term (1 + deviation) g (x) g fed to the chain; deviation is +mu for
/// excess and -lambda for defect terms.
template <Scalar T>
struct ChainTerm {
  T deviation;
  Eigen::Index coord;  // basis coordinate of g
  std::size_t source;  // caller's index of the term
};

template <Scalar T>
struct ChainStep {
  enum class Kind { Fresh, AbsorbExcess, AbsorbDefect, Emit };
  Kind kind;
  T delta;                  // running deviation after the step
  T start{};                // Fresh: excess deviation that opened the pair
  T nu{}, rho{};            // split weights (not set for Emit)
  std::optional<T> sigma;   // squared weight of the old running vector in the new one
  std::vector<std::size_t> sources;
};

template <Scalar T>
const char* to_string(typename ChainStep<T>::Kind k) {
  using K = typename ChainStep<T>::Kind;
  switch (k) {
    case K::Fresh: return "fresh";
    case K::AbsorbExcess: return "absorb_excess";
    case K::AbsorbDefect: return "absorb_defect";
    case K::Emit: return "emit";
  }
  return "?";
}

/// Running state (1 + delta) v (x) v of the iterated pair split.
template <Scalar T>
class PairChain {
 public:
  explicit PairChain(Eigen::Index dim, double tol = kFloatTol) : dim_(dim), tol_(tol) {}

  bool active() const { return active_; }
  const T& delta() const { return delta_; }
  const Vec& vector() const { return v_; }
  int delta_sign() const { return sign_of<T>(delta_, tol_); }
  Eigen::Index dim() const { return dim_; }

  /// Start from an arbitrary weighted unit vector.
  void start(const T& delta, const Vec& v) {
    require(!active_, ErrorCode::InvalidArgument, "PairChain::start while active");
    require(!(make_scalar<T>(1) + delta < make_scalar<T>(0)), ErrorCode::InvalidArgument, "PairChain::start: need 1 + delta >= 0");
    active_ = true;
    delta_ = delta;
    v_ = padded(v, dim_);
  }

  /// Start from a single basis term without splitting.
  void start(const ChainTerm<T>& t) { start(t.deviation, basis_vector(dim_, t.coord)); }

  /// Split a fresh excess/defect pair.
  void fresh(const ChainTerm<T>& e, const ChainTerm<T>& f) {
    require(!active_, ErrorCode::InvalidArgument, "PairChain::fresh while active");
    const T lambda = T(-f.deviation);
    auto s = split_pair(e.deviation, lambda, static_cast<std::size_t>(e.coord), static_cast<std::size_t>(f.coord));
    projections_.push_back({s.w_vector(dim_)});
    v_ = s.v_vector(dim_);
    delta_ = T(e.deviation - lambda);
    active_ = true;
    steps_.push_back({ChainStep<T>::Kind::Fresh, delta_, e.deviation, s.nu, s.rho, std::nullopt, {e.source, f.source}});
  }

  /// Combine the running vector (playing f, delta <= 0) with an excess term.
  void absorb_excess(const ChainTerm<T>& e) { absorb_excess(e.deviation, basis_vector(dim_, e.coord), e.source); }

  /// Same with an arbitrary unit vector g orthogonal to the running vector.
  void absorb_excess(const T& mu, const Vec& g, std::size_t source) {
    require(active_ && delta_sign() <= 0, ErrorCode::InvalidArgument, "absorb_excess needs an active chain with delta <= 0");
    require(mu > make_scalar<T>(0), ErrorCode::InvalidArgument, "absorb_excess needs mu > 0");
    const T lambda = T(-delta_);
    auto s = split_pair(mu, lambda);
    auto [w, v] = s.combine(padded(g, dim_), v_);
    projections_.push_back({w});
    v_ = v;
    delta_ = T(mu + delta_);
    steps_.push_back({ChainStep<T>::Kind::AbsorbExcess, delta_, T{}, s.nu, s.rho, s.nu, {source}});
  }

  /// Combine the running vector (playing e, delta >= 0) with a defect term.
  void absorb_defect(const ChainTerm<T>& f) { absorb_defect(T(-f.deviation), basis_vector(dim_, f.coord), f.source); }

  void absorb_defect(const T& lambda, const Vec& g, std::size_t source) {
    require(active_ && delta_sign() >= 0, ErrorCode::InvalidArgument, "absorb_defect needs an active chain with delta >= 0");
    auto s = split_pair(delta_, lambda);
    auto [w, v] = s.combine(v_, padded(g, dim_));
    projections_.push_back({w});
    v_ = v;
    delta_ = T(delta_ - lambda);
    steps_.push_back({ChainStep<T>::Kind::AbsorbDefect, delta_, T{}, s.nu, s.rho, T(make_scalar<T>(1) - s.nu), {source}});
  }

  /// Stops the chain and hands back the running term (1 + delta) v (x) v.
  std::pair<T, Vec> release() {
    require(active_, ErrorCode::InvalidArgument, "PairChain::release on an inactive chain");
    active_ = false;
    return {delta_, v_};
  }

  /// delta = 0: the running term is itself a projection.
  void emit() {
    require(active_ && delta_sign() == 0, ErrorCode::InvalidArgument, "emit needs delta = 0");
    projections_.push_back({v_});
    active_ = false;
    delta_ = make_scalar<T>(0);
    steps_.push_back({ChainStep<T>::Kind::Emit, delta_, T{}, T{}, T{}, std::nullopt, {}});
  }

  void push_projection(const Vec& v) { projections_.push_back({padded(v, dim_)}); }

  std::vector<RankOneProjection>& projections() { return projections_; }
  const std::vector<RankOneProjection>& projections() const { return projections_; }
  const std::vector<ChainStep<T>>& steps() const { return steps_; }

 private:
  Eigen::Index dim_;
  double tol_;
  bool active_ = false;
  T delta_{};
  Vec v_;
  std::vector<RankOneProjection> projections_;
  std::vector<ChainStep<T>> steps_;
};

/// Buffered supplier of chain terms of one class.
template <Scalar T>
class TermQueue {
 public:
  using Generator = std::function<std::optional<ChainTerm<T>>()>;

  explicit TermQueue(Generator gen) : gen_(std::move(gen)) {}

  static TermQueue from_vector(std::vector<ChainTerm<T>> terms) {
    auto data = std::make_shared<std::vector<ChainTerm<T>>>(std::move(terms));
    auto pos = std::make_shared<std::size_t>(0);
    return TermQueue([data, pos]() -> std::optional<ChainTerm<T>> {
      if (*pos >= data->size()) return std::nullopt;
      return (*data)[(*pos)++];
    });
  }

  const std::optional<ChainTerm<T>>& peek() {
    if (!front_ && !done_) {
      front_ = gen_();
      if (!front_) done_ = true;
    }
    return front_;
  }
  bool empty() { return !peek().has_value(); }
  ChainTerm<T> pop() {
    require(peek().has_value(), ErrorCode::InvalidArgument, "TermQueue::pop on an exhausted queue");
    ChainTerm<T> t = *front_;
    front_.reset();
    ++consumed_;
    return t;
  }
  std::size_t consumed() const { return consumed_; }

 private:
  Generator gen_;
  std::optional<ChainTerm<T>> front_;
  bool done_ = false;
  std::size_t consumed_ = 0;
};

/// Options for run_chain.
struct ChainOptions {
  bool emit_final_zero = true;  // emit the running vector if the run ends at delta = 0
  std::size_t max_steps = std::numeric_limits<std::size_t>::max();
};

/// The greedy rule: delta > 0 consumes the next defect, delta < 0 the next
/// excess, delta = 0 emits the running projection and restarts (from a fresh
/// pair, or from the single next term when one class is exhausted).  Returns
/// the number of steps taken; stops when no rule applies or the step budget
/// is spent.
template <Scalar T>
std::size_t run_chain(PairChain<T>& chain, TermQueue<T>& excess, TermQueue<T>& defect, const ChainOptions& opt = {}) {
  std::size_t steps = 0;
  while (steps < opt.max_steps) {
    if (!chain.active()) {
      const bool has_e = !excess.empty(), has_f = !defect.empty();
      if (has_e && has_f) {
        auto e = excess.pop();
        chain.fresh(e, defect.pop());
      } else if (has_e) {
        chain.start(excess.pop());
      } else if (has_f) {
        chain.start(defect.pop());
      } else {
        break;
      }
      ++steps;
      continue;
    }
    const int s = chain.delta_sign();
    if (s > 0) {
      if (defect.empty()) break;
      chain.absorb_defect(defect.pop());
    } else if (s < 0) {
      if (excess.empty()) break;
      chain.absorb_excess(excess.pop());
    } else {
      if (excess.empty() && defect.empty() && !opt.emit_final_zero) break;
      chain.emit();
    }
    ++steps;
  }
  return steps;
}

template <Scalar T>
struct Remainder {
  T coeff;
  Vec vector;
};

template <Scalar T>
struct FiniteDecomposition {
  Eigen::Index dim = 0;
  std::vector<RankOneProjection> projections;
  std::optional<Remainder<T>> remainder;
  std::vector<ChainStep<T>> steps;
  std::vector<Eigen::Index> peeled;  // coordinates of peeled unit projections
  std::vector<T> target;             // diagonal of the decomposed operator

  Mat reconstruct() const {
    Mat m = Mat::Zero(dim, dim);
    for (const auto& p : projections) m += outer(p.vector);
    if (remainder) m += to_double(remainder->coeff) * outer(remainder->vector);
    return m;
  }

  /// Running deviations, starting with the first split's excess deviation.
  std::vector<T> delta_trace() const {
    std::vector<T> out;
    for (const auto& s : steps) {
      if (s.kind == ChainStep<T>::Kind::Emit) continue;
      if (out.empty() && s.kind == ChainStep<T>::Kind::Fresh) out.push_back(s.start);
      out.push_back(s.delta);
    }
    return out;
  }
};

struct FillmoreVerdict {
  bool feasible = false;
  long long count = 0;  // Tr A when feasible
  std::string reason;
};

template <Scalar T>
T spectrum_trace(const Spectrum<T>& s) {
  T t = make_scalar<T>(0);
  for (const auto& e : s.entries) t += e.value * e.multiplicity;
  return t;
}

/// Sum of finitely many projections iff Tr A is an integer >= rank A.
template <Scalar T>
FillmoreVerdict fillmore_feasible(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  spectrum.validate();
  require(spectrum.is_finite() && spectrum.mode == SpectrumMode::TypeI, ErrorCode::InvalidArgument,
          "fillmore_feasible needs a finite type I spectrum");
  const T trace = spectrum_trace(spectrum);
  const auto rank = integral_value<T>(spectrum.listed_weight(), 0.0);
  auto k = integral_value<T>(trace, tol);
  if (!k) return {false, 0, "Tr A = " + to_string(trace) + " is not an integer"};
  if (*k < *rank) return {false, 0, "Tr A = " + std::to_string(*k) + " < rank A = " + std::to_string(*rank)};
  return {true, *k, ""};
}

template <Scalar T>
struct PeelResult {
  std::vector<Eigen::Index> coords;  // coordinate of each emitted basis projection
  std::vector<T> reduced;            // diagonal after peeling
};

/// Removes k = Tr A - rank A unit projections, always from the currently
/// largest excess coordinate.  Operates on the expanded diagonal.
template <Scalar T>
PeelResult<T> peel_integer(const std::vector<T>& diagonal, double tol = kFloatTol) {
  const T one = make_scalar<T>(1);
  T gap = make_scalar<T>(0);
  for (const auto& d : diagonal) gap += d - one;
  auto k = integral_value<T>(gap, tol);
  require(k.has_value() && *k >= 0, ErrorCode::Infeasible, "peel_integer: Tr A - rank A = " + to_string(gap) + " is not in N");
  require(*k >= 1, ErrorCode::InvalidArgument, "peel_integer: nothing to peel (k = 0)");
  PeelResult<T> out{{}, diagonal};
  for (long long step = 0; step < *k; ++step) {
    auto it = std::max_element(out.reduced.begin(), out.reduced.end(), [](const T& a, const T& b) { return a < b; });
    require(it != out.reduced.end() && *it > one, ErrorCode::Infeasible, "peel_integer: insufficient excess");
    *it -= one;
    out.coords.push_back(static_cast<Eigen::Index>(it - out.reduced.begin()));
  }
  return out;
}

template <Scalar T>
PeelResult<T> peel_integer(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  return peel_integer(spectrum.expanded_values(), tol);
}

namespace detail {

template <Scalar T>
void collect_terms(const std::vector<T>& diag, std::vector<ChainTerm<T>>& excess, std::vector<ChainTerm<T>>& defect,
                   std::vector<Eigen::Index>& units, double tol) {
  const T one = make_scalar<T>(1);
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const T dev = T(diag[i] - one);
    const int s = sign_of<T>(dev, tol);
    if (s > 0)
      excess.push_back({dev, static_cast<Eigen::Index>(i), i});
    else if (s < 0)
      defect.push_back({dev, static_cast<Eigen::Index>(i), i});
    else
      units.push_back(static_cast<Eigen::Index>(i));
  }
}

}  // namespace detail

/// Decomposes a diagonal with Tr = rank (after peeling) into exactly Tr A
/// rank-one projections.
template <Scalar T>
FiniteDecomposition<T> decompose_finite(const std::vector<T>& diagonal, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0);
  T trace = zero;
  for (const auto& d : diagonal) {
    require(d > zero, ErrorCode::InvalidSpectrum, "decompose_finite: eigenvalues must be positive");
    trace += d;
  }
  auto count = integral_value<T>(trace, tol);
  require(count && *count >= static_cast<long long>(diagonal.size()), ErrorCode::Infeasible,
          "decompose_finite: Tr A = " + to_string(trace) + " is not an integer >= rank " + std::to_string(diagonal.size()));

  FiniteDecomposition<T> out;
  out.dim = static_cast<Eigen::Index>(diagonal.size());
  out.target = diagonal;
  std::vector<T> work = diagonal;
  PairChain<T> chain(out.dim, tol);
  if (*count > static_cast<long long>(diagonal.size())) {
    auto peel = peel_integer(diagonal, tol);
    work = peel.reduced;
    out.peeled = peel.coords;
    for (auto c : peel.coords) chain.push_projection(basis_vector(out.dim, c));
  }
  std::vector<ChainTerm<T>> excess, defect;
  std::vector<Eigen::Index> units;
  detail::collect_terms(work, excess, defect, units, tol);
  for (auto c : units) chain.push_projection(basis_vector(out.dim, c));
  auto eq = TermQueue<T>::from_vector(excess);
  auto fq = TermQueue<T>::from_vector(defect);
  run_chain(chain, eq, fq);
  require(!chain.active(), ErrorCode::Infeasible, "decompose_finite: chain ended with delta = " + to_string(chain.delta()));
  out.projections = chain.projections();
  out.steps = chain.steps();
  require(static_cast<long long>(out.projections.size()) == *count, ErrorCode::Precondition,
          "decompose_finite: produced " + std::to_string(out.projections.size()) + " projections, expected " +
              std::to_string(*count));
  return out;
}

template <Scalar T>
FiniteDecomposition<T> decompose_finite(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  auto verdict = fillmore_feasible(spectrum, tol);
  require(verdict.feasible, ErrorCode::Infeasible, "decompose_finite: " + verdict.reason);
  return decompose_finite(spectrum.expanded_values(), tol);
}

/// n+m-1 projections plus (1 + sum mu - sum lambda) times a rank-one
/// projection; requires 0 <= sum mu - sum lambda <= max mu.  The largest
/// excess entry is processed last.
template <Scalar T>
FiniteDecomposition<T> decompose_with_remainder(const std::vector<T>& diagonal, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0);
  for (const auto& d : diagonal) require(d > zero, ErrorCode::InvalidSpectrum, "decompose_with_remainder: eigenvalues must be positive");
  FiniteDecomposition<T> out;
  out.dim = static_cast<Eigen::Index>(diagonal.size());
  out.target = diagonal;
  std::vector<ChainTerm<T>> excess, defect;
  std::vector<Eigen::Index> units;
  detail::collect_terms(diagonal, excess, defect, units, tol);
  T sum_mu = zero, sum_lambda = zero, max_mu = zero;
  for (const auto& e : excess) {
    sum_mu += e.deviation;
    max_mu = std::max(max_mu, e.deviation);
  }
  for (const auto& f : defect) sum_lambda -= f.deviation;
  const T gap = T(sum_mu - sum_lambda);
  require(sign_of<T>(gap, tol) >= 0, ErrorCode::Precondition,
          "decompose_with_remainder: sum mu - sum lambda = " + to_string(gap) + " < 0");
  require(sign_of<T>(T(max_mu - gap), tol) >= 0, ErrorCode::Precondition,
          "decompose_with_remainder: sum mu - sum lambda = " + to_string(gap) + " > max mu = " + to_string(max_mu));
  require(!excess.empty(), ErrorCode::Precondition, "decompose_with_remainder: no excess entry");
  auto max_it = std::max_element(excess.begin(), excess.end(),
                                 [](const ChainTerm<T>& a, const ChainTerm<T>& b) { return a.deviation < b.deviation; });
  std::rotate(max_it, max_it + 1, excess.end());

  PairChain<T> chain(out.dim, tol);
  for (auto c : units) chain.push_projection(basis_vector(out.dim, c));
  auto eq = TermQueue<T>::from_vector(excess);
  auto fq = TermQueue<T>::from_vector(defect);
  run_chain(chain, eq, fq, ChainOptions{false});
  require(chain.active() && chain.delta_sign() >= 0, ErrorCode::Precondition, "decompose_with_remainder: chain did not end in a remainder");
  out.projections = chain.projections();
  out.steps = chain.steps();
  out.remainder = Remainder<T>{T(make_scalar<T>(1) + chain.delta()), chain.vector()};
  return out;
}

template <Scalar T>
FiniteDecomposition<T> decompose_with_remainder(const Spectrum<T>& spectrum, double tol = kFloatTol) {
  spectrum.validate();
  require(spectrum.is_finite(), ErrorCode::InvalidArgument, "decompose_with_remainder needs a finite spectrum");
  return decompose_with_remainder(spectrum.expanded_values(), tol);
}

/// sum gamma_j E_j with equal-rank orthogonal E_j and sum gamma_j = k >= n,
/// written as k projections of the common rank.  E_j is the coordinate block
/// [j*rank, (j+1)*rank).
template <Scalar T>
std::vector<Projection> split_equal_multi(const std::vector<T>& coeffs, Eigen::Index rank = 1, double tol = kFloatTol) {
  require(!coeffs.empty(), ErrorCode::InvalidArgument, "split_equal_multi: no coefficients");
  require(rank >= 1, ErrorCode::InvalidArgument, "split_equal_multi: rank must be >= 1");
  T total = make_scalar<T>(0);
  for (const auto& g : coeffs) {
    require(g > make_scalar<T>(0), ErrorCode::InvalidArgument, "split_equal_multi: coefficients must be positive");
    total += g;
  }
  auto k = integral_value<T>(total, tol);
  require(k.has_value(), ErrorCode::Infeasible, "split_equal_multi: sum " + to_string(total) + " is not an integer");
  require(*k >= static_cast<long long>(coeffs.size()), ErrorCode::Infeasible,
          "split_equal_multi: k = " + std::to_string(*k) + " < n = " + std::to_string(coeffs.size()));
  auto dec = decompose_finite(coeffs, tol);
  const Eigen::Index n = static_cast<Eigen::Index>(coeffs.size());
  std::vector<Projection> out;
  for (const auto& p : dec.projections) {
    Projection q;
    q.frame = Mat::Zero(n * rank, rank);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index s = 0; s < rank; ++s) q.frame(j * rank + s, s) = p.vector(j);
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace projsum
