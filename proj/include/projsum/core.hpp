#pragma once

// Shared data model: spectra of positive diagonalizable operators (finite
// prefix plus optional symbolic tails), the excess/defect split
// A = A+ - A- + R_A, and the feasibility classifier for factors of type I, II
// and III.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "projsum/error.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

enum class FactorType { TypeI, TypeII, TypeIII };
enum class SpectrumMode { TypeI, TypeII };
enum class Side { Excess, Defect };

inline const char* to_string(FactorType f) {
  switch (f) {
    case FactorType::TypeI: return "type1";
    case FactorType::TypeII: return "type2";
    case FactorType::TypeIII: return "type3";
  }
  return "?";
}
inline const char* to_string(Side s) { return s == Side::Excess ? "excess" : "defect"; }

/// Number of terms used to validate a declared finite tail sum.
inline constexpr std::size_t kTailCheckTerms = 10000;

/// Symbolic description of infinitely many further eigenvalues on one side of
/// 1.  Terms are deviations: an excess term t stands for the eigenvalue 1 + t,
/// a defect term t for 1 - t.
template <Scalar T>
struct TailSpec {
  enum class Kind { Geometric, Harmonic, Periodic };

  Kind kind = Kind::Geometric;
  Side side = Side::Excess;
  T first{};                      // geometric: first * ratio^k
  T ratio{};
  T scale{};                      // harmonic: scale / (k + 1)
  std::vector<T> pattern;         // periodic: the pattern repeated forever
  std::optional<T> declared_sum;  // nullopt declares the sum infinite

  static TailSpec geometric(Side side, T first, T ratio) {
    TailSpec t;
    t.kind = Kind::Geometric;
    t.side = side;
    t.first = first;
    t.ratio = ratio;
    t.declared_sum = T(first / (make_scalar<T>(1) - ratio));
    return t;
  }
  static TailSpec harmonic(Side side, T scale) {
    TailSpec t;
    t.kind = Kind::Harmonic;
    t.side = side;
    t.scale = scale;
    return t;
  }
  static TailSpec periodic(Side side, std::vector<T> pattern) {
    TailSpec t;
    t.kind = Kind::Periodic;
    t.side = side;
    t.pattern = std::move(pattern);
    return t;
  }

  const char* kind_name() const {
    switch (kind) {
      case Kind::Geometric: return "geometric";
      case Kind::Harmonic: return "harmonic";
      case Kind::Periodic: return "periodic";
    }
    return "?";
  }

  T term(std::size_t k) const {
    switch (kind) {
      case Kind::Geometric: return T(first * ipow<T>(ratio, k));
      case Kind::Harmonic: return T(scale / make_scalar<T>(static_cast<long long>(k) + 1));
      case Kind::Periodic: return pattern[k % pattern.size()];
    }
    return T{};
  }

  /// The first n terms, computed incrementally.
  std::vector<T> take(std::size_t n) const {
    std::vector<T> out;
    out.reserve(n);
    if (kind == Kind::Geometric) {
      T t = first;
      for (std::size_t k = 0; k < n; ++k) {
        out.push_back(t);
        t *= ratio;
      }
    } else {
      for (std::size_t k = 0; k < n; ++k) out.push_back(term(k));
    }
    return out;
  }

  bool sum_is_infinite() const { return !declared_sum.has_value(); }

  Extended<T> sum() const { return declared_sum ? Extended<T>::finite(*declared_sum) : Extended<T>::inf(); }

  /// Largest term; every built-in kind is bounded.
  T sup() const {
    switch (kind) {
      case Kind::Geometric: return first;
      case Kind::Harmonic: return scale;
      case Kind::Periodic: return *std::max_element(pattern.begin(), pattern.end());
    }
    return T{};
  }

  void validate() const {
    const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
    auto bad = [&](const std::string& why) { fail(ErrorCode::InvalidSpectrum, std::string(kind_name()) + " tail: " + why); };
    switch (kind) {
      case Kind::Geometric: {
        if (!(first > zero)) bad("first term must be positive");
        if (!(ratio > zero && ratio < one)) bad("ratio must lie in (0,1)");
        if (!declared_sum) bad("declared infinite but a geometric series converges");
        // prefix check against the closed-form remainder bound
        const double v = to_double(*declared_sum);
        const double f = to_double(first), r = to_double(ratio);
        double prefix = 0.0, t = f;
        for (std::size_t k = 0; k < kTailCheckTerms; ++k) {
          prefix += t;
          t *= r;
        }
        const double remainder_bound = t / (1.0 - r);
        const double tol = 1e-9 * (1.0 + std::abs(v));
        if (prefix > v + tol || v > prefix + remainder_bound + tol)
          bad("declared sum " + to_string(*declared_sum) + " disagrees with the " + std::to_string(kTailCheckTerms) +
              "-term prefix " + to_string(prefix));
        if constexpr (is_exact_v<T>) {
          if (*declared_sum != first / (one - ratio)) bad("declared sum is not the exact sum first/(1-ratio)");
        }
        if (side == Side::Defect && first > one) bad("defect terms must lie in (0,1]");
        break;
      }
      case Kind::Harmonic:
        if (!(scale > zero)) bad("scale must be positive");
        if (declared_sum) bad("declared finite but a harmonic series diverges");
        if (side == Side::Defect && scale > one) bad("defect terms must lie in (0,1]");
        break;
      case Kind::Periodic:
        if (pattern.empty()) bad("empty pattern");
        for (const auto& p : pattern) {
          if (!(p > zero)) bad("pattern terms must be positive");
          if (side == Side::Defect && p > one) bad("defect terms must lie in (0,1]");
        }
        if (declared_sum) bad("declared finite but a repeated positive pattern diverges");
        break;
    }
  }
};

/// A positive sequence: explicit prefix followed by an optional symbolic tail.
template <Scalar T>
struct Sequence {
  std::vector<T> prefix;
  std::optional<TailSpec<T>> tail;

  static Sequence finite(std::vector<T> terms) { return Sequence{std::move(terms), std::nullopt}; }
  static Sequence with_tail(std::vector<T> prefix, TailSpec<T> tail) { return Sequence{std::move(prefix), std::move(tail)}; }
  static Sequence geometric(T first, T ratio, Side side = Side::Excess) {
    return with_tail({}, TailSpec<T>::geometric(side, std::move(first), std::move(ratio)));
  }
  static Sequence harmonic(T scale, Side side = Side::Excess) { return with_tail({}, TailSpec<T>::harmonic(side, std::move(scale))); }
  static Sequence periodic(std::vector<T> pattern, Side side = Side::Excess) {
    return with_tail({}, TailSpec<T>::periodic(side, std::move(pattern)));
  }

  bool finite_length() const { return !tail.has_value(); }
  std::size_t length() const { return prefix.size(); }

  T term(std::size_t i) const {
    if (i < prefix.size()) return prefix[i];
    require(tail.has_value(), ErrorCode::InvalidArgument, "sequence index past the end of a finite sequence");
    return tail->term(i - prefix.size());
  }

  /// The first n terms (fewer if the sequence is finite and shorter).
  std::vector<T> take(std::size_t n) const {
    std::vector<T> out(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(std::min(n, prefix.size())));
    if (tail && n > prefix.size()) {
      auto more = tail->take(n - prefix.size());
      out.insert(out.end(), more.begin(), more.end());
    }
    return out;
  }

  Extended<T> total() const {
    Extended<T> s = Extended<T>::finite(make_scalar<T>(0));
    for (const auto& p : prefix) s.value += p;
    if (tail) s += tail->sum();
    return s;
  }

  /// Sequence with its first n terms dropped.
  Sequence drop(std::size_t n) const {
    Sequence out;
    out.tail = tail;
    if (n <= prefix.size()) {
      out.prefix.assign(prefix.begin() + static_cast<std::ptrdiff_t>(n), prefix.end());
      return out;
    }
    require(tail.has_value(), ErrorCode::InvalidArgument, "cannot drop past the end of a finite sequence");
    // shift the tail by materializing nothing: geometric/harmonic/periodic are re-anchored
    std::size_t shift = n - prefix.size();
    TailSpec<T> t = *tail;
    switch (t.kind) {
      case TailSpec<T>::Kind::Geometric: {
        T dropped = make_scalar<T>(0);
        for (const auto& x : t.take(shift)) dropped += x;
        t.first = t.term(shift);
        if (t.declared_sum) t.declared_sum = T(*t.declared_sum - dropped);
        out.tail = t;
        break;
      }
      case TailSpec<T>::Kind::Harmonic:
        fail(ErrorCode::InvalidArgument, "dropping terms from a harmonic tail is not representable");
      case TailSpec<T>::Kind::Periodic: {
        std::vector<T> rotated(t.pattern.size());
        for (std::size_t k = 0; k < t.pattern.size(); ++k) rotated[k] = t.pattern[(k + shift) % t.pattern.size()];
        t.pattern = std::move(rotated);
        out.tail = t;
        break;
      }
    }
    return out;
  }
};

template <Scalar T>
struct SpectrumEntry {
  T value;         // eigenvalue, > 0
  T multiplicity;  // integer rank (type I) or trace weight (type II)
};

template <Scalar T>
struct Spectrum {
  SpectrumMode mode = SpectrumMode::TypeI;
  std::vector<SpectrumEntry<T>> entries;
  std::vector<TailSpec<T>> tails;  // at most one per side

  static Spectrum diagonal(const std::vector<T>& values) {
    Spectrum s;
    for (const auto& v : values) s.entries.push_back({v, make_scalar<T>(1)});
    return s;
  }

  const TailSpec<T>* tail(Side side) const {
    for (const auto& t : tails)
      if (t.side == side) return &t;
    return nullptr;
  }
  bool is_finite() const { return tails.empty(); }

  void validate() const {
    const T zero = make_scalar<T>(0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      require(e.value > zero, ErrorCode::InvalidSpectrum,
              "entry " + std::to_string(i) + ": eigenvalues must be positive (the kernel is not represented)");
      require(e.multiplicity > zero, ErrorCode::InvalidSpectrum, "entry " + std::to_string(i) + ": multiplicity must be positive");
      if (mode == SpectrumMode::TypeI)
        require(integral_value<T>(e.multiplicity, 0.0).has_value(), ErrorCode::InvalidSpectrum,
                "entry " + std::to_string(i) + ": type I multiplicities must be integers");
    }
    int excess_tails = 0, defect_tails = 0;
    for (const auto& t : tails) {
      t.validate();
      (t.side == Side::Excess ? excess_tails : defect_tails)++;
    }
    require(excess_tails <= 1 && defect_tails <= 1, ErrorCode::InvalidSpectrum, "at most one tail per side");
  }

  /// Total multiplicity of the listed entries.
  T listed_weight() const {
    T w = make_scalar<T>(0);
    for (const auto& e : entries) w += e.multiplicity;
    return w;
  }

  T max_value() const {
    T m = make_scalar<T>(0);
    for (const auto& e : entries) m = std::max(m, e.value);
    if (const auto* t = tail(Side::Excess)) m = std::max(m, T(make_scalar<T>(1) + t->sup()));
    if (m == make_scalar<T>(0))
      if (const auto* t = tail(Side::Defect)) m = T(make_scalar<T>(1) - t->term(0));
    return m;
  }

  /// Merges duplicate eigenvalues and orders entries by decreasing value.
  Spectrum normalized() const {
    std::map<T, T, std::greater<T>> merged;
    for (const auto& e : entries) merged[e.value] += e.multiplicity;
    Spectrum out;
    out.mode = mode;
    out.tails = tails;
    for (auto& [v, m] : merged) out.entries.push_back({v, m});
    return out;
  }

  /// Eigenvalue list with multiplicities expanded (type I, finite part only).
  std::vector<T> expanded_values() const {
    std::vector<T> out;
    for (const auto& e : entries) {
      auto m = integral_value<T>(e.multiplicity, 0.0);
      require(m.has_value(), ErrorCode::InvalidSpectrum, "expansion needs integer multiplicities");
      for (long long k = 0; k < *m; ++k) out.push_back(e.value);
    }
    return out;
  }
};

template <Scalar T>
struct PartItem {
  T deviation;  // mu for excess items, lambda for defect items
  T weight;
  std::size_t source;  // index of the originating spectrum entry
};

/// Excess/defect split A = A+ - A- + R_A.
template <Scalar T>
struct Parts {
  std::vector<PartItem<T>> excess;  // value = 1 + mu, mu > 0
  std::vector<PartItem<T>> defect;  // value = 1 - lambda, lambda in (0,1)
  T unit_weight{};                  // trace of the spectral projection at 1
  std::vector<std::pair<std::size_t, T>> units;  // (source, weight)
  Extended<T> excess_trace;
  Extended<T> defect_trace;
  std::size_t entry_count = 0;
  SpectrumMode mode = SpectrumMode::TypeI;
  std::vector<TailSpec<T>> tails;
};

template <Scalar T>
Parts<T> split_parts(const Spectrum<T>& spectrum) {
  const T one = make_scalar<T>(1), zero = make_scalar<T>(0);
  Parts<T> p;
  p.unit_weight = zero;
  p.excess_trace = Extended<T>::finite(zero);
  p.defect_trace = Extended<T>::finite(zero);
  p.entry_count = spectrum.entries.size();
  p.mode = spectrum.mode;
  p.tails = spectrum.tails;
  for (std::size_t i = 0; i < spectrum.entries.size(); ++i) {
    const auto& e = spectrum.entries[i];
    if (e.value > one) {
      T mu = e.value - one;
      p.excess.push_back({mu, e.multiplicity, i});
      p.excess_trace.value += mu * e.multiplicity;
    } else if (e.value < one) {
      T lambda = one - e.value;
      p.defect.push_back({lambda, e.multiplicity, i});
      p.defect_trace.value += lambda * e.multiplicity;
    } else {
      p.unit_weight += e.multiplicity;
      p.units.push_back({i, e.multiplicity});
    }
  }
  for (const auto& t : spectrum.tails) (t.side == Side::Excess ? p.excess_trace : p.defect_trace) += t.sum();
  return p;
}

/// Inverse of split_parts.
template <Scalar T>
Spectrum<T> reassemble(const Parts<T>& p) {
  const T one = make_scalar<T>(1);
  Spectrum<T> s;
  s.mode = p.mode;
  s.tails = p.tails;
  s.entries.resize(p.entry_count, SpectrumEntry<T>{one, one});
  for (const auto& x : p.excess) s.entries[x.source] = {T(one + x.deviation), x.weight};
  for (const auto& x : p.defect) s.entries[x.source] = {T(one - x.deviation), x.weight};
  for (const auto& [src, w] : p.units) s.entries[src] = {one, w};
  return s;
}

enum class Outcome { AlreadyProjection, FeasibleFinite, FeasibleInfiniteExcess, FeasibleTypeII, FeasibleTypeIII, Infeasible };

enum class InfeasibleReason { None, DefectExceedsExcess, NonIntegerGap, DefectTraceInfinite, NormAtMostOneNotProjection };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::AlreadyProjection: return "AlreadyProjection";
    case Outcome::FeasibleFinite: return "FeasibleFinite";
    case Outcome::FeasibleInfiniteExcess: return "FeasibleInfiniteExcess";
    case Outcome::FeasibleTypeII: return "FeasibleTypeII";
    case Outcome::FeasibleTypeIII: return "FeasibleTypeIII";
    case Outcome::Infeasible: return "Infeasible";
  }
  return "?";
}

inline const char* to_string(InfeasibleReason r) {
  switch (r) {
    case InfeasibleReason::None: return "none";
    case InfeasibleReason::DefectExceedsExcess: return "Tr(A-) > Tr(A+)";
    case InfeasibleReason::NonIntegerGap: return "Tr(A+) - Tr(A-) is not a nonnegative integer";
    case InfeasibleReason::DefectTraceInfinite: return "Tr(A-) = inf while Tr(A+) < inf";
    case InfeasibleReason::NormAtMostOneNotProjection: return "||A|| <= 1 and not a projection";
  }
  return "?";
}

template <Scalar T>
struct FeasibilityVerdict {
  Outcome outcome = Outcome::Infeasible;
  long long k = 0;  // integer gap for FeasibleFinite
  InfeasibleReason reason = InfeasibleReason::None;
  Extended<T> excess_trace;
  Extended<T> defect_trace;
  std::optional<T> gap;         // excess_trace - defect_trace when both finite
  double integrality_gap = 0.0;  // float mode: distance of gap to the reported integer

  bool feasible() const { return outcome != Outcome::Infeasible; }
};

template <Scalar T>
bool is_projection_spectrum(const Spectrum<T>& s) {
  if (!s.tails.empty()) return false;
  for (const auto& e : s.entries)
    if (e.value != make_scalar<T>(1)) return false;
  return true;
}

/// Feasibility of writing A as a (strong) sum of projections in a factor of
/// the given type.  Type II sufficiency presumes diagonalizable input, which a
/// Spectrum always is.
template <Scalar T>
FeasibilityVerdict<T> classify(const Spectrum<T>& spectrum, FactorType factor, double tol = kFloatTol) {
  spectrum.validate();
  FeasibilityVerdict<T> v;
  const Parts<T> parts = split_parts(spectrum);
  v.excess_trace = parts.excess_trace;
  v.defect_trace = parts.defect_trace;
  if (!parts.excess_trace.infinite && !parts.defect_trace.infinite) v.gap = T(parts.excess_trace.value - parts.defect_trace.value);

  if (is_projection_spectrum(spectrum)) {
    v.outcome = Outcome::AlreadyProjection;
    return v;
  }
  auto infeasible = [&](InfeasibleReason r) {
    v.outcome = Outcome::Infeasible;
    v.reason = r;
    return v;
  };

  switch (factor) {
    case FactorType::TypeIII:
      if (spectrum.max_value() > make_scalar<T>(1)) {
        v.outcome = Outcome::FeasibleTypeIII;
        return v;
      }
      return infeasible(InfeasibleReason::NormAtMostOneNotProjection);

    case FactorType::TypeII:
      if (parts.excess_trace.infinite) {
        v.outcome = Outcome::FeasibleTypeII;
        return v;
      }
      if (parts.defect_trace.infinite) return infeasible(InfeasibleReason::DefectTraceInfinite);
      if (sign_of<T>(*v.gap, tol) < 0) return infeasible(InfeasibleReason::DefectExceedsExcess);
      v.outcome = Outcome::FeasibleTypeII;
      return v;

    case FactorType::TypeI:
      if (parts.excess_trace.infinite) {
        v.outcome = Outcome::FeasibleInfiniteExcess;
        return v;
      }
      if (parts.defect_trace.infinite) return infeasible(InfeasibleReason::DefectTraceInfinite);
      if (sign_of<T>(*v.gap, tol) < 0) return infeasible(InfeasibleReason::DefectExceedsExcess);
      if (auto k = integral_value<T>(*v.gap, tol)) {
        v.outcome = Outcome::FeasibleFinite;
        v.k = *k;
        v.integrality_gap = std::abs(to_double(*v.gap) - static_cast<double>(*k));
        return v;
      }
      return infeasible(InfeasibleReason::NonIntegerGap);
  }
  return v;
}

/// Excess deviations mu_j expanded by multiplicity, followed by the excess tail.
template <Scalar T>
Sequence<T> excess_sequence(const Spectrum<T>& s) {
  Sequence<T> out;
  const T one = make_scalar<T>(1);
  for (const auto& v : s.expanded_values())
    if (v > one) out.prefix.push_back(T(v - one));
  if (const auto* t = s.tail(Side::Excess)) out.tail = *t;
  return out;
}

/// Defect deviations lambda_i expanded by multiplicity, followed by the defect tail.
template <Scalar T>
Sequence<T> defect_sequence(const Spectrum<T>& s) {
  Sequence<T> out;
  const T one = make_scalar<T>(1);
  for (const auto& v : s.expanded_values())
    if (v < one) out.prefix.push_back(T(one - v));
  if (const auto* t = s.tail(Side::Defect)) out.tail = *t;
  return out;
}

}  // namespace projsum
