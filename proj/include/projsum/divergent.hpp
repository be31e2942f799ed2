#pragma once

// Infinite excess trace: greedy block accumulation against a single defect,
// dyadic expansion of sub-unit values, band projections and divergent index
// partitions, and the rank-one decomposition of a spectrum with Tr(A+) = inf.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "projsum/core.hpp"
#include "projsum/error.hpp"
#include "projsum/finite.hpp"
#include "projsum/linalg.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

inline constexpr std::size_t kDefaultTermLimit = 100000;

/// One block D_k of the greedy accumulation.  Indices are 1-based positions
/// in the excess sequence; block k covers start..cut plus the carried term.
template <Scalar T>
struct GreedyBlock {
  std::size_t index = 0;  // k
  std::size_t start = 0;  // n_{k-1} + 1
  std::size_t cut = 0;    // n_k
  T lambda_in{};          // lambda for k = 1, beta_{k-1} afterwards
  T alpha{}, beta{};
  long long floor_term = 0;
  long long k_count = 0;

  /// Coefficients of D_k: the carried term first (1 - lambda_in), then
  /// E_start .. E_cut.
  std::vector<T> coefficients(const std::function<T(std::size_t)>& mu) const {
    const T one = make_scalar<T>(1);
    std::vector<T> c{T(one - lambda_in)};
    for (std::size_t j = start; j < cut; ++j) c.push_back(T(one + mu(j)));
    c.push_back(T(one + alpha + make_scalar<T>(floor_term)));
    return c;
  }
  std::size_t summands(const std::function<T(std::size_t)>& mu) const {
    std::size_t n = 0;
    for (const auto& x : coefficients(mu))
      if (!is_zero<T>(x)) ++n;
    return n;
  }
};

template <Scalar T>
struct GreedyBlocks {
  std::vector<GreedyBlock<T>> blocks;
  bool partial = false;  // fewer blocks than requested
  std::string note;
};

namespace detail {

// term(i) for 1-based i, nullopt once the supply runs out
template <Scalar T>
GreedyBlocks<T> greedy_over(const std::function<std::optional<T>(std::size_t)>& term, const T& lambda, std::size_t max_blocks,
                            std::size_t max_terms, double tol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(lambda > zero && !(lambda > one), ErrorCode::InvalidArgument, "greedy_blocks: lambda must lie in (0,1]");
  GreedyBlocks<T> out;
  T carry = lambda;
  std::size_t next = 1;
  for (std::size_t k = 1; k <= max_blocks; ++k) {
    T acc = zero, before = zero;
    std::size_t j = next;
    bool found = false;
    for (; j < next + max_terms; ++j) {
      auto mu = term(j);
      if (!mu) break;
      require(*mu > zero, ErrorCode::InvalidArgument, "greedy_blocks: excess terms must be positive");
      before = acc;
      acc += *mu;
      if (sign_of<T>(T(acc - carry), tol) >= 0) {
        found = true;
        break;
      }
    }
    if (!found) {
      out.partial = true;
      out.note = "block " + std::to_string(k) + " did not close within the available terms";
      break;
    }
    GreedyBlock<T> b;
    b.index = k;
    b.start = next;
    b.cut = j;
    b.lambda_in = carry;
    b.alpha = j == next ? carry : T(carry - before);
    const T rest = T(*term(j) - b.alpha);
    b.floor_term = static_cast<long long>(to_double(floor_of(rest)));
    if constexpr (!is_exact_v<T>) {
      if (auto r = integral_value<T>(rest, tol)) b.floor_term = *r;
    }
    T frac = T(rest - make_scalar<T>(b.floor_term));
    if (is_zero<T>(frac, tol)) frac = zero;
    b.beta = T(one - frac);
    b.k_count = static_cast<long long>(b.cut - b.start) + 2 + b.floor_term;
    out.blocks.push_back(b);
    carry = b.beta;
    next = j + 1;
  }
  return out;
}

}  // namespace detail

/// Greedy blocks for sum (1 + mu_j) E_j + (1 - lambda) F with sum mu = inf.
template <Scalar T>
GreedyBlocks<T> greedy_blocks(const Sequence<T>& mu_seq, const T& lambda, std::size_t max_blocks,
                              std::size_t max_terms = kDefaultTermLimit, double tol = kFloatTol) {
  require(mu_seq.total().infinite, ErrorCode::Precondition,
          "greedy_blocks: the excess sequence is not certified divergent (its sum is finite)");
  if (mu_seq.tail) {
    const T sup = mu_seq.tail->sup();
    require(std::isfinite(to_double(sup)), ErrorCode::Precondition, "greedy_blocks: sup mu_j must be finite");
  }
  std::function<std::optional<T>(std::size_t)> term = [&](std::size_t i) -> std::optional<T> { return mu_seq.term(i - 1); };
  return detail::greedy_over<T>(term, lambda, max_blocks, max_terms, tol);
}

/// Rank-one decomposition of a divergent excess against defects: projections
/// for every completed block plus the carried terms left over.
template <Scalar T>
struct DivergentDecomposition {
  Eigen::Index dim = 0;
  std::vector<T> target;
  std::vector<std::string> labels;
  std::vector<RankOneProjection> projections;
  std::vector<Remainder<T>> carries;  // (1 - beta_K) E_{n_K} per class, and untouched terms
  struct ClassRun {
    std::string defect_label;
    T lambda{};
    std::vector<Eigen::Index> coords;  // excess coordinates of the class, in order
    std::vector<GreedyBlock<T>> blocks;
    std::vector<double> block_residuals;
  };
  std::vector<ClassRun> classes;
  bool telescoping_exact = true;
  bool partial = false;
  std::string partition_rule;

  Mat target_matrix() const {
    Mat m = Mat::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) m(i, i) = to_double(target[static_cast<std::size_t>(i)]);
    return m;
  }
  Mat reconstruct() const {
    Mat m = Mat::Zero(dim, dim);
    for (const auto& p : projections) m += outer(p.vector);
    for (const auto& c : carries) m += to_double(c.coeff) * outer(c.vector);
    return m;
  }
  std::size_t block_count() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.blocks.size();
    return n;
  }
};

namespace detail {

// Decomposes each block of one class into rank-one projections on the
// global coordinates and records the leftover carries.
template <Scalar T>
void run_class(DivergentDecomposition<T>& out, typename DivergentDecomposition<T>::ClassRun& run, Eigen::Index defect_coord,
               const std::vector<T>& mus, std::size_t max_blocks, double tol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  std::function<std::optional<T>(std::size_t)> term = [&](std::size_t i) -> std::optional<T> {
    if (i == 0 || i > mus.size()) return std::nullopt;
    return mus[i - 1];
  };
  auto g = greedy_over<T>(term, run.lambda, max_blocks, mus.size() + 1, tol);
  run.blocks = g.blocks;
  if (g.partial) out.partial = true;
  std::function<T(std::size_t)> mu_at = [&](std::size_t i) { return mus[i - 1]; };
  std::vector<T> accumulated(static_cast<std::size_t>(out.dim), zero);
  Eigen::Index carry_coord = defect_coord;
  for (const auto& b : run.blocks) {
    auto coeffs = b.coefficients(mu_at);
    std::vector<Eigen::Index> coords{carry_coord};
    for (std::size_t j = b.start; j <= b.cut; ++j) coords.push_back(run.coords[j - 1]);
    std::vector<T> live;
    std::vector<Eigen::Index> live_coords;
    T sum = zero;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      sum += coeffs[i];
      if (coords[i] < 0 || is_zero<T>(coeffs[i], tol)) continue;
      live.push_back(coeffs[i]);
      live_coords.push_back(coords[i]);
      accumulated[static_cast<std::size_t>(coords[i])] += coeffs[i];
    }
    if constexpr (is_exact_v<T>) {
      if (sum != make_scalar<T>(b.k_count)) out.telescoping_exact = false;
    }
    auto fd = decompose_finite(live, tol);
    Mat block_target = Mat::Zero(out.dim, out.dim), block_sum = Mat::Zero(out.dim, out.dim);
    for (std::size_t i = 0; i < live.size(); ++i) block_target(live_coords[i], live_coords[i]) = to_double(live[i]);
    for (const auto& p : fd.projections) {
      Vec v = Vec::Zero(out.dim);
      for (std::size_t i = 0; i < live_coords.size(); ++i) v(live_coords[i]) = p.vector(static_cast<Eigen::Index>(i));
      out.projections.push_back({v});
      block_sum += outer(v);
    }
    run.block_residuals.push_back((block_sum - block_target).norm());
    carry_coord = run.coords[b.cut - 1];
  }
  // leftover: carried term plus terms after the last cut (or everything if no block closed)
  const std::size_t last_cut = run.blocks.empty() ? 0 : run.blocks.back().cut;
  const T carry_coeff = run.blocks.empty() ? T(one - run.lambda) : T(one - run.blocks.back().beta);
  if (carry_coord >= 0 && !is_zero<T>(carry_coeff, tol)) {
    out.carries.push_back({carry_coeff, basis_vector(out.dim, carry_coord)});
    accumulated[static_cast<std::size_t>(carry_coord)] += carry_coeff;
  }
  for (std::size_t j = last_cut + 1; j <= mus.size(); ++j) {
    out.carries.push_back({T(one + mus[j - 1]), basis_vector(out.dim, run.coords[j - 1])});
    accumulated[static_cast<std::size_t>(run.coords[j - 1])] += T(one + mus[j - 1]);
  }
  // telescoping: blocks plus leftovers give back the class's diagonal exactly
  if constexpr (is_exact_v<T>) {
    for (std::size_t j = 1; j <= mus.size(); ++j)
      if (accumulated[static_cast<std::size_t>(run.coords[j - 1])] != one + mus[j - 1]) out.telescoping_exact = false;
    if (defect_coord >= 0 && accumulated[static_cast<std::size_t>(defect_coord)] != out.target[static_cast<std::size_t>(defect_coord)])
      out.telescoping_exact = false;
  }
}

}  // namespace detail

/// Rank-one decomposition of sum (1 + mu_j) E_j + (1 - lambda) F block by block.
template <Scalar T>
DivergentDecomposition<T> decompose_divergent(const Sequence<T>& mu_seq, const T& lambda, std::size_t blocks,
                                              std::size_t max_terms = kDefaultTermLimit, double tol = kFloatTol) {
  auto g = greedy_blocks(mu_seq, lambda, blocks, max_terms, tol);
  const std::size_t n = g.blocks.empty() ? 0 : g.blocks.back().cut;
  const auto mus = mu_seq.take(n);
  const T one = make_scalar<T>(1);
  DivergentDecomposition<T> out;
  out.dim = static_cast<Eigen::Index>(n + 1);
  out.target.push_back(T(one - lambda));
  out.labels.push_back("f");
  typename DivergentDecomposition<T>::ClassRun run;
  run.defect_label = "f";
  run.lambda = lambda;
  for (std::size_t j = 0; j < n; ++j) {
    out.target.push_back(T(one + mus[j]));
    out.labels.push_back("e" + std::to_string(j + 1));
    run.coords.push_back(static_cast<Eigen::Index>(j + 1));
  }
  detail::run_class(out, run, 0, mus, blocks, tol);
  out.partial = g.partial;
  out.partition_rule = "single";
  out.classes.push_back(std::move(run));
  return out;
}

/// value = sum over bits i of 2^-i; support[i] lists the indices whose bit i is set.
template <Scalar T>
struct DyadicTerm {
  int bit = 0;
  T weight{};
  std::vector<std::size_t> support;
};

template <Scalar T>
struct DyadicExpansion {
  std::vector<DyadicTerm<T>> terms;
  std::vector<std::size_t> units;  // values equal to 1
  std::vector<T> residuals;        // value minus its truncated expansion
  int depth = 0;
};

template <Scalar T>
DyadicExpansion<T> dyadic_expansion(const std::vector<T>& values, int depth, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(depth >= 1, ErrorCode::InvalidArgument, "dyadic_expansion: depth must be at least 1");
  DyadicExpansion<T> out;
  out.depth = depth;
  std::map<int, std::vector<std::size_t>> bits;
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    const T& v = values[idx];
    require(!(v < zero) && !(v > one), ErrorCode::InvalidArgument, "dyadic_expansion: value " + to_string(v) + " is outside [0,1]");
    if (sign_of<T>(T(v - one), tol) == 0) {
      out.units.push_back(idx);
      out.residuals.push_back(zero);
      continue;
    }
    T x = v, weight = one, rest = v;
    for (int i = 1; i <= depth; ++i) {
      x *= 2;
      weight /= 2;
      if (!(x < one)) {
        bits[i].push_back(idx);
        x -= one;
        rest -= weight;
      }
    }
    out.residuals.push_back(rest);
  }
  for (auto& [i, support] : bits) {
    T w = one;
    for (int s = 0; s < i; ++s) w /= 2;
    out.terms.push_back({i, w, std::move(support)});
  }
  return out;
}

/// Band j holds values in [1 + 1/j, 1 + 1/(j-1)); band 1 is [2, inf).
template <Scalar T>
std::size_t band_of(const T& value) {
  const T one = make_scalar<T>(1);
  require(value > one, ErrorCode::InvalidArgument, "band_of: value " + to_string(value) + " is not above 1");
  const T inv = T(one / (value - one));
  const auto j = static_cast<long long>(to_double(ceil_of(inv)));
  return static_cast<std::size_t>(std::max<long long>(j, 1));
}

template <Scalar T>
struct BandPartition {
  std::vector<std::size_t> band;          // per materialized value
  std::map<std::size_t, T> weight;        // band -> total multiplicity
  T weighted_sum{};                       // sum of weight_j / j, a lower bound for the excess trace
  T excess_sum{};                         // sum of (value - 1) * multiplicity over materialized entries
  bool excess_divergent = false;          // from the tail certificate
};

/// Bands of a spectrum whose values all exceed 1; tails contribute `steps` terms.
template <Scalar T>
BandPartition<T> band_partition(const Spectrum<T>& spectrum, std::size_t steps = 0) {
  const T one = make_scalar<T>(1);
  BandPartition<T> out;
  out.weighted_sum = make_scalar<T>(0);
  out.excess_sum = make_scalar<T>(0);
  auto add = [&](const T& value, const T& mult) {
    const auto j = band_of(value);
    out.band.push_back(j);
    auto it = out.weight.find(j);
    if (it == out.weight.end())
      out.weight.emplace(j, mult);
    else
      it->second += mult;
    out.weighted_sum += mult / make_scalar<T>(static_cast<long long>(j));
    out.excess_sum += (value - one) * mult;
  };
  for (const auto& e : spectrum.entries) add(e.value, e.multiplicity);
  for (const auto& t : spectrum.tails) {
    require(t.side == Side::Excess, ErrorCode::InvalidArgument, "band_partition: defect tail present, values must exceed 1");
    for (const auto& mu : t.take(steps)) add(T(one + mu), one);
    if (t.sum().infinite) out.excess_divergent = true;
  }
  return out;
}

/// Disjoint index classes of a divergent sequence, each with divergent sum.
template <Scalar T>
struct IndexPartition {
  std::vector<std::vector<std::size_t>> classes;  // 0-based indices
  std::vector<T> sums;
  bool certified = false;  // every class sum exceeds the budget within the truncation
  std::string rule;        // "round_robin" or "greedy"
};

/// Round-robin dealing when it certifies every class; otherwise each index
/// goes to the class with the smallest running sum.
template <Scalar T>
IndexPartition<T> partition_indices(const Sequence<T>& mu_seq, std::size_t count, const T& budget, std::size_t truncation) {
  require(count >= 1, ErrorCode::InvalidArgument, "partition_indices: count must be at least 1");
  require(mu_seq.total().infinite, ErrorCode::Precondition, "partition_indices: the sequence is not certified divergent");
  const auto mus = mu_seq.take(truncation);
  auto certify = [&](IndexPartition<T>& p) {
    p.certified = true;
    for (const auto& s : p.sums)
      if (!(s > budget)) p.certified = false;
  };
  IndexPartition<T> rr;
  rr.rule = "round_robin";
  rr.classes.resize(count);
  rr.sums.assign(count, make_scalar<T>(0));
  for (std::size_t i = 0; i < mus.size(); ++i) {
    rr.classes[i % count].push_back(i);
    rr.sums[i % count] += mus[i];
  }
  certify(rr);
  if (rr.certified || count == 1) return rr;
  IndexPartition<T> gr;
  gr.rule = "greedy";
  gr.classes.resize(count);
  gr.sums.assign(count, make_scalar<T>(0));
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const auto c = static_cast<std::size_t>(std::min_element(gr.sums.begin(), gr.sums.end()) - gr.sums.begin());
    gr.classes[c].push_back(i);
    gr.sums[c] += mus[i];
  }
  certify(gr);
  return gr;
}

/// Type I spectrum with infinite excess trace: units pass through, each
/// defect is paired with its own divergent class of excess terms, and each
/// class is decomposed block by block.  Without defects a single class runs
/// against a zero-coefficient anchor (lambda = 1).
template <Scalar T>
DivergentDecomposition<T> decompose_infinite_excess(const Spectrum<T>& spectrum, std::size_t steps, std::size_t blocks,
                                                    double tol = kFloatTol) {
  const T one = make_scalar<T>(1);
  require(spectrum.mode == SpectrumMode::TypeI, ErrorCode::InvalidArgument, "decompose_infinite_excess needs a type I spectrum");
  auto verdict = classify(spectrum, FactorType::TypeI, tol);
  require(verdict.outcome == Outcome::FeasibleInfiniteExcess, ErrorCode::Precondition,
          "decompose_infinite_excess: excess trace is not certified infinite");
  const auto* etail = spectrum.tail(Side::Excess);
  require(etail != nullptr, ErrorCode::Precondition, "decompose_infinite_excess: no divergent excess tail");
  if (!(etail->sum().infinite)) fail(ErrorCode::Precondition, "decompose_infinite_excess: excess tail converges");

  DivergentDecomposition<T> out;
  std::vector<T> listed_mu;
  std::vector<std::pair<T, std::string>> defects;
  std::size_t nu = 0, ne = 0, nf = 0;
  std::vector<Eigen::Index> units;
  auto add = [&](const T& v, const std::string& label) {
    out.target.push_back(v);
    out.labels.push_back(label);
    return static_cast<Eigen::Index>(out.target.size() - 1);
  };
  const auto values = spectrum.expanded_values();
  for (const auto& v : values)
    if (sign_of<T>(T(v - one), tol) == 0) units.push_back(add(v, "u" + std::to_string(++nu)));
  std::vector<Eigen::Index> defect_coords;
  std::vector<T> lambdas;
  for (const auto& v : values)
    if (sign_of<T>(T(v - one), tol) < 0) {
      defect_coords.push_back(add(v, "f" + std::to_string(++nf)));
      lambdas.push_back(T(one - v));
    }
  if (const auto* ft = spectrum.tail(Side::Defect))
    for (const auto& l : ft->take(steps)) {
      defect_coords.push_back(add(T(one - l), "f" + std::to_string(++nf)));
      lambdas.push_back(l);
    }
  // excess: listed values first, then the tail
  Sequence<T> mu_seq;
  for (const auto& v : values)
    if (sign_of<T>(T(v - one), tol) > 0) mu_seq.prefix.push_back(T(v - one));
  mu_seq.tail = *etail;
  const std::size_t count = std::max<std::size_t>(defect_coords.size(), 1);
  auto part = partition_indices(mu_seq, count, one, mu_seq.prefix.size() + steps);
  out.partition_rule = part.rule;
  const auto mus = mu_seq.take(mu_seq.prefix.size() + steps);
  std::vector<Eigen::Index> excess_coords;
  for (const auto& m : mus) excess_coords.push_back(add(T(one + m), "e" + std::to_string(++ne)));
  out.dim = static_cast<Eigen::Index>(out.target.size());
  for (auto c : units) out.projections.push_back({basis_vector(out.dim, c)});
  for (std::size_t c = 0; c < count; ++c) {
    typename DivergentDecomposition<T>::ClassRun run;
    const bool anchored = c < defect_coords.size();
    run.lambda = anchored ? lambdas[c] : one;
    run.defect_label = anchored ? out.labels[static_cast<std::size_t>(defect_coords[c])] : "none";
    std::vector<T> class_mus;
    for (auto i : part.classes[c]) {
      class_mus.push_back(mus[i]);
      run.coords.push_back(excess_coords[i]);
    }
    detail::run_class(out, run, anchored ? defect_coords[c] : Eigen::Index(-1), class_mus, blocks, tol);
    out.classes.push_back(std::move(run));
  }
  if (!part.certified) out.partial = true;
  return out;
}

}  // namespace projsum
