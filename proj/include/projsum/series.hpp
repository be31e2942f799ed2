#pragma once

// Finite-trace infinite decompositions: the single-anchor recursions, the
// interleaved recursion for collision-free prefix sums, and the dispatcher for
// operators with Tr(A+) - Tr(A-) a nonnegative integer.  Infinite sequences
// are processed up to a step budget; the result is a verified prefix, the
// running remainder term, and closed-form overlap diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "projsum/core.hpp"
#include "projsum/error.hpp"
#include "projsum/finite.hpp"
#include "projsum/linalg.hpp"
#include "projsum/scalar.hpp"

namespace projsum {

/// A term vector of a recursion: a basis coordinate, or an explicit vector
/// when coord < 0.
struct GTerm {
  Eigen::Index coord = -1;
  Vec vector;

  Vec as_vector(Eigen::Index dim) const { return coord >= 0 ? basis_vector(dim, coord) : padded(vector, dim); }
};

/// Block structure of the interleaved recursion.  m holds m_0, m_1, ...
/// (defect indices), n holds n_0, n_1, ... (excess indices), both 1-based.
struct InterleavePlan {
  bool defect_first = true;  // lambda_1 > mu_1
  std::vector<std::size_t> m, n;
  std::vector<Side> order;  // class consumed by A_1, A_2, ...
};

template <Scalar T>
struct Decomposition {
  std::string route;
  Eigen::Index dim = 0;
  std::vector<T> target;            // diagonal of the truncated operator
  std::vector<std::string> labels;  // e1, f3, u2, ...
  std::vector<RankOneProjection> projections;
  std::optional<Remainder<T>> remainder;

  // recursion diagnostics; g[0] is the anchor, v_j is history[j-1]
  std::vector<GTerm> g;
  std::vector<T> g_deviation;  // g[0]: delta_1
  std::vector<T> deltas;       // delta_1 .. delta_{n+1}
  std::vector<T> sigmas;       // sigma_1 .. sigma_{n+1}, sigma_1 = 0
  std::vector<Vec> history;
  std::size_t prefix_projections = 0;  // projections emitted before the recursion

  std::size_t peeled = 0;
  std::vector<std::pair<std::size_t, std::size_t>> phi;
  std::optional<InterleavePlan> plan;
  bool already_projection = false;
  bool complete = false;  // every term of the input was consumed
  bool numeric_floor = false;  // float run hit the point where prefix sums stop being resolvable

  Mat target_matrix() const {
    Mat m = Mat::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) m(i, i) = to_double(target[static_cast<std::size_t>(i)]);
    return m;
  }
  Mat reconstruct() const {
    Mat m = Mat::Zero(dim, dim);
    for (const auto& p : projections) m += outer(p.vector);
    if (remainder) m += to_double(remainder->coeff) * outer(remainder->vector);
    return m;
  }
  std::size_t recursion_steps() const { return deltas.empty() ? 0 : deltas.size() - 1; }
};

template <Scalar T>
using RecursionState = Decomposition<T>;

/// sigma_j from consecutive running deviations.
template <Scalar T>
T sigma_from_deltas(const T& prev, const T& cur) {
  const T one = make_scalar<T>(1);
  return T((one + prev) * prev / ((one + cur) * (T(2) * prev - cur)));
}

/// (v_j, g_q) = sqrt(1 - sigma_{q+1}) prod_{i=q+2}^{j} sqrt(sigma_i); j is
/// 1-based, q is 0-based, sigmas[0] = sigma_1.
template <Scalar T>
double closed_form_overlap(const std::vector<T>& sigmas, std::size_t j, std::size_t q) {
  require(j >= 1 && j <= sigmas.size() && q + 1 <= j, ErrorCode::InvalidArgument, "closed_form_overlap: index out of range");
  if (q + 1 == j && j == 1) return 1.0;
  double c = sqrt_d(T(make_scalar<T>(1) - sigmas[q]));
  for (std::size_t i = q + 2; i <= j; ++i) c *= sqrt_d(sigmas[i - 1]);
  return c;
}

/// v_j rebuilt from the closed form instead of the recurrence.
template <Scalar T>
Vec closed_form_vector(const Decomposition<T>& d, std::size_t j) {
  Vec v = Vec::Zero(d.dim);
  for (std::size_t q = 0; q < j; ++q) v += closed_form_overlap(d.sigmas, j, q) * d.g[q].as_vector(d.dim);
  return v;
}

/// Frobenius residual of the partial identity after each recursion step:
/// (1+delta_1) g0 g0 + sum_{i<=t} (1+dev_i) g_i g_i - sum P - (1+delta_{t+1}) v v.
/// Evaluated every `stride` steps and at the last step.
template <Scalar T>
std::vector<std::pair<std::size_t, double>> partial_residuals(const Decomposition<T>& d, std::size_t stride = 1) {
  std::vector<std::pair<std::size_t, double>> out;
  if (d.deltas.empty()) return out;
  const std::size_t n = d.recursion_steps();
  stride = std::max<std::size_t>(stride, 1);
  Mat lhs = Mat::Zero(d.dim, d.dim), sum_p = Mat::Zero(d.dim, d.dim);
  const T one = make_scalar<T>(1);
  lhs += to_double(T(one + d.g_deviation[0])) * outer(d.g[0].as_vector(d.dim));
  for (std::size_t t = 0; t <= n; ++t) {
    if (t > 0) {
      lhs += to_double(T(one + d.g_deviation[t])) * outer(d.g[t].as_vector(d.dim));
      sum_p += outer(d.projections[d.prefix_projections + t - 1].vector);
    }
    if (t % stride == 0 || t == n) {
      Mat r = lhs - sum_p - to_double(T(one + d.deltas[t])) * outer(d.history[t]);
      out.push_back({t, r.norm()});
    }
  }
  return out;
}

/// Sum of (1 - sigma_j) over computed steps alongside the lower bound
/// sum of c * (delta_{j-1} - delta_j) / delta_{j-1} (c = 1/2 for increasing
/// negative deltas).
template <Scalar T>
std::pair<double, double> sigma_deficit(const Decomposition<T>& d, double factor = 0.5) {
  double deficit = 0.0, bound = 0.0;
  for (std::size_t j = 1; j < d.sigmas.size(); ++j) {
    deficit += 1.0 - to_double(d.sigmas[j]);
    const double prev = to_double(d.deltas[j - 1]), cur = to_double(d.deltas[j]);
    if (prev != 0.0) bound += factor * (prev - cur) / prev;
  }
  return {deficit, bound};
}

namespace detail {

template <Scalar T>
struct SeriesTerm {
  T dev;  // +mu or -lambda
  Eigen::Index coord;
};

// Chain wrapper that records the recursion diagnostics as it goes.
template <Scalar T>
class Recorder {
 public:
  Recorder(PairChain<T>& chain, Decomposition<T>& out) : chain_(chain), out_(out) {}

  void begin(const T& delta1, const GTerm& g0) {
    if (!chain_.active()) chain_.start(delta1, g0.as_vector(chain_.dim()));
    out_.prefix_projections = chain_.projections().size();
    out_.g = {g0};
    out_.g_deviation = {delta1};
    out_.deltas = {delta1};
    out_.sigmas = {make_scalar<T>(0)};
    out_.history = {chain_.vector()};
  }

  void absorb(const T& dev, const GTerm& g, std::size_t source) {
    const Vec vec = g.as_vector(chain_.dim());
    if (dev > make_scalar<T>(0))
      chain_.absorb_excess(dev, vec, source);
    else
      chain_.absorb_defect(T(-dev), vec, source);
    out_.g.push_back(g);
    out_.g_deviation.push_back(dev);
    out_.deltas.push_back(chain_.delta());
    out_.sigmas.push_back(*chain_.steps().back().sigma);
    out_.history.push_back(chain_.vector());
  }

 private:
  PairChain<T>& chain_;
  Decomposition<T>& out_;
};

template <Scalar T>
std::vector<T> prefix_sums(const std::vector<T>& xs) {
  std::vector<T> s;
  s.reserve(xs.size() + 1);
  s.push_back(make_scalar<T>(0));
  for (const auto& x : xs) s.push_back(T(s.back() + x));
  return s;
}

// Pairs (m, n), 1-based, with sum_{<=m} lambda = sum_{<=n} mu.
template <Scalar T>
std::vector<std::pair<std::size_t, std::size_t>> phi_pairs(const std::vector<T>& mus, const std::vector<T>& lams, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto sm = prefix_sums(mus), sl = prefix_sums(lams);
  std::size_t m = 1, n = 1;
  while (m < sl.size() && n < sm.size()) {
    const int s = sign_of<T>(T(sl[m] - sm[n]), tol);
    if (s == 0) {
      out.push_back({m, n});
      ++m;
      ++n;
    } else if (s < 0) {
      ++m;
    } else {
      ++n;
    }
  }
  return out;
}

template <Scalar T>
void finalize(PairChain<T>& chain, Decomposition<T>& out) {
  out.projections = chain.projections();
  if (chain.active()) out.remainder = Remainder<T>{T(make_scalar<T>(1) + chain.delta()), chain.vector()};
}

// Drops coordinates never touched by the construction.
template <Scalar T>
void compact(Decomposition<T>& d, const std::vector<bool>& used) {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < used.size(); ++i)
    if (used[i]) keep.push_back(static_cast<Eigen::Index>(i));
  const Eigen::Index k = static_cast<Eigen::Index>(keep.size());
  if (k == d.dim) return;
  std::vector<Eigen::Index> remap(used.size(), -1);
  for (Eigen::Index i = 0; i < k; ++i) remap[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])] = i;
  auto shrink = [&](const Vec& v) {
    Vec out(k);
    for (Eigen::Index i = 0; i < k; ++i) out(i) = v(keep[static_cast<std::size_t>(i)]);
    return out;
  };
  for (auto& p : d.projections) p.vector = shrink(p.vector);
  if (d.remainder) d.remainder->vector = shrink(d.remainder->vector);
  for (auto& v : d.history) v = shrink(v);
  for (auto& g : d.g) {
    if (g.coord >= 0)
      g.coord = remap[static_cast<std::size_t>(g.coord)];
    else
      g.vector = shrink(padded(g.vector, d.dim));
  }
  std::vector<T> target;
  std::vector<std::string> labels;
  for (auto i : keep) {
    target.push_back(d.target[static_cast<std::size_t>(i)]);
    labels.push_back(d.labels[static_cast<std::size_t>(i)]);
  }
  d.target = std::move(target);
  d.labels = std::move(labels);
  d.dim = k;
}

// Smallest 1-based index idx with sums[idx] > bound, or 0 if none.
template <Scalar T>
std::size_t first_exceeding(const std::vector<T>& sums, const T& bound, double tol) {
  for (std::size_t i = 1; i < sums.size(); ++i)
    if (sign_of<T>(T(sums[i] - bound), tol) > 0) return i;
  return 0;
}

}  // namespace detail

/// Collision set of the prefix sums within the budget, decided exactly.
template <Scalar T>
std::vector<std::pair<std::size_t, std::size_t>> phi_set(const Sequence<T>& mu_seq, const Sequence<T>& lambda_seq,
                                                         std::size_t budget) {
  if constexpr (!is_exact_v<T>) {
    fail(ErrorCode::InvalidArgument, "phi_set needs exact rational input; equality of float prefix sums is undecidable");
  } else {
    return detail::phi_pairs(mu_seq.take(budget), lambda_seq.take(budget), 0.0);
  }
}

/// Block indices of the interleaved recursion computed directly from the
/// prefix sums, independently of the chain.
template <Scalar T>
InterleavePlan interleave_plan(const std::vector<T>& mus, const std::vector<T>& lams, double tol = kFloatTol) {
  require(!mus.empty() && !lams.empty(), ErrorCode::InvalidArgument, "interleave_plan: empty sequence");
  InterleavePlan plan;
  const int first = sign_of<T>(T(lams[0] - mus[0]), tol);
  require(first != 0, ErrorCode::Precondition, "interleave_plan: lambda_1 = mu_1 is a prefix collision");
  plan.defect_first = first > 0;
  const auto sm = detail::prefix_sums(mus), sl = detail::prefix_sums(lams);
  // lead: the class consumed first (index sequence p), other: q
  const auto& s_lead = plan.defect_first ? sl : sm;
  const auto& s_other = plan.defect_first ? sm : sl;
  const Side lead_side = plan.defect_first ? Side::Defect : Side::Excess;
  const Side other_side = plan.defect_first ? Side::Excess : Side::Defect;
  std::vector<std::size_t> p{1}, q{0};
  plan.order.push_back(lead_side);
  // an index whose predecessor ties the bound within tolerance ends the plan
  auto ambiguous = [&](const std::vector<T>& sums, std::size_t idx, const T& bound) {
    return sign_of<T>(T(sums[idx - 1] - bound), tol) == 0;
  };
  for (;;) {
    std::size_t qk = detail::first_exceeding(s_other, s_lead[p.back()], tol);
    if (qk == 0 || ambiguous(s_other, qk, s_lead[p.back()])) break;
    for (std::size_t i = q.back() + 1; i <= qk; ++i) plan.order.push_back(other_side);
    q.push_back(qk);
    std::size_t pk = detail::first_exceeding(s_lead, s_other[qk], tol);
    if (pk == 0 || ambiguous(s_lead, pk, s_other[qk])) break;
    for (std::size_t i = p.back() + 1; i <= pk; ++i) plan.order.push_back(lead_side);
    p.push_back(pk);
  }
  plan.m = plan.defect_first ? p : q;
  plan.n = plan.defect_first ? q : p;
  return plan;
}

/// Checks the chain of prefix-sum inequalities defining the plan for every k
/// whose indices are available.
template <Scalar T>
bool plan_inequalities_hold(const InterleavePlan& plan, const std::vector<T>& mus, const std::vector<T>& lams) {
  const auto sm = detail::prefix_sums(mus), sl = detail::prefix_sums(lams);
  const auto& s_lead = plan.defect_first ? sl : sm;
  const auto& s_other = plan.defect_first ? sm : sl;
  const auto& p = plan.defect_first ? plan.m : plan.n;
  const auto& q = plan.defect_first ? plan.n : plan.m;
  for (std::size_t k = 1; k + 1 < q.size() && k < p.size(); ++k) {
    const bool ok = !(s_other[q[k - 1]] > s_other[q[k] - 1]) && s_other[q[k] - 1] < s_lead[p[k - 1]] &&
                    !(s_lead[p[k - 1]] > s_lead[p[k] - 1]) && s_lead[p[k] - 1] < s_other[q[k]] &&
                    !(s_other[q[k]] > s_other[q[k + 1] - 1]) && s_other[q[k + 1] - 1] < s_lead[p[k]];
    if (!ok) return false;
  }
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] <= p[k - 1]) return false;
  for (std::size_t k = 1; k < q.size(); ++k)
    if (q[k] <= q[k - 1]) return false;
  return true;
}

struct InterleaveReport {
  bool signs_ok = true;            // delta sign pattern on every block
  bool one_plus_delta_ok = true;   // 1 + delta_j > 0
  bool sigma_open_unit = true;     // 0 < sigma_j < 1 for j >= 2
  std::vector<std::size_t> boundaries;  // j with delta_{j-1} < 0 < delta_j
  double max_boundary_sigma = 0.0;
};

/// Sign pattern, positivity and block-boundary bound of an interleaved run.
template <Scalar T>
InterleaveReport check_interleave(const Decomposition<T>& d, double tol = kFloatTol) {
  require(d.plan.has_value(), ErrorCode::InvalidArgument, "check_interleave needs an interleaved run");
  InterleaveReport r;
  const auto& plan = *d.plan;
  const auto& p = plan.defect_first ? plan.m : plan.n;
  const auto& q = plan.defect_first ? plan.n : plan.m;
  // lead-sign region: [p_{k-1} + q_k, p_k + q_k), other-sign: [p_k + q_k, p_k + q_{k+1})
  const int lead_sign = plan.defect_first ? -1 : 1;
  auto expect = [&](std::size_t j) -> int {
    for (std::size_t k = 0; k < q.size(); ++k) {
      if (k < p.size() && k + 1 < q.size() && j >= p[k] + q[k] && j < p[k] + q[k + 1]) return lead_sign;
      if (k >= 1 && k < p.size() && j >= p[k - 1] + q[k] && j < p[k] + q[k]) return -lead_sign;
    }
    return 0;
  };
  const T one = make_scalar<T>(1);
  for (std::size_t j = 1; j <= d.deltas.size(); ++j) {
    const T& delta = d.deltas[j - 1];
    const int e = expect(j);
    if (e != 0 && sign_of<T>(delta, tol) != e) r.signs_ok = false;
    if (!(one + delta > make_scalar<T>(0))) r.one_plus_delta_ok = false;
    if (j >= 2) {
      const T& s = d.sigmas[j - 1];
      if (!(s > make_scalar<T>(0) && s < one)) r.sigma_open_unit = false;
      if (sign_of<T>(d.deltas[j - 2], tol) < 0 && sign_of<T>(delta, tol) > 0) {
        r.boundaries.push_back(j);
        r.max_boundary_sigma = std::max(r.max_boundary_sigma, to_double(s));
      }
    }
  }
  return r;
}

namespace detail {

template <Scalar T>
void check_sequence_terms(const std::vector<T>& xs, bool defect, const char* who) {
  for (const auto& x : xs) {
    require(x > make_scalar<T>(0), ErrorCode::InvalidArgument, std::string(who) + ": terms must be positive");
    if (defect) require(!(x > make_scalar<T>(1)), ErrorCode::InvalidArgument, std::string(who) + ": defect terms must be <= 1");
  }
}

template <Scalar T>
void require_sum(const Sequence<T>& seq, const T& expected, double tol, const char* who) {
  auto total = seq.total();
  require(!total.infinite, ErrorCode::Precondition, std::string(who) + ": the sequence sum is infinite");
  require(approx_eq<T>(total.value, expected, tol), ErrorCode::Precondition,
          std::string(who) + ": sum mismatch, sequence sums to " + to_string(total.value) + " but " + to_string(expected) +
              " is required");
}

// Interleaved recursion over materialized terms; coordinates are supplied.
template <Scalar T>
void run_interleave(PairChain<T>& chain, Decomposition<T>& out, const std::vector<SeriesTerm<T>>& es,
                    const std::vector<SeriesTerm<T>>& fs, std::size_t max_steps, double tol) {
  std::vector<T> mus, lams;
  for (const auto& e : es) mus.push_back(e.dev);
  for (const auto& f : fs) lams.push_back(T(-f.dev));
  out.plan = interleave_plan(mus, lams, tol);
  require(plan_inequalities_hold(*out.plan, mus, lams), ErrorCode::Precondition, "interleave: block indices violate the ordering chain");
  Recorder<T> rec(chain, out);
  std::size_t ie = 0, jf = 0;
  std::vector<Side> order;
  if (out.plan->defect_first) {
    rec.begin(fs[0].dev, GTerm{fs[0].coord, {}});
    jf = 1;
    order.push_back(Side::Defect);
  } else {
    rec.begin(es[0].dev, GTerm{es[0].coord, {}});
    ie = 1;
    order.push_back(Side::Excess);
  }
  for (std::size_t step = 0; step < max_steps; ++step) {
    const int s = chain.delta_sign();
    if (s == 0 && !is_exact_v<T>) {
      out.numeric_floor = true;
      break;
    }
    require(s != 0, ErrorCode::Indeterminate,
            "interleave: prefix sums collide after " + std::to_string(ie) + " excess and " + std::to_string(jf) + " defect terms");
    if (s > 0) {
      if (jf >= fs.size()) break;
      rec.absorb(fs[jf].dev, GTerm{fs[jf].coord, {}}, jf);
      ++jf;
      order.push_back(Side::Defect);
    } else {
      if (ie >= es.size()) break;
      rec.absorb(es[ie].dev, GTerm{es[ie].coord, {}}, ie);
      ++ie;
      order.push_back(Side::Excess);
    }
  }
  const std::size_t common = std::min(order.size(), out.plan->order.size());
  require(std::equal(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(common), out.plan->order.begin()),
          ErrorCode::Precondition, "interleave: chain consumption order differs from the block plan");
}

}  // namespace detail

/// (1 - lambda) g0 + sum (1 + mu_j) g_j with sum mu_j = lambda: anchor g0 is
/// coordinate 0, g_j coordinate j.  Consumes up to `steps` terms.
template <Scalar T>
RecursionState<T> lemma41_defect(const T& lambda, const Sequence<T>& mu_seq, std::size_t steps, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(!(lambda < zero) && !(lambda > one), ErrorCode::InvalidArgument, "lemma41_defect: lambda must lie in [0,1]");
  detail::require_sum(mu_seq, lambda, tol, "lemma41_defect");
  RecursionState<T> out;
  out.route = "single_defect";
  if (is_zero<T>(lambda, tol)) {
    out.already_projection = true;
    out.route = "already_projection";
    out.dim = 1;
    out.target = {one};
    out.labels = {"g0"};
    out.projections = {{basis_vector(1, 0)}};
    out.complete = true;
    return out;
  }
  const auto mus = mu_seq.take(steps);
  detail::check_sequence_terms(mus, false, "lemma41_defect");
  out.dim = static_cast<Eigen::Index>(mus.size() + 1);
  out.target.push_back(T(one - lambda));
  out.labels.push_back("g0");
  for (std::size_t j = 0; j < mus.size(); ++j) {
    out.target.push_back(T(one + mus[j]));
    out.labels.push_back("g" + std::to_string(j + 1));
  }
  PairChain<T> chain(out.dim, tol);
  detail::Recorder<T> rec(chain, out);
  rec.begin(T(-lambda), GTerm{0, {}});
  for (std::size_t j = 0; j < mus.size(); ++j) rec.absorb(mus[j], GTerm{static_cast<Eigen::Index>(j + 1), {}}, j + 1);
  detail::finalize(chain, out);
  out.complete = mu_seq.finite_length() && mus.size() == mu_seq.length();
  return out;
}

/// (1 + mu) g0 + sum (1 - lambda_j) g_j with sum lambda_j = mu.  Terms with
/// lambda_j = 1 are stripped first (one copy of g0 each) and terms with
/// lambda_j = 0 pass through as basis projections.
template <Scalar T>
RecursionState<T> lemma41_excess(const T& mu, const Sequence<T>& lambda_seq, std::size_t steps, double tol = kFloatTol) {
  const T zero = make_scalar<T>(0), one = make_scalar<T>(1);
  require(mu > zero, ErrorCode::InvalidArgument, "lemma41_excess: mu must be positive");
  detail::require_sum(lambda_seq, mu, tol, "lemma41_excess");
  const auto lams = lambda_seq.take(steps);
  for (const auto& l : lams)
    require(!(l < zero) && !(l > one), ErrorCode::InvalidArgument, "lemma41_excess: lambda_j must lie in [0,1]");
  RecursionState<T> out;
  out.route = "single_excess";
  out.dim = static_cast<Eigen::Index>(lams.size() + 1);
  out.target.push_back(T(one + mu));
  out.labels.push_back("g0");
  for (std::size_t j = 0; j < lams.size(); ++j) {
    out.target.push_back(T(one - lams[j]));
    out.labels.push_back("g" + std::to_string(j + 1));
  }
  PairChain<T> chain(out.dim, tol);
  T reduced = mu;
  for (std::size_t j = 0; j < lams.size(); ++j) {
    if (sign_of<T>(T(lams[j] - one), tol) == 0) {
      chain.push_projection(basis_vector(out.dim, 0));
      reduced -= one;
    } else if (is_zero<T>(lams[j], tol)) {
      chain.push_projection(basis_vector(out.dim, static_cast<Eigen::Index>(j + 1)));
    }
  }
  require(sign_of<T>(reduced, tol) >= 0, ErrorCode::Precondition, "lemma41_excess: more unit defects than mu allows");
  detail::Recorder<T> rec(chain, out);
  rec.begin(reduced, GTerm{0, {}});
  for (std::size_t j = 0; j < lams.size(); ++j) {
    if (sign_of<T>(T(lams[j] - one), tol) == 0 || is_zero<T>(lams[j], tol)) continue;
    rec.absorb(T(-lams[j]), GTerm{static_cast<Eigen::Index>(j + 1), {}}, j + 1);
  }
  detail::finalize(chain, out);
  out.complete = lambda_seq.finite_length() && lams.size() == lambda_seq.length();
  return out;
}

/// Interleaved recursion for sum mu = sum lambda < inf with no prefix-sum
/// collisions.  Excess e_i is coordinate i-1, defect f_i coordinate
/// (#excess) + i-1.  Takes up to `steps` terms of each sequence.
template <Scalar T>
RecursionState<T> lemma42_interleave(const Sequence<T>& mu_seq, const Sequence<T>& lambda_seq, std::size_t steps,
                                     double tol = kFloatTol) {
  auto mt = mu_seq.total(), lt = lambda_seq.total();
  require(!mt.infinite && !lt.infinite, ErrorCode::Precondition, "lemma42_interleave: sums must be finite");
  require(approx_eq<T>(mt.value, lt.value, tol), ErrorCode::Precondition,
          "lemma42_interleave: sum mismatch, " + to_string(mt.value) + " vs " + to_string(lt.value));
  const auto mus = mu_seq.take(steps), lams = lambda_seq.take(steps);
  require(!mus.empty() && !lams.empty(), ErrorCode::InvalidArgument, "lemma42_interleave: need at least one term per class");
  detail::check_sequence_terms(mus, false, "lemma42_interleave");
  detail::check_sequence_terms(lams, true, "lemma42_interleave");
  for (const auto& l : lams)
    require(l < make_scalar<T>(1), ErrorCode::InvalidArgument, "lemma42_interleave: defect terms must be < 1");
  auto phi = detail::phi_pairs(mus, lams, tol);
  require(phi.empty(), ErrorCode::Precondition,
          phi.empty() ? std::string()
                      : "lemma42_interleave: prefix collision at (m, n) = (" + std::to_string(phi[0].first) + ", " +
                            std::to_string(phi[0].second) + "); route through the dispatcher");
  RecursionState<T> out;
  out.route = "interleave";
  out.dim = static_cast<Eigen::Index>(mus.size() + lams.size());
  std::vector<detail::SeriesTerm<T>> es, fs;
  const T one = make_scalar<T>(1);
  for (std::size_t i = 0; i < mus.size(); ++i) {
    es.push_back({mus[i], static_cast<Eigen::Index>(i)});
    out.target.push_back(T(one + mus[i]));
    out.labels.push_back("e" + std::to_string(i + 1));
  }
  for (std::size_t i = 0; i < lams.size(); ++i) {
    fs.push_back({T(-lams[i]), static_cast<Eigen::Index>(mus.size() + i)});
    out.target.push_back(T(one - lams[i]));
    out.labels.push_back("f" + std::to_string(i + 1));
  }
  PairChain<T> chain(out.dim, tol);
  detail::run_interleave(chain, out, es, fs, 2 * steps, tol);
  detail::finalize(chain, out);
  std::vector<bool> used(static_cast<std::size_t>(out.dim), false);
  for (const auto& g : out.g) used[static_cast<std::size_t>(g.coord)] = true;
  detail::compact(out, used);
  return out;
}

/// Dispatcher for Tr(A-) <= Tr(A+) < inf with integer gap: peels the gap,
/// then routes on which classes are infinite and on the collision set of the
/// prefix sums.  `steps` bounds the number of tail terms materialized per class.
template <Scalar T>
Decomposition<T> decompose_trace_balanced(const Spectrum<T>& spectrum, std::size_t steps, double tol = kFloatTol) {
  const T one = make_scalar<T>(1);
  require(spectrum.mode == SpectrumMode::TypeI, ErrorCode::InvalidArgument, "decompose_trace_balanced needs a type I spectrum");
  auto verdict = classify(spectrum, FactorType::TypeI, tol);
  Decomposition<T> out;
  const auto values = spectrum.expanded_values();
  if (verdict.outcome == Outcome::AlreadyProjection) {
    out.route = "already_projection";
    out.already_projection = true;
    out.complete = true;
    out.dim = static_cast<Eigen::Index>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      out.target.push_back(one);
      out.labels.push_back("u" + std::to_string(i + 1));
      out.projections.push_back({basis_vector(out.dim, static_cast<Eigen::Index>(i))});
    }
    return out;
  }
  require(verdict.outcome == Outcome::FeasibleFinite, ErrorCode::Infeasible,
          std::string("decompose_trace_balanced: ") +
              (verdict.outcome == Outcome::Infeasible ? to_string(verdict.reason) : "excess trace is infinite"));

  // materialize: units, then excess terms, then defect terms
  const auto* etail = spectrum.tail(Side::Excess);
  const auto* ftail = spectrum.tail(Side::Defect);
  const bool excess_infinite = etail != nullptr, defect_infinite = ftail != nullptr;
  require(!(excess_infinite || defect_infinite) || steps > 0, ErrorCode::InvalidArgument,
          "decompose_trace_balanced: infinite spectra need steps > 0");
  std::vector<detail::SeriesTerm<T>> es, fs;
  std::vector<Eigen::Index> unit_coords;
  std::size_t ne = 0, nf = 0, nu = 0;
  auto add_coord = [&](const T& value, const std::string& label) {
    out.target.push_back(value);
    out.labels.push_back(label);
    return static_cast<Eigen::Index>(out.target.size() - 1);
  };
  for (const auto& v : values) {
    if (sign_of<T>(T(v - one), tol) == 0) unit_coords.push_back(add_coord(v, "u" + std::to_string(++nu)));
  }
  for (const auto& v : values)
    if (sign_of<T>(T(v - one), tol) > 0) es.push_back({T(v - one), add_coord(v, "e" + std::to_string(++ne))});
  if (etail)
    for (const auto& mu : etail->take(steps)) es.push_back({mu, add_coord(T(one + mu), "e" + std::to_string(++ne))});
  for (const auto& v : values)
    if (sign_of<T>(T(v - one), tol) < 0) fs.push_back({T(v - one), add_coord(v, "f" + std::to_string(++nf))});
  if (ftail)
    for (const auto& l : ftail->take(steps)) fs.push_back({T(-l), add_coord(T(one - l), "f" + std::to_string(++nf))});
  out.dim = static_cast<Eigen::Index>(out.target.size());
  std::vector<bool> used(out.target.size(), false);
  PairChain<T> chain(out.dim, tol);
  for (auto c : unit_coords) {
    chain.push_projection(basis_vector(out.dim, c));
    used[static_cast<std::size_t>(c)] = true;
  }

  // peel the integer gap from the currently largest excess term
  for (long long step = 0; step < verdict.k; ++step) {
    require(!es.empty(), ErrorCode::Infeasible, "decompose_trace_balanced: insufficient excess to peel");
    auto it = std::max_element(es.begin(), es.end(), [](const auto& a, const auto& b) { return a.dev < b.dev; });
    chain.push_projection(basis_vector(out.dim, it->coord));
    used[static_cast<std::size_t>(it->coord)] = true;
    ++out.peeled;
    it->dev -= one;
    const int s = sign_of<T>(it->dev, tol);
    if (s == 0) {
      chain.push_projection(basis_vector(out.dim, it->coord));
      es.erase(it);
    } else if (s < 0) {
      fs.insert(fs.begin(), {it->dev, it->coord});
      es.erase(it);
    }
  }

  auto mark = [&](const std::vector<detail::SeriesTerm<T>>& ts, std::size_t from, std::size_t to) {
    for (std::size_t i = from; i < to && i < ts.size(); ++i) used[static_cast<std::size_t>(ts[i].coord)] = true;
  };
  auto queue_of = [&](const std::vector<detail::SeriesTerm<T>>& ts, std::size_t from, std::size_t to) {
    std::vector<ChainTerm<T>> v;
    for (std::size_t i = from; i < to && i < ts.size(); ++i) v.push_back({ts[i].dev, ts[i].coord, i});
    return TermQueue<T>::from_vector(std::move(v));
  };
  auto sums_of = [](const std::vector<detail::SeriesTerm<T>>& ts) {
    std::vector<T> xs;
    for (const auto& t : ts) xs.push_back(abs_of(t.dev));
    return detail::prefix_sums(xs);
  };

  if (!excess_infinite && !defect_infinite) {
    out.route = "finite";
    auto eq = queue_of(es, 0, es.size());
    auto fq = queue_of(fs, 0, fs.size());
    run_chain(chain, eq, fq);
    require(!chain.active(), ErrorCode::Precondition, "decompose_trace_balanced: finite chain did not close");
    mark(es, 0, es.size());
    mark(fs, 0, fs.size());
    out.complete = true;
  } else if (!excess_infinite) {
    out.route = "finite_excess_infinite_defect";
    require(!es.empty(), ErrorCode::Precondition, "decompose_trace_balanced: infinite defect with no excess");
    std::size_t cut = 0;
    if (es.size() > 1) {
      auto max_it = std::max_element(es.begin(), es.end(), [](const auto& a, const auto& b) { return a.dev < b.dev; });
      std::rotate(max_it, max_it + 1, es.end());
      const auto se = sums_of(es), sf = sums_of(fs);
      cut = detail::first_exceeding(sf, se[es.size() - 1], tol);
      require(cut != 0, ErrorCode::BudgetExhausted,
              "decompose_trace_balanced: no cut index within " + std::to_string(fs.size()) + " defect terms; raise --steps");
      auto eq = queue_of(es, 0, es.size());
      auto fq = queue_of(fs, 0, cut);
      run_chain(chain, eq, fq, ChainOptions{false});
      require(chain.active() && chain.delta_sign() > 0, ErrorCode::Precondition, "decompose_trace_balanced: pre-split did not leave a remainder");
    } else {
      chain.start(ChainTerm<T>{es[0].dev, es[0].coord, 0});
    }
    mark(es, 0, es.size());
    mark(fs, 0, cut);
    detail::Recorder<T> rec(chain, out);
    rec.begin(chain.delta(), GTerm{-1, chain.vector()});
    for (std::size_t i = cut; i < fs.size(); ++i) {
      rec.absorb(fs[i].dev, GTerm{fs[i].coord, {}}, i);
      used[static_cast<std::size_t>(fs[i].coord)] = true;
    }
  } else if (!defect_infinite) {
    out.route = "infinite_excess_finite_defect";
    require(!fs.empty(), ErrorCode::Precondition, "decompose_trace_balanced: infinite excess with no defect");
    const std::size_t big_m = fs.size();
    std::size_t cut = 0;
    std::optional<std::pair<T, Vec>> carried;
    if (big_m > 1) {
      const auto se = sums_of(es), sf = sums_of(fs);
      cut = detail::first_exceeding(se, sf[big_m - 1], tol);
      require(cut != 0, ErrorCode::BudgetExhausted,
              "decompose_trace_balanced: no cut index within " + std::to_string(es.size()) + " excess terms; raise --steps");
      auto eq = queue_of(es, 0, cut);
      auto fq = queue_of(fs, 0, big_m - 1);
      run_chain(chain, eq, fq, ChainOptions{false});
      require(chain.active() && chain.delta_sign() > 0, ErrorCode::Precondition, "decompose_trace_balanced: pre-split did not leave a remainder");
      carried = chain.release();
      mark(es, 0, cut);
      mark(fs, 0, big_m - 1);
    }
    const auto& anchor = fs[big_m - 1];
    used[static_cast<std::size_t>(anchor.coord)] = true;
    detail::Recorder<T> rec(chain, out);
    rec.begin(anchor.dev, GTerm{anchor.coord, {}});
    if (carried) rec.absorb(carried->first, GTerm{-1, carried->second}, kNoSource);
    for (std::size_t i = cut; i < es.size(); ++i) {
      rec.absorb(es[i].dev, GTerm{es[i].coord, {}}, i);
      used[static_cast<std::size_t>(es[i].coord)] = true;
    }
  } else {
    std::vector<T> mus, lams;
    for (const auto& e : es) mus.push_back(e.dev);
    for (const auto& f : fs) lams.push_back(T(-f.dev));
    out.phi = detail::phi_pairs(mus, lams, tol);
    if constexpr (!is_exact_v<T>) {
      // drop float collisions where both remaining tails are within 1000 tol of zero
      T rest_e = etail->sum().value, rest_f = ftail->sum().value;
      for (const auto& x : etail->take(steps)) rest_e -= x;
      for (const auto& x : ftail->take(steps)) rest_f -= x;
      for (const auto& x : mus) rest_e += x;
      for (const auto& x : lams) rest_f += x;
      const auto se = detail::prefix_sums(mus), sl = detail::prefix_sums(lams);
      std::erase_if(out.phi, [&](const auto& pr) {
        const bool floor = rest_e - se[pr.second] <= 1e3 * tol && rest_f - sl[pr.first] <= 1e3 * tol;
        out.numeric_floor = out.numeric_floor || floor;
        return floor;
      });
    }
    if (out.phi.empty()) {
      out.route = "interleave";
      detail::run_interleave(chain, out, es, fs, es.size() + fs.size(), tol);
      for (const auto& g : out.g) used[static_cast<std::size_t>(g.coord)] = true;
    } else {
      const auto [last_m, last_n] = out.phi.back();
      const bool recurring = 2 * last_m > fs.size() || 2 * last_n > es.size();
      if (recurring) {
        out.route = "blockwise";
        std::size_t pm = 0, pn = 0;
        for (const auto& [m, n] : out.phi) {
          auto eq = queue_of(es, pn, n);
          auto fq = queue_of(fs, pm, m);
          run_chain(chain, eq, fq);
          require(!chain.active(), ErrorCode::Precondition, "decompose_trace_balanced: block did not close");
          mark(es, pn, n);
          mark(fs, pm, m);
          pm = m;
          pn = n;
        }
      } else {
        out.route = "split_then_interleave";
        auto eq = queue_of(es, 0, last_n);
        auto fq = queue_of(fs, 0, last_m);
        run_chain(chain, eq, fq);
        require(!chain.active(), ErrorCode::Precondition, "decompose_trace_balanced: collision block did not close");
        mark(es, 0, last_n);
        mark(fs, 0, last_m);
        std::vector<detail::SeriesTerm<T>> rest_e(es.begin() + static_cast<std::ptrdiff_t>(last_n), es.end());
        std::vector<detail::SeriesTerm<T>> rest_f(fs.begin() + static_cast<std::ptrdiff_t>(last_m), fs.end());
        if (!rest_e.empty() && !rest_f.empty()) {
          detail::run_interleave(chain, out, rest_e, rest_f, rest_e.size() + rest_f.size(), tol);
          for (const auto& g : out.g) used[static_cast<std::size_t>(g.coord)] = true;
        }
      }
    }
  }
  detail::finalize(chain, out);
  detail::compact(out, used);
  return out;
}

}  // namespace projsum
