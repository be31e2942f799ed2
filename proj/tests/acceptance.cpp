#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "projsum/projsum.hpp"
#include "support.hpp"

using namespace projsum;
using testing_support::Q;

namespace {

struct Outcome_ {
  bool pass = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

Mat diag_of(const std::vector<Rational>& d) { return testing_support::diag_of(d); }

Mat random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Mat b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(b);
  return qr.householderQ();
}

// 1. two-dimensional split identity on a grid, against the brute-force oracle
Outcome_ pair_identity() {
  Outcome_ o;
  double worst_rec = 0, worst_oracle = 0;
  const int grid = 200;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double mu = 4.0 * i / (grid - 1), lambda = 1.0 * j / (grid - 1);
      auto s = split_pair(mu, lambda);
      Mat lhs = diagonal_matrix({1.0 + mu, 1.0 - lambda});
      Vec w = s.w_vector(2), v = s.v_vector(2);
      worst_rec = std::max(worst_rec, (lhs - outer(w) - (1.0 + mu - lambda) * outer(v)).norm());
      auto b = brute_force_2x2(mu, lambda);
      worst_oracle = std::max({worst_oracle, std::abs(b.rho - s.rho), std::abs(b.nu - s.nu)});
    }
  }
  o.check(worst_rec < 1e-12, "reconstruction " + fmt(worst_rec));
  o.check(worst_oracle < 1e-9, "oracle gap " + fmt(worst_oracle));
  if (o.pass) o.detail = "residual " + fmt(worst_rec) + ", oracle gap " + fmt(worst_oracle);
  return o;
}

// 2. finite case: feasible spectra decompose into Tr A projections, infeasible ones are rejected
Outcome_ finite_case() {
  Outcome_ o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> rank(1, 12), coin(0, 1), odd(1, 6);
  double worst_proj = 0, worst_rec = 0;
  int rejected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto d = testing_support::random_feasible_diagonal(rng, rank(rng));
    Rational trace = 0;
    for (const auto& x : d) trace += x;
    auto dec = decompose_finite(d);
    o.check(Rational(static_cast<long long>(dec.projections.size())) == trace, "projection count differs from Tr A");
    auto report = verify_decomposition(diag_of(d), rank_one_matrices(dec.projections));
    worst_proj = std::max(worst_proj, report.worst_projection());
    worst_rec = std::max(worst_rec, report.reconstruction);
    for (const auto& p : report.projections) o.check(p.rank == 1, "projection of rank " + std::to_string(p.rank));

    std::vector<Rational> bad;
    if (coin(rng)) {
      bad = d;
      bad[0] += Rational(1, 2 * odd(rng) + 1);
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) bad.push_back(Rational(1, 2 + static_cast<int>(i)));
    }
    auto v = classify(Spectrum<Rational>::diagonal(bad), FactorType::TypeI);
    if (v.outcome == Outcome::Infeasible) ++rejected;
  }
  o.check(worst_proj < 1e-10, "projection residual " + fmt(worst_proj));
  o.check(worst_rec < 1e-9, "reconstruction " + fmt(worst_rec));
  o.check(rejected == 1000, std::to_string(rejected) + "/1000 infeasible rejected");
  if (o.pass) o.detail = "projection " + fmt(worst_proj) + ", reconstruction " + fmt(worst_rec) + ", 1000/1000 rejected";
  return o;
}

// 3. single defect against the dyadic excess
Outcome_ dyadic_run() {
  Outcome_ o;
  auto d = lemma41_defect(Q("1/2"), Sequence<Rational>::geometric(Q("1/4"), Q("1/2")), 30);
  o.check(d.deltas.size() == 31, "expected 31 deltas");
  for (std::size_t j = 1; j <= d.deltas.size(); ++j)
    o.check(d.deltas[j - 1] == -Rational(1, 1) / ipow<Rational>(Rational(2), j), "delta_" + std::to_string(j) + " = " + to_string(d.deltas[j - 1]));
  o.check(d.sigmas.size() > 2 && d.sigmas[1] == Q("4/9") && d.sigmas[2] == Q("4/7"), "sigma_2, sigma_3 differ from 4/9, 4/7");
  double worst_closed = 0;
  for (std::size_t n = 1; n <= d.history.size(); ++n) {
    worst_closed = std::max(worst_closed, (closed_form_vector(d, n) - d.history[n - 1]).norm());
    for (std::size_t q = 0; q < n; ++q) worst_closed = std::max(worst_closed, overlap_probe(d, q, n).gap());
  }
  o.check(worst_closed < 1e-12, "closed form gap " + fmt(worst_closed));
  double worst_partial = 0;
  for (auto [t, r] : partial_residuals(d)) worst_partial = std::max(worst_partial, r);
  o.check(worst_partial < 1e-10, "partial identity residual " + fmt(worst_partial));
  for (std::size_t n = 1; n < d.history.size(); ++n)
    o.check(std::abs(d.history[n](0)) < std::abs(d.history[n - 1](0)), "anchor overlap not decreasing at " + std::to_string(n + 1));
  if (o.pass) o.detail = "closed form " + fmt(worst_closed) + ", partial " + fmt(worst_partial);
  return o;
}

// 4. interleaved recursion
Outcome_ interleave_run() {
  Outcome_ o;
  auto mu = Sequence<Rational>::geometric(Q("1/2"), Q("1/2"));
  auto lam = Sequence<Rational>::geometric(Q("2/3"), Q("1/3"));
  auto d = lemma42_interleave(mu, lam, 50);
  o.check(d.plan.has_value() && d.plan->n.size() > 1 && d.plan->m.size() > 1, "no block plan");
  if (!o.pass) return o;
  o.check(d.plan->n[1] == 2 && d.plan->m[1] == 2, "(n1, m1) = (" + std::to_string(d.plan->n[1]) + ", " + std::to_string(d.plan->m[1]) + ")");
  auto report = check_interleave(d);
  o.check(report.signs_ok, "sign pattern violated");
  o.check(!report.boundaries.empty() && report.max_boundary_sigma < 0.5, "boundary sigma " + fmt(report.max_boundary_sigma));
  // deltas against prefix sums taken in the plan's order
  Rational running = 0;
  std::size_t ie = 0, jf = 0;
  for (std::size_t k = 0; k < d.plan->order.size() && k < d.deltas.size(); ++k) {
    running += d.plan->order[k] == Side::Excess ? mu.term(ie++) : Rational(-lam.term(jf++));
    o.check(d.deltas[k] == running, "delta_" + std::to_string(k + 1) + " is not the running prefix sum");
  }
  double worst_partial = 0;
  for (auto [t, r] : partial_residuals(d)) worst_partial = std::max(worst_partial, r);
  o.check(worst_partial < 1e-10, "partial residual " + fmt(worst_partial));
  if (o.pass)
    o.detail = std::to_string(report.boundaries.size()) + " boundaries, max sigma " + fmt(report.max_boundary_sigma) + ", partial " +
               fmt(worst_partial);
  return o;
}

// 5. collision-set routing
Outcome_ dispatcher() {
  Outcome_ o;
  using Tail = TailSpec<Rational>;
  struct Case {
    const char* name;
    Spectrum<Rational> s;
    std::string route;
    std::size_t phi_at_budget;
  };
  auto with_tails = [](std::vector<Rational> v, std::vector<Tail> t) {
    auto s = Spectrum<Rational>::diagonal(v);
    s.tails = std::move(t);
    return s;
  };
  const std::size_t budget = 1000;
  std::vector<Case> cases{
      {"recurring", with_tails({}, {Tail::geometric(Side::Excess, Q("1/2"), Q("1/2")), Tail::geometric(Side::Defect, Q("1/2"), Q("1/2"))}),
       "blockwise", budget},
      {"single", with_tails({Q("3/2"), Q("1/2")}, {Tail::geometric(Side::Excess, Q("1/2"), Q("1/2")), Tail::geometric(Side::Defect, Q("2/3"), Q("1/3"))}),
       "split_then_interleave", 1},
      {"empty", with_tails({}, {Tail::geometric(Side::Excess, Q("1/2"), Q("1/2")), Tail::geometric(Side::Defect, Q("2/3"), Q("1/3"))}),
       "interleave", 0},
  };
  std::ostringstream detail;
  for (auto& c : cases) {
    auto phi = phi_set(excess_sequence(c.s), defect_sequence(c.s), budget);
    o.check(phi.size() == c.phi_at_budget, std::string(c.name) + ": |phi| = " + std::to_string(phi.size()));
    auto d = decompose_trace_balanced(c.s, 30);
    o.check(d.route == c.route, std::string(c.name) + " routed to " + d.route);
    std::optional<Mat> rem;
    if (d.remainder) rem = to_double(d.remainder->coeff) * outer(d.remainder->vector);
    auto report = verify_decomposition(d.target_matrix(), rank_one_matrices(d.projections), rem, {1e-10, 1e-10});
    o.check(report.passed(), std::string(c.name) + ": prefix fails verification");
    detail << c.name << " |phi|=" << phi.size() << " ";
  }
  if (o.pass) o.detail = detail.str() + "all prefixes verified";
  return o;
}

// 6. balanced trace iteration
Outcome_ trace_iteration() {
  Outcome_ o;
  auto one = lemma51_iterate(TraceState<Rational>{Q("1"), Q("1/2"), Q("1/4"), Q("1/2")}, 10);
  o.check(one.steps() == 1 && one.status == IterationStatus::TerminatedEqual && one.states.back().mu == Q("1/2") &&
              one.states.back().lambda == Q("1/2"),
          "(1, 1/2, 1/4, 1/2) did not stop after one step at 1/2");
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> a_dist(1, 40), lam_num(1, 15);
  for (int trial = 0; trial < 100; ++trial) {
    const int a = a_dist(rng);
    std::uniform_int_distribution<int> b_dist(1, 64 - a);
    const int b = b_dist(rng);
    const Rational lambda(lam_num(rng), 16);
    auto it = lemma51_iterate(TraceState<Rational>{lambda * b / a, lambda, Rational(a, 64), Rational(b, 64)}, 100000);
    for (const auto& s : it.states) o.check(s.mu * s.tauE == s.lambda * s.tauF, "balance broken");
  }
  auto demo = lemma51_iterate(TraceState<double>{std::sqrt(2.0) / 2, 0.5, 0.5, std::sqrt(2.0) / 2}, 1000, 0.0);
  std::size_t lower_lambda = 0, lower_mu = 0;
  for (auto b : demo.branches) (b == Branch::LowerLambda ? lower_lambda : lower_mu)++;
  bool small = false;
  for (const auto& s : demo.states)
    if (s.tauE < 1e-6 && s.tauF < 1e-6) small = true;
  o.check(small, "traces never fell below 1e-6");
  o.check(lower_lambda >= 50 && lower_mu >= 50, "branch counts " + std::to_string(lower_lambda) + "/" + std::to_string(lower_mu));
  if (o.pass)
    o.detail = "float demo: " + std::to_string(demo.steps()) + " steps, branches " + std::to_string(lower_lambda) + "/" + std::to_string(lower_mu);
  return o;
}

// 7. matrix realization of balanced tracial inputs
Outcome_ matrix_realization() {
  Outcome_ o;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> den(2, 64), lam_num(1, 15);
  double worst = 0;
  long long largest = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int q = den(rng);
    std::uniform_int_distribution<int> a_dist(1, q - 1);
    const int a = a_dist(rng);
    std::uniform_int_distribution<int> b_dist(1, q - a);
    const Rational te(a, q), tf(b_dist(rng), q);
    const Rational lambda(lam_num(rng), 16);
    const Rational mu = lambda * tf / te;
    TracialSpectrum<Rational> s{{{1 + mu, te}, {1 - lambda, tf}}};
    auto model = realize_matrix_model(s, 1);
    o.check(model.n % static_cast<long long>(denominator(te).convert_to<long long>()) == 0 &&
                model.n % static_cast<long long>(denominator(tf).convert_to<long long>()) == 0,
            "N = " + std::to_string(model.n) + " misses an input denominator");
    largest = std::max(largest, model.n);
    std::vector<Mat> ps;
    for (std::size_t i = 0; i < model.frames.size(); ++i) ps.push_back(model.projection(i));
    auto report = verify_decomposition(model.target, ps, std::nullopt, {1e-10, 1e-10});
    worst = std::max({worst, report.reconstruction, report.worst_projection()});
  }
  o.check(worst < 1e-10, "residual " + fmt(worst));
  if (o.pass) o.detail = "worst residual " + fmt(worst) + ", largest N " + std::to_string(largest);
  return o;
}

// 8. greedy blocks for a divergent excess
Outcome_ greedy() {
  Outcome_ o;
  auto mu = Sequence<Rational>::periodic({Q("1/2")});
  auto g = greedy_blocks(mu, Q("1"), 3);
  o.check(g.blocks.size() == 3, "expected 3 blocks");
  if (!o.pass) return o;
  const auto& b = g.blocks[0];
  o.check(b.cut == 2 && b.alpha == Q("1/2") && b.beta == 1 && b.k_count == 3, "first block (" + std::to_string(b.cut) + ", " +
                                                                                  to_string(b.alpha) + ", " + to_string(b.beta) + ", " +
                                                                                  std::to_string(b.k_count) + ")");
  for (const auto& blk : g.blocks) {
    Rational sum = 0;
    for (const auto& c : blk.coefficients([&](std::size_t i) { return mu.term(i - 1); })) sum += c;
    o.check(is_integer(sum), "block coefficient sum " + to_string(sum));
  }
  auto d = decompose_divergent(mu, Q("1"), 3);
  o.check(d.projections.size() == 9, std::to_string(d.projections.size()) + " projections");
  Mat carried = Mat::Zero(d.dim, d.dim);
  for (const auto& c : d.carries) carried += to_double(c.coeff) * outer(c.vector);
  auto report = verify_decomposition(d.target_matrix(), rank_one_matrices(d.projections), carried);
  o.check(report.passed(), "divergent prefix fails verification");
  if (o.pass) o.detail = "9 projections, reconstruction " + fmt(report.reconstruction);
  return o;
}

// 9. isometry certificate round trip
Outcome_ frames_round_trip() {
  Outcome_ o;
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> dim(1, 16);
  double worst_comp = 0, worst_back = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto diag = testing_support::random_feasible_diagonal(rng, dim(rng));
    auto d = decompose_finite(diag);
    Mat u = random_orthogonal(rng, d.dim);
    Mat a = u * diag_of(diag) * u.transpose();
    std::vector<Mat> ps;
    for (const auto& p : rank_one_matrices(d.projections)) ps.push_back(u * p * u.transpose());
    auto cert = decomposition_to_isometry(a, ps);
    worst_comp = std::max(worst_comp, cert.compression_residual);
    auto back = isometry_to_decomposition(cert.v, cert.partition, a);
    worst_back = std::max(worst_back, reconstruct_and_compare(back, std::nullopt, a));
  }
  o.check(worst_comp < 1e-9, "compression residual " + fmt(worst_comp));
  o.check(worst_back < 1e-9, "reconstruction " + fmt(worst_back));
  if (o.pass) o.detail = "compression " + fmt(worst_comp) + ", reconstruction " + fmt(worst_back);
  return o;
}

// 10. index of projection diagonals
Outcome_ kadison() {
  Outcome_ o;
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> dim(1, 32), entry(-3, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = static_cast<std::size_t>(dim(rng));
    std::uniform_int_distribution<std::size_t> cols(0, n);
    std::vector<std::vector<Rational>> vs(cols(rng), std::vector<Rational>(n));
    for (auto& v : vs)
      for (auto& x : v) x = entry(rng);
    auto p = exact_projection(vs, n);
    auto k = kadison_index(p.diagonal());
    o.check(k.is_integer && is_integer(k.index), "index " + to_string(k.index) + " is not an integer");
  }
  auto w = kadison_index<double>({0.9, 0.9, 0.1});
  o.check(!w.is_integer && std::abs(w.index - 0.1) < 1e-12, "witness (0.9, 0.9, 0.1) not flagged");
  if (o.pass) o.detail = "500 exact integer indices, witness index " + fmt(w.index);
  return o;
}

// 11. sums of two projections
Outcome_ two_projections_case() {
  Outcome_ o;
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto v = testing_support::random_symmetric_diagonal(rng, 10);
    auto r = build_two_projections(v, symmetry_pairing(v));
    Mat p = r.p_matrix(), q = r.q_matrix();
    worst = std::max({worst, check_projection(p).worst(), check_projection(q).worst(), reconstruct_and_compare({p, q}, std::nullopt, r.target)});
  }
  o.check(worst < 1e-10, "residual " + fmt(worst));
  try {
    symmetry_pairing(std::vector<Rational>{Q("3/2"), Q("3/4")});
    o.check(false, "asymmetric witness accepted");
  } catch (const AsymmetryError& e) {
    o.check(e.witness() == "3/4", "witness reported as " + e.witness());
  }
  if (o.pass) o.detail = "worst residual " + fmt(worst) + ", witness t = 3/4";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome_()> run;
  };
  std::vector<Criterion> all{
      {1, "two-dimensional split identity", 1, pair_identity},
      {2, "finite case", 30, finite_case},
      {3, "dyadic single-defect run", 1, dyadic_run},
      {4, "interleaved run", 1, interleave_run},
      {5, "collision-set dispatcher", 5, dispatcher},
      {6, "balanced trace iteration", 5, trace_iteration},
      {7, "matrix realization", 30, matrix_realization},
      {8, "greedy blocks", 1, greedy},
      {9, "isometry round trip", 30, frames_round_trip},
      {10, "projection diagonal index", 10, kadison},
      {11, "two projections", 5, two_projections_case},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome_ o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && secs > c.limit_s) {
      o.pass = false;
      o.detail = "took " + fmt(secs) + " s, limit " + fmt(c.limit_s) + " s";
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d  %-32s %7.3f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
