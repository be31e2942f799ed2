#include <gtest/gtest.h>

#include <random>

#include "projsum/finite.hpp"
#include "projsum/pairsplit.hpp"
#include "projsum/series.hpp"
#include "projsum/verify.hpp"
#include "support.hpp"

using namespace projsum;
using testing_support::Q;

TEST(CheckProjection, Identity) {
  auto c = check_projection(Mat::Identity(4, 4));
  EXPECT_EQ(c.idempotency, 0.0);
  EXPECT_EQ(c.symmetry, 0.0);
  EXPECT_EQ(c.rank, 4);
}

TEST(CheckProjection, PairSplitSummand) {
  auto s = split_pair(1.0, 0.5);
  auto c = check_projection(outer(s.w_vector(2)));
  EXPECT_LT(c.worst(), 1e-12);
  EXPECT_EQ(c.rank, 1);
}

TEST(CheckProjection, PerturbationIsFlagged) {
  Mat p = Mat::Identity(2, 2);
  p(0, 1) = p(1, 0) = 1e-3;
  auto c = check_projection(p);
  EXPECT_GT(c.idempotency, 5e-4);
  EXPECT_LT(c.idempotency, 5e-3);
}

TEST(Reconstruct, Cases) {
  EXPECT_EQ(reconstruct_and_compare({}, std::nullopt, Mat::Zero(3, 3)), 0.0);
  auto d = decompose_finite(std::vector<Rational>{Q("3/2"), Q("1/2")});
  auto ms = rank_one_matrices(d.projections);
  EXPECT_LT(reconstruct_and_compare(ms, std::nullopt, testing_support::diag_of(d.target)), 1e-12);
  auto dropped = ms;
  dropped.pop_back();
  EXPECT_NEAR(reconstruct_and_compare(dropped, std::nullopt, testing_support::diag_of(d.target)), 1.0, 1e-12);
  EXPECT_THROW(reconstruct_and_compare({Mat::Zero(2, 2)}, std::nullopt, Mat::Zero(3, 3)), Error);
}

TEST(Overlap, DyadicRunBothWaysAgree) {
  auto run = lemma41_defect(Q("1/2"), Sequence<Rational>::geometric(Q("1/4"), Q("1/2")), 12);
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t q = 0; q < n; ++q) {
      auto p = overlap_probe(run, q, n);
      EXPECT_LT(p.gap(), 1e-12) << "q=" << q << " n=" << n;
    }
  }
  auto first = overlap_probe(run, 2, 3);
  EXPECT_NEAR(first.closed_form, std::sqrt(1.0 - to_double(run.sigmas[2])), 1e-15);
  EXPECT_EQ(overlap_probe(run, 7, 5).stored, 0.0);
  EXPECT_THROW(overlap_probe(run, 0, 1000), Error);
}

TEST(Jacobi, DiagonalInput) {
  Mat a = diagonal_matrix({3.0, 1.0, 2.0});
  auto e = diagonalize_symmetric(a);
  EXPECT_EQ(e.values(0), 3.0);
  EXPECT_EQ(e.values(2), 1.0);
  EXPECT_EQ(e.spectrum.entries.size(), 3u);
}

TEST(Jacobi, RankOne) {
  Vec v(3);
  v << 1, 2, 2;
  auto e = diagonalize_symmetric(outer(v));
  ASSERT_EQ(e.spectrum.entries.size(), 1u);
  EXPECT_NEAR(e.spectrum.entries[0].value, 9.0, 1e-12);
}

TEST(Jacobi, RandomPsd) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Mat b(8, 8);
    for (Eigen::Index i = 0; i < 8; ++i)
      for (Eigen::Index j = 0; j < 8; ++j) b(i, j) = g(rng);
    Mat a = b * b.transpose();
    auto e = diagonalize_symmetric(a);
    EXPECT_LT((e.vectors.transpose() * e.vectors - Mat::Identity(8, 8)).norm(), 1e-12);
    EXPECT_LT((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - a).norm(), 1e-10 * a.norm());
    EXPECT_LT(e.off_diagonal, 1e-12 * a.norm());
  }
}

TEST(Jacobi, RejectsBadInput) {
  Mat a(2, 2);
  a << 1, 2, 0, 1;
  EXPECT_THROW(diagonalize_symmetric(a), Error);
  a << 1, 2, 2, 1;
  EXPECT_THROW(diagonalize_symmetric(a), Error);
}

TEST(BruteForce, KnownPoints) {
  auto r = brute_force_2x2(1.0, 0.5);
  EXPECT_NEAR(r.rho, 1.0 / 3, 1e-12);
  EXPECT_NEAR(r.nu, 1.0 / 9, 1e-12);
  auto z = brute_force_2x2(0.0, 0.3);
  EXPECT_NEAR(z.rho, 0.0, 1e-15);
  EXPECT_NEAR(z.nu, 1.0, 1e-15);
}

TEST(BruteForce, GridAgreesWithNuRho) {
  double worst = 0;
  for (int i = 0; i <= 60; ++i) {
    for (int j = 0; j <= 60; ++j) {
      const double mu = 4.0 * i / 60, lambda = 1.0 * j / 60;
      auto b = brute_force_2x2(mu, lambda);
      auto s = nu_rho(mu, lambda);
      worst = std::max({worst, std::abs(b.rho - s.rho), std::abs(b.nu - s.nu)});
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Report, FiniteDecompositionPasses) {
  auto d = decompose_finite(std::vector<Rational>{Q("5/2"), Q("1/3"), Q("1/6"), Q("2")});
  auto r = verify_decomposition(testing_support::diag_of(d.target), rank_one_matrices(d.projections));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.trace_gap, 0.0, 1e-12);
  auto j = r.to_json();
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["projections"].size(), 5u);
}
