#include <gtest/gtest.h>

#include <cmath>

#include "projsum/finite.hpp"
#include "projsum/pairsplit.hpp"
#include "support.hpp"

using namespace projsum;
using testing_support::Q;

namespace {

Mat block(double ee, double ef, double ff) {
  Mat m(2, 2);
  m << ee, ef, ef, ff;
  return m;
}

// Matrix of (1+mu) e(x)e + (1-lambda) f(x)f minus its split, rows/cols ordered (e, f).
double split_residual(double mu, double lambda) {
  auto s = split_pair<double>(mu, lambda, 0, 1);
  Vec w = s.w_vector(2), v = s.v_vector(2);
  Mat lhs = block(1 + mu, 0, 1 - lambda);
  return (lhs - outer(w) - s.remainder_coeff * outer(v)).norm();
}

// rho by bisection on det(diag(1+mu, 1-lambda) - u u^T) = 0 with u = (cos t, sin t).
double rho_by_bisection(double mu, double lambda) {
  auto det = [&](double s2) { return (1 + mu - (1 - s2)) * (1 - lambda - s2) - (1 - s2) * s2; };
  double lo = 0.0, hi = 1.0 - lambda;
  if (std::abs(det(lo)) < 1e-15) return lo;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if ((det(lo) > 0) == (det(mid) > 0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(NuRho, ZeroMuGivesIdentitySplit) {
  for (auto l : {"0", "1/3", "1"}) {
    auto r = nu_rho(Q("0"), Q(l));
    EXPECT_EQ(r.nu, 1);
    EXPECT_EQ(r.rho, 0);
  }
}

TEST(NuRho, ClosedFormValues) {
  auto a = nu_rho(Q("1"), Q("1"));
  EXPECT_EQ(a.nu, 0);
  EXPECT_EQ(a.rho, 0);
  auto b = nu_rho(Q("1"), Q("1/2"));
  EXPECT_EQ(b.nu, Q("1/9"));
  EXPECT_EQ(b.rho, Q("1/3"));
  auto c = nu_rho(Q("1/2"), Q("1/2"));
  EXPECT_EQ(c.nu, Q("1/4"));
  EXPECT_EQ(c.rho, Q("1/4"));
}

TEST(NuRho, RejectsOutOfRange) {
  EXPECT_THROW(nu_rho(Q("-1/2"), Q("1/2")), Error);
  EXPECT_THROW(nu_rho(Q("1"), Q("3/2")), Error);
}

TEST(SplitPair, MatchesHandComputedMatrices) {
  auto s = split_pair(Q("1"), Q("1/2"), 0, 1);
  Mat w = outer(s.w_vector(2)), v = outer(s.v_vector(2));
  const double r2 = std::sqrt(2.0);
  EXPECT_LT((w - block(2.0 / 3, -r2 / 3, 1.0 / 3)).norm(), 1e-12);
  EXPECT_EQ(s.remainder_coeff, Q("3/2"));
  EXPECT_LT((1.5 * v - block(4.0 / 3, r2 / 3, 1.0 / 6)).norm(), 1e-12);
  EXPECT_LT((w + 1.5 * v - block(2, 0, 0.5)).norm(), 1e-12);
}

TEST(SplitPair, ZeroMuIsIdentity) {
  auto s = split_pair(Q("0"), Q("1/3"), 0, 1);
  EXPECT_LT((outer(s.w_vector(2)) - block(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((outer(s.v_vector(2)) - block(0, 0, 1)).norm(), 1e-15);
}

TEST(SplitPair, FullDefectCollapsesOntoE) {
  auto s = split_pair(Q("1"), Q("1"), 0, 1);
  EXPECT_LT((outer(s.w_vector(2)) - block(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((outer(s.v_vector(2)) - block(1, 0, 0)).norm(), 1e-15);
  EXPECT_EQ(s.remainder_coeff, 1);
}

TEST(SplitPair, RejectsEqualCoordinates) { EXPECT_THROW(split_pair(Q("1"), Q("1/2"), 3, 3), Error); }

TEST(PairsplitProperty, GridIdentitiesHold) {
  double worst_norm = 0, worst_idem = 0, worst_res = 0;
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      double mu = 4.0 * i / 199.0, lambda = 1.0 * j / 199.0;
      auto s = split_pair<double>(mu, lambda, 0, 1);
      Vec w = s.w_vector(2), v = s.v_vector(2);
      worst_norm = std::max({worst_norm, std::abs(w.norm() - 1), std::abs(v.norm() - 1)});
      worst_idem = std::max(worst_idem, testing_support::projection_defect(outer(w)));
      worst_res = std::max(worst_res, split_residual(mu, lambda));
    }
  }
  EXPECT_LT(worst_norm, 1e-12);
  EXPECT_LT(worst_idem, 1e-12);
  EXPECT_LT(worst_res, 1e-12);
}

TEST(PairsplitProperty, RebalanceAgreesWithNuRhoOnGrid) {
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 200; ++j) {
      double mu = 4.0 * i / 199.0, lambda = 1.0 * j / 199.0;
      if (mu == 0 && lambda == 0) continue;
      auto a = nu_rho<double>(mu, lambda);
      auto b = rebalance<double>(1 - lambda, 1 + mu, 1);
      ASSERT_NEAR(a.rho, b.rho, 1e-12) << mu << " " << lambda;
      ASSERT_NEAR(a.nu, b.nu, 1e-12) << mu << " " << lambda;
    }
  }
}

TEST(PairsplitProperty, RhoMatchesDeterminantRoot) {
  for (double mu : {0.1, 0.5, 1.0, 2.5, 4.0}) {
    for (double lambda : {0.05, 0.3, 0.5, 0.9}) {
      EXPECT_NEAR(nu_rho<double>(mu, lambda).rho, rho_by_bisection(mu, lambda), 1e-9) << mu << " " << lambda;
    }
  }
}

TEST(Rebalance, EqualCoefficients) {
  auto r = rebalance(Q("2"), Q("2"), Q("2"));
  EXPECT_EQ(r.rho, 0);
  EXPECT_EQ(r.nu, 1);
}

TEST(Rebalance, ZeroWeight) {
  auto r = rebalance(Q("0"), Q("2"), Q("1"));
  EXPECT_EQ(r.rho, 0);
  EXPECT_EQ(r.nu, 0);
}

TEST(Rebalance, MatchesSplitPair) {
  auto r = rebalance(Q("1/2"), Q("2"), Q("1"));
  EXPECT_EQ(r.rho, Q("1/3"));
  EXPECT_EQ(r.nu, Q("1/9"));
}

TEST(Rebalance, IdentityHoldsForScaledTargets) {
  for (auto [a, b, c] : std::vector<std::tuple<double, double, double>>{{0.5, 2, 1}, {0.2, 3, 0.7}, {1, 4, 2.5}, {0, 1, 0.5}}) {
    auto r = rebalance<double>(a, b, c);
    auto [minus, plus] = rebalance_vectors(r);
    Eigen::Matrix2d lhs = Eigen::Vector2d(b, a).asDiagonal();
    Eigen::Matrix2d rhs = c * minus * minus.transpose() + (a + b - c) * plus * plus.transpose();
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
  }
}

TEST(Rebalance, RejectsBadOrdering) {
  EXPECT_THROW(rebalance(Q("1"), Q("2"), Q("3")), Error);
  EXPECT_THROW(rebalance(Q("1"), Q("2"), Q("1/2")), Error);
}

TEST(RebalanceRankOne, EqualProjectionsStayPut) {
  RankOneProjection p{Vec::Unit(3, 1)};
  auto [p2, q2] = rebalance_rank_one(0.5, p, 2, p, 1);
  EXPECT_LT((p2.matrix() - p.matrix()).norm(), 1e-15);
  EXPECT_LT((q2.matrix() - p.matrix()).norm(), 1e-15);
}

TEST(RebalanceRankOne, OrthogonalMatchesRebalance) {
  RankOneProjection p{Vec::Unit(2, 1)}, q{Vec::Unit(2, 0)};
  auto [p2, q2] = rebalance_rank_one(0.5, p, 2, q, 1);
  auto [minus, plus] = rebalance_vectors(rebalance<double>(0.5, 2, 1));
  EXPECT_LT((p2.matrix() - minus * minus.transpose()).norm(), 1e-12);
  EXPECT_LT((q2.matrix() - plus * plus.transpose()).norm(), 1e-12);
}

TEST(RebalanceRankOne, NonOrthogonalReconstructs) {
  Vec x(2), y(2);
  x << 1, 0;
  y << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  RankOneProjection p{x}, q{y};
  auto [p2, q2] = rebalance_rank_one(0.5, p, 2, q, 1);
  Mat lhs = 0.5 * p.matrix() + 2 * q.matrix();
  Mat rhs = 1 * p2.matrix() + 1.5 * q2.matrix();
  EXPECT_LT((lhs - rhs).norm(), 1e-10);
}

TEST(RebalanceCommuting, EqualProjections) {
  Projection p;
  p.frame = Mat::Identity(3, 2);
  auto [p2, q2] = rebalance_commuting(0.5, p, 1, p, 0.75);
  EXPECT_LT((p2.matrix() - p.matrix()).norm(), 1e-12);
  EXPECT_LT((q2.matrix() - p.matrix()).norm(), 1e-12);
}

TEST(RebalanceCommuting, ZeroWeightCollapsesOntoQ) {
  Projection p{Vec::Unit(2, 0)}, q{Vec::Unit(2, 1)};
  auto [p2, q2] = rebalance_commuting(0, p, 1, q, 0.5);
  EXPECT_LT((p2.matrix() - q.matrix()).norm(), 1e-12);
  EXPECT_LT((q2.matrix() - q.matrix()).norm(), 1e-12);
}

TEST(RebalanceCommuting, OverlappingDiagonalProjections) {
  Projection p, q;
  p.frame = Mat::Zero(3, 2);
  p.frame(0, 0) = 1;
  p.frame(1, 1) = 1;
  q.frame = Mat::Zero(3, 2);
  q.frame(1, 0) = 1;
  q.frame(2, 1) = 1;
  auto [p2, q2] = rebalance_commuting(0.5, p, 1, q, 0.75);
  Mat lhs = 0.5 * p.matrix() + q.matrix();
  Mat rhs = 0.75 * p2.matrix() + 0.75 * q2.matrix();
  EXPECT_LT((lhs - rhs).norm(), 1e-10);
  EXPECT_EQ(p2.rank(), 2);
  EXPECT_LT(testing_support::projection_defect(p2.matrix()), 1e-10);
  EXPECT_LT(testing_support::projection_defect(q2.matrix()), 1e-10);
}

TEST(RebalanceCommuting, RejectsNonCommutingAndRankMismatch) {
  Vec y(2);
  y << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  Projection p{Vec::Unit(2, 0)}, q{y};
  EXPECT_THROW(rebalance_commuting(0.5, p, 1, q, 0.75), Error);
  Projection big;
  big.frame = Mat::Identity(3, 2);
  Projection small{Vec::Unit(3, 2)};
  EXPECT_THROW(rebalance_commuting(0.5, big, 1, small, 0.75), Error);
}

TEST(SplitEqualMulti, SingleUnitCoefficient) {
  auto out = split_equal_multi<Rational>({Q("1")});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_LT((out[0].matrix() - Mat::Identity(1, 1)).norm(), 1e-15);
}

TEST(SplitEqualMulti, ThreeProjectionsForThreeHalvesTwice) {
  auto out = split_equal_multi<Rational>({Q("3/2"), Q("3/2")});
  ASSERT_EQ(out.size(), 3u);
  Mat sum = Mat::Zero(2, 2);
  for (const auto& p : out) {
    EXPECT_LT(testing_support::projection_defect(p.matrix()), 1e-12);
    sum += p.matrix();
  }
  EXPECT_LT((sum - 1.5 * Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(SplitEqualMulti, HigherRankBlocks) {
  auto out = split_equal_multi<Rational>({Q("1/2"), Q("5/2")}, 2);
  ASSERT_EQ(out.size(), 3u);
  Mat sum = Mat::Zero(4, 4);
  for (const auto& p : out) {
    EXPECT_EQ(p.rank(), 2);
    sum += p.matrix();
  }
  Mat expected = Vec((Eigen::Vector4d() << 0.5, 0.5, 2.5, 2.5).finished()).asDiagonal();
  EXPECT_LT((sum - expected).norm(), 1e-12);
}

TEST(SplitEqualMulti, RejectsTooFewProjections) {
  EXPECT_THROW(split_equal_multi<Rational>({Q("1/2"), Q("1/2"), Q("1"), Q("1")}), Error);
  EXPECT_THROW(split_equal_multi<Rational>({Q("1/2"), Q("1")}), Error);
}
