#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "projsum/pairsplit.hpp"
#include "projsum/twoproj.hpp"
#include "support.hpp"

using namespace projsum;
using testing_support::Q;

namespace {

std::vector<Rational> values(std::initializer_list<const char*> xs) {
  std::vector<Rational> v;
  for (auto x : xs) v.push_back(Q(x));
  return v;
}

}  // namespace

TEST(SymmetryPairing, OnePair) {
  auto p = symmetry_pairing(values({"3/2", "1/2"}));
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(p.pairs[0].first, 1u);
  EXPECT_EQ(p.pairs[0].second, 0u);
  EXPECT_TRUE(p.fixed_unit.empty());
  Mat u = p.flip();
  EXPECT_EQ(u(0, 1), 1.0);
}

TEST(SymmetryPairing, DoubledIsUnconstrained) {
  auto p = symmetry_pairing(values({"2", "2"}));
  EXPECT_TRUE(p.pairs.empty());
  EXPECT_EQ(p.doubled.size(), 2u);
}

TEST(SymmetryPairing, WitnessIsReported) {
  try {
    symmetry_pairing(values({"3/2", "3/4"}));
    FAIL();
  } catch (const AsymmetryError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    EXPECT_EQ(e.witness(), "3/4");
  }
  try {
    symmetry_pairing(values({"3/2", "1/2", "5/4"}));
    FAIL();
  } catch (const AsymmetryError& e) {
    EXPECT_EQ(e.witness(), "3/4");
  }
  EXPECT_THROW(symmetry_pairing(values({"5/2"})), Error);
}

TEST(SymmetryPairing, MultiplicitiesMustAgree) {
  EXPECT_THROW(symmetry_pairing(values({"1/3", "1/3", "5/3"})), AsymmetryError);
  EXPECT_NO_THROW(symmetry_pairing(values({"1/3", "5/3", "1/3", "5/3", "1"})));
}

TEST(BuildTwoProjections, HalfBlock) {
  auto v = values({"3/2", "1/2"});
  auto r = build_two_projections(v, symmetry_pairing(v));
  Mat p = r.p_matrix();
  // P_- in (t coord, 2-t coord) = [[1/4, -sqrt3/4], [-sqrt3/4, 3/4]]
  EXPECT_NEAR(p(1, 1), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(p(0, 1), -std::sqrt(3.0) / 4, 1e-15);
  EXPECT_LT(testing_support::projection_defect(p), 1e-14);
  EXPECT_LT(testing_support::projection_defect(r.q_matrix()), 1e-14);
  EXPECT_LT(r.sum_residual(), 1e-14);
}

TEST(BuildTwoProjections, UnitGoesToP) {
  auto v = values({"1"});
  auto r = build_two_projections(v, symmetry_pairing(v));
  EXPECT_EQ(r.p.rank(), 1);
  EXPECT_EQ(r.q.rank(), 0);
  EXPECT_NEAR(r.p_matrix()(0, 0), 1.0, 0.0);
}

TEST(BuildTwoProjections, TwoGoesToBoth) {
  auto v = values({"2"});
  auto r = build_two_projections(v, symmetry_pairing(v));
  EXPECT_EQ(r.p_matrix()(0, 0), 1.0);
  EXPECT_EQ(r.q_matrix()(0, 0), 1.0);
}

TEST(BuildTwoProjections, AgreesWithPairSplit) {
  for (const char* ts : {"1/8", "1/3", "1/2", "4/5"}) {
    Rational t = Q(ts);
    auto v = std::vector<Rational>{2 - t, t};
    auto r = build_two_projections(v, symmetry_pairing(v));
    // e = 2-t coordinate (0), f = t coordinate (1)
    auto s = split_pair<Rational>(1 - t, 1 - t, 0, 1);
    EXPECT_EQ(s.remainder_coeff, 1);
    Vec w = s.w_vector(2), vv = s.v_vector(2);
    EXPECT_NEAR((outer(w) - r.p_matrix()).norm(), 0.0, 1e-14);
    EXPECT_NEAR((outer(vv) - r.q_matrix()).norm(), 0.0, 1e-14);
  }
}

TEST(TwoProjProperty, FuzzedSymmetricSpectra) {
  std::mt19937_64 rng(210);
  for (int trial = 0; trial < 300; ++trial) {
    auto v = testing_support::random_symmetric_diagonal(rng, 10);
    auto r = build_two_projections(v, symmetry_pairing(v));
    Mat p = r.p_matrix(), q = r.q_matrix();
    EXPECT_LT(testing_support::projection_defect(p), 1e-10);
    EXPECT_LT(testing_support::projection_defect(q), 1e-10);
    EXPECT_LT(r.sum_residual(), 1e-10);
    // P and the flipped Q see the same rank on the paired part
    EXPECT_EQ(r.p.rank() + r.q.rank(), static_cast<Eigen::Index>(std::llround(p.trace() + q.trace())));
  }
}

TEST(TwoProjProperty, FloatPairingUsesTolerance) {
  std::vector<double> v{0.3, 1.7 + 1e-12, 1.0};
  auto p = symmetry_pairing(v);
  EXPECT_EQ(p.pairs.size(), 1u);
  EXPECT_THROW(symmetry_pairing(std::vector<double>{0.3, 1.71}), AsymmetryError);
}
