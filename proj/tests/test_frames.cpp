#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "projsum/finite.hpp"
#include "projsum/frames.hpp"
#include "projsum/verify.hpp"
#include "support.hpp"

using namespace projsum;
using testing_support::Q;

namespace {

std::vector<Mat> basis_projections(int n) {
  std::vector<Mat> out;
  for (int i = 0; i < n; ++i) out.push_back(outer(basis_vector(n, i)));
  return out;
}

Mat random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Mat b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(b);
  return qr.householderQ();
}

}  // namespace

TEST(ToIsometry, IdentityWithBasis) {
  auto cert = decomposition_to_isometry(Mat::Identity(3, 3), basis_projections(3));
  EXPECT_LT((cert.v - Mat::Identity(3, 3)).norm(), 1e-14);
  for (int j = 0; j < 3; ++j) EXPECT_LT((cert.partition[j] - outer(basis_vector(3, j))).norm(), 1e-14);
  EXPECT_LT(cert.compression_residual, 1e-14);
}

TEST(ToIsometry, PairSplitProjections) {
  auto d = decompose_finite(std::vector<Rational>{Q("3/2"), Q("1/2")});
  Mat a = testing_support::diag_of(d.target);
  auto cert = decomposition_to_isometry(a, rank_one_matrices(d.projections));
  EXPECT_LT(cert.compression_residual, 1e-9);
  EXPECT_LT(cert.range_residual, 1e-10);
  Mat vav = cert.v * a * cert.v.transpose();
  EXPECT_NEAR(vav(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(vav(1, 1), 1.0, 1e-12);
}

TEST(ToIsometry, Errors) {
  Mat a = diagonal_matrix({1.5, 0.7});
  EXPECT_THROW(decomposition_to_isometry(a, {}), Error);
  try {
    decomposition_to_isometry(a, {});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
  EXPECT_THROW(decomposition_to_isometry(Mat::Identity(2, 2), basis_projections(1 + 0)), Error);
}

TEST(FromIsometry, BasisCase) {
  auto ps = isometry_to_decomposition(Mat::Identity(2, 2), basis_projections(2), Mat::Identity(2, 2));
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_LT((ps[0] - outer(basis_vector(2, 0))).norm(), 1e-14);
}

TEST(FromIsometry, MissingBlockRejected) {
  auto parts = basis_projections(3);
  parts.pop_back();
  EXPECT_THROW(isometry_to_decomposition(Mat::Identity(3, 3), parts, Mat::Identity(3, 3)), Error);
}

TEST(FramesProperty, RoundTrip) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(1, 16);
  for (int trial = 0; trial < 60; ++trial) {
    auto diag = testing_support::random_feasible_diagonal(rng, dim(rng));
    auto d = decompose_finite(diag);
    Mat u = random_orthogonal(rng, d.dim);
    Mat a = u * testing_support::diag_of(d.target) * u.transpose();
    std::vector<Mat> ps;
    for (const auto& p : rank_one_matrices(d.projections)) ps.push_back(u * p * u.transpose());
    auto cert = decomposition_to_isometry(a, ps);
    ASSERT_LT(cert.compression_residual, 1e-9);
    Mat vav = cert.v * a * cert.v.transpose();
    for (Eigen::Index i = 0; i < vav.rows(); ++i) EXPECT_NEAR(vav(i, i), 1.0, 1e-9);
    auto back = isometry_to_decomposition(cert.v, cert.partition, a);
    EXPECT_LT(reconstruct_and_compare(back, std::nullopt, a), 1e-9);
    for (std::size_t j = 0; j < back.size(); ++j) {
      auto c = check_projection(back[j]);
      EXPECT_LT(c.worst(), 1e-10);
      EXPECT_EQ(c.rank, std::llround(cert.partition[j].trace()));
    }
  }
}

TEST(Kadison, Examples) {
  auto k = kadison_index<Rational>({1, 1, 0});
  EXPECT_EQ(k.index, 0);
  EXPECT_TRUE(k.is_integer);
  auto f = kadison_index<double>({0.9, 0.9, 0.2});
  EXPECT_NEAR(f.a, 0.2, 1e-15);
  EXPECT_NEAR(f.b, 0.2, 1e-15);
  EXPECT_TRUE(f.is_integer);
  auto w = kadison_index<double>({0.9, 0.9, 0.1});
  EXPECT_NEAR(w.index, 0.1, 1e-15);
  EXPECT_FALSE(w.is_integer);
  EXPECT_THROW(kadison_index<double>({1.2}), Error);
}

TEST(Kadison, RankTwoWitness) {
  // rank-2 projection in dimension 3 with diagonal (0.9, 0.9, 0.2): complement is a unit vector
  Vec x(3);
  x << std::sqrt(0.1), -std::sqrt(0.1), std::sqrt(0.8);
  Mat p = Mat::Identity(3, 3) - outer(x);
  EXPECT_LT(check_projection(p).worst(), 1e-14);
  std::vector<double> c{p(0, 0), p(1, 1), p(2, 2)};
  EXPECT_TRUE(kadison_index(c).is_integer);
  EXPECT_NEAR(c[2], 0.2, 1e-15);
}

TEST(Kadison, ExactProjectionsGiveIntegers) {
  std::mt19937_64 rng(36);
  std::uniform_int_distribution<int> dim(1, 12), entry(-4, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = static_cast<std::size_t>(dim(rng));
    std::uniform_int_distribution<std::size_t> cols(0, n);
    std::vector<std::vector<Rational>> vs(cols(rng), std::vector<Rational>(n));
    for (auto& v : vs)
      for (auto& x : v) x = entry(rng);
    auto p = exact_projection(vs, n);
    EXPECT_LT(check_projection(p.to_matrix()).worst(), 1e-12);
    auto k = kadison_index(p.diagonal());
    EXPECT_TRUE(k.is_integer);
    EXPECT_TRUE(is_integer(k.index));
  }
}

TEST(DiagonalExpansion, Examples) {
  auto e = projection_diagonal_expansion(diagonal_matrix({1.0, 0.0}));
  EXPECT_EQ(e.c[0], 1.0);
  EXPECT_EQ(e.c[1], 0.0);
  EXPECT_LT((e.weighted_sum() - Mat::Identity(1, 1)).norm(), 1e-14);
  Vec h(2);
  h << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  auto g = projection_diagonal_expansion(outer(h));
  EXPECT_NEAR(g.c[0], 0.5, 1e-15);
  EXPECT_NEAR(std::abs(g.w[0].dot(g.w[1])), 1.0, 1e-14);
  EXPECT_LT((g.weighted_sum() - Mat::Identity(1, 1)).norm(), 1e-14);
  Mat bad = Mat::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = 1e-3;
  EXPECT_THROW(projection_diagonal_expansion(bad), Error);
}

TEST(DiagonalExpansion, RandomProjections) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    Mat u = random_orthogonal(rng, 7);
    Mat p = u.leftCols(trial % 8) * u.leftCols(trial % 8).transpose();
    auto e = projection_diagonal_expansion(p);
    EXPECT_LT((e.weighted_sum() - Mat::Identity(e.frame.cols(), e.frame.cols())).norm(), 1e-9);
  }
}
