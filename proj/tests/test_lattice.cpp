#include "smfd/lattice.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

using namespace smfd;

namespace {

SpotMask random_mask(std::size_t n1, std::size_t n2, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.3);
  SpotMask m(n1, n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) m.set(i, j, coin(rng));
  return m;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Neighbors, CornerEdgeInterior) {
  using P = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(neighbors(0, 0, 3, 3), (std::vector<P>{{1, 0}, {0, 1}}));
  EXPECT_EQ(neighbors(1, 1, 3, 3), (std::vector<P>{{0, 1}, {2, 1}, {1, 0}, {1, 2}}));
  EXPECT_EQ(neighbors(0, 1, 3, 3), (std::vector<P>{{1, 1}, {0, 0}, {0, 2}}));
  EXPECT_THROW(neighbors(3, 0, 3, 3), std::invalid_argument);
}

TEST(IgmrfPrecision, TwoByTwoFirstRow) {
  const Eigen::MatrixXd d = oracle::difference_operator(2, 2);
  Eigen::MatrixXd expect_d(4, 4);
  expect_d << -2, 1, 1, 0, 1, -2, 0, 1, 1, 0, -2, 1, 0, 1, 1, -2;
  EXPECT_EQ(d, expect_d);

  const Eigen::MatrixXd q = build_igmrf_precision(2, 2).dense();
  EXPECT_DOUBLE_EQ(q(0, 0), 6.0);
  EXPECT_DOUBLE_EQ(q(0, 1), -4.0);
  EXPECT_DOUBLE_EQ(q(0, 2), -4.0);
  EXPECT_DOUBLE_EQ(q(0, 3), 2.0);
}

TEST(IgmrfPrecision, MatchesDenseOracleUpTo8x8) {
  for (int n1 = 1; n1 <= 8; ++n1)
    for (int n2 = 1; n2 <= 8; ++n2) {
      if (n1 * n2 < 2) continue;
      const Eigen::MatrixXd q = build_igmrf_precision(n1, n2).dense();
      EXPECT_LE(max_abs_diff(q, oracle::precision(n1, n2)), 1e-12) << n1 << "x" << n2;
    }
}

TEST(IgmrfPrecision, SymmetricPsdWithConstantNullSpace) {
  for (int n : {3, 5, 7}) {
    const PrecisionMatrix p = build_igmrf_precision(n, n + 1);
    const Eigen::MatrixXd q = p.dense();
    EXPECT_EQ(q, q.transpose());
    const double tol = 1e-9 * q.diagonal().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -tol);
    const Eigen::VectorXd rows = q * Eigen::VectorXd::Ones(q.rows());
    EXPECT_LE(rows.cwiseAbs().maxCoeff(), 1e-9 * q.cwiseAbs().maxCoeff());
  }
}

TEST(IgmrfPrecision, RejectsSinglePixel) {
  EXPECT_THROW(build_igmrf_precision(1, 1), std::invalid_argument);
}

TEST(HigmrfPrecision, AllBackgroundTwoByTwo) {
  const SpotMask zeros(2, 2, 0);
  const Eigen::MatrixXd d = oracle::difference_operator(2, 2, &zeros, 50.0);
  EXPECT_EQ(d.row(0), (Eigen::RowVector4d(-100, 50, 50, 0)));
  const Eigen::MatrixXd q = build_higmrf_precision(2, 2, zeros, LatticeWeights(50.0)).dense();
  EXPECT_LE(max_abs_diff(q, d.transpose() * d), 1e-12);
}

TEST(HigmrfPrecision, RandomMasksMatchDenseOracle) {
  std::mt19937_64 rng(11);
  for (int n1 = 2; n1 <= 8; ++n1)
    for (int n2 = 2; n2 <= 8; ++n2)
      for (int trial = 0; trial < 100; ++trial) {
        const SpotMask m = random_mask(n1, n2, rng);
        const Eigen::MatrixXd q = build_higmrf_precision(n1, n2, m, LatticeWeights()).dense();
        const Eigen::MatrixXd ref = oracle::precision(n1, n2, &m, kDefaultLambda);
        ASSERT_LE(max_abs_diff(q, ref), 1e-12 * std::max(1.0, ref.cwiseAbs().maxCoeff()))
            << n1 << "x" << n2 << " trial " << trial;
        ASSERT_EQ(q, q.transpose());
      }
}

TEST(HigmrfPrecision, AllSpotEqualsIgmrf) {
  for (int n = 2; n <= 8; ++n) {
    const SpotMask ones(n, n, 1);
    EXPECT_TRUE(build_higmrf_precision(n, n, ones, LatticeWeights()) == build_igmrf_precision(n, n));
  }
}

TEST(HigmrfPrecision, ConstantStaysInNullSpace) {
  std::mt19937_64 rng(3);
  const SpotMask m = random_mask(6, 5, rng);
  const PrecisionMatrix p = build_higmrf_precision(6, 5, m, LatticeWeights(50.0));
  EXPECT_NEAR(p.quadratic_form(Eigen::VectorXd::Constant(30, 2.5)), 0.0, 1e-9);
}

TEST(HigmrfPrecision, LargerLambdaPenalisesBackgroundRoughnessMore) {
  std::mt19937_64 rng(5);
  const SpotMask background(5, 5, 0);
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(25);
  for (auto& v : x) v = nd(rng);
  double prev = build_igmrf_precision(5, 5).quadratic_form(x);
  for (double lambda : {2.0, 10.0, 50.0}) {
    const double cur = build_higmrf_precision(5, 5, background, LatticeWeights(lambda)).quadratic_form(x);
    EXPECT_GT(cur, prev);
    prev = cur;
  }
}

TEST(HigmrfPrecision, ValidatesInputs) {
  EXPECT_THROW(LatticeWeights(1.0), std::invalid_argument);
  EXPECT_THROW(build_higmrf_precision(3, 3, SpotMask(2, 3), LatticeWeights()), std::invalid_argument);
}

TEST(PrecisionMatrix, DenseRefusesHugeLattice) {
  EXPECT_THROW(build_igmrf_precision(65, 64).dense(), std::length_error);
}
