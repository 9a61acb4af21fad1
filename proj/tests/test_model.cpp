#include "smfd/model.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace smfd;

TEST(Design, SmallLatticeRows) {
  Eigen::MatrixXd a(2, 3);
  a << 1, 0, 0, 1, 0, 1;
  EXPECT_EQ(Eigen::MatrixXd(make_design(1, 2).matrix()), a);

  Eigen::MatrixXd b(4, 3);
  b << 1, 0, 0, 1, 0, 1, 1, 1, 0, 1, 1, 1;
  EXPECT_EQ(Eigen::MatrixXd(make_design(2, 2).matrix()), b);
}

TEST(Design, FullColumnRankAndUnitRange) {
  for (auto [n1, n2] : {std::pair{2, 2}, {3, 7}, {30, 30}}) {
    const Eigen::MatrixXd z = make_design(n1, n2).matrix();
    ASSERT_EQ(z.cols(), 3);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    EXPECT_EQ(qr.rank(), 3);
    EXPECT_GE(z.minCoeff(), 0.0);
    EXPECT_LE(z.maxCoeff(), 1.0);
    EXPECT_LE((z - oracle::design(n1, n2)).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(PhiInverse, MatchesDenseInverse2x2) {
  const DesignMatrix d = make_design(2, 2);
  const Eigen::MatrixXd ref = oracle::phi(2, 2, 1.0, 1e-3).inverse();
  Eigen::MatrixXd got(4, 4);
  for (int c = 0; c < 4; ++c) got.col(c) = phi_inverse_apply(Eigen::VectorXd::Unit(4, c), 1.0, d, 1e-3);
  EXPECT_LE((got - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PhiInverse, InvertsPhiOnRandomVectors) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  const DesignMatrix d = make_design(4, 5);
  for (double kappa_l : {0.5, 3.0, 400.0}) {
    const Eigen::MatrixXd phi = oracle::phi(4, 5, kappa_l, 1e-3);
    Eigen::VectorXd v(20);
    for (auto& x : v) x = nd(rng);
    const Eigen::VectorXd back = phi_inverse_apply(phi * v, kappa_l, d, 1e-3);
    EXPECT_LE((back - v).norm() / v.norm(), 1e-8) << kappa_l;
  }
}

TEST(PhiInverse, TightTrendPriorLeavesScaledIdentity) {
  const DesignMatrix d = make_design(3, 3);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(9, -1.0, 2.0);
  const Eigen::VectorXd got = phi_inverse_apply(v, 2.0, d, 1e9);
  EXPECT_LE((got - 2.0 * v).norm() / (2.0 * v).norm(), 1e-4);
}

TEST(LogPriorField, ConstantUnitAndScaling) {
  const PrecisionMatrix q = build_igmrf_precision(2, 2);
  EXPECT_DOUBLE_EQ(log_prior_field(Raster(2, 2, 3.0), q, 1.0), 0.0);
  const Raster e1(2, 2, std::vector<double>{1, 0, 0, 0});
  EXPECT_DOUBLE_EQ(log_prior_field(e1, q, 1.0), -3.0);
  EXPECT_DOUBLE_EQ(log_prior_field(e1, q, 2.0), -6.0);
}

TEST(HyperParams, DefaultsAndValidation) {
  HyperParams hp;
  EXPECT_NO_THROW(hp.validate());
  EXPECT_EQ(hp.effective_burn_in(), 50);
  hp.burn_in = 100;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.window = 4;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.lambda = 1.0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = HyperParams{};
  hp.beta_f = 0.0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
}
