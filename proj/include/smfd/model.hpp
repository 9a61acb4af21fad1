#pragma once

// Observation model y = Z gamma + f + noise with gamma marginalised out:
// y | f ~ N(f, Phi), Phi = I / kappa_l + Z Q_gamma^{-1} Z^T, Q_gamma = g I.

#include "smfd/lattice.hpp"
#include "smfd/raster.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace smfd {

/// Hyper-parameters of the Gibbs sampler. Defaults are the systematic
/// synthetic-image configuration: h = 0.1, T = 100, alpha_l = 1, beta_l = 10,
/// alpha_f = 10, beta_f = 0.01, Q_gamma = 1e-3 I, lambda = 50.
struct HyperParams {
  double alpha_l = 1.0;
  double beta_l = 10.0;
  double alpha_f = 10.0;
  double beta_f = 0.01;
  double gamma_precision = 1e-3;
  double lambda = kDefaultLambda;
  double h = 0.1;
  int iterations = 100;  // T
  int window = 7;
  std::optional<int> burn_in;  // defaults to T / 2
  std::uint64_t seed = 0;

  int effective_burn_in() const { return burn_in.value_or(iterations / 2); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument(std::string(name) + " must be a positive finite number");
    };
    positive(alpha_l, "alpha_l");
    positive(beta_l, "beta_l");
    positive(alpha_f, "alpha_f");
    positive(beta_f, "beta_f");
    positive(gamma_precision, "gamma_precision");
    if (!(lambda > 1.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 1");
    if (!std::isfinite(h)) throw std::invalid_argument("h must be finite");
    if (iterations < 2) throw std::invalid_argument("T must be at least 2");
    if (window < 3 || window % 2 == 0) throw std::invalid_argument("window must be odd and >= 3");
    const int b = effective_burn_in();
    if (b < 1 || b >= iterations) throw std::invalid_argument("burn_in must satisfy 0 < burn_in < T");
  }
};

struct NoiseParams {
  double kappa_l = 1.0;  // observation precision
  double kappa_f = 1.0;  // field precision

  bool valid() const {
    return kappa_l > 0.0 && kappa_f > 0.0 && std::isfinite(kappa_l) && std::isfinite(kappa_f);
  }
};

/// Trend regressors: intercept, row / (n1 - 1), column / (n2 - 1).
class DesignMatrix {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  explicit DesignMatrix(Matrix z) : z_(std::move(z)) {}

  Eigen::Index pixels() const { return z_.rows(); }
  const Matrix& matrix() const { return z_; }

  /// Z^T Z, cached since every sampler step uses it.
  Eigen::Matrix3d gram() const { return z_.transpose() * z_; }

 private:
  Matrix z_;
};

inline DesignMatrix make_design(std::size_t n1, std::size_t n2) {
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("make_design: lattice must be non-empty");
  DesignMatrix::Matrix z(static_cast<Eigen::Index>(n1 * n2), 3);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const auto r = static_cast<Eigen::Index>(i * n2 + j);
      z(r, 0) = 1.0;
      z(r, 1) = n1 > 1 ? static_cast<double>(i) / static_cast<double>(n1 - 1) : 0.0;
      z(r, 2) = n2 > 1 ? static_cast<double>(j) / static_cast<double>(n2 - 1) : 0.0;
    }
  }
  return DesignMatrix(std::move(z));
}

/// Cholesky factor of M = Q_gamma + kappa_l Z^T Z.
inline Eigen::LLT<Eigen::Matrix3d> trend_system(double kappa_l, const DesignMatrix& design,
                                                double gamma_precision) {
  Eigen::Matrix3d m = kappa_l * design.gram();
  m.diagonal().array() += gamma_precision;
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("trend system Q_gamma + kappa_l Z^T Z is not positive definite");
  return llt;
}

/// Phi^{-1} v via the rank-3 identity
/// Phi^{-1} = kappa_l I - kappa_l^2 Z M^{-1} Z^T, M = Q_gamma + kappa_l Z^T Z.
inline Eigen::VectorXd phi_inverse_apply(const Eigen::Ref<const Eigen::VectorXd>& v, double kappa_l,
                                         const DesignMatrix& design, double gamma_precision) {
  if (v.size() != design.pixels())
    throw std::invalid_argument("phi_inverse_apply: vector length does not match design");
  if (!(kappa_l > 0.0)) throw std::invalid_argument("phi_inverse_apply: kappa_l must be positive");
  const auto& z = design.matrix();
  const auto llt = trend_system(kappa_l, design, gamma_precision);
  const Eigen::Vector3d t = llt.solve(z.transpose() * v);
  return kappa_l * v - kappa_l * kappa_l * (z * t);
}

/// Unnormalised log density of the (improper) field prior: -0.5 kappa_f f^T Q f.
inline double log_prior_field(const Raster& f, const PrecisionMatrix& q, double kappa_f) {
  if (f.rows() != q.rows() || f.cols() != q.cols())
    throw std::invalid_argument("log_prior_field: raster and precision disagree in shape");
  return -0.5 * kappa_f * q.quadratic_form(f.vec());
}

}  // namespace smfd
