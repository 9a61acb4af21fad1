#pragma once

// Dense, deliberately naive reference implementations used as test oracles.
// Nothing here calls into the library's numerical code paths.

#include "smfd/raster.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <vector>

namespace oracle {

/// Dense difference operator: row p holds w(p,q) at every 4-neighbour q and
/// -sum_q w(p,q) on the diagonal. mask == nullptr means unit weights.
inline Eigen::MatrixXd difference_operator(int n1, int n2, const smfd::SpotMask* mask = nullptr,
                                           double lambda = 50.0) {
  const int n = n1 * n2;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int pi = 0; pi < n1; ++pi)
    for (int pj = 0; pj < n2; ++pj)
      for (int qi = 0; qi < n1; ++qi)
        for (int qj = 0; qj < n2; ++qj) {
          if (std::abs(pi - qi) + std::abs(pj - qj) != 1) continue;
          double w = 1.0;
          if (mask != nullptr && (*mask)(pi, pj) == 0 && (*mask)(qi, qj) == 0) w = lambda;
          d(pi * n2 + pj, qi * n2 + qj) = w;
          d(pi * n2 + pj, pi * n2 + pj) -= w;
        }
  return d;
}

inline Eigen::MatrixXd precision(int n1, int n2, const smfd::SpotMask* mask = nullptr,
                                 double lambda = 50.0) {
  const Eigen::MatrixXd d = difference_operator(n1, n2, mask, lambda);
  return d.transpose() * d;
}

inline Eigen::MatrixXd design(int n1, int n2) {
  Eigen::MatrixXd z(n1 * n2, 3);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      z(i * n2 + j, 0) = 1.0;
      z(i * n2 + j, 1) = n1 > 1 ? double(i) / (n1 - 1) : 0.0;
      z(i * n2 + j, 2) = n2 > 1 ? double(j) / (n2 - 1) : 0.0;
    }
  return z;
}

/// Marginal covariance of y given f: Phi = I / kappa_l + Z Q_gamma^{-1} Z^T.
inline Eigen::MatrixXd phi(int n1, int n2, double kappa_l, double gamma_precision) {
  const Eigen::MatrixXd z = design(n1, n2);
  return Eigen::MatrixXd::Identity(n1 * n2, n1 * n2) / kappa_l +
         z * z.transpose() / gamma_precision;
}

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline Gaussian field_posterior(const Eigen::VectorXd& y, int n1, int n2, double kappa_l,
                                double kappa_f, const Eigen::MatrixXd& q, double gamma_precision) {
  const Eigen::MatrixXd phi_inv = phi(n1, n2, kappa_l, gamma_precision).inverse();
  const Eigen::MatrixXd p = phi_inv + kappa_f * q;
  const Eigen::MatrixXd cov = p.inverse();
  return {cov * (phi_inv * y), cov};
}

inline Gaussian gamma_posterior(const Eigen::VectorXd& resid, int n1, int n2, double kappa_l,
                                double gamma_precision) {
  const Eigen::MatrixXd z = design(n1, n2);
  const Eigen::MatrixXd c =
      (kappa_l * z.transpose() * z + gamma_precision * Eigen::MatrixXd::Identity(3, 3)).inverse();
  return {kappa_l * c * z.transpose() * resid, c};
}

/// Local threshold over a clipped window, two-pass mean and variance.
inline smfd::SpotMask binary_image(const smfd::Raster& f, double h, int window) {
  const int n1 = int(f.rows()), n2 = int(f.cols()), half = window / 2;
  smfd::SpotMask out(f.rows(), f.cols());
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      std::vector<double> v;
      for (int k = i - half; k <= i + half; ++k)
        for (int l = j - half; l <= j + half; ++l)
          if (k >= 0 && k < n1 && l >= 0 && l < n2) v.push_back(f(k, l));
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= double(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= double(v.size());
      out.set(i, j, f(i, j) >= mean + h * std::sqrt(var));
    }
  return out;
}

inline double at_replicated(const smfd::Raster& r, int i, int j) {
  if (i < 0) i = 0;
  if (j < 0) j = 0;
  if (i >= int(r.rows())) i = int(r.rows()) - 1;
  if (j >= int(r.cols())) j = int(r.cols()) - 1;
  return r(i, j);
}

/// Non-local means, straight from the definition.
inline smfd::Raster nlm(const smfd::Raster& y, int patch, int search, double h) {
  const int n1 = int(y.rows()), n2 = int(y.cols()), ph = patch / 2, sh = search / 2;
  smfd::Raster out(y.rows(), y.cols());
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      std::vector<double> w, v;
      for (int k = 0; k < n1; ++k)
        for (int l = 0; l < n2; ++l) {
          if (std::abs(k - i) > sh || std::abs(l - j) > sh) continue;
          double ssd = 0.0;
          for (int a = -ph; a <= ph; ++a)
            for (int b = -ph; b <= ph; ++b) {
              const double d = at_replicated(y, i + a, j + b) - at_replicated(y, k + a, l + b);
              ssd += d * d;
            }
          w.push_back(std::exp(-ssd / (patch * patch) / (h * h)));
          v.push_back(y(k, l));
        }
      double ws = 0.0, acc = 0.0;
      for (std::size_t t = 0; t < w.size(); ++t) {
        ws += w[t];
        acc += w[t] * v[t];
      }
      out(i, j) = acc / ws;
    }
  return out;
}

inline double frobenius_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& ref) {
  return (a - ref).norm() / ref.norm();
}

}  // namespace oracle
