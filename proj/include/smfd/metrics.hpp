#pragma once

// Full-reference quality measures of an estimate against ground truth.

#include "smfd/errors.hpp"
#include "smfd/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace smfd {

inline constexpr int kDefaultKldBins = 10;

struct MetricsReport {
  double rmse;
  double psnr_db;  // +inf when rmse == 0
  double kld;
  double ssim;
};

namespace detail {
inline void require_same_shape(const Raster& a, const Raster& b, const char* who) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(who) + ": rasters differ in shape");
}
}  // namespace detail

inline double rmse(const Raster& estimate, const Raster& truth) {
  detail::require_same_shape(estimate, truth, "rmse");
  double ss = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double d = estimate[k] - truth[k];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(truth.size()));
}

/// 20 log10(max(estimate) / rmse). The peak is the estimate's own maximum.
inline double psnr(const Raster& estimate, const Raster& truth) {
  const double err = rmse(estimate, truth);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = estimate.max();
  if (!(peak > 0.0)) throw std::domain_error("psnr: estimate maximum must be positive");
  return 20.0 * std::log10(peak / err);
}

/// Discrete KL divergence sum_i p_truth(i) log(p_truth(i) / p_estimate(i)).
/// Both images are binned into n_bins equal-width bins over their joint range;
/// each bin mass gets 1/N added (N = pixel count) before renormalising.
inline double kld(const Raster& estimate, const Raster& truth, int n_bins = kDefaultKldBins) {
  detail::require_same_shape(estimate, truth, "kld");
  if (n_bins < 2) throw std::invalid_argument("kld: need at least 2 bins");
  const double lo = std::min(estimate.min(), truth.min());
  const double hi = std::max(estimate.max(), truth.max());
  if (!(hi > lo)) return 0.0;

  const auto bins = static_cast<std::size_t>(n_bins);
  auto histogram = [&](const Raster& r) {
    std::vector<double> h(bins, 0.0);
    for (double v : r.values()) {
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
      h[std::min(b, bins - 1)] += 1.0;
    }
    const double n = static_cast<double>(r.size());
    for (double& x : h) x = (x + 1.0) / (n + static_cast<double>(bins));
    return h;
  };
  const auto p = histogram(truth);
  const auto q = histogram(estimate);
  double d = 0.0;
  for (std::size_t i = 0; i < bins; ++i) d += p[i] * std::log(p[i] / q[i]);
  return std::max(0.0, d);
}

/// Global structural similarity with C1 = C2 = 0 (universal quality index),
/// population statistics over the whole image.
inline double ssim(const Raster& estimate, const Raster& truth) {
  detail::require_same_shape(estimate, truth, "ssim");
  const double n = static_cast<double>(truth.size());
  double mu_e = 0.0, mu_t = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    mu_e += estimate[k];
    mu_t += truth[k];
  }
  mu_e /= n;
  mu_t /= n;
  double var_e = 0.0, var_t = 0.0, cov = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double de = estimate[k] - mu_e, dt = truth[k] - mu_t;
    var_e += de * de;
    var_t += dt * dt;
    cov += de * dt;
  }
  var_e /= n;
  var_t /= n;
  cov /= n;
  const double denom = (mu_e * mu_e + mu_t * mu_t) * (var_e + var_t);
  if (std::abs(denom) < 1e-12)
    throw InstabilityError("ssim: denominator is too close to zero for a stable index");
  return (2.0 * mu_e * mu_t) * (2.0 * cov) / denom;
}

inline MetricsReport evaluate(const Raster& estimate, const Raster& truth,
                              int n_bins = kDefaultKldBins) {
  return {rmse(estimate, truth), psnr(estimate, truth), kld(estimate, truth, n_bins),
          ssim(estimate, truth)};
}

}  // namespace smfd
