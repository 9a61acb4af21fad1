#pragma once

// Classical comparison filters. Out-of-lattice samples are taken from the
// nearest edge pixel (edge replication).

#include "smfd/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace smfd {

struct FilterConfig {
  double gaussian_sigma = 1.0;
  int gaussian_size = 5;
  int average_size = 3;
  int wiener_size = 5;
  int nlm_patch = 5;
  int nlm_search = 11;
  double nlm_h = 0.1;  // in [0, 1]-normalised intensities

  void validate() const {
    auto odd = [](int v, const char* name) {
      if (v < 3 || v % 2 == 0) throw std::invalid_argument(std::string(name) + " must be odd and >= 3");
    };
    odd(gaussian_size, "gaussian_size");
    odd(average_size, "average_size");
    odd(wiener_size, "wiener_size");
    odd(nlm_patch, "nlm_patch");
    odd(nlm_search, "nlm_search");
    if (!(gaussian_sigma > 0.0)) throw std::invalid_argument("gaussian_sigma must be positive");
    if (!(nlm_h > 0.0)) throw std::invalid_argument("nlm_h must be positive");
  }
};

namespace detail {

inline void require_odd_size(int size, const char* who) {
  if (size < 3 || size % 2 == 0)
    throw std::invalid_argument(std::string(who) + ": window size must be odd and >= 3");
}

inline double clamped(const Raster& r, std::ptrdiff_t i, std::ptrdiff_t j) {
  const auto n1 = static_cast<std::ptrdiff_t>(r.rows());
  const auto n2 = static_cast<std::ptrdiff_t>(r.cols());
  i = std::clamp<std::ptrdiff_t>(i, 0, n1 - 1);
  j = std::clamp<std::ptrdiff_t>(j, 0, n2 - 1);
  return r(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
}

/// Correlation with a size x size kernel stored row-major.
inline Raster correlate(const Raster& y, const std::vector<double>& kernel, int size) {
  const std::ptrdiff_t half = size / 2;
  Raster out(y.rows(), y.cols());
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(y.rows()); ++i) {
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(y.cols()); ++j) {
      double acc = 0.0;
      std::size_t k = 0;
      for (std::ptrdiff_t di = -half; di <= half; ++di)
        for (std::ptrdiff_t dj = -half; dj <= half; ++dj) acc += kernel[k++] * clamped(y, i + di, j + dj);
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Normalised sampled Gaussian, row-major size x size.
inline std::vector<double> gaussian_kernel(double sigma, int size) {
  detail::require_odd_size(size, "gaussian_kernel");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const int half = size / 2;
  std::vector<double> k;
  k.reserve(static_cast<std::size_t>(size * size));
  double total = 0.0;
  for (int di = -half; di <= half; ++di)
    for (int dj = -half; dj <= half; ++dj) {
      k.push_back(std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma)));
      total += k.back();
    }
  for (double& w : k) w /= total;
  return k;
}

inline Raster gaussian_filter(const Raster& y, double sigma, int size) {
  return detail::correlate(y, gaussian_kernel(sigma, size), size);
}

inline Raster average_filter(const Raster& y, int size) {
  detail::require_odd_size(size, "average_filter");
  const auto n = static_cast<std::size_t>(size * size);
  return detail::correlate(y, std::vector<double>(n, 1.0 / static_cast<double>(n)), size);
}

/// Pixelwise adaptive Wiener filter. With local mean mu, local variance s2 and
/// noise floor nu2 = mean of all local variances:
///   out = mu + max(s2 - nu2, 0) / max(s2, nu2) * (y - mu).
inline Raster wiener_filter(const Raster& y, int size) {
  detail::require_odd_size(size, "wiener_filter");
  const std::ptrdiff_t half = size / 2;
  const double count = static_cast<double>(size * size);
  Raster mean(y.rows(), y.cols()), var(y.rows(), y.cols());
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(y.rows()); ++i) {
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(y.cols()); ++j) {
      const double centre = y(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      double s = 0.0, ss = 0.0;
      for (std::ptrdiff_t di = -half; di <= half; ++di)
        for (std::ptrdiff_t dj = -half; dj <= half; ++dj) {
          const double d = detail::clamped(y, i + di, j + dj) - centre;
          s += d;
          ss += d * d;
        }
      const double off = s / count;
      mean(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = centre + off;
      var(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = std::max(0.0, ss / count - off * off);
    }
  }
  double noise = 0.0;
  for (double v : var.values()) noise += v;
  noise /= static_cast<double>(var.size());

  Raster out(y.rows(), y.cols());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double denom = std::max(var[k], noise);
    const double gain = denom > 0.0 ? std::max(var[k] - noise, 0.0) / denom : 0.0;
    out[k] = mean[k] + gain * (y[k] - mean[k]);
  }
  return out;
}

/// Non-local means. Each pixel becomes the weighted average of the pixels in
/// its search window (clipped to the lattice), with weight
/// exp(-d / h^2) where d is the mean squared difference between the two
/// patch x patch neighbourhoods (edge-replicated).
inline Raster nlm_filter(const Raster& y, int patch, int search, double h) {
  detail::require_odd_size(patch, "nlm_filter");
  detail::require_odd_size(search, "nlm_filter");
  if (!(h > 0.0)) throw std::invalid_argument("nlm_filter: h must be positive");
  const std::ptrdiff_t ph = patch / 2, sh = search / 2;
  const auto n1 = static_cast<std::ptrdiff_t>(y.rows());
  const auto n2 = static_cast<std::ptrdiff_t>(y.cols());
  const double patch_area = static_cast<double>(patch * patch);
  const double h2 = h * h;

  Raster out(y.rows(), y.cols());
  for (std::ptrdiff_t i = 0; i < n1; ++i) {
    for (std::ptrdiff_t j = 0; j < n2; ++j) {
      double wsum = 0.0, acc = 0.0;
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - sh); k <= std::min(n1 - 1, i + sh); ++k) {
        for (std::ptrdiff_t l = std::max<std::ptrdiff_t>(0, j - sh); l <= std::min(n2 - 1, j + sh); ++l) {
          double ssd = 0.0;
          for (std::ptrdiff_t di = -ph; di <= ph; ++di)
            for (std::ptrdiff_t dj = -ph; dj <= ph; ++dj) {
              const double d = detail::clamped(y, i + di, j + dj) - detail::clamped(y, k + di, l + dj);
              ssd += d * d;
            }
          const double w = std::exp(-(ssd / patch_area) / h2);
          wsum += w;
          acc += w * y(static_cast<std::size_t>(k), static_cast<std::size_t>(l));
        }
      }
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc / wsum;
    }
  }
  return out;
}

enum class Baseline { gaussian, average, wiener, nlm };

/// Runs a baseline on the [0, 1]-normalised image and maps the result back,
/// so intensity-dependent parameters (nlm_h) mean the same on every input.
inline Raster apply_baseline(Baseline method, const Raster& y, const FilterConfig& cfg) {
  cfg.validate();
  const Normalization norm = Normalization::fit(y);
  const Raster yn = norm.forward(y);
  switch (method) {
    case Baseline::gaussian: return norm.inverse(gaussian_filter(yn, cfg.gaussian_sigma, cfg.gaussian_size));
    case Baseline::average: return norm.inverse(average_filter(yn, cfg.average_size));
    case Baseline::wiener: return norm.inverse(wiener_filter(yn, cfg.wiener_size));
    case Baseline::nlm: return norm.inverse(nlm_filter(yn, cfg.nlm_patch, cfg.nlm_search, cfg.nlm_h));
  }
  throw std::logic_error("apply_baseline: unknown method");
}

}  // namespace smfd
