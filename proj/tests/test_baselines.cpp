#include "smfd/baselines.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

using namespace smfd;

namespace {

Raster noise_raster(std::size_t n1, std::size_t n2, std::uint64_t seed, double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(mean, 1.0);
  Raster r(n1, n2);
  for (double& v : r.values()) v = nd(rng);
  return r;
}

double variance(const Raster& r) {
  double m = 0.0, s = 0.0;
  for (double v : r.values()) m += v;
  m /= double(r.size());
  for (double v : r.values()) s += (v - m) * (v - m);
  return s / double(r.size());
}

double max_abs_diff(const Raster& a, const Raster& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

}  // namespace

TEST(Baselines, ConstantImageUnchanged) {
  const Raster c(9, 7, 0.42);
  EXPECT_LE(max_abs_diff(gaussian_filter(c, 1.0, 5), c), 1e-12);
  EXPECT_LE(max_abs_diff(average_filter(c, 3), c), 1e-12);
  EXPECT_LE(max_abs_diff(wiener_filter(c, 5), c), 1e-12);
  EXPECT_LE(max_abs_diff(nlm_filter(c, 5, 11, 0.1), c), 1e-12);
  const FilterConfig cfg;
  for (auto m : {Baseline::gaussian, Baseline::average, Baseline::wiener, Baseline::nlm})
    EXPECT_LE(max_abs_diff(apply_baseline(m, c, cfg), c), 1e-12);
}

TEST(Gaussian, KernelCentreOracle) {
  const auto k = gaussian_kernel(1.0, 5);
  double total = 0.0;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) total += std::exp(-(a * a + b * b) / 2.0);
  EXPECT_NEAR(k[12], 1.0 / total, 1e-12);
  double s = 0.0;
  for (double w : k) s += w;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Gaussian, InteriorImpulseReturnsKernel) {
  Raster r(9, 9, 0.0);
  r(4, 4) = 1.0;
  const Raster out = gaussian_filter(r, 1.3, 5);
  const auto k = gaussian_kernel(1.3, 5);
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) EXPECT_NEAR(out(4 + a, 4 + b), k[(a + 2) * 5 + (b + 2)], 1e-15);
  EXPECT_EQ(out(0, 0), 0.0);
}

TEST(Average, InteriorMeanAndLargeSigmaLimit) {
  const Raster r = noise_raster(8, 8, 1);
  const Raster out = average_filter(r, 3);
  double m = 0.0;
  for (int a = 3; a <= 5; ++a)
    for (int b = 2; b <= 4; ++b) m += r(a, b);
  EXPECT_NEAR(out(4, 3), m / 9.0, 1e-12);
  EXPECT_LE(max_abs_diff(out, gaussian_filter(r, 1e6, 3)), 1e-6);
}

TEST(Wiener, ReducesWhiteNoiseVariance) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Raster r = noise_raster(16, 16, seed);
    EXPECT_LT(variance(wiener_filter(r, 5)), variance(r)) << seed;
  }
}

TEST(Wiener, HighContrastPixelPassesThrough) {
  // One bright pixel on a large, nearly flat frame: its local variance is
  // about 1e3 while the mean local variance is about 1, so the gain is ~0.999.
  Raster r = noise_raster(100, 100, 3);
  for (double& v : r.values()) v *= 1e-4;
  r(50, 50) += 100.0;
  const Raster out = wiener_filter(r, 3);
  EXPECT_NEAR(out(50, 50), r(50, 50), 0.2);
  EXPECT_LT(std::abs(out(20, 20)), 1e-3);
}

TEST(Nlm, MatchesBruteForceOracle) {
  const Raster r = noise_raster(5, 5, 7, 0.5);
  for (auto [patch, search, h] : {std::tuple{3, 3, 0.5}, {3, 5, 1.0}, {5, 11, 0.8}})
    EXPECT_LE(max_abs_diff(nlm_filter(r, patch, search, h), oracle::nlm(r, patch, search, h)), 1e-10);
}

TEST(Nlm, IdenticalPatchesWeighEqually) {
  // Column-periodic image: in row 2 the pixels at columns 1, 4 and 7 share
  // one 3x3 patch and every other in-range patch differs, so with a tiny h
  // the output at (2,4) is the plain mean of those three.
  Raster r(5, 9, 0.0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 9; ++j) r(i, j) = double((j % 3) * 2 + i % 2);
  const Raster out = nlm_filter(r, 3, 7, 1e-3);
  EXPECT_NEAR(out(2, 4), (r(2, 1) + r(2, 4) + r(2, 7)) / 3.0, 1e-9);
}

TEST(Baselines, PreserveMeanOfSymmetricKernelsInInterior) {
  const Raster r = noise_raster(12, 12, 11, 5.0);
  const Raster g = gaussian_filter(r, 1.0, 5);
  EXPECT_NEAR(std::accumulate(g.values().begin(), g.values().end(), 0.0) / 144.0,
              std::accumulate(r.values().begin(), r.values().end(), 0.0) / 144.0, 0.1);
}

TEST(Baselines, ParameterValidation) {
  FilterConfig cfg;
  cfg.nlm_patch = 4;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_THROW(gaussian_kernel(0.0, 5), std::invalid_argument);
  EXPECT_THROW(average_filter(Raster(3, 3), 2), std::invalid_argument);
  EXPECT_THROW(nlm_filter(Raster(3, 3), 3, 5, 0.0), std::invalid_argument);
}
