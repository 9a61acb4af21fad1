#pragma once

// Synthetic fluorescence-spot images: isotropic Gaussian spots on a zero
// background plus white Gaussian noise at a prescribed SNR, where
// SNR_dB = 10 log10(Var(signal) / Var(noise)).

#include "smfd/raster.hpp"

#include <cmath>
#include <span>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace smfd {

struct SynthConfig {
  std::size_t n1 = 30;
  std::size_t n2 = 30;
  std::size_t n_images = 50;
  int spots_min = 3;
  int spots_max = 8;
  double amplitude_min = 0.5;
  double amplitude_max = 1.0;
  double psf_sigma = 1.2;
  double snr_db_min = 5.0;
  double snr_db_max = 10.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (n1 == 0 || n2 == 0) throw std::invalid_argument("n1 and n2 must be positive");
    if (spots_min < 0 || spots_min > spots_max)
      throw std::invalid_argument("spots_min must be >= 0 and <= spots_max");
    if (!(amplitude_min <= amplitude_max)) throw std::invalid_argument("amplitude_min must be <= amplitude_max");
    if (!(psf_sigma > 0.0)) throw std::invalid_argument("psf_sigma must be positive");
    if (!(snr_db_min <= snr_db_max)) throw std::invalid_argument("snr_db_min must be <= snr_db_max");
  }
};

struct Spot {
  double row;
  double col;
  double amplitude;
};

struct SynthTruth {
  Raster image;
  std::vector<Spot> spots;
};

struct NoisyImage {
  Raster image;
  double realized_snr_db;
};

struct SynthPair {
  Raster truth;
  Raster noisy;
  std::vector<Spot> spots;
  double target_snr_db;
  double realized_snr_db;
  std::uint64_t seed;  // per-image stream seed
};

inline double population_variance(std::span<const double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

inline Raster render_spots(std::size_t n1, std::size_t n2, const std::vector<Spot>& spots,
                           double psf_sigma) {
  Raster out(n1, n2, 0.0);
  const double denom = 2.0 * psf_sigma * psf_sigma;
  for (const Spot& s : spots)
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n2; ++j) {
        const double di = static_cast<double>(i) - s.row;
        const double dj = static_cast<double>(j) - s.col;
        out(i, j) += s.amplitude * std::exp(-(di * di + dj * dj) / denom);
      }
  return out;
}

template <typename Urbg>
SynthTruth generate_truth(const SynthConfig& cfg, Urbg& rng) {
  cfg.validate();
  std::uniform_int_distribution<int> count(cfg.spots_min, cfg.spots_max);
  std::uniform_real_distribution<double> row(0.0, static_cast<double>(cfg.n1 - 1));
  std::uniform_real_distribution<double> col(0.0, static_cast<double>(cfg.n2 - 1));
  std::uniform_real_distribution<double> amp(cfg.amplitude_min, cfg.amplitude_max);
  const int k = count(rng);
  std::vector<Spot> spots;
  for (int s = 0; s < k; ++s) {
    Spot sp;
    sp.row = row(rng);
    sp.col = col(rng);
    sp.amplitude = cfg.amplitude_min == cfg.amplitude_max ? cfg.amplitude_min : amp(rng);
    spots.push_back(sp);
  }
  return {render_spots(cfg.n1, cfg.n2, spots, cfg.psf_sigma), std::move(spots)};
}

/// Adds white Gaussian noise whose realised variance is rescaled to exactly
/// Var(truth) / 10^(snr_db / 10).
template <typename Urbg>
NoisyImage add_noise(const Raster& truth, double snr_db, Urbg& rng) {
  const double signal_var = population_variance(truth.values());
  if (!(signal_var > 0.0)) throw std::domain_error("add_noise: SNR is undefined for a constant truth");
  const double target_var = signal_var / std::pow(10.0, snr_db / 10.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> noise(truth.size());
  for (double& v : noise) v = nd(rng);
  const double drawn_var = population_variance(noise);
  const double gain = std::sqrt(target_var / drawn_var);
  Raster out = truth;
  for (std::size_t k = 0; k < noise.size(); ++k) {
    noise[k] *= gain;
    out[k] += noise[k];
  }
  return {std::move(out), 10.0 * std::log10(signal_var / population_variance(noise))};
}

/// splitmix64 finaliser; derives the per-image stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t image_seed(std::uint64_t corpus_seed, std::size_t index) {
  return mix_seed(corpus_seed ^ mix_seed(static_cast<std::uint64_t>(index)));
}

inline SynthPair generate_pair(const SynthConfig& cfg, std::size_t index) {
  const std::uint64_t seed = image_seed(cfg.seed, index);
  std::mt19937_64 rng(seed);
  auto truth = generate_truth(cfg, rng);
  std::uniform_real_distribution<double> snr(cfg.snr_db_min, cfg.snr_db_max);
  const double target = cfg.snr_db_min == cfg.snr_db_max ? cfg.snr_db_min : snr(rng);
  auto noisy = add_noise(truth.image, target, rng);
  return {std::move(truth.image), std::move(noisy.image), std::move(truth.spots), target,
          noisy.realized_snr_db, seed};
}

inline std::vector<SynthPair> generate_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<SynthPair> out;
  out.reserve(cfg.n_images);
  for (std::size_t k = 0; k < cfg.n_images; ++k) out.push_back(generate_pair(cfg, k));
  return out;
}

}  // namespace smfd
