#pragma once

// Gibbs sampler for the marginalised (H)IGMRF denoising model.
//
// One sweep draws gamma | y, f, kappa_l, then (kappa_l, kappa_f) | y, f, gamma,
// then f | y, theta with gamma integrated out. Under the heterogeneous prior
// the spot mask is re-thresholded from the new f and Q_f is rebuilt.

#include "smfd/errors.hpp"
#include "smfd/lattice.hpp"
#include "smfd/model.hpp"
#include "smfd/raster.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace smfd {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index k = 0; k < n; ++k) z[k] = nd(rng);
  return z;
}

// ---------------------------------------------------------------------------
// gamma | y, f, kappa_l  ~  N(m, C),  C = (kappa_l Z^T Z + Q_gamma)^{-1},
//                                     m = kappa_l C Z^T (y - f)

struct GammaConditional {
  Eigen::Vector3d mean;
  Eigen::Matrix3d covariance;
};

inline GammaConditional gamma_conditional(const Raster& y, const Raster& f, double kappa_l,
                                          const DesignMatrix& design, double gamma_precision) {
  if (!y.same_shape(f) || static_cast<Eigen::Index>(y.size()) != design.pixels())
    throw std::invalid_argument("gamma_conditional: y, f and design disagree in size");
  if (!(kappa_l > 0.0)) throw std::invalid_argument("gamma_conditional: kappa_l must be positive");
  const auto llt = trend_system(kappa_l, design, gamma_precision);
  const Eigen::VectorXd resid = y.vec() - f.vec();
  return {kappa_l * llt.solve(design.matrix().transpose() * resid),
          llt.solve(Eigen::Matrix3d::Identity())};
}

inline Eigen::Vector3d sample_gamma(const Raster& y, const Raster& f, double kappa_l,
                                    const DesignMatrix& design, double gamma_precision, Rng& rng) {
  if (!y.same_shape(f) || static_cast<Eigen::Index>(y.size()) != design.pixels())
    throw std::invalid_argument("sample_gamma: y, f and design disagree in size");
  if (!(kappa_l > 0.0)) throw std::invalid_argument("sample_gamma: kappa_l must be positive");
  const auto llt = trend_system(kappa_l, design, gamma_precision);
  const Eigen::VectorXd resid = y.vec() - f.vec();
  const Eigen::Vector3d mean = kappa_l * llt.solve(design.matrix().transpose() * resid);
  const Eigen::Vector3d z = standard_normal(3, rng);
  return mean + llt.matrixU().solve(z);
}

// ---------------------------------------------------------------------------
// Conjugate gamma updates, shape-scale convention (mean = shape * scale).

struct GammaPosterior {
  double shape;
  double scale;
  double mean() const { return shape * scale; }
};

struct KappaPosteriors {
  GammaPosterior observation;  // kappa_l
  GammaPosterior field;        // kappa_f
};

inline KappaPosteriors kappa_posteriors(const Raster& y, const Raster& f,
                                        const Eigen::Vector3d& gamma, const DesignMatrix& design,
                                        const PrecisionMatrix& precision, const HyperParams& hp) {
  if (!y.same_shape(f) || f.rows() != precision.rows() || f.cols() != precision.cols() ||
      static_cast<Eigen::Index>(y.size()) != design.pixels())
    throw std::invalid_argument("kappa_posteriors: inputs disagree in size");
  const double half_n = 0.5 * static_cast<double>(y.size());
  const Eigen::VectorXd resid = y.vec() - design.matrix() * gamma - f.vec();
  const double rss = resid.squaredNorm();
  const double roughness = std::max(0.0, precision.quadratic_form(f.vec()));
  return {{half_n + hp.alpha_l, 1.0 / (0.5 * rss + 1.0 / hp.beta_l)},
          {half_n + hp.alpha_f, 1.0 / (0.5 * roughness + 1.0 / hp.beta_f)}};
}

inline NoiseParams sample_kappas(const Raster& y, const Raster& f, const Eigen::Vector3d& gamma,
                                 const DesignMatrix& design, const PrecisionMatrix& precision,
                                 const HyperParams& hp, Rng& rng) {
  const auto post = kappa_posteriors(y, f, gamma, design, precision, hp);
  std::gamma_distribution<double> gl(post.observation.shape, post.observation.scale);
  std::gamma_distribution<double> gf(post.field.shape, post.field.scale);
  NoiseParams out;
  out.kappa_l = gl(rng);
  out.kappa_f = gf(rng);
  // A gamma draw can underflow to exactly 0 only for absurd hyper-parameters.
  if (!out.valid())
    throw NumericalError("noise precision draw is not strictly positive", y.rows(), y.cols(),
                         out.kappa_l, out.kappa_f);
  return out;
}

// ---------------------------------------------------------------------------
// f | y, theta  ~  N(mu, P^{-1}),  P = Phi^{-1} + kappa_f Q_f
//                                   = A - U U^T,  A = kappa_l I + kappa_f Q_f,
//                                   U = kappa_l Z L_M^{-T},  M = L_M L_M^T.
//
// A is factored sparsely as P_perm A P_perm^T = L L^T, i.e. A = B B^T with
// B = P_perm^T L. Then P = B (I - V V^T) B^T where V = B^{-1} U has rank <= 3.
// With V V^T = E diag(s) E^T (E orthonormal, n x r) the symmetric square root
// S of I - V V^T satisfies S^{-1} = I + E diag(1/sqrt(1-s) - 1) E^T, and
// x = B^{-T} S^{-1} z has covariance P^{-1}.

class FieldConditional {
 public:
  FieldConditional(std::size_t rows, std::size_t cols, const DesignMatrix& design,
                   double gamma_precision)
      : rows_(rows), cols_(cols), design_(design), gamma_precision_(gamma_precision) {
    if (static_cast<Eigen::Index>(rows * cols) != design.pixels())
      throw std::invalid_argument("FieldConditional: design does not match lattice");
    identity_.resize(design.pixels(), design.pixels());
    identity_.setIdentity();
  }

  void condition(const Raster& y, const NoiseParams& noise, const PrecisionMatrix& precision) {
    if (y.rows() != rows_ || y.cols() != cols_ || precision.rows() != rows_ ||
        precision.cols() != cols_)
      throw std::invalid_argument("FieldConditional: inputs do not match lattice");
    if (!noise.valid())
      throw std::invalid_argument("FieldConditional: noise precisions must be positive");
    noise_ = noise;

    SparseMatrix a = noise.kappa_f * precision.sparse() + noise.kappa_l * identity_;
    a.makeCompressed();
    if (!same_pattern(a)) {
      llt_.analyzePattern(a);
      remember_pattern(a);
    }
    llt_.factorize(a);
    if (llt_.info() != Eigen::Success) fail("sparse Cholesky of kappa_l I + kappa_f Q_f failed");

    const auto trend = trend_system(noise.kappa_l, design_, gamma_precision_);
    const Eigen::Matrix3d l_inv = trend.matrixL().solve(Eigen::Matrix3d::Identity());
    const Eigen::MatrixXd u = noise.kappa_l * design_.matrix() * l_inv.transpose();

    // Mean: P mu = Phi^{-1} y, solved with the Woodbury form of P^{-1}.
    const Eigen::VectorXd rhs = noise.kappa_l * y.vec() - u * (u.transpose() * y.vec());
    const Eigen::MatrixXd w = llt_.solve(u);
    const Eigen::VectorXd a0 = llt_.solve(rhs);
    const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(u.cols(), u.cols()) - u.transpose() * w;
    Eigen::LLT<Eigen::MatrixXd> k_llt(k);
    if (k_llt.info() != Eigen::Success) fail("capacitance matrix I - U^T A^{-1} U is not PD");
    mean_ = a0 + w * k_llt.solve(u.transpose() * a0);

    // Low-rank correction for the draw.
    const Eigen::MatrixXd v = llt_.matrixL().solve(llt_.permutationP() * u);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v.transpose() * v);
    const double floor = 1e-14 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    basis_.resize(v.rows(), 0);
    gain_.resize(0);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < eig.eigenvalues().size(); ++c)
      if (eig.eigenvalues()[c] > floor) kept.push_back(c);
    basis_.resize(v.rows(), static_cast<Eigen::Index>(kept.size()));
    gain_.resize(static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c) {
      const double s = eig.eigenvalues()[kept[c]];
      if (!(s < 1.0)) fail("marginal precision is not positive definite");
      const auto ci = static_cast<Eigen::Index>(c);
      basis_.col(ci) = v * eig.eigenvectors().col(kept[c]) / std::sqrt(s);
      gain_[ci] = 1.0 / std::sqrt(1.0 - s) - 1.0;
    }
  }

  /// Conditional mean mu* = (Phi^{-1} + kappa_f Q_f)^{-1} Phi^{-1} y.
  const Eigen::VectorXd& mean() const { return mean_; }

  Eigen::VectorXd draw(Rng& rng) const {
    Eigen::VectorXd z = standard_normal(mean_.size(), rng);
    if (basis_.cols() > 0) z += basis_ * gain_.cwiseProduct(basis_.transpose() * z).eval();
    const Eigen::VectorXd x = llt_.permutationPinv() * llt_.matrixU().solve(z);
    return mean_ + x;
  }

 private:
  bool same_pattern(const SparseMatrix& a) const {
    if (outer_.empty() || a.nonZeros() != static_cast<Eigen::Index>(inner_.size())) return false;
    return std::equal(outer_.begin(), outer_.end(), a.outerIndexPtr()) &&
           std::equal(inner_.begin(), inner_.end(), a.innerIndexPtr());
  }

  void remember_pattern(const SparseMatrix& a) {
    outer_.assign(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1);
    inner_.assign(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros());
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw NumericalError(what, rows_, cols_, noise_.kappa_l, noise_.kappa_f);
  }

  std::size_t rows_, cols_;
  DesignMatrix design_;
  double gamma_precision_;
  SparseMatrix identity_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
  std::vector<int> outer_, inner_;
  NoiseParams noise_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd gain_;
};

inline Eigen::VectorXd field_conditional_mean(const Raster& y, const NoiseParams& noise,
                                              const PrecisionMatrix& precision,
                                              const DesignMatrix& design, double gamma_precision) {
  FieldConditional fc(y.rows(), y.cols(), design, gamma_precision);
  fc.condition(y, noise, precision);
  return fc.mean();
}

inline Raster sample_field(const Raster& y, const NoiseParams& noise,
                           const PrecisionMatrix& precision, const DesignMatrix& design,
                           double gamma_precision, Rng& rng) {
  FieldConditional fc(y.rows(), y.cols(), design, gamma_precision);
  fc.condition(y, noise, precision);
  return Raster::from_vector(y.rows(), y.cols(), fc.draw(rng));
}

// ---------------------------------------------------------------------------
// Local-threshold spot classification.

/// e(i,j) = 1 iff f(i,j) >= mean + h * sd over the window x window patch
/// centred at (i,j), clipped at the lattice boundary. The standard deviation
/// uses the population divisor. Statistics are accumulated as offsets from the
/// centre value so a constant patch compares exactly equal.
inline SpotMask get_binary_image(const Raster& f, double h, int window) {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("get_binary_image: window must be odd and >= 3");
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  const auto n1 = static_cast<std::ptrdiff_t>(f.rows());
  const auto n2 = static_cast<std::ptrdiff_t>(f.cols());
  SpotMask mask(f.rows(), f.cols());
  for (std::ptrdiff_t i = 0; i < n1; ++i) {
    for (std::ptrdiff_t j = 0; j < n2; ++j) {
      const double centre = f(i, j);
      double sum = 0.0, sum_sq = 0.0;
      std::size_t count = 0;
      for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, i - half);
           k <= std::min(n1 - 1, i + half); ++k) {
        for (std::ptrdiff_t l = std::max<std::ptrdiff_t>(0, j - half);
             l <= std::min(n2 - 1, j + half); ++l) {
          const double d = f(k, l) - centre;
          sum += d;
          sum_sq += d * d;
          ++count;
        }
      }
      const double offset = sum / static_cast<double>(count);
      const double var = std::max(0.0, sum_sq / static_cast<double>(count) - offset * offset);
      // centre >= mean + h sd  <=>  0 >= (mean - centre) + h sd
      mask.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
               offset + h * std::sqrt(var) <= 0.0);
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Full chain.

enum class PriorVariant { igmrf, higmrf };

inline const char* to_string(PriorVariant v) { return v == PriorVariant::igmrf ? "igmrf" : "higmrf"; }

/// Mutable state of one chain, in normalised intensity units.
struct ChainState {
  Raster f;
  Eigen::Vector3d gamma;
  NoiseParams noise;
  SpotMask mask;
  PrecisionMatrix precision;
  int iteration;
  Rng rng;
};

struct DenoiseResult {
  /// Denoised image: average over t > burn_in of E[f + Z gamma | y, theta^(t), e^(t-1)],
  /// in the input's intensity units. f alone is only identified up to a
  /// component in span(Z) (intercept and ramps trade off against gamma), so
  /// the reported estimate is the noise-free signal, which is identified.
  Raster posterior_mean;
  /// Same average for f alone, E[f | y, theta^(t), e^(t-1)].
  Raster field_mean;
  /// Plain average of the drawn f^(t) over t > burn_in.
  Raster sample_average;
  SpotMask final_mask;
  std::vector<NoiseParams> theta_trace;       // length T, normalised units
  std::vector<Eigen::Vector3d> gamma_trace;   // length T, normalised units
  int accepted_iterations = 0;                // number of post-burn-in sweeps averaged
  Normalization normalization;
};

using ChainObserver = std::function<void(const ChainState&)>;

inline DenoiseResult denoise(const Raster& y, const HyperParams& hp, PriorVariant variant,
                             const ChainObserver& observe = {}) {
  hp.validate();
  if (y.size() < 2) throw std::invalid_argument("denoise: raster needs at least 2 pixels");
  const std::size_t n1 = y.rows(), n2 = y.cols();
  const Normalization norm = Normalization::fit(y);
  const Raster yn = norm.forward(y);
  const DesignMatrix design = make_design(n1, n2);
  const LatticeWeights weights(hp.lambda);
  const int burn_in = hp.effective_burn_in();

  ChainState s{yn,
               Eigen::Vector3d::Zero(),
               {hp.alpha_l * hp.beta_l, hp.alpha_f * hp.beta_f},
               SpotMask(n1, n2, 0),
               build_igmrf_precision(n1, n2),
               0,
               make_rng(hp.seed)};

  FieldConditional field(n1, n2, design, hp.gamma_precision);
  DenoiseResult out;
  out.theta_trace.reserve(static_cast<std::size_t>(hp.iterations));
  out.gamma_trace.reserve(static_cast<std::size_t>(hp.iterations));
  out.normalization = norm;
  Eigen::VectorXd mean_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(y.size()));
  Eigen::VectorXd draw_sum = mean_sum;
  Eigen::VectorXd signal_sum = mean_sum;

  for (int t = 1; t <= hp.iterations; ++t) {
    s.gamma = sample_gamma(yn, s.f, s.noise.kappa_l, design, hp.gamma_precision, s.rng);
    s.noise = sample_kappas(yn, s.f, s.gamma, design, s.precision, hp, s.rng);
    field.condition(yn, s.noise, s.precision);
    const Eigen::VectorXd draw = field.draw(s.rng);
    s.f = Raster::from_vector(n1, n2, draw);
    if (variant == PriorVariant::higmrf) {
      s.mask = get_binary_image(s.f, hp.h, hp.window);
      s.precision = build_higmrf_precision(n1, n2, s.mask, weights);
    }
    s.iteration = t;

    out.theta_trace.push_back(s.noise);
    out.gamma_trace.push_back(s.gamma);
    if (t > burn_in) {
      const Eigen::VectorXd mu = field.mean();
      const Eigen::Vector3d trend =
          gamma_conditional(yn, Raster::from_vector(n1, n2, mu), s.noise.kappa_l, design, hp.gamma_precision)
              .mean;
      mean_sum += mu;
      signal_sum += mu + design.matrix() * trend;
      draw_sum += draw;
      ++out.accepted_iterations;
    }
    if (observe) observe(s);
  }

  const double count = static_cast<double>(out.accepted_iterations);
  out.posterior_mean = norm.inverse(Raster::from_vector(n1, n2, signal_sum / count));
  out.field_mean = norm.inverse(Raster::from_vector(n1, n2, mean_sum / count));
  out.sample_average = norm.inverse(Raster::from_vector(n1, n2, draw_sum / count));
  out.final_mask = s.mask;
  return out;
}

/// Runs `chains` independent chains seeded hp.seed + k, one thread each.
inline std::vector<DenoiseResult> run_chains(const Raster& y, const HyperParams& hp,
                                             PriorVariant variant, int chains) {
  if (chains < 1) throw std::invalid_argument("run_chains: need at least one chain");
  std::vector<DenoiseResult> results(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(results.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t k = 0; k < results.size(); ++k) {
      workers.emplace_back([&, k] {
        try {
          HyperParams chain_hp = hp;
          chain_hp.seed = hp.seed + k;
          results[k] = denoise(y, chain_hp, variant);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace smfd
