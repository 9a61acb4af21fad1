#pragma once

// Lattice neighbourhoods and the difference-operator precision matrices of the
// intrinsic (IGMRF) and heterogeneous intrinsic (HIGMRF) field priors.

#include "smfd/raster.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace smfd {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Largest lattice (in pixels) for which a dense copy of a precision matrix
/// may be requested.
inline constexpr std::size_t kDenseLimit = 4096;

/// Default background coupling weight of the heterogeneous prior.
inline constexpr double kDefaultLambda = 50.0;

struct LatticeWeights {
  double lambda = kDefaultLambda;

  explicit LatticeWeights(double l = kDefaultLambda) : lambda(l) {
    if (!(l > 1.0)) throw std::invalid_argument("LatticeWeights: lambda must be > 1");
  }
};

/// In-lattice members of the 4-neighbourhood {(i-1,j), (i+1,j), (i,j-1), (i,j+1)},
/// in that order. Edges get 3 neighbours, corners 2.
inline std::vector<std::pair<std::size_t, std::size_t>> neighbors(std::size_t i, std::size_t j,
                                                                  std::size_t n1, std::size_t n2) {
  if (i >= n1 || j >= n2)
    throw std::invalid_argument("neighbors: (" + std::to_string(i) + "," + std::to_string(j) +
                                ") outside " + std::to_string(n1) + "x" + std::to_string(n2));
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(4);
  if (i > 0) out.emplace_back(i - 1, j);
  if (i + 1 < n1) out.emplace_back(i + 1, j);
  if (j > 0) out.emplace_back(i, j - 1);
  if (j + 1 < n2) out.emplace_back(i, j + 1);
  return out;
}

/// Sparse symmetric PSD matrix Q = D^T D over a row-major lattice. The constant
/// vector spans (part of) its null space.
class PrecisionMatrix {
 public:
  PrecisionMatrix(std::size_t rows, std::size_t cols, SparseMatrix q)
      : rows_(rows), cols_(cols), q_(std::move(q)) {
    if (q_.rows() != static_cast<Eigen::Index>(rows * cols) || q_.cols() != q_.rows())
      throw std::invalid_argument("PrecisionMatrix: order does not match lattice");
    q_.makeCompressed();
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t order() const { return rows_ * cols_; }

  const SparseMatrix& sparse() const { return q_; }

  Eigen::MatrixXd dense() const {
    if (order() > kDenseLimit)
      throw std::length_error("PrecisionMatrix::dense: lattice exceeds " +
                              std::to_string(kDenseLimit) + " pixels");
    return Eigen::MatrixXd(q_);
  }

  /// x^T Q x
  double quadratic_form(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return x.dot(q_ * x);
  }

  friend bool operator==(const PrecisionMatrix& a, const PrecisionMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.q_.nonZeros() != b.q_.nonZeros())
      return false;
    for (Eigen::Index k = 0; k < a.q_.outerSize(); ++k) {
      SparseMatrix::InnerIterator ia(a.q_, k), ib(b.q_, k);
      for (; ia && ib; ++ia, ++ib)
        if (ia.index() != ib.index() || ia.value() != ib.value()) return false;
      if (ia || ib) return false;
    }
    return true;
  }

 private:
  std::size_t rows_, cols_;
  SparseMatrix q_;
};

namespace detail {

/// Accumulates Q = D^T D row by row. Each row of D touches at most five
/// columns, so its outer product contributes at most 25 entries. Only the
/// upper triangle is summed; the lower triangle is its exact mirror.
template <typename WeightFn>
PrecisionMatrix assemble_precision(std::size_t n1, std::size_t n2, WeightFn weight) {
  const std::size_t n = n1 * n2;
  std::vector<Eigen::Triplet<double>> upper, diag;
  upper.reserve(n * 12);
  diag.reserve(n * 5);

  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t self = i * n2 + j;
      row.clear();
      double total = 0.0;
      for (auto [k, l] : neighbors(i, j, n1, n2)) {
        const double w = weight(i, j, k, l);
        row.emplace_back(k * n2 + l, w);
        total += w;
      }
      row.emplace_back(self, -total);

      for (std::size_t a = 0; a < row.size(); ++a) {
        for (std::size_t b = 0; b < row.size(); ++b) {
          const auto [ca, va] = row[a];
          const auto [cb, vb] = row[b];
          if (ca == cb)
            diag.emplace_back(ca, cb, va * vb);
          else if (ca < cb)
            upper.emplace_back(ca, cb, va * vb);
        }
      }
    }
  }

  const auto idx = static_cast<Eigen::Index>(n);
  SparseMatrix u(idx, idx), d(idx, idx);
  u.setFromTriplets(upper.begin(), upper.end());
  d.setFromTriplets(diag.begin(), diag.end());
  SparseMatrix ut = u.transpose();
  SparseMatrix q = u + ut + d;
  return PrecisionMatrix(n1, n2, std::move(q));
}

}  // namespace detail

/// First-order IGMRF precision. Row (i,j) of D holds +1 for each in-lattice
/// neighbour and minus the neighbour count on the diagonal.
inline PrecisionMatrix build_igmrf_precision(std::size_t n1, std::size_t n2) {
  if (n1 == 0 || n2 == 0 || n1 * n2 < 2)
    throw std::invalid_argument("build_igmrf_precision: lattice needs at least 2 pixels");
  return detail::assemble_precision(
      n1, n2, [](std::size_t, std::size_t, std::size_t, std::size_t) { return 1.0; });
}

/// HIGMRF precision. A spot pixel's row uses unit weights; a background
/// pixel's row weights each neighbour by lambda^(1 - e_neighbour).
inline PrecisionMatrix build_higmrf_precision(std::size_t n1, std::size_t n2, const SpotMask& mask,
                                              const LatticeWeights& weights) {
  if (mask.rows() != n1 || mask.cols() != n2)
    throw std::invalid_argument("build_higmrf_precision: mask is " + std::to_string(mask.rows()) +
                                "x" + std::to_string(mask.cols()) + ", lattice is " +
                                std::to_string(n1) + "x" + std::to_string(n2));
  if (!(weights.lambda > 1.0)) throw std::invalid_argument("build_higmrf_precision: lambda must be > 1");
  if (n1 * n2 < 2)
    throw std::invalid_argument("build_higmrf_precision: lattice needs at least 2 pixels");
  const double lambda = weights.lambda;
  return detail::assemble_precision(
      n1, n2, [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        if (mask(i, j) == 1) return 1.0;
        return mask(k, l) == 1 ? 1.0 : lambda;
      });
}

}  // namespace smfd
