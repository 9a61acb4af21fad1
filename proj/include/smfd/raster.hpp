#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smfd {

/// Rectangular grid of intensities stored row-major: element (i, j) lives at
/// i * cols + j. Every element is finite.
class Raster {
 public:
  Raster() = default;

  Raster(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    check_shape();
    if (!std::isfinite(fill)) throw std::invalid_argument("Raster: fill value is not finite");
  }

  Raster(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_shape();
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("Raster: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
    for (double v : data_)
      if (!std::isfinite(v)) throw std::invalid_argument("Raster: non-finite element");
  }

  static Raster from_vector(std::size_t rows, std::size_t cols, const Eigen::VectorXd& v) {
    return Raster(rows, cols, std::vector<double>(v.data(), v.data() + v.size()));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator[](std::size_t k) const { return data_[k]; }
  double& operator[](std::size_t k) { return data_[k]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  bool same_shape(const Raster& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  /// Sub-lattice copy of rows [r0, r0+h) and columns [c0, c0+w).
  Raster crop(std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) const {
    if (h == 0 || w == 0 || r0 + h > rows_ || c0 + w > cols_)
      throw std::out_of_range("Raster::crop: region outside the lattice");
    std::vector<double> out;
    out.reserve(h * w);
    for (std::size_t i = r0; i < r0 + h; ++i)
      for (std::size_t j = c0; j < c0 + w; ++j) out.push_back((*this)(i, j));
    return Raster(h, w, std::move(out));
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  void check_shape() const {
    if (rows_ == 0 || cols_ == 0) throw std::invalid_argument("Raster: dimensions must be positive");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Binary spot/background classification, 1 = spot.
class SpotMask {
 public:
  SpotMask() = default;

  SpotMask(std::size_t rows, std::size_t cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("SpotMask: dimensions must be positive");
    if (fill > 1) throw std::invalid_argument("SpotMask: values must be 0 or 1");
  }

  SpotMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("SpotMask: dimensions must be positive");
    if (data_.size() != rows * cols) throw std::invalid_argument("SpotMask: data length mismatch");
    for (auto v : data_)
      if (v > 1) throw std::invalid_argument("SpotMask: values must be 0 or 1");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  void set(std::size_t i, std::size_t j, bool spot) { data_[i * cols_ + j] = spot ? 1 : 0; }
  std::uint8_t operator[](std::size_t k) const { return data_[k]; }

  std::span<const std::uint8_t> values() const { return data_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }

  friend bool operator==(const SpotMask&, const SpotMask&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Affine map of a raster onto [0, 1]. A constant raster is only shifted.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;

  static Normalization fit(const Raster& r) {
    const double lo = r.min();
    const double hi = r.max();
    return {lo, hi > lo ? hi - lo : 1.0};
  }

  Raster forward(const Raster& r) const {
    Raster out = r;
    for (double& v : out.values()) v = (v - offset) / scale;
    return out;
  }

  Raster inverse(const Raster& r) const {
    Raster out = r;
    for (double& v : out.values()) v = v * scale + offset;
    return out;
  }
};

}  // namespace smfd
