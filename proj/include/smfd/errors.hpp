#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace smfd {

/// Factorization failure inside the sampler. Carries the lattice size and
/// the noise precisions in effect so a failing run can be reproduced.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t rows, std::size_t cols,
                 double kappa_l, double kappa_f)
      : std::runtime_error(format(what, rows, cols, kappa_l, kappa_f)),
        rows_(rows), cols_(cols), kappa_l_(kappa_l), kappa_f_(kappa_f) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double kappa_l() const { return kappa_l_; }
  double kappa_f() const { return kappa_f_; }

 private:
  static std::string format(const std::string& what, std::size_t rows,
                            std::size_t cols, double kl, double kf) {
    std::ostringstream os;
    os << what << " (lattice " << rows << "x" << cols << ", kappa_l=" << kl
       << ", kappa_f=" << kf << ")";
    return os.str();
  }

  std::size_t rows_, cols_;
  double kappa_l_, kappa_f_;
};

/// All chains of a trace set are constant, so the within-chain variance is 0.
class DegenerateTraceError : public std::domain_error {
 public:
  explicit DegenerateTraceError(const std::string& parameter)
      : std::domain_error("degenerate trace: within-chain variance is zero" +
                          (parameter.empty() ? std::string{}
                                             : " for parameter '" + parameter + "'")),
        parameter_(parameter) {}

  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

/// UQI denominator too close to zero to give a stable value.
class InstabilityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace smfd
