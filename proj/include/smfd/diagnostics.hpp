#pragma once

#include "smfd/errors.hpp"

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace smfd {

inline constexpr double kPsrfThreshold = 1.2;

/// m >= 2 scalar chains of common length L >= 2.
class TraceSet {
 public:
  explicit TraceSet(std::vector<std::vector<double>> chains) : chains_(std::move(chains)) {
    if (chains_.size() < 2) throw std::invalid_argument("TraceSet: need at least 2 chains");
    const std::size_t len = chains_.front().size();
    if (len < 2) throw std::invalid_argument("TraceSet: chains need at least 2 samples");
    for (const auto& c : chains_)
      if (c.size() != len) throw std::invalid_argument("TraceSet: chains differ in length");
  }

  std::size_t chains() const { return chains_.size(); }
  std::size_t length() const { return chains_.front().size(); }
  const std::vector<double>& chain(std::size_t i) const { return chains_[i]; }

 private:
  std::vector<std::vector<double>> chains_;
};

struct PsrfTerms {
  double within;   // W
  double between;  // B
  double psrf;
};

/// W = mean of the per-chain sample variances (divisor L - 1),
/// B = L / (m - 1) * sum_i (chain mean_i - grand mean)^2,
/// PSRF = (1 - 1/L) + B / (L W).
inline PsrfTerms psrf_terms(const TraceSet& t, const std::string& parameter = {}) {
  const auto m = static_cast<double>(t.chains());
  const auto len = static_cast<double>(t.length());
  std::vector<double> means(t.chains());
  double within = 0.0;
  for (std::size_t i = 0; i < t.chains(); ++i) {
    double sum = 0.0;
    for (double v : t.chain(i)) sum += v;
    means[i] = sum / len;
    double ss = 0.0;
    for (double v : t.chain(i)) ss += (v - means[i]) * (v - means[i]);
    within += ss / (len - 1.0);
  }
  within /= m;
  if (!(within > 0.0)) throw DegenerateTraceError(parameter);

  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= len / (m - 1.0);

  return {within, between, (1.0 - 1.0 / len) + between / (len * within)};
}

inline double psrf(const TraceSet& t) { return psrf_terms(t).psrf; }

struct ParameterVerdict {
  std::string name;
  double psrf;
  bool converged;
};

struct ConvergenceReport {
  std::vector<ParameterVerdict> parameters;  // in name order
  bool converged = true;
};

inline ConvergenceReport convergence_report(const std::map<std::string, TraceSet>& traces,
                                            double threshold = kPsrfThreshold) {
  ConvergenceReport report;
  for (const auto& [name, set] : traces) {
    const double r = psrf_terms(set, name).psrf;
    const bool ok = r < threshold;
    report.parameters.push_back({name, r, ok});
    report.converged = report.converged && ok;
  }
  return report;
}

}  // namespace smfd
