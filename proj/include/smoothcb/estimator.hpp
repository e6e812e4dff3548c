#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "policy.hpp"

namespace smoothcb {

// One logged interaction: the action's density under the logging distribution
// is `propensity`.
struct IWSample {
  Context x;
  Action a;
  double observed_loss = 0.0;
  double propensity = 1.0;
};

inline void validate(const IWSample& s) {
  if (!(s.propensity > 0.0) || !std::isfinite(s.propensity)) throw InvalidInput("IWSample: propensity must be positive");
  if (!(s.observed_loss >= 0.0 && s.observed_loss <= 1.0)) throw InvalidInput("IWSample: loss must lie in [0,1]");
}

// K_h(pi(x))(a) * l(a) / q(a|x).
inline double iw_estimate(const RectKernel& kernel, const PolicyClass& pc, std::size_t policy, const IWSample& s) {
  validate(s);
  const Action center = pc.act(policy, s.x);
  if (kernel.space().distance(center, s.a) > kernel.bandwidth()) return 0.0;
  return kernel.density(center, s.a) * s.observed_loss / s.propensity;
}

// Number of batches for confidence 1 - delta.
inline std::size_t mom_batches(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("median_of_means: delta must lie in (0,1)");
  return 5 * static_cast<std::size_t>(std::ceil(std::log(1.0 / delta)));
}

// Median of k contiguous equal batch means; lower median when k is even.
inline double median_of_means_k(std::span<const double> values, std::size_t k) {
  if (k == 0) throw InvalidInput("median_of_means: k must be positive");
  if (values.size() < k) throw InvalidInput("median_of_means: fewer values than batches");
  if (values.size() % k != 0) throw ContractViolation("median_of_means: value count must be a multiple of k");
  const std::size_t n = values.size() / k;
  std::vector<double> means(k);
  for (std::size_t b = 0; b < k; ++b) {
    double s = 0.0;
    for (std::size_t i = b * n; i < (b + 1) * n; ++i) s += values[i];
    means[b] = s / static_cast<double>(n);
  }
  const auto mid = means.begin() + static_cast<std::ptrdiff_t>((k - 1) / 2);
  std::nth_element(means.begin(), mid, means.end());
  return *mid;
}

inline double median_of_means(std::span<const double> values, double delta) {
  return median_of_means_k(values, mom_batches(delta));
}

}  // namespace smoothcb
