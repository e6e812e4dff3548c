#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "loss.hpp"
#include "random.hpp"

namespace smoothcb {

// Rectangular smoothing kernel: K_h(a) is the uniform distribution over the
// ball B(a, h), with density 1{rho(a, a') <= h} / nu(B(a, h)) w.r.t. nu.
//
// h = 0 is the Dirac kernel. It is accepted for diagnostics only: density
// queries throw, smoothed_loss evaluates the loss at the center, and sample
// returns the center.
class RectKernel {
 public:
  RectKernel(ActionSpace space, double h) : space_(space), h_(h) {
    if (!(h >= 0.0) || h > 1.0) throw InvalidInput("RectKernel: bandwidth must lie in [0,1]");
  }

  const ActionSpace& space() const noexcept { return space_; }
  double bandwidth() const noexcept { return h_; }
  bool is_dirac() const noexcept { return h_ == 0.0; }

  double density(const Action& center, const Action& a) const {
    if (is_dirac()) throw InvalidInput("RectKernel: the Dirac kernel has no density");
    if (space_.distance(center, a) > h_) return 0.0;
    return 1.0 / space_.ball_volume(center, h_);
  }

  // Supremum of the density over centers and actions.
  double kappa() const {
    if (is_dirac()) return std::numeric_limits<double>::infinity();
    switch (space_.kind()) {
      case SpaceKind::Ring: return h_ >= 0.5 ? 1.0 : 1.0 / (2.0 * h_);
      case SpaceKind::Cube: return std::pow(std::min(1.0, h_), -static_cast<double>(space_.dim()));
      case SpaceKind::FiniteGrid: {
        double smallest = 1.0;
        for (const Action& a : space_.grid_actions()) smallest = std::min(smallest, space_.ball_volume(a, h_));
        return 1.0 / smallest;
      }
    }
    return 0.0;
  }

  // <K_h center, loss>: exact for piecewise and box losses, quadrature at
  // absolute tolerance `tol` otherwise.
  double smoothed_loss(const Action& center, const LossFunction& loss, double tol = 1e-9) const {
    if (is_dirac()) return loss(center);
    const double v = loss.ball_average(space_, center, h_, tol);
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw ContractViolation("smoothed_loss: loss left [0,1]");
    return std::clamp(v, 0.0, 1.0);
  }

  Action sample(const Action& center, Rng& rng) const {
    if (is_dirac()) return center;
    return space_.sample_ball(center, h_, rng);
  }

 private:
  ActionSpace space_;
  double h_;
};

// Smallest integer c with 2^c >= t (t >= 1).
inline int ceil_log2(std::uint64_t t) {
  int c = 0;
  while ((std::uint64_t{1} << c) < t) ++c;
  return c;
}

// The discretized bandwidth set H = {k/D : 1 <= (D/k)^d <= 2^(ceil(log2 T)+1)}
// with D = d * 2^(d+2) * T^2. H is kept implicit: for realistic horizons it has
// on the order of D members, so only membership, size and snapping are offered.
class BandwidthGrid {
 public:
  BandwidthGrid(std::size_t d, std::uint64_t horizon) : d_(d), horizon_(horizon) {
    if (d == 0) throw InvalidInput("BandwidthGrid: d must be positive");
    if (horizon == 0) throw InvalidInput("BandwidthGrid: horizon must be positive");
    const double dd = static_cast<double>(d);
    denominator_ = dd * std::ldexp(1.0, static_cast<int>(d) + 2) * static_cast<double>(horizon) *
                   static_cast<double>(horizon);
    const int exponent = ceil_log2(horizon) + 1;
    // (D/k)^d <= 2^exponent  <=>  k >= D * 2^(-exponent/d).
    k_min_ = std::ceil(denominator_ * std::exp2(-static_cast<double>(exponent) / dd) - 1e-9);
    k_min_ = std::max(1.0, k_min_);
  }

  std::size_t dimension() const noexcept { return d_; }
  std::uint64_t horizon() const noexcept { return horizon_; }
  double denominator() const noexcept { return denominator_; }
  double smallest() const noexcept { return k_min_ / denominator_; }
  double size() const noexcept { return denominator_ - k_min_ + 1.0; }

  bool contains(double h) const noexcept {
    const double k = h * denominator_;
    const double kr = std::round(k);
    if (std::fabs(k - kr) > 1e-6) return false;
    return kr >= k_min_ && kr <= denominator_;
  }

  // floor(h D) / D, the grid bandwidth just below h. Requires h >= T^(-1/d).
  double snap(double h) const {
    const double lowest = std::pow(static_cast<double>(horizon_), -1.0 / static_cast<double>(d_));
    if (h < lowest * (1.0 - 1e-12))
      throw OutOfRange("snap_bandwidth: h below T^(-1/d); the trivial regret bound applies");
    if (h > 1.0) throw OutOfRange("snap_bandwidth: h above 1");
    double k = std::floor(h * denominator_);
    if ((k + 1.0) / denominator_ <= h) k += 1.0;
    return k / denominator_;
  }

 private:
  std::size_t d_;
  std::uint64_t horizon_;
  double denominator_;
  double k_min_;
};

inline double snap_bandwidth(const BandwidthGrid& grid, double h) { return grid.snap(h); }

}  // namespace smoothcb
