#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace smoothcb {

inline constexpr std::size_t kMaxActionDim = 8;

// A point of an action space: up to kMaxActionDim coordinates in [0,1],
// stored inline so actions are cheap to copy.
class Action {
 public:
  Action() = default;
  explicit Action(double x) : dim_(1) { c_[0] = x; }
  Action(std::initializer_list<double> xs) {
    if (xs.size() > kMaxActionDim) throw InvalidInput("action dimension exceeds kMaxActionDim");
    std::copy(xs.begin(), xs.end(), c_.begin());
    dim_ = xs.size();
  }
  static Action from(std::span<const double> xs) {
    if (xs.size() > kMaxActionDim) throw InvalidInput("action dimension exceeds kMaxActionDim");
    Action a;
    std::copy(xs.begin(), xs.end(), a.c_.begin());
    a.dim_ = xs.size();
    return a;
  }

  std::size_t dim() const noexcept { return dim_; }
  double operator[](std::size_t i) const noexcept { return c_[i]; }
  double& operator[](std::size_t i) noexcept { return c_[i]; }
  std::span<const double> coords() const noexcept { return {c_.data(), dim_}; }

  friend bool operator==(const Action& a, const Action& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (std::size_t i = 0; i < a.dim_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }
  // Lexicographic order over coordinates.
  friend bool operator<(const Action& a, const Action& b) noexcept {
    return std::lexicographical_compare(a.c_.begin(), a.c_.begin() + a.dim_, b.c_.begin(),
                                        b.c_.begin() + b.dim_);
  }

 private:
  std::array<double, kMaxActionDim> c_{};
  std::size_t dim_ = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const noexcept { return hi > lo ? hi - lo : 0.0; }
};

// At most two intervals: a ball on a 1-d space, in measure coordinates.
struct Segments {
  std::array<Interval, 2> parts{};
  std::size_t count = 0;

  void push(Interval iv) {
    if (iv.hi > iv.lo) parts[count++] = iv;
  }
  double length() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += parts[i].length();
    return s;
  }
  const Interval* begin() const noexcept { return parts.data(); }
  const Interval* end() const noexcept { return parts.data() + count; }
};

// Axis-aligned box [lo_i, hi_i] in the unit cube.
struct Box {
  Action lo;
  Action hi;
  double volume() const noexcept {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
    return v;
  }
};

enum class SpaceKind { Ring, Cube, FiniteGrid };
enum class CubeNorm { LInf, L1, L2 };

// Compact metric action space with the uniform base probability measure.
//
// Ring: [0,1) with wraparound distance. Cube: [0,1]^d with the l-infinity
// metric. FiniteGrid: the points {i/M : i = 1..M} with |a - b|.
//
// One-dimensional spaces expose "measure coordinates": a map of the space onto
// [0,1] under which the base measure becomes Lebesgue measure and every ball
// becomes at most two intervals. For FiniteGrid the point i/M owns the cell
// [(i-1)/M, i/M).
class ActionSpace {
 public:
  static ActionSpace ring() { return ActionSpace(SpaceKind::Ring, 1, 0); }
  static ActionSpace interval() { return cube(1); }
  static ActionSpace cube(std::size_t d, CubeNorm norm = CubeNorm::LInf) {
    if (d == 0 || d > kMaxActionDim) throw InvalidInput("cube dimension must be in [1, kMaxActionDim]");
    if (norm != CubeNorm::LInf) throw InvalidInput("cube supports only the l-infinity metric");
    return ActionSpace(SpaceKind::Cube, d, 0);
  }
  static ActionSpace finite_grid(std::size_t m) {
    if (m == 0) throw InvalidInput("finite grid needs M >= 1");
    return ActionSpace(SpaceKind::FiniteGrid, 1, m);
  }

  SpaceKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t grid_size() const noexcept { return m_; }
  bool one_dimensional() const noexcept { return dim_ == 1; }

  std::string name() const {
    switch (kind_) {
      case SpaceKind::Ring: return "ring";
      case SpaceKind::Cube: return dim_ == 1 ? "interval" : "cube" + std::to_string(dim_);
      case SpaceKind::FiniteGrid: return "grid" + std::to_string(m_);
    }
    return "?";
  }

  double diameter() const noexcept {
    switch (kind_) {
      case SpaceKind::Ring: return 0.5;
      case SpaceKind::Cube: return 1.0;
      case SpaceKind::FiniteGrid: return m_ > 1 ? (static_cast<double>(m_) - 1.0) / static_cast<double>(m_) : 0.0;
    }
    return 1.0;
  }

  bool contains(const Action& a) const noexcept {
    if (a.dim() != dim_) return false;
    for (std::size_t i = 0; i < dim_; ++i)
      if (!(a[i] >= 0.0 && a[i] <= 1.0)) return false;
    if (kind_ == SpaceKind::FiniteGrid) return grid_index_or_zero(a[0]) != 0;
    return true;
  }

  void validate(const Action& a) const {
    if (a.dim() != dim_) throw InvalidInput("action dimension does not match the space");
    if (!contains(a)) throw InvalidInput("action lies outside the space");
  }

  double distance(const Action& a, const Action& b) const {
    if (a.dim() != dim_ || b.dim() != dim_) throw InvalidInput("distance: dimension mismatch");
    switch (kind_) {
      case SpaceKind::Ring: {
        const double diff = std::fabs(a[0] - b[0]);
        return std::min(diff, 1.0 - diff);
      }
      case SpaceKind::Cube: {
        double m = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
        return m;
      }
      case SpaceKind::FiniteGrid: return std::fabs(a[0] - b[0]);
    }
    return 0.0;
  }

  // nu(B(a, r)).
  double ball_volume(const Action& a, double r) const {
    if (r < 0.0) throw InvalidInput("ball_volume: negative radius");
    if (a.dim() != dim_) throw InvalidInput("ball_volume: dimension mismatch");
    switch (kind_) {
      case SpaceKind::Ring: return std::min(1.0, 2.0 * r);
      case SpaceKind::Cube: {
        double v = 1.0;
        for (std::size_t i = 0; i < dim_; ++i)
          v *= std::min(1.0, a[i] + r) - std::max(0.0, a[i] - r);
        return v;
      }
      case SpaceKind::FiniteGrid: {
        const auto [lo, hi] = grid_ball_indices(a[0], r);
        return hi >= lo ? static_cast<double>(hi - lo + 1) / static_cast<double>(m_) : 0.0;
      }
    }
    return 0.0;
  }

  // Ball B(a, r) of a one-dimensional space in measure coordinates.
  Segments segments(const Action& a, double r) const {
    if (dim_ != 1) throw InvalidInput("segments: only defined for one-dimensional spaces");
    Segments out;
    const double c = a[0];
    switch (kind_) {
      case SpaceKind::Ring: {
        if (r >= 0.5) {
          out.push({0.0, 1.0});
          break;
        }
        const double lo = c - r;
        const double hi = c + r;
        if (lo < 0.0) {
          out.push({0.0, hi});
          out.push({1.0 + lo, 1.0});
        } else if (hi > 1.0) {
          out.push({lo, 1.0});
          out.push({0.0, hi - 1.0});
        } else {
          out.push({lo, hi});
        }
        break;
      }
      case SpaceKind::Cube: out.push({std::max(0.0, c - r), std::min(1.0, c + r)}); break;
      case SpaceKind::FiniteGrid: {
        const auto [lo, hi] = grid_ball_indices(c, r);
        const double m = static_cast<double>(m_);
        if (hi >= lo) out.push({static_cast<double>(lo - 1) / m, static_cast<double>(hi) / m});
        break;
      }
    }
    return out;
  }

  // Position of an action in measure coordinates (one-dimensional spaces).
  double measure_coord(const Action& a) const {
    if (kind_ == SpaceKind::FiniteGrid) {
      const std::size_t i = grid_index(a[0]);
      return (static_cast<double>(i) - 0.5) / static_cast<double>(m_);
    }
    if (kind_ == SpaceKind::Ring && a[0] >= 1.0) return 0.0;
    return a[0];
  }

  // Ball B(a, r) of the cube as a box.
  Box box(const Action& a, double r) const {
    if (kind_ != SpaceKind::Cube) throw InvalidInput("box: only defined for the cube");
    Box b{a, a};
    for (std::size_t i = 0; i < dim_; ++i) {
      b.lo[i] = std::max(0.0, a[i] - r);
      b.hi[i] = std::min(1.0, a[i] + r);
    }
    return b;
  }

  Action sample_uniform(Rng& rng) const {
    Action a;
    switch (kind_) {
      case SpaceKind::Ring: return Action(rng.uniform());
      case SpaceKind::Cube: {
        std::array<double, kMaxActionDim> xs{};
        for (std::size_t i = 0; i < dim_; ++i) xs[i] = rng.uniform();
        return Action::from({xs.data(), dim_});
      }
      case SpaceKind::FiniteGrid: return grid_action(1 + rng.index(m_));
    }
    return a;
  }

  // Uniform draw from B(center, r) under the base measure.
  Action sample_ball(const Action& center, double r, Rng& rng) const {
    if (r <= 0.0) return center;
    switch (kind_) {
      case SpaceKind::Ring: {
        if (r >= 0.5) return Action(rng.uniform());
        double x = center[0] + rng.uniform(-r, r);
        if (x < 0.0) x += 1.0;
        if (x >= 1.0) x -= 1.0;
        return Action(x);
      }
      case SpaceKind::Cube: {
        Action a = center;
        for (std::size_t i = 0; i < dim_; ++i)
          a[i] = rng.uniform(std::max(0.0, center[i] - r), std::min(1.0, center[i] + r));
        return a;
      }
      case SpaceKind::FiniteGrid: {
        const auto [lo, hi] = grid_ball_indices(center[0], r);
        return grid_action(lo + rng.index(hi - lo + 1));
      }
    }
    return center;
  }

  // FiniteGrid helpers; grid points are i/M for i = 1..M.
  Action grid_action(std::size_t i) const {
    return Action(static_cast<double>(i) / static_cast<double>(m_));
  }
  std::vector<Action> grid_actions() const {
    std::vector<Action> out;
    for (std::size_t i = 1; i <= m_; ++i) out.push_back(grid_action(i));
    return out;
  }
  std::size_t grid_index(double x) const {
    const std::size_t i = grid_index_or_zero(x);
    if (i == 0) throw InvalidInput("value is not a grid point");
    return i;
  }

  // Lower bound on alpha_unif = sup nu(B(a,2h)) / nu(B(a',h)) from a grid of
  // centers (grid_resolution points per axis; FiniteGrid uses its own points).
  double estimate_uniformity(std::span<const double> hs, std::size_t grid_resolution = 64) const {
    if (hs.empty()) throw InvalidInput("estimate_uniformity: empty bandwidth list");
    if (grid_resolution < 2) throw InvalidInput("estimate_uniformity: grid_resolution must be >= 2");
    std::vector<double> axis;
    if (kind_ == SpaceKind::FiniteGrid) {
      for (std::size_t i = 1; i <= m_; ++i) axis.push_back(static_cast<double>(i) / static_cast<double>(m_));
    } else {
      for (std::size_t i = 0; i < grid_resolution; ++i)
        axis.push_back(static_cast<double>(i) / static_cast<double>(grid_resolution - 1));
    }
    double best = 0.0;
    for (double h : hs) {
      if (!(h > 0.0)) throw InvalidInput("estimate_uniformity: bandwidths must be positive");
      // Ball volumes are products over axes, so sup/inf factor per axis.
      double num = 0.0;
      double den = 1.0;
      for (double x : axis) {
        const Action a = Action(x);
        const ActionSpace line = kind_ == SpaceKind::Cube ? interval() : *this;
        num = std::max(num, line.ball_volume(a, 2.0 * h));
        den = std::min(den, line.ball_volume(a, h));
      }
      const double ratio = std::pow(num / den, static_cast<double>(dim_));
      best = std::max(best, ratio);
    }
    return best;
  }

  friend bool operator==(const ActionSpace& a, const ActionSpace& b) noexcept {
    return a.kind_ == b.kind_ && a.dim_ == b.dim_ && a.m_ == b.m_;
  }

 private:
  ActionSpace(SpaceKind kind, std::size_t dim, std::size_t m) : kind_(kind), dim_(dim), m_(m) {}

  static constexpr double kGridTol = 1e-9;

  std::size_t grid_index_or_zero(double x) const noexcept {
    const double scaled = x * static_cast<double>(m_);
    const double i = std::round(scaled);
    if (std::fabs(scaled - i) > kGridTol || i < 1.0 || i > static_cast<double>(m_)) return 0;
    return static_cast<std::size_t>(i);
  }

  // Inclusive index range of grid points within distance r of x.
  std::pair<std::size_t, std::size_t> grid_ball_indices(double x, double r) const noexcept {
    const double m = static_cast<double>(m_);
    const double lo = std::ceil(x * m - r * m - kGridTol);
    const double hi = std::floor(x * m + r * m + kGridTol);
    const auto lo_i = static_cast<std::size_t>(std::max(1.0, lo));
    const auto hi_i = static_cast<std::size_t>(std::min(m, std::max(0.0, hi)));
    return {lo_i, hi_i};
  }

  SpaceKind kind_;
  std::size_t dim_;
  std::size_t m_;
};

}  // namespace smoothcb
