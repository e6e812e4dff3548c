#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"

namespace smoothcb {

namespace detail {

inline void check_unit_range(double v, const char* who) {
  if (!(v >= -1e-12 && v <= 1.0 + 1e-12))
    throw ContractViolation(std::string(who) + ": loss value " + std::to_string(v) + " outside [0,1]");
}

// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 40) {
  struct Rec {
    const F& f;
    double step(double a, double fa, double m, double fm, double b, double fb, double whole, double tol,
                int depth) const {
      const double lm = 0.5 * (a + m);
      const double rm = 0.5 * (m + b);
      const double flm = f(lm);
      const double frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
      return step(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
             step(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
    }
  };
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Rec{f}.step(a, fa, m, fm, b, fb, whole, tol, max_depth);
}

// 5-point Gauss-Legendre on [a, b]; exact for polynomials of degree <= 9.
template <class F>
double gauss_legendre5(const F& f, double a, double b) {
  static constexpr std::array<double, 5> x = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> w = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t i = 0; i < 5; ++i) s += w[i] * f(mid + half * x[i]);
  return s * half;
}

}  // namespace detail

// Loss on a one-dimensional space, linear on each segment [x_k, x_{k+1})
// (the last segment is closed). Segments may jump at breakpoints. Point
// overrides change the value at isolated points and do not affect integrals.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;

  // breakpoints: 0 = x_0 < ... < x_n = 1; left/right: value at the two ends of
  // each of the n segments.
  PiecewiseLinear(std::vector<double> breakpoints, std::vector<double> left, std::vector<double> right)
      : xs_(std::move(breakpoints)), left_(std::move(left)), right_(std::move(right)) {
    if (xs_.size() < 2 || left_.size() + 1 != xs_.size() || right_.size() + 1 != xs_.size())
      throw InvalidInput("PiecewiseLinear: need n+1 breakpoints and n segment values");
    if (xs_.front() != 0.0 || xs_.back() != 1.0) throw InvalidInput("PiecewiseLinear: breakpoints must span [0,1]");
    for (std::size_t k = 0; k + 1 < xs_.size(); ++k)
      if (!(xs_[k] < xs_[k + 1])) throw InvalidInput("PiecewiseLinear: breakpoints must increase");
    for (std::size_t k = 0; k < left_.size(); ++k) {
      detail::check_unit_range(left_[k], "PiecewiseLinear");
      detail::check_unit_range(right_[k], "PiecewiseLinear");
    }
  }

  static PiecewiseLinear constant(double c) { return PiecewiseLinear({0.0, 1.0}, {c}, {c}); }

  // Piecewise-constant loss with values[k] on [xs[k], xs[k+1]).
  static PiecewiseLinear step(std::vector<double> xs, const std::vector<double>& values) {
    return PiecewiseLinear(std::move(xs), values, values);
  }

  // Continuous interpolant through (xs[k], ys[k]).
  static PiecewiseLinear interpolate(std::vector<double> xs, const std::vector<double>& ys) {
    if (ys.size() != xs.size()) throw InvalidInput("PiecewiseLinear::interpolate: size mismatch");
    std::vector<double> l(ys.begin(), ys.end() - 1), r(ys.begin() + 1, ys.end());
    return PiecewiseLinear(std::move(xs), std::move(l), std::move(r));
  }

  PiecewiseLinear& set_point(double x, double value) {
    detail::check_unit_range(value, "PiecewiseLinear::set_point");
    points_.emplace_back(x, value);
    return *this;
  }

  double operator()(double x) const {
    for (const auto& [px, pv] : points_)
      if (px == x) return pv;
    const std::size_t k = segment_of(x);
    return value_in(k, x);
  }

  // Integral over [lo, hi] (0 <= lo <= hi <= 1).
  double integral(double lo, double hi) const {
    if (!(hi > lo)) return 0.0;
    double s = 0.0;
    for (std::size_t k = segment_of(lo); k < left_.size(); ++k) {
      const double a = std::max(lo, xs_[k]);
      const double b = std::min(hi, xs_[k + 1]);
      if (b > a) s += 0.5 * (b - a) * (value_in(k, a) + value_in(k, b));
      if (xs_[k + 1] >= hi) break;
    }
    return s;
  }

  // Largest absolute slope; infinite when any segment boundary jumps.
  double lipschitz_constant() const {
    double l = 0.0;
    for (std::size_t k = 0; k < left_.size(); ++k) {
      l = std::max(l, std::fabs(right_[k] - left_[k]) / (xs_[k + 1] - xs_[k]));
      if (k + 1 < left_.size() && right_[k] != left_[k + 1]) return std::numeric_limits<double>::infinity();
    }
    if (!points_.empty()) return std::numeric_limits<double>::infinity();
    return l;
  }

  // {0,1}-valued loss 1{u < value(x)}; its pointwise mean over u ~ U[0,1) is
  // the original loss.
  PiecewiseLinear threshold(double u) const {
    std::vector<double> xs{0.0};
    std::vector<double> vals;
    auto push = [&](double end, double v) {
      if (!vals.empty() && vals.back() == v) {
        xs.back() = end;
      } else {
        vals.push_back(v);
        xs.push_back(end);
      }
    };
    for (std::size_t k = 0; k < left_.size(); ++k) {
      const double a = xs_[k], b = xs_[k + 1];
      const double va = left_[k], vb = right_[k];
      const double ia = u < va ? 1.0 : 0.0;
      const double ib = u < vb ? 1.0 : 0.0;
      if (ia == ib || va == vb) {
        push(b, ia);
      } else {
        double cross = a + (u - va) / (vb - va) * (b - a);
        cross = std::clamp(cross, a, b);
        if (cross > a) push(cross, ia);
        if (b > cross) push(b, ib);
      }
    }
    xs.back() = 1.0;
    PiecewiseLinear out = step(std::move(xs), vals);
    for (const auto& [px, pv] : points_) out.set_point(px, u < pv ? 1.0 : 0.0);
    return out;
  }

  const std::vector<double>& breakpoints() const noexcept { return xs_; }

 private:
  std::size_t segment_of(double x) const {
    if (x >= 1.0) return left_.size() - 1;
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - xs_.begin() - 1));
    return std::min(k, left_.size() - 1);
  }
  double value_in(std::size_t k, double x) const {
    const double t = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
    return left_[k] + (right_[k] - left_[k]) * std::clamp(t, 0.0, 1.0);
  }

  std::vector<double> xs_;
  std::vector<double> left_;
  std::vector<double> right_;
  std::vector<std::pair<double, double>> points_;
};

// A loss on the cube that equals `base` except on disjoint boxes. Inside a box
// the value is offset - (depth - slope * ||a - apex||_inf)_+, which covers both
// constant plateaus (depth = 0) and l-infinity tents.
struct BoxPiece {
  Box box;
  double offset = 0.5;
  double depth = 0.0;
  double slope = 0.0;
  Action apex;

  double value(const Action& a) const {
    if (depth <= 0.0) return offset;
    double m = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) m = std::max(m, std::fabs(a[i] - apex[i]));
    return offset - std::max(0.0, depth - slope * m);
  }
};

class BoxField {
 public:
  BoxField(std::size_t dim, double base, std::vector<BoxPiece> pieces)
      : dim_(dim), base_(base), pieces_(std::move(pieces)) {
    detail::check_unit_range(base_, "BoxField");
    for (const auto& p : pieces_) {
      if (p.box.lo.dim() != dim_ || p.box.hi.dim() != dim_) throw InvalidInput("BoxField: piece dimension mismatch");
      detail::check_unit_range(p.offset, "BoxField");
      detail::check_unit_range(p.offset - std::max(0.0, p.depth), "BoxField");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  double base() const noexcept { return base_; }
  const std::vector<BoxPiece>& pieces() const noexcept { return pieces_; }

  double operator()(const Action& a) const {
    for (const auto& p : pieces_)
      if (inside(p.box, a)) return p.value(a);
    return base_;
  }

  // Exact integral over a box region.
  double integral(const Box& region) const {
    double s = base_ * region.volume();
    for (const auto& p : pieces_) {
      const Box cut = intersect(region, p.box);
      const double v = cut.volume();
      if (v <= 0.0) continue;
      s += (p.offset - base_) * v;
      if (p.depth > 0.0) s -= tent_integral(cut, p);
    }
    return s;
  }

  // Lipschitz constant in l-infinity (pieces assumed continuous with base).
  double lipschitz_constant() const {
    double l = 0.0;
    for (const auto& p : pieces_) l = std::max(l, p.slope);
    return l;
  }

 private:
  static bool inside(const Box& b, const Action& a) {
    for (std::size_t i = 0; i < a.dim(); ++i)
      if (a[i] < b.lo[i] || a[i] > b.hi[i]) return false;
    return true;
  }
  static Box intersect(const Box& a, const Box& b) {
    Box out = a;
    for (std::size_t i = 0; i < a.lo.dim(); ++i) {
      out.lo[i] = std::max(a.lo[i], b.lo[i]);
      out.hi[i] = std::min(a.hi[i], b.hi[i]);
    }
    return out;
  }

  // Integral over `cut` of (depth - slope * ||a - apex||_inf)_+, written as
  // slope * int_0^{depth/slope} vol{a in cut : ||a - apex|| <= s} ds, where the
  // volume is a product of piecewise-linear lengths in s.
  double tent_integral(const Box& cut, const BoxPiece& p) const {
    if (p.slope <= 0.0) return p.depth * cut.volume();
    const double smax = p.depth / p.slope;
    std::vector<double> knots{0.0, smax};
    for (std::size_t i = 0; i < dim_; ++i) {
      for (double k : {std::fabs(cut.hi[i] - p.apex[i]), std::fabs(p.apex[i] - cut.lo[i])})
        if (k > 0.0 && k < smax) knots.push_back(k);
    }
    std::sort(knots.begin(), knots.end());
    auto vol = [&](double s) {
      double v = 1.0;
      for (std::size_t i = 0; i < dim_; ++i)
        v *= std::max(0.0, std::min(cut.hi[i], p.apex[i] + s) - std::max(cut.lo[i], p.apex[i] - s));
      return v;
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < knots.size(); ++k)
      if (knots[k + 1] > knots[k]) total += detail::gauss_legendre5(vol, knots[k], knots[k + 1]);
    return p.slope * total;
  }

  std::size_t dim_;
  double base_;
  std::vector<BoxPiece> pieces_;
};

// Arbitrary loss given by a function; integrals use adaptive quadrature and
// every evaluation is checked against the [0,1] contract.
struct CallableLoss {
  std::function<double(const Action&)> fn;
  std::size_t dim = 1;
  double lipschitz = std::numeric_limits<double>::infinity();
};

// A loss function A -> [0,1] with exact ball integrals wherever the
// representation allows.
class LossFunction {
 public:
  static LossFunction constant(double c) {
    detail::check_unit_range(c, "LossFunction::constant");
    return LossFunction(Rep{Constant{c}});
  }
  static LossFunction piecewise(PiecewiseLinear p) { return LossFunction(Rep{std::move(p)}); }
  static LossFunction boxes(BoxField f) { return LossFunction(Rep{std::move(f)}); }
  static LossFunction callable(std::function<double(const Action&)> fn, std::size_t dim = 1,
                               double lipschitz = std::numeric_limits<double>::infinity()) {
    return LossFunction(Rep{CallableLoss{std::move(fn), dim, lipschitz}});
  }

  double operator()(const Action& a) const {
    return std::visit(
        [&](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return r.value;
          } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
            return r(a[0]);
          } else if constexpr (std::is_same_v<T, BoxField>) {
            return r(a);
          } else {
            const double v = r.fn(a);
            detail::check_unit_range(v, "LossFunction");
            return std::clamp(v, 0.0, 1.0);
          }
        },
        rep_);
  }

  // int_{B(center, r)} loss d(nu).
  double integrate_ball(const ActionSpace& space, const Action& center, double r, double tol = 1e-9) const {
    if (const auto* c = std::get_if<Constant>(&rep_)) return c->value * space.ball_volume(center, r);
    if (space.kind() == SpaceKind::FiniteGrid) {
      const Segments seg = space.segments(center, r);
      const double m = static_cast<double>(space.grid_size());
      double s = 0.0;
      for (const Interval& iv : seg) {
        const auto lo = static_cast<std::size_t>(std::llround(iv.lo * m)) + 1;
        const auto hi = static_cast<std::size_t>(std::llround(iv.hi * m));
        for (std::size_t i = lo; i <= hi; ++i) s += (*this)(space.grid_action(i));
      }
      return s / m;
    }
    if (const auto* p = std::get_if<PiecewiseLinear>(&rep_)) {
      double s = 0.0;
      for (const Interval& iv : space.segments(center, r)) s += p->integral(iv.lo, iv.hi);
      return s;
    }
    if (const auto* f = std::get_if<BoxField>(&rep_)) {
      if (space.kind() != SpaceKind::Cube) throw InvalidInput("BoxField losses live on the cube");
      return f->integral(space.box(center, r));
    }
    const auto& c = std::get<CallableLoss>(rep_);
    if (space.one_dimensional()) {
      double s = 0.0;
      for (const Interval& iv : space.segments(center, r))
        s += detail::adaptive_simpson([&](double x) { return (*this)(Action(x)); }, iv.lo, iv.hi, tol);
      return s;
    }
    const Box b = space.box(center, r);
    return nested_integral(b, c.dim, tol);
  }

  // <K_h center, loss>: the mean of the loss over B(center, r).
  double ball_average(const ActionSpace& space, const Action& center, double r, double tol = 1e-9) const {
    if (r <= 0.0) return (*this)(center);
    return integrate_ball(space, center, r, tol) / space.ball_volume(center, r);
  }

  bool exact_integrals() const noexcept { return !std::holds_alternative<CallableLoss>(rep_); }

  double lipschitz_constant() const {
    return std::visit(
        [](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Constant>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, CallableLoss>) {
            return r.lipschitz;
          } else {
            return r.lipschitz_constant();
          }
        },
        rep_);
  }

  const PiecewiseLinear* as_piecewise() const noexcept { return std::get_if<PiecewiseLinear>(&rep_); }
  const BoxField* as_boxes() const noexcept { return std::get_if<BoxField>(&rep_); }
  std::optional<double> as_constant() const noexcept {
    if (const auto* c = std::get_if<Constant>(&rep_)) return c->value;
    return std::nullopt;
  }

 private:
  struct Constant {
    double value;
  };
  using Rep = std::variant<Constant, PiecewiseLinear, BoxField, CallableLoss>;

  explicit LossFunction(Rep r) : rep_(std::move(r)) {}

  double nested_integral(const Box& b, std::size_t dim, double tol) const {
    Action point = b.lo;
    std::function<double(std::size_t)> inner = [&](std::size_t axis) -> double {
      return detail::adaptive_simpson(
          [&](double x) {
            point[axis] = x;
            return axis + 1 == dim ? (*this)(point) : inner(axis + 1);
          },
          b.lo[axis], b.hi[axis], tol, 20);
    };
    return inner(0);
  }

  Rep rep_;
};

}  // namespace smoothcb
