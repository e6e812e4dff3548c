#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "environment.hpp"
#include "errors.hpp"
#include "policy.hpp"

namespace smoothcb {

// lambda_h(pi) for every policy over a panel.
inline std::vector<double> smoothed_losses(const Environment& env, const PolicyClass& pc, double h,
                                           const ContextPanel& panel) {
  std::vector<double> out(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) out[i] = env.smoothed_policy_loss(pc, i, h, panel);
  return out;
}

// Pi_{h, eps}: policies within eps of the best smoothed loss, with a small
// slack so that exact ties on the boundary survive integration rounding.
inline VersionSpace near_optimal_set(const std::vector<double>& losses, double eps) {
  const double best = *std::min_element(losses.begin(), losses.end());
  return VersionSpace(losses.size()).restrict([&](std::size_t i) { return losses[i] <= best + eps + 1e-12; });
}

// E_x of the delta-packing number of {pi(x) : pi in subset}. One-dimensional
// points are packed greedily in sorted order, which is maximal and, on the
// interval, maximum.
inline double expected_packing(const ActionSpace& space, const PolicyClass& pc, const VersionSpace& subset,
                               const ContextPanel& panel, double delta) {
  double m = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i)
    m += panel.weights[i] *
         static_cast<double>(packing_number(space, projected_actions(pc, subset, panel.contexts[i]), delta));
  return m;
}

struct DiagnosticsRow {
  double eps = 0.0;
  double M_h = 0.0;        // M_h(eps, h)
  double M_h_12 = 0.0;     // M_h(12 eps, h)
  double M_0 = 0.0;        // M_0(12 L eps, eps); NaN without L
  std::size_t near_optimal = 0;  // |Pi_{h, eps}|
};

struct DiagnosticsReport {
  double h = 0.0;
  std::optional<double> L;
  std::vector<DiagnosticsRow> rows;
  double theta = 0.0;  // sup over the grid of M_h(12 eps, h) / eps
  double psi = std::numeric_limits<double>::quiet_NaN();  // sup of M_0(12 L eps, eps) / eps
  double zoom_exponent = std::numeric_limits<double>::quiet_NaN();
  double zoom_residual = std::numeric_limits<double>::quiet_NaN();
  double alpha_unif = 0.0;
  double benchmark = 0.0;
  double benchmark_0 = 0.0;
};

// Least-squares slope of y on x; returns (slope, rms residual).
inline std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (my + slope * (x[i] - mx));
    rss += r * r;
  }
  return {slope, std::sqrt(rss / static_cast<double>(n))};
}

// Packing and coefficient diagnostics over an epsilon grid. The zooming
// exponent is the slope of ln M_0(12 L eps, eps) against ln(1/eps).
inline DiagnosticsReport diagnose(const Environment& env, const PolicyClass& pc, double h, std::optional<double> L,
                                  std::vector<double> eps_grid, std::size_t n_ctx = 2000) {
  if (!(h > 0.0 && h <= 1.0)) throw InvalidInput("diagnose: h must lie in (0,1]");
  if (eps_grid.empty()) throw InvalidInput("diagnose: empty epsilon grid");
  for (double e : eps_grid)
    if (!(e > 0.0 && e < 1.0)) throw InvalidInput("diagnose: epsilons must lie in (0,1)");
  std::sort(eps_grid.begin(), eps_grid.end());
  const ContextPanel panel = env.reference_panel(n_ctx);
  const auto lam_h = smoothed_losses(env, pc, h, panel);
  std::vector<double> lam_0;
  if (L) lam_0 = smoothed_losses(env, pc, 0.0, panel);

  DiagnosticsReport rep;
  rep.h = h;
  rep.L = L;
  rep.benchmark = *std::min_element(lam_h.begin(), lam_h.end());
  if (L) rep.benchmark_0 = *std::min_element(lam_0.begin(), lam_0.end());
  std::vector<double> lx, ly;
  for (double eps : eps_grid) {
    DiagnosticsRow row;
    row.eps = eps;
    const VersionSpace near = near_optimal_set(lam_h, eps);
    row.near_optimal = near.size();
    row.M_h = expected_packing(env.space(), pc, near, panel, h);
    row.M_h_12 = expected_packing(env.space(), pc, near_optimal_set(lam_h, 12.0 * eps), panel, h);
    rep.theta = std::max(rep.theta, row.M_h_12 / eps);
    if (L) {
      row.M_0 = expected_packing(env.space(), pc, near_optimal_set(lam_0, 12.0 * *L * eps), panel, eps);
      rep.psi = std::isnan(rep.psi) ? row.M_0 / eps : std::max(rep.psi, row.M_0 / eps);
      lx.push_back(std::log(1.0 / eps));
      ly.push_back(std::log(row.M_0));
    } else {
      row.M_0 = std::numeric_limits<double>::quiet_NaN();
    }
    rep.rows.push_back(row);
  }
  if (L) std::tie(rep.zoom_exponent, rep.zoom_residual) = fit_line(lx, ly);
  const double hs[] = {h};
  rep.alpha_unif = env.space().estimate_uniformity(hs);
  return rep;
}

// Least-squares exponent of regret against T on log-log axes.
inline std::pair<double, double> fit_exponent(const std::vector<double>& T, const std::vector<double>& regret) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < T.size(); ++i) {
    x.push_back(std::log(T[i]));
    y.push_back(std::log(std::max(regret[i], 1e-12)));
  }
  return fit_line(x, y);
}

}  // namespace smoothcb
