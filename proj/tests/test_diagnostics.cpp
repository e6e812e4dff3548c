#include <gtest/gtest.h>

#include <cmath>

#include "smoothcb/diagnostics.hpp"

using namespace smoothcb;

namespace {

// Smoothed loss of |a - 1/2| on the interval with a ball inside [0,1].
double lambda_h(double a, double h) {
  const double d = std::fabs(a - 0.5);
  return d >= h ? d : (d * d + h * h) / (2.0 * h);
}

// Maximum delta-packing of sorted reals by dynamic programming.
std::size_t packing_dp(const std::vector<double>& x, double delta) {
  std::vector<std::size_t> best(x.size() + 1, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t j = i;
    while (j > 0 && x[i] - x[j - 1] < delta - 1e-12) --j;
    const std::size_t take = 1 + (j > 0 ? best[j] : 0);
    best[i + 1] = std::max(best[i], take);
  }
  return best[x.size()];
}

}  // namespace

TEST(Diagnostics, AbsoluteInstanceMatchesClosedForm) {
  const auto env = make_named_instance("absolute:n=101");
  const auto& pc = *env.default_policy_class();
  const double h = 0.1;
  const std::vector<double> eps{0.003125, 0.00625, 0.0125, 0.025};
  const auto rep = diagnose(env, pc, h, 1.0, eps, 10);
  ASSERT_EQ(rep.rows.size(), eps.size());
  for (const auto& row : rep.rows) {
    std::vector<double> near, near12, zero;
    for (int i = 0; i <= 100; ++i) {
      const double a = i / 100.0;
      if (a < h || a > 1.0 - h) continue;  // boundary balls are clipped; none are near-optimal here
      if (lambda_h(a, h) <= 0.05 + row.eps + 1e-12) near.push_back(a);
      if (lambda_h(a, h) <= 0.05 + 12.0 * row.eps + 1e-12) near12.push_back(a);
    }
    for (int i = 0; i <= 100; ++i)
      if (std::fabs(i / 100.0 - 0.5) <= 12.0 * row.eps + 1e-12) zero.push_back(i / 100.0);
    EXPECT_EQ(row.near_optimal, near.size()) << row.eps;
    EXPECT_DOUBLE_EQ(row.M_h, static_cast<double>(packing_dp(near, h))) << row.eps;
    EXPECT_DOUBLE_EQ(row.M_h_12, static_cast<double>(packing_dp(near12, h))) << row.eps;
    EXPECT_DOUBLE_EQ(row.M_0, static_cast<double>(packing_dp(zero, row.eps))) << row.eps;
  }
  // Below h/8 the near-optimal set is a single h-ball.
  EXPECT_DOUBLE_EQ(rep.rows[0].M_h, 1.0);
  EXPECT_DOUBLE_EQ(rep.rows[3].M_h, 2.0);
  EXPECT_NEAR(rep.benchmark, 0.05, 1e-12);
  EXPECT_NEAR(rep.alpha_unif, 4.0, 1e-9);
}

TEST(Diagnostics, NoLipschitzConstantLeavesZoomingUndefined) {
  const auto env = make_named_instance("discontinuous");
  const auto rep = diagnose(env, *env.default_policy_class(), 0.1, std::nullopt, {0.01, 0.02}, 10);
  EXPECT_TRUE(std::isnan(rep.rows[0].M_0));
  EXPECT_TRUE(std::isnan(rep.psi));
  EXPECT_TRUE(std::isnan(rep.zoom_exponent));
  EXPECT_GT(rep.theta, 0.0);
}

TEST(Diagnostics, RejectsBadGrids) {
  const auto env = make_named_instance("absolute");
  const auto& pc = *env.default_policy_class();
  EXPECT_THROW(diagnose(env, pc, 0.1, 1.0, {}, 10), InvalidInput);
  EXPECT_THROW(diagnose(env, pc, 0.1, 1.0, {1.5}, 10), InvalidInput);
  EXPECT_THROW(diagnose(env, pc, 0.0, 1.0, {0.1}, 10), InvalidInput);
}

TEST(Diagnostics, ExponentFitRecoversAPowerLaw) {
  std::vector<double> T, R;
  for (double t : {1e3, 1e4, 1e5, 1e6}) {
    T.push_back(t);
    R.push_back(3.0 * std::pow(t, 2.0 / 3.0));
  }
  const auto [slope, resid] = fit_exponent(T, R);
  EXPECT_NEAR(slope, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(resid, 0.0, 1e-12);
}
