#include <gtest/gtest.h>

#include <cmath>

#include "smoothcb/estimator.hpp"
#include "smoothcb/random.hpp"

using namespace smoothcb;

TEST(ImportanceWeighting, WorkedExample) {
  const RectKernel k(ActionSpace::ring(), 0.1);
  const auto pc = PolicyClass::constant({Action(0.5)});
  EXPECT_NEAR(iw_estimate(k, pc, 0, IWSample{Context{}, Action(0.55), 0.6, 2.0}), 1.5, 1e-12);
  EXPECT_DOUBLE_EQ(iw_estimate(k, pc, 0, IWSample{Context{}, Action(0.7), 0.6, 2.0}), 0.0);
  EXPECT_THROW(iw_estimate(k, pc, 0, IWSample{Context{}, Action(0.5), 0.6, 0.0}), InvalidInput);
  EXPECT_THROW(iw_estimate(k, pc, 0, IWSample{Context{}, Action(0.5), 1.6, 1.0}), InvalidInput);
}

TEST(ImportanceWeighting, UnbiasedUnderUniformLogging) {
  // Uniform logging on the ring has density 1; the estimate averages to the
  // smoothed loss.
  const auto ring = ActionSpace::ring();
  const RectKernel k(ring, 0.1);
  const auto pc = PolicyClass::constant({Action(0.3)});
  const auto loss = LossFunction::piecewise(PiecewiseLinear::interpolate({0.0, 1.0}, {0.0, 1.0}));
  Rng rng(8);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const Action a = ring.sample_uniform(rng);
    s += iw_estimate(k, pc, 0, IWSample{Context{}, a, loss(a), 1.0});
  }
  EXPECT_NEAR(s / n, k.smoothed_loss(Action(0.3), loss), 0.01);
}

TEST(MedianOfMeans, BatchesAndMedian) {
  EXPECT_EQ(mom_batches(0.05), 15u);
  EXPECT_EQ(mom_batches(0.5), 5u);
  const std::vector<double> v{1, 1, 2, 2, 100, 100};
  EXPECT_DOUBLE_EQ(median_of_means_k(v, 3), 2.0);
  EXPECT_DOUBLE_EQ(median_of_means_k(std::vector<double>{1, 3}, 2), 1.0);
  EXPECT_THROW(median_of_means_k(v, 7), InvalidInput);
  EXPECT_THROW(median_of_means_k(v, 4), ContractViolation);
  EXPECT_THROW(mom_batches(1.0), InvalidInput);
}

TEST(MedianOfMeans, RobustToAFewOutliers) {
  Rng rng(12);
  std::vector<double> v(1000);
  for (double& x : v) x = rng.uniform();
  for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(i) * 97] = 1e6;
  EXPECT_NEAR(median_of_means_k(v, 10), 0.5, 0.05);
}
