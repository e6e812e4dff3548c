#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "smoothcb/elimination.hpp"
#include "smoothcb/environment.hpp"

using namespace smoothcb;

namespace {

// E_x int K_i / q by a fine midpoint rule on the ring, as an independent
// evaluation of the variance objective for constant policies.
double objective_bruteforce(const std::vector<double>& centers, const std::vector<double>& Q, double h, double mu,
                            std::size_t i, int n = 20000) {
  const auto ring = ActionSpace::ring();
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const Action a((k + 0.5) / n);
    double q = mu;
    for (std::size_t j = 0; j < centers.size(); ++j)
      if (ring.distance(a, Action(centers[j])) <= h) q += (1.0 - mu) * Q[j] / (2.0 * h);
    if (ring.distance(a, Action(centers[i])) <= h) s += 1.0 / (2.0 * h) / q;
  }
  return s / n;
}

}  // namespace

TEST(Schedule, EpochParameters) {
  const auto s = ElimConfig::smooth(0.1, 1024);
  EXPECT_DOUBLE_EQ(epoch_schedule(s, 1).r, 0.5);
  EXPECT_DOUBLE_EQ(epoch_schedule(s, 3).mu, 0.125);
  EXPECT_DOUBLE_EQ(epoch_schedule(s, 3).h, 0.1);
  const auto l = ElimConfig::lipschitz(2.0, 1024);
  EXPECT_DOUBLE_EQ(epoch_schedule(l, 2).h, 0.25);
  EXPECT_DOUBLE_EQ(epoch_schedule(l, 2).r, 0.5);
  EXPECT_DOUBLE_EQ(epoch_schedule(l, 2).mu, 0.5);
  EXPECT_EQ(elimination_batches(1024, 100), 5u * static_cast<std::size_t>(std::ceil(std::log(1024.0 * 100 * 10))));
}

TEST(VarianceProgram, SinglePolicyClosedForm) {
  const auto pc = PolicyClass::constant({Action(0.5)});
  const auto sol =
      solve_variance_program(ActionSpace::ring(), pc, VersionSpace(1), 0.1, 0.5, ContextPanel::single());
  EXPECT_NEAR(sol.value, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(sol.target, 0.4, 1e-12);
  EXPECT_LE(sol.value, sol.target);
}

TEST(VarianceProgram, MeetsTheBoundAndMatchesBruteForce) {
  const std::vector<double> centers{0.1, 0.15, 0.18, 0.6};
  std::vector<Action> acts;
  for (double c : centers) acts.emplace_back(c);
  const auto pc = PolicyClass::constant(acts);
  const double h = 0.05, mu = 0.2;
  const auto sol = solve_variance_program(ActionSpace::ring(), pc, VersionSpace(4), h, mu, ContextPanel::single(), 1e-4);
  EXPECT_LE(sol.value, sol.target * (1.0 + 1e-4));
  double total = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    total += sol.Q[i];
    worst = std::max(worst, objective_bruteforce(centers, sol.Q, h, mu, i));
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(worst, sol.value, 1e-3);
  // V is the union length: [0.05, 0.23] and [0.55, 0.65].
  EXPECT_NEAR(sol.volume, 0.28, 1e-12);
}

TEST(VarianceProgram, IgnoresEliminatedPolicies) {
  const auto pc = PolicyClass::constant({Action(0.1), Action(0.5), Action(0.9)});
  const VersionSpace sub(3, {0, 2});
  const auto sol = solve_variance_program(ActionSpace::ring(), pc, sub, 0.1, 0.25, ContextPanel::single());
  EXPECT_DOUBLE_EQ(sol.Q[1], 0.0);
  EXPECT_NEAR(sol.volume, 0.4, 1e-12);
}

TEST(Mixture, DensityIntegratesToOne) {
  const auto pc = PolicyClass::constant({Action(0.02), Action(0.5)});
  const std::vector<double> Q{0.3, 0.7};
  const int n = 100000;
  double s = 0.0;
  for (int k = 0; k < n; ++k)
    s += mixture_density(ActionSpace::ring(), pc, Q, 0.1, 0.2, Context{}, Action((k + 0.5) / n));
  EXPECT_NEAR(s / n, 1.0, 1e-3);
}

TEST(Elimination, EliminateKeepsWithinThreeR) {
  const VersionSpace all(4);
  const std::vector<double> est{0.2, 0.5, 0.81, 0.79};
  const auto next = eliminate(all, est, 0.2, 2);
  EXPECT_EQ(next.indices(), (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(next.epoch(), 2u);
}

namespace {

struct GapRun {
  std::vector<EpochLog> epochs;
  VersionSpace survivors{1};
};

// Deterministic step loss: 0.1 on [0, 1/2), 0.9 on [1/2, 1).
GapRun run_gap_instance(std::uint64_t T, std::uint64_t seed) {
  const auto loss = LossFunction::piecewise(PiecewiseLinear::step({0.0, 0.5, 1.0}, {0.1, 0.9}));
  const auto pc = std::make_shared<const PolicyClass>(
      PolicyClass::constant({Action(0.25), Action(0.75), Action(0.3), Action(0.7)}));
  ElimConfig cfg = ElimConfig::smooth(0.1, T);
  cfg.batch_constant = 0.05;
  cfg.batches = 5;
  PolicyElimination pe(cfg, ActionSpace::ring(), pc, ContextPanel::single());
  Rng rng(seed);
  VersionSpace prev = pe.version_space();
  for (std::uint64_t t = 0; t < T; ++t) {
    const Action a = pe.act(Context{}, rng);
    pe.observe(loss(a));
    EXPECT_TRUE(pe.version_space().subset_of(prev));
    prev = pe.version_space();
  }
  pe.finish();
  return {pe.epochs(), pe.version_space()};
}

}  // namespace

TEST(Elimination, RemovesPoliciesOnceTheGapExceedsTenR) {
  const std::uint64_t T = 20000;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const GapRun r = run_gap_instance(T, seed);
    ASSERT_GE(r.epochs.size(), 5u);
    EXPECT_LE(static_cast<double>(r.epochs.size()), std::log2(static_cast<double>(T)) + 1.0);
    // r_4 = 1/16 and the smoothed gap is 0.8 > 10 r_4.
    EXPECT_EQ(r.survivors.indices(), (std::vector<std::size_t>{0, 2}));
    for (const auto& e : r.epochs) EXPECT_LE(e.solver_value, e.V / (1.0 - e.mu) * (1.0 + 1e-3));
  }
}

TEST(Elimination, ProtocolErrors) {
  const auto pc = std::make_shared<const PolicyClass>(PolicyClass::constant({Action(0.5)}));
  PolicyElimination pe(ElimConfig::smooth(0.1, 100), ActionSpace::ring(), pc, ContextPanel::single());
  Rng rng(1);
  EXPECT_THROW(pe.observe(0.5), StateError);
  pe.act(Context{}, rng);
  EXPECT_THROW(pe.act(Context{}, rng), StateError);
  EXPECT_THROW(PolicyElimination(ElimConfig::lipschitz(0.5, 100), ActionSpace::ring(), pc, ContextPanel::single()),
               InvalidInput);
}
