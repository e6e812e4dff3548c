#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "smoothcb/harness.hpp"

using namespace smoothcb;

namespace {

ExperimentConfig small(Algorithm alg, const std::string& env, std::uint64_t T) {
  ExperimentConfig c;
  c.algorithm = alg;
  c.env = env;
  c.T = T;
  c.h = 0.1;
  c.seeds = 2;
  c.seed = 5;
  c.batch_constant = 1.0;
  c.n_ctx = 200;
  return c;
}

}  // namespace

TEST(Harness, AlgorithmNamesRoundTrip) {
  for (auto a : {Algorithm::Exp4, Algorithm::PeS, Algorithm::PeL, Algorithm::CorralUniformH, Algorithm::CorralLipschitz})
    EXPECT_EQ(parse_algorithm(algorithm_name(a)), a);
  EXPECT_THROW(parse_algorithm("ucb"), ConfigError);
}

TEST(Harness, RunsAreDeterministicAcrossThreadCounts) {
  for (auto alg : {Algorithm::Exp4, Algorithm::PeS, Algorithm::CorralUniformH}) {
    auto c = small(alg, "discontinuous", 400);
    c.threads = 1;
    const auto a = run_experiment(c);
    c.threads = 4;
    const auto b = run_experiment(c);
    ASSERT_EQ(a.traces.size(), 2u);
    for (std::size_t s = 0; s < 2; ++s) EXPECT_EQ(trace_csv(a.traces[s]), trace_csv(b.traces[s]));
    EXPECT_NE(trace_csv(a.traces[0]), trace_csv(a.traces[1]));
    EXPECT_EQ(a.traces[1].seed, 6u);
  }
}

TEST(Harness, ConstantLossHasZeroRegret) {
  for (auto alg : {Algorithm::Exp4, Algorithm::PeS, Algorithm::PeL, Algorithm::CorralUniformH}) {
    const auto r = run_experiment(small(alg, "constant:c=0.3", 300));
    for (const auto& t : r.traces) {
      EXPECT_NEAR(t.regret, 0.0, 1e-9);
      EXPECT_NEAR(t.cumloss, 90.0, 1e-9);
    }
  }
}

TEST(Harness, RegretAccounting) {
  const auto r = run_experiment(small(Algorithm::Exp4, "discontinuous", 500));
  for (const auto& t : r.traces) {
    double mean = 0.0, loss = 0.0;
    for (const auto& rec : t.rounds) {
      mean += rec.mean;
      loss += rec.loss;
      EXPECT_DOUBLE_EQ(rec.cumloss, loss);
    }
    EXPECT_NEAR(t.regret, mean - 500.0 * r.benchmark.value, 1e-9);
    EXPECT_NEAR(t.realized_regret, loss - 500.0 * r.benchmark.value, 1e-9);
  }
}

TEST(Harness, ValidatesConfigs) {
  auto c = small(Algorithm::Exp4, "discontinuous", 10);
  c.h = 0.0;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = small(Algorithm::PeL, "discontinuous", 10);
  EXPECT_THROW(run_experiment(c), ConfigError);  // no Lipschitz constant
  c = small(Algorithm::Exp4, "discontinuous", 10);
  c.beta = 2.0;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = small(Algorithm::Exp4, "discontinuous:noise=loud", 10);
  EXPECT_THROW(run_experiment(c), ConfigError);
}

TEST(Harness, CsvOutputs) {
  auto c = small(Algorithm::CorralUniformH, "discontinuous", 20);
  c.seeds = 1;
  const auto r = run_experiment(c);
  std::ostringstream trace, corral;
  write_trace_csv(trace, r.traces[0]);
  write_corral_csv(corral, r.traces[0]);
  EXPECT_EQ(trace.str().substr(0, trace.str().find('\n')), "t,action,loss,cumloss");
  std::size_t lines = 0;
  for (char ch : trace.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 21u);
  EXPECT_FALSE(corral.str().empty());
  EXPECT_EQ(std::strtod(format_double(0.1).c_str(), nullptr), 0.1);
  EXPECT_EQ(format_action(Action{0.5, 0.25}), "0.5;0.25");
}

TEST(Harness, UniformHSuiteSnapsAndCredits) {
  auto c = small(Algorithm::CorralUniformH, "discontinuous", 256);
  c.seeds = 1;
  const auto env = build_environment(c);
  const auto pc = build_policy_class(c, env);
  const auto r = run_experiment(c, env, pc);
  const auto rows = uniform_h_regret_suite(r.traces[0], env, *pc, 256, 1.0, {0.25, 0.3});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].snapped_h, 0.25);
  EXPECT_LE(rows[1].snapped_h, 0.3);
  EXPECT_DOUBLE_EQ(rows[1].regret_bound, rows[1].regret + 1.0);
}

TEST(Harness, ParallelForPropagatesExceptions) {
  EXPECT_THROW(parallel_for(8, 4,
                            [](std::size_t i) {
                              if (i == 5) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
