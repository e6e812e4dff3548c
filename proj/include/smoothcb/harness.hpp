#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "corral.hpp"
#include "elimination.hpp"
#include "environment.hpp"
#include "errors.hpp"
#include "exp4.hpp"
#include "kernel.hpp"
#include "policy.hpp"
#include "random.hpp"

namespace smoothcb {

enum class Algorithm { Exp4, PeS, PeL, CorralUniformH, CorralLipschitz };

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "exp4") return Algorithm::Exp4;
  if (s == "pe-s") return Algorithm::PeS;
  if (s == "pe-l") return Algorithm::PeL;
  if (s == "corral-uniform-h") return Algorithm::CorralUniformH;
  if (s == "corral-lipschitz") return Algorithm::CorralLipschitz;
  throw ConfigError("unknown algorithm '" + s + "'");
}

inline std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Exp4: return "exp4";
    case Algorithm::PeS: return "pe-s";
    case Algorithm::PeL: return "pe-l";
    case Algorithm::CorralUniformH: return "corral-uniform-h";
    case Algorithm::CorralLipschitz: return "corral-lipschitz";
  }
  return "";
}

// Lipschitz variants compete with the unsmoothed class.
inline bool lipschitz_benchmark(Algorithm a) { return a == Algorithm::PeL || a == Algorithm::CorralLipschitz; }

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::Exp4;
  std::string env = "discontinuous";
  std::uint64_t T = 1000;
  double h = 0.1;
  double L = 1.0;
  double beta = 1.0;
  std::size_t seeds = 1;
  std::uint64_t seed = 1;  // seed of run s is seed + s
  std::optional<double> eta;
  std::vector<double> bandwidths;  // explicit Corral kernel family
  std::size_t per_octave = 2;
  std::size_t n_ctx = 2000;
  double batch_constant = 320.0;
  std::optional<std::size_t> batches;
  std::string noise;          // overrides the instance's noise model when set
  std::size_t policies = 0;   // constant-grid class of this size instead of the default
  std::size_t threads = 0;    // 0: hardware concurrency
  bool keep_rounds = true;
};

struct RoundRecord {
  std::uint64_t t = 0;
  Action action;
  double loss = 0.0;
  double cumloss = 0.0;
  double mean = 0.0;  // lambda(a_t | x_t)
  std::size_t sub = 0;
  double sub_prob = 1.0;
};

struct RegretTrace {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
  double benchmark = 0.0;
  std::size_t benchmark_policy = 0;
  double benchmark_h = 0.0;
  double cumloss = 0.0;
  double cummean = 0.0;
  double regret = 0.0;           // sum lambda(a_t|x_t) - T bench
  double realized_regret = 0.0;  // sum l_t(a_t) - T bench
  std::vector<EpochLog> epochs;
  std::vector<std::size_t> restarts;  // Corral: per sub
  double wall_seconds = 0.0;
};

// Per-step learner interface used by the harness.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual Action act(const Context& x, Rng& rng) = 0;
  virtual void observe(double loss) = 0;
  virtual void finish(RegretTrace&) {}
  virtual std::size_t last_sub() const { return 0; }
  virtual double last_sub_prob() const { return 1.0; }
};

class Exp4Learner : public Learner {
 public:
  Exp4Learner(std::shared_ptr<const StochasticClass> xi, std::uint64_t T, std::optional<double> eta)
      : state_(std::move(xi), T, eta) {}
  Action act(const Context& x, Rng& rng) override { return state_.step(x, rng).action; }
  void observe(double loss) override { state_.update(loss); }
  const Exp4State& state() const noexcept { return state_; }

 private:
  Exp4State state_;
};

class EliminationLearner : public Learner {
 public:
  explicit EliminationLearner(PolicyElimination pe) : pe_(std::move(pe)) {}
  Action act(const Context& x, Rng& rng) override { return pe_.act(x, rng); }
  void observe(double loss) override { pe_.observe(loss); }
  void finish(RegretTrace& tr) override {
    pe_.finish();
    tr.epochs = pe_.epochs();
  }
  const PolicyElimination& algorithm() const noexcept { return pe_; }

 private:
  PolicyElimination pe_;
};

class CorralLearner : public Learner {
 public:
  explicit CorralLearner(CorralMaster m) : m_(std::move(m)) {}
  Action act(const Context& x, Rng& rng) override { return m_.act(x, rng); }
  void observe(double loss) override { m_.observe(loss); }
  void finish(RegretTrace& tr) override { tr.restarts = m_.restarts(); }
  std::size_t last_sub() const override { return m_.last().sub; }
  double last_sub_prob() const override { return m_.last().prob; }
  const CorralMaster& master() const noexcept { return m_; }

 private:
  CorralMaster m_;
};

// Instance with config overrides applied.
inline Environment build_environment(const ExperimentConfig& cfg) {
  auto [name, params] = parse_spec(cfg.env);
  if (!cfg.noise.empty() && !params.has("noise")) params.set("noise", cfg.noise);
  return make_named_instance(name, params);
}

inline std::shared_ptr<const PolicyClass> build_policy_class(const ExperimentConfig& cfg, const Environment& env) {
  if (cfg.policies > 0) return std::make_shared<const PolicyClass>(constant_grid_class(env.space(), cfg.policies));
  if (!env.default_policy_class()) throw ConfigError("environment has no default policy class");
  return std::make_shared<const PolicyClass>(*env.default_policy_class());
}

// Bandwidth used by the benchmark: 0 for Lipschitz variants, the configured h
// otherwise.
inline double benchmark_bandwidth(const ExperimentConfig& cfg) { return lipschitz_benchmark(cfg.algorithm) ? 0.0 : cfg.h; }

inline void validate(const ExperimentConfig& cfg, const Environment& env) {
  if (cfg.T < 1) throw ConfigError("T must be positive");
  if (cfg.seeds < 1) throw ConfigError("need at least one seed");
  if (!lipschitz_benchmark(cfg.algorithm) && !(cfg.h > 0.0 && cfg.h <= 1.0)) throw ConfigError("h must lie in (0,1]");
  if (lipschitz_benchmark(cfg.algorithm) && !env.lipschitz())
    throw ConfigError("Lipschitz regret requested on an environment without a Lipschitz constant");
  if (cfg.algorithm == Algorithm::PeL && !(cfg.L >= 1.0)) throw ConfigError("L must be >= 1");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
}

inline std::unique_ptr<Learner> make_learner(const ExperimentConfig& cfg, const Environment& env,
                                             std::shared_ptr<const PolicyClass> pc, Rng& panel_rng) {
  switch (cfg.algorithm) {
    case Algorithm::Exp4: {
      auto xi = std::make_shared<const StochasticClass>(StochasticClass::product(env.space(), pc, {cfg.h}));
      return std::make_unique<Exp4Learner>(std::move(xi), cfg.T, cfg.eta);
    }
    case Algorithm::PeS:
    case Algorithm::PeL: {
      ElimConfig ec = cfg.algorithm == Algorithm::PeS ? ElimConfig::smooth(cfg.h, cfg.T) : ElimConfig::lipschitz(cfg.L, cfg.T);
      ec.n_ctx = cfg.n_ctx;
      ec.batch_constant = cfg.batch_constant;
      ec.batches = cfg.batches;
      ContextPanel panel = env.panel(panel_rng, cfg.n_ctx);
      return std::make_unique<EliminationLearner>(PolicyElimination(ec, env.space(), std::move(pc), std::move(panel)));
    }
    case Algorithm::CorralUniformH:
    case Algorithm::CorralLipschitz: {
      CorralConfig cc;
      cc.mode = cfg.algorithm == Algorithm::CorralUniformH ? CorralMode::UniformH : CorralMode::LipschitzAdaptive;
      cc.T = cfg.T;
      cc.beta = cfg.beta;
      cc.eta = cfg.eta;
      cc.bandwidths = cfg.bandwidths;
      cc.per_octave = cfg.per_octave;
      return std::make_unique<CorralLearner>(CorralMaster(env.space(), std::move(pc), cc));
    }
  }
  throw ConfigError("unknown algorithm");
}

// One seeded run. Randomness: environment, algorithm and context-panel draws
// come from separate child streams of the run seed.
inline RegretTrace run_single(const ExperimentConfig& cfg, const Environment& env,
                              const std::shared_ptr<const PolicyClass>& pc, const Benchmark& bench, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng root(seed);
  Rng env_rng = root.child(Stream::Environment);
  Rng alg_rng = root.child(Stream::Algorithm);
  Rng panel_rng = root.child(Stream::Panel);
  auto learner = make_learner(cfg, env, pc, panel_rng);

  RegretTrace tr;
  tr.seed = seed;
  tr.benchmark = bench.value;
  tr.benchmark_policy = bench.policy;
  tr.benchmark_h = benchmark_bandwidth(cfg);
  if (cfg.keep_rounds) tr.rounds.reserve(cfg.T);
  for (std::uint64_t t = 0; t < cfg.T; ++t) {
    const Round r = env.draw_round(env_rng);
    const Action a = learner->act(r.x, alg_rng);
    const double loss = r.loss(a);
    const double mean = r.loss.mean(a);
    learner->observe(loss);
    tr.cumloss += loss;
    tr.cummean += mean;
    if (cfg.keep_rounds)
      tr.rounds.push_back(RoundRecord{t + 1, a, loss, tr.cumloss, mean, learner->last_sub(), learner->last_sub_prob()});
  }
  learner->finish(tr);
  const double T = static_cast<double>(cfg.T);
  tr.regret = tr.cummean - T * bench.value;
  tr.realized_regret = tr.cumloss - T * bench.value;
  tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return tr;
}

struct ExperimentResult {
  ExperimentConfig config;
  Benchmark benchmark;
  double benchmark_h = 0.0;
  std::vector<RegretTrace> traces;
  double mean_regret = 0.0;
  double std_regret = 0.0;
  double wall_seconds = 0.0;
};

// Calls fn(i) for i in [0, n) on a worker pool; exceptions are rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Environment& env,
                                       std::shared_ptr<const PolicyClass> pc) {
  validate(cfg, env);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.config = cfg;
  res.benchmark_h = benchmark_bandwidth(cfg);
  res.benchmark = smoothed_benchmark(env, *pc, res.benchmark_h, env.reference_panel(cfg.n_ctx));
  res.traces.resize(cfg.seeds);
  parallel_for(cfg.seeds, cfg.threads,
               [&](std::size_t s) { res.traces[s] = run_single(cfg, env, pc, res.benchmark, cfg.seed + s); });
  double sum = 0.0, sq = 0.0;
  for (const auto& t : res.traces) sum += t.regret;
  const double n = static_cast<double>(res.traces.size());
  res.mean_regret = sum / n;
  for (const auto& t : res.traces) sq += (t.regret - res.mean_regret) * (t.regret - res.mean_regret);
  res.std_regret = res.traces.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Environment env = build_environment(cfg);
  return run_experiment(cfg, env, build_policy_class(cfg, env));
}

// Regret of a finished run against the smoothed benchmark at each requested
// bandwidth, snapped down to the discretized set (which costs at most 1).
struct UniformHRow {
  double h = 0.0;
  double snapped_h = 0.0;
  double benchmark = 0.0;
  double regret = 0.0;          // against the snapped benchmark
  double regret_bound = 0.0;    // regret + 1 discretization credit
  double rate = 0.0;            // T^(1/(1+beta)) h^(-d beta)
};

inline std::vector<UniformHRow> uniform_h_regret_suite(const RegretTrace& trace, const Environment& env,
                                                       const PolicyClass& pc, std::uint64_t T, double beta,
                                                       const std::vector<double>& hs, std::size_t n_ctx = 2000) {
  const BandwidthGrid grid(env.space().dim(), T);
  const ContextPanel panel = env.reference_panel(n_ctx);
  std::vector<UniformHRow> rows;
  for (double h : hs) {
    UniformHRow r;
    r.h = h;
    r.snapped_h = grid.snap(h);
    r.benchmark = smoothed_benchmark(env, pc, r.snapped_h, panel).value;
    r.regret = trace.cummean - static_cast<double>(T) * r.benchmark;
    r.regret_bound = r.regret + 1.0;
    r.rate = std::pow(static_cast<double>(T), 1.0 / (1.0 + beta)) *
             std::pow(h, -static_cast<double>(env.space().dim()) * beta);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_action(const Action& a) {
  std::string s;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (i) s += ';';
    s += format_double(a[i]);
  }
  return s;
}

inline void write_trace_csv(std::ostream& out, const RegretTrace& tr) {
  out << "t,action,loss,cumloss\n";
  for (const auto& r : tr.rounds)
    out << r.t << ',' << format_action(r.action) << ',' << format_double(r.loss) << ',' << format_double(r.cumloss)
        << '\n';
}

inline void write_corral_csv(std::ostream& out, const RegretTrace& tr) {
  out << "t,sub,prob,action,loss\n";
  for (const auto& r : tr.rounds)
    out << r.t << ',' << r.sub << ',' << format_double(r.sub_prob) << ',' << format_action(r.action) << ','
        << format_double(r.loss) << '\n';
}

inline void write_epochs_csv(std::ostream& out, const RegretTrace& tr) {
  out << "m,start,h,r,mu,V,survivors,n_tilde,n,solver_value,solver_iters,eliminated,truncated\n";
  for (const auto& e : tr.epochs)
    out << e.m << ',' << e.start << ',' << format_double(e.h) << ',' << format_double(e.r) << ',' << format_double(e.mu)
        << ',' << format_double(e.V) << ',' << e.survivors << ',' << format_double(e.n_tilde) << ','
        << format_double(e.n) << ',' << format_double(e.solver_value) << ',' << e.solver_iters << ','
        << e.eliminated << ',' << (e.truncated ? 1 : 0) << '\n';
}

inline std::string trace_csv(const RegretTrace& tr) {
  std::ostringstream s;
  write_trace_csv(s, tr);
  return s.str();
}

}  // namespace smoothcb
