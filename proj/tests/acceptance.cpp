// Acceptance suite: one line per criterion, "[PASS]" or "[FAIL]", with the
// measured quantities. Exit status is the number of failed criteria, or, with
// --expect-fail, zero exactly when the failing set equals the listed one.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smoothcb/smoothcb.hpp"

using namespace smoothcb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// 1. Importance-weighted estimates are unbiased for lambda_h(pi) under a
// fixed fully supported mixture.
Outcome estimator_unbiased() {
  const Environment env = make_named_instance("piecewise:pieces=8,seed=3");
  const double h = 0.1, mu = 0.3;
  Rng rng(101);
  std::vector<Action> acts;
  for (int i = 0; i < 15; ++i) acts.emplace_back(rng.uniform());
  const PolicyClass pc = PolicyClass::constant(acts);
  // Policies 10..14 form the logging mixture; 0..9 are evaluated.
  std::vector<double> Q(15, 0.0);
  for (int i = 10; i < 15; ++i) Q[static_cast<std::size_t>(i)] = 0.2;
  const RectKernel k(env.space(), h);
  const std::size_t n = 100000;
  std::vector<double> sum(10, 0.0), sq(10, 0.0);
  Rng env_rng(7), alg_rng(8);
  for (std::size_t s = 0; s < n; ++s) {
    const Round r = env.draw_round(env_rng);
    const Action a = sample_mixture(env.space(), pc, Q, h, mu, r.x, alg_rng);
    const IWSample smp{r.x, a, r.loss(a), mixture_density(env.space(), pc, Q, h, mu, r.x, a)};
    for (std::size_t i = 0; i < 10; ++i) {
      const double e = iw_estimate(k, pc, i, smp);
      sum[i] += e;
      sq[i] += e * e;
    }
  }
  const ContextPanel panel = env.reference_panel();
  double worst = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const double m = sum[i] / static_cast<double>(n);
    const double sd = std::sqrt(std::max(0.0, sq[i] / static_cast<double>(n) - m * m));
    const double z = std::fabs(m - env.smoothed_policy_loss(pc, i, h, panel)) / (sd / std::sqrt(static_cast<double>(n)));
    worst = std::max(worst, z);
  }
  return {worst <= 3.0, fmt("max |mean - lambda_h| / stderr = %.3f over 10 policies (limit 3)", worst)};
}

// 2. Second moment of the estimates under the program solution.
Outcome second_moment() {
  const Environment env = make_named_instance("piecewise:pieces=8,seed=5");
  const double h = 0.1, mu = 0.25;
  Rng rng(202);
  std::vector<Action> acts;
  for (int i = 0; i < 20; ++i) acts.emplace_back(rng.uniform());
  const PolicyClass pc = PolicyClass::constant(acts);
  const VersionSpace vs(pc.size());
  const ContextPanel panel = env.reference_panel();
  const VarianceSolution sol = solve_variance_program(env.space(), pc, vs, h, mu, panel);
  const RectKernel k(env.space(), h);
  const double bound = 1.2 * k.kappa() * sol.volume / (1.0 - mu);
  const std::size_t n = 100000;
  std::vector<double> sq(pc.size(), 0.0);
  Rng env_rng(9), alg_rng(10);
  for (std::size_t s = 0; s < n; ++s) {
    const Round r = env.draw_round(env_rng);
    const Action a = sample_mixture(env.space(), pc, sol.Q, h, mu, r.x, alg_rng);
    const IWSample smp{r.x, a, r.loss(a), mixture_density(env.space(), pc, sol.Q, h, mu, r.x, a)};
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const double e = iw_estimate(k, pc, i, smp);
      sq[i] += e * e;
    }
  }
  const double worst = *std::max_element(sq.begin(), sq.end()) / static_cast<double>(n);
  return {worst <= bound, fmt("max E[est^2] = %.4f, 1.2 kappa V/(1-mu) = %.4f", worst, bound)};
}

// 3. Solver value against the duality bound on random version spaces.
Outcome duality_certificate() {
  Rng rng(303);
  const ActionSpace ring = ActionSpace::ring();
  int bad = 0;
  double worst = 0.0;
  std::size_t max_iters = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t size = 1 + rng.index(30);
    std::vector<Action> acts;
    // Half the instances cluster actions so balls overlap heavily.
    const bool clustered = rep % 2 == 1;
    const double centre = rng.uniform();
    for (std::size_t i = 0; i < size; ++i) {
      double a = clustered ? centre + 0.15 * (rng.uniform() - 0.5) : rng.uniform();
      a -= std::floor(a);
      acts.emplace_back(a);
    }
    const PolicyClass pc = PolicyClass::constant(acts);
    const double h = rng.uniform(0.01, 0.3);
    const double mu = rng.uniform(0.01, 0.5);
    try {
      const auto sol = solve_variance_program(ring, pc, VersionSpace(size), h, mu, ContextPanel::single());
      const double ratio = sol.value / sol.target;
      worst = std::max(worst, ratio);
      max_iters = std::max(max_iters, sol.iterations);
      if (ratio > 1.001) ++bad;
    } catch (const SolverFailure& e) {
      worst = std::max(worst, e.achieved() / e.target());
      ++bad;
    }
  }
  return {bad == 0, fmt("%d of 50 above V/(1-mu)*1.001; worst value/(V/(1-mu)) = %.6f; max iterations %zu", bad, worst,
                        max_iters)};
}

// 4. Median-of-means deviation bound.
Outcome median_of_means_bound() {
  const double delta = 0.1;
  const std::size_t k = mom_batches(delta);
  const std::size_t n = 7000 / k * k;
  const double bound = 0.5 * std::sqrt(40.0 * std::log(std::exp(1.0) / delta) / static_cast<double>(n));
  Rng rng(404);
  std::vector<double> v(n);
  int fails = 0;
  for (int rep = 0; rep < 2000; ++rep) {
    for (double& x : v) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
    if (std::fabs(median_of_means(v, delta) - 0.5) > bound) ++fails;
  }
  const double freq = fails / 2000.0;
  return {freq <= 0.12, fmt("k = %zu, n = %zu, bound %.4f, failure frequency %.4f (limit 0.12)", k, n, bound, freq)};
}

PiecewiseLinear random_lipschitz(Rng& rng, double L) {
  const std::size_t knots = 2 + rng.index(12);
  std::vector<double> xs{0.0, 1.0};
  for (std::size_t i = 0; i < knots; ++i) xs.push_back(rng.uniform());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> ys{rng.uniform()};
  for (std::size_t i = 1; i < xs.size(); ++i)
    ys.push_back(std::clamp(ys.back() + rng.uniform(-L, L) * (xs[i] - xs[i - 1]), 0.0, 1.0));
  return PiecewiseLinear::interpolate(xs, ys);
}

// 5. |lambda_h(a) - lambda(a)| <= L h.
Outcome smooth_to_lipschitz() {
  Rng rng(505);
  const ActionSpace space = ActionSpace::interval();
  int bad = 0;
  double worst = -1e9;
  for (int rep = 0; rep < 10000; ++rep) {
    const double L = rng.uniform(0.1, 8.0);
    const LossFunction loss = LossFunction::piecewise(random_lipschitz(rng, L));
    const double h = rng.uniform(1e-3, 1.0);
    const Action a(rng.uniform());
    const double gap = std::fabs(RectKernel(space, h).smoothed_loss(a, loss) - loss(a)) - L * h;
    worst = std::max(worst, gap);
    if (gap > 1e-9) ++bad;
  }
  return {bad == 0, fmt("%d violations in 10^4 triples; max (|lambda_h - lambda| - L h) = %.3g", bad, worst)};
}

// 6. Snapped bandwidth: 1/hhat <= 2/h and sup_a |<K_hhat(a) - K_h(a), l>| <= 1/T.
Outcome discretization() {
  Rng rng(606);
  const ActionSpace space = ActionSpace::interval();
  int bad = 0;
  double worst = 0.0;
  for (std::uint64_t T : {16u, 256u, 4096u}) {
    const BandwidthGrid grid(1, T);
    for (int rep = 0; rep < 1000; ++rep) {
      const double h = std::exp(rng.uniform(std::log(1.0 / static_cast<double>(T)), 0.0));
      const double hh = grid.snap(h);
      const LossFunction loss = LossFunction::piecewise(random_lipschitz(rng, rng.uniform(0.5, 50.0)));
      const Action a(rng.uniform());
      const double diff =
          std::fabs(RectKernel(space, hh).smoothed_loss(a, loss) - RectKernel(space, h).smoothed_loss(a, loss));
      worst = std::max(worst, diff * static_cast<double>(T));
      if (1.0 / hh > 2.0 / h || diff > 1.0 / static_cast<double>(T) + 1e-12 || !grid.contains(hh)) ++bad;
    }
  }
  return {bad == 0, fmt("%d violations in 3000 draws; max T*|difference| = %.4f", bad, worst)};
}

ExperimentResult run(ExperimentConfig cfg) {
  cfg.keep_rounds = false;
  return run_experiment(cfg);
}

// 7. SmoothEXP4 regret against the worst-case bound, and its h scaling.
Outcome exp4_scaling() {
  std::vector<double> regret;
  std::string detail;
  bool ok = true;
  for (double h : {0.05, 0.1, 0.2}) {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::Exp4;
    cfg.env = "piecewise:pieces=8,seed=1,n=64";
    cfg.T = 20000;
    cfg.h = h;
    cfg.seeds = 20;
    const auto res = run(cfg);
    const double bound = std::sqrt(2.0 * 20000.0 * (1.0 / (2.0 * h)) * std::log(64.0));
    regret.push_back(res.mean_regret);
    ok = ok && res.mean_regret <= 3.0 * bound;
    detail += fmt("h=%.2f regret %.1f (3x bound %.1f); ", h, res.mean_regret, 3.0 * bound);
  }
  const double ratio = regret[0] / regret[2];
  ok = ok && ratio >= 1.3 && ratio <= 3.0;
  return {ok, detail + fmt("ratio(0.05/0.2) = %.3f (range [1.3, 3.0])", ratio)};
}

// 8. Hedge inequality on recorded trajectories.
Outcome hedge_inequality() {
  const Environment env = make_named_instance("piecewise:pieces=6,seed=11,n=16");
  auto pc = std::make_shared<const PolicyClass>(*env.default_policy_class());
  int bad = 0;
  double slack = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto xi = std::make_shared<const StochasticClass>(StochasticClass::product(env.space(), pc, {0.1}));
    Exp4State st(xi, 200);
    Rng env_rng(seed * 31), alg_rng(seed * 37);
    double lhs_mix = 0.0, rhs_sq = 0.0;
    std::vector<double> cum(xi->size(), 0.0);
    for (int t = 0; t < 200; ++t) {
      const Round r = env.draw_round(env_rng);
      const auto P = st.probabilities();
      const Exp4Step s = st.step(r.x, alg_rng);
      st.update(r.loss(s.action));
      const auto& est = st.last_estimates();
      for (std::size_t i = 0; i < est.size(); ++i) {
        lhs_mix += P[i] * est[i];
        rhs_sq += P[i] * est[i] * est[i];
        cum[i] += est[i];
      }
    }
    const double lhs = lhs_mix - *std::min_element(cum.begin(), cum.end());
    const double rhs = st.eta() / 2.0 * rhs_sq + std::log(static_cast<double>(xi->size())) / st.eta();
    slack = std::min(slack, rhs - lhs);
    if (lhs > rhs) ++bad;
  }
  return {bad == 0, fmt("%d violations over 10 trajectories; min (RHS - LHS) = %.4f", bad, slack)};
}

// 9. Policy elimination on the absolute-loss instance.
Outcome elimination_correctness() {
  const double h = 0.05;
  const std::uint64_t T = 1u << 16;
  const Environment env = make_named_instance("absolute:astar=0.5,n=100");
  auto pc = std::make_shared<const PolicyClass>(*env.default_policy_class());
  const ContextPanel panel = env.reference_panel();
  const auto lam = smoothed_losses(env, *pc, h, panel);
  const std::size_t best = static_cast<std::size_t>(std::min_element(lam.begin(), lam.end()) - lam.begin());
  int kept = 0, quality = 0;
  std::size_t epochs = 0, final_survivors = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    PolicyElimination pe(ElimConfig::smooth(h, T), env.space(), pc, panel);
    Rng root(seed);
    Rng env_rng = root.child(Stream::Environment), alg_rng = root.child(Stream::Algorithm);
    bool survived = true;
    for (std::uint64_t t = 0; t < T; ++t) {
      const Round r = env.draw_round(env_rng);
      const Action a = pe.act(r.x, alg_rng);
      pe.observe(r.loss(a));
      survived = survived && pe.version_space().contains(best);
    }
    pe.finish();
    kept += survived;
    const double r_final = pe.state().schedule.r;
    bool good = true;
    for (std::size_t i : pe.version_space().indices()) good = good && lam[i] <= lam[best] + 12.0 * r_final;
    quality += good;
    epochs = std::max(epochs, pe.epochs().size());
    final_survivors = std::max(final_survivors, pe.version_space().size());
  }
  std::vector<double> eps;
  for (double e = h / 64.0; e <= h / 2.0 + 1e-12; e *= 2.0) eps.push_back(e);
  const auto rep = diagnose(env, *pc, h, std::nullopt, eps);
  bool packing_ok = true;
  std::string packing;
  for (const auto& row : rep.rows) {
    packing_ok = packing_ok && row.M_h == 1.0;
    packing += fmt("M(%.4g)=%g ", row.eps, row.M_h);
  }
  const bool ok = kept >= 48 && quality == 50 && packing_ok;
  return {ok, fmt("optimal kept in %d/50 seeds, survivors near-optimal in %d/50, epochs <= %zu, final |Pi| <= %zu; ", kept,
                  quality, epochs, final_survivors) +
                  packing};
}

// Mean Lipschitz regret of pe-l over seeds at horizon T.
double pe_l_regret(const std::string& env, double L, std::uint64_t T, std::size_t seeds) {
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::PeL;
  cfg.env = env;
  cfg.L = L;
  cfg.T = T;
  cfg.seeds = seeds;
  return run(cfg).mean_regret;
}

// 10. Regret exponent of pe-l: benign absolute loss vs a horizon-tuned needle.
Outcome zooming_trend() {
  std::vector<double> Ts, benign, hard;
  for (int e = 12; e <= 16; ++e) {
    const auto T = std::uint64_t{1} << e;
    Ts.push_back(static_cast<double>(T));
    benign.push_back(pe_l_regret("absolute:astar=0.5,n=100", 1.0, T, 10));
    // Needle with the gap tuned to the horizon: R = T^(2/3) makes Delta ~ T^(-1/3).
    const double R = std::pow(static_cast<double>(T), 2.0 / 3.0);
    hard.push_back(pe_l_regret(fmt("needle_L:d=1,L=1,R=%.17g,i=random,seed=%d", R, e), 1.0, T, 10));
  }
  const double zb = fit_exponent(Ts, benign).first;
  const double zh = fit_exponent(Ts, hard).first;
  return {zb <= 0.62 && zh >= 0.6,
          fmt("benign exponent %.3f (limit 0.62), hard exponent %.3f (limit 0.6); benign regret at 2^16 = %.1f", zb, zh,
              benign.back())};
}

// 11. Corral over a single kernel replays SmoothEXP4 exactly.
Outcome corral_degeneracy() {
  ExperimentConfig cfg;
  cfg.env = "discontinuous:ap=0.7";
  cfg.T = 5000;
  cfg.h = 0.1;
  cfg.seed = 77;
  cfg.algorithm = Algorithm::Exp4;
  const auto a = run_experiment(cfg);
  cfg.algorithm = Algorithm::CorralUniformH;
  cfg.bandwidths = {0.1};
  const auto b = run_experiment(cfg);
  const bool same = trace_csv(a.traces[0]) == trace_csv(b.traces[0]);
  return {same, fmt("CSV of %zu rounds %s", a.traces[0].rounds.size(), same ? "identical" : "differs")};
}

// 12. Uniformly smoothed Corral vs SmoothEXP4 tuned to h on the needle family.
Outcome price_of_adaptivity() {
  const double h = 1.0 / 32.0;
  const std::uint64_t T = 1u << 14;
  // The construction requires R <= sqrt(T) / (20 (8h)^d); the cap is used.
  const double R = std::sqrt(static_cast<double>(T)) / (20.0 * 8.0 * h);
  const double scale = std::sqrt(static_cast<double>(T) / h);
  int wins = 0;
  std::vector<double> rc, re, r0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ExperimentConfig cfg;
    cfg.T = T;
    cfg.h = h;
    cfg.beta = 1.0;
    cfg.seed = seed;
    cfg.keep_rounds = false;
    cfg.env = fmt("needle_h:d=1,h=%.17g,R=%.17g,i=random,seed=%d", h, R, static_cast<int>(seed));
    cfg.algorithm = Algorithm::CorralUniformH;
    const double corral = run_experiment(cfg).mean_regret / scale;
    cfg.algorithm = Algorithm::Exp4;
    const double exp4 = run_experiment(cfg).mean_regret / scale;
    cfg.env = fmt("needle_h:d=1,h=%.17g,R=%.17g,i=0", h, R);
    cfg.algorithm = Algorithm::CorralUniformH;
    r0.push_back(run_experiment(cfg).mean_regret / scale);
    rc.push_back(corral);
    re.push_back(exp4);
    wins += corral > exp4;
  }
  return {wins >= 16, fmt("corral ratio > exp4 ratio in %d/20 seeds (need 16); mean ratios corral %.4f, exp4 %.4f, "
                          "corral on phi_0 %.4f",
                          wins, mean_of(rc), mean_of(re), mean_of(r0))};
}

// 13. Discontinuous example: benchmark closed form and concentration near 1/2.
Outcome discontinuous_example() {
  const double h = 0.1;
  ExperimentConfig cfg;
  cfg.algorithm = Algorithm::Exp4;
  cfg.env = "discontinuous:ap=0.7";
  cfg.T = 20000;
  cfg.h = h;
  cfg.seeds = 20;
  const auto res = run_experiment(cfg);
  std::size_t near = 0, total = 0;
  const ActionSpace ring = ActionSpace::ring();
  for (const auto& tr : res.traces)
    for (std::size_t t = tr.rounds.size() * 3 / 4; t < tr.rounds.size(); ++t) {
      ++total;
      near += ring.distance(tr.rounds[t].action, Action(0.5)) <= 2.0 * h;
    }
  const double frac = static_cast<double>(near) / static_cast<double>(total);
  const double err = std::fabs(res.benchmark.value - (0.25 + 0.75 * h));
  return {frac >= 0.6 && err <= 1e-9,
          fmt("final-quarter fraction within 2h of 1/2 = %.4f (limit 0.6); |benchmark - 0.325| = %.2g", frac, err)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smoothcb acceptance suite"};
  std::vector<std::size_t> expected;
  std::string report;
  app.add_option("--expect-fail", expected, "criteria known to fail; the run passes iff exactly these fail")
      ->delimiter(',');
  app.add_option("--report", report, "also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"estimator unbiasedness", estimator_unbiased},
      {"second-moment bound", second_moment},
      {"duality certificate", duality_certificate},
      {"median-of-means", median_of_means_bound},
      {"smooth-to-Lipschitz", smooth_to_lipschitz},
      {"discretization", discretization},
      {"SmoothEXP4 scaling", exp4_scaling},
      {"hedge inequality", hedge_inequality},
      {"policy elimination correctness", elimination_correctness},
      {"zooming trend", zooming_trend},
      {"corral degeneracy", corral_degeneracy},
      {"price of adaptivity", price_of_adaptivity},
      {"discontinuous example", discontinuous_example},
  };
  std::ofstream out;
  if (!report.empty()) out.open(report);
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (out) out << line << std::flush;
  };
  std::set<std::size_t> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) failed.insert(i + 1);
    emit(fmt("[%s] %2zu %-32s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
             o.detail.c_str(), secs));
  }
  emit(fmt("%zu of %zu criteria failed\n", failed.size(), criteria.size()));
  if (app.count("--expect-fail") == 0) return static_cast<int>(failed.size());
  const std::set<std::size_t> want(expected.begin(), expected.end());
  std::string known;
  for (std::size_t k : want) known += (known.empty() ? "" : ",") + std::to_string(k);
  if (failed == want) {
    emit("failing set matches the documented known failures {" + known + "}\n");
    return 0;
  }
  emit("failing set differs from the documented known failures {" + known + "}\n");
  return 1;
}
