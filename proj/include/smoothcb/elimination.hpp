#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "action_space.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "kernel.hpp"
#include "policy.hpp"
#include "random.hpp"

namespace smoothcb {

struct ElimConfig {
  enum class Variant { SmoothS, LipschitzL };
  Variant variant = Variant::SmoothS;
  double h = 0.1;  // SmoothS
  double L = 1.0;  // LipschitzL
  std::uint64_t T = 1;
  double tol = 1e-3;
  std::size_t iter_cap = 5000;
  std::size_t n_ctx = 2000;
  double batch_constant = 320.0;
  std::size_t mc_draws = 10000;  // per context, spaces of dimension >= 2
  std::optional<std::size_t> batches;  // overrides delta_T

  static ElimConfig smooth(double h, std::uint64_t T) {
    ElimConfig c;
    c.variant = Variant::SmoothS;
    c.h = h;
    c.T = T;
    return c;
  }
  static ElimConfig lipschitz(double L, std::uint64_t T) {
    ElimConfig c;
    c.variant = Variant::LipschitzL;
    c.L = L;
    c.T = T;
    return c;
  }
};

// delta_T = 5 ceil(ln(T |Pi| log2 T)).
inline std::size_t elimination_batches(std::uint64_t T, std::size_t policies) {
  if (T < 2) throw InvalidInput("elimination: T must be at least 2");
  if (policies == 0) throw InvalidInput("elimination: empty policy class");
  const double arg = static_cast<double>(T) * static_cast<double>(policies) * std::log2(static_cast<double>(T));
  return 5 * static_cast<std::size_t>(std::max(1.0, std::ceil(std::log(arg))));
}

// Schedule for epoch m >= 1.
struct EpochSchedule {
  double h = 0.0;
  double r = 0.0;
  double mu = 0.0;
};

inline EpochSchedule epoch_schedule(const ElimConfig& cfg, std::size_t m) {
  const double two_m = std::ldexp(1.0, -static_cast<int>(m));
  EpochSchedule s;
  if (cfg.variant == ElimConfig::Variant::SmoothS) {
    s.h = cfg.h;
    s.r = two_m;
  } else {
    s.h = two_m;
    s.r = cfg.L * two_m;
  }
  s.mu = std::min(0.5, s.r);
  return s;
}

// ---------------------------------------------------------------------------
// Variance program
//
//   min_Q max_pi E_x int K_h(pi(x))(a) / q(a|x) da,
//   q(a|x) = mu + (1 - mu) sum_pi Q(pi) K_h(pi(x))(a).
//
// The inner objective f_pi(Q) is the partial derivative of the concave
// potential Phi(Q) = E_x int ln q(a|x) da / (1 - mu), so the program's value
// is attained at the maximizer of Phi, where f_pi <= sum_pi' Q f_pi' on the
// whole class. Phi is maximized by the multiplicative update
// Q(pi) <- Q(pi) * E_x int X_pi / q with X_pi = mu + (1 - mu) K_pi, which
// keeps Q on the simplex and never decreases Phi.

struct VarianceSolution {
  std::vector<double> Q;  // indexed by policy; zero outside the version space
  double value = 0.0;     // max over the version space of f_pi at Q
  double volume = 0.0;    // V(Pi', h)
  double target = 0.0;    // V / (1 - mu)
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

// One context of the program on a one-dimensional space: elementary cells
// between all ball endpoints (measure coordinates) and each member's cell
// ranges.
struct ExactContext {
  std::vector<double> cell_len;
  struct Range {
    std::size_t lo, hi;
  };
  std::vector<std::array<Range, 2>> ranges;
  std::vector<std::size_t> nranges;
  std::vector<double> volume;  // nu(B(pi(x), h)) per member
  double union_volume = 0.0;
};

inline ExactContext build_exact_context(const ActionSpace& space, const std::vector<Action>& centers, double h) {
  ExactContext c;
  std::vector<double> ends{0.0, 1.0};
  std::vector<Segments> segs;
  for (const Action& a : centers) {
    segs.push_back(space.segments(a, h));
    for (const Interval& iv : segs.back()) {
      ends.push_back(iv.lo);
      ends.push_back(iv.hi);
    }
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  const std::size_t cells = ends.size() - 1;
  c.cell_len.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) c.cell_len[i] = ends[i + 1] - ends[i];
  std::vector<char> covered(cells, 0);
  auto pos = [&](double x) {
    return static_cast<std::size_t>(std::lower_bound(ends.begin(), ends.end(), x) - ends.begin());
  };
  for (const Segments& s : segs) {
    std::array<ExactContext::Range, 2> r{};
    std::size_t k = 0;
    double v = 0.0;
    for (const Interval& iv : s) {
      if (iv.length() <= 0.0) continue;
      r[k] = {pos(iv.lo), pos(iv.hi)};
      for (std::size_t i = r[k].lo; i < r[k].hi; ++i) covered[i] = 1;
      v += iv.length();
      ++k;
    }
    c.ranges.push_back(r);
    c.nranges.push_back(k);
    c.volume.push_back(v);
  }
  for (std::size_t i = 0; i < cells; ++i)
    if (covered[i]) c.union_volume += c.cell_len[i];
  return c;
}

// Adds w * f_j(Q) to f[j] for every member, exactly.
inline void accumulate_exact(const ExactContext& c, const std::vector<double>& Q, double mu, double w,
                             std::vector<double>& f, std::vector<double>& scratch) {
  const std::size_t cells = c.cell_len.size();
  scratch.assign(cells + 1, 0.0);
  for (std::size_t j = 0; j < Q.size(); ++j) {
    if (c.volume[j] <= 0.0) continue;
    const double add = Q[j] / c.volume[j];
    for (std::size_t k = 0; k < c.nranges[j]; ++k) {
      scratch[c.ranges[j][k].lo] += add;
      scratch[c.ranges[j][k].hi] -= add;
    }
  }
  // scratch becomes the prefix sum of len / q.
  double cover = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    cover += scratch[i];
    scratch[i] = acc;
    acc += c.cell_len[i] / (mu + (1.0 - mu) * std::max(0.0, cover));
  }
  scratch[cells] = acc;
  for (std::size_t j = 0; j < Q.size(); ++j) {
    if (c.volume[j] <= 0.0) continue;
    double s = 0.0;
    for (std::size_t k = 0; k < c.nranges[j]; ++k) s += scratch[c.ranges[j][k].hi] - scratch[c.ranges[j][k].lo];
    f[j] += w * s / c.volume[j];
  }
}

// Monte Carlo context for dimension >= 2: each member gets fixed draws from
// its own ball; for every draw the covering members and their densities are
// stored sparsely.
struct SampledContext {
  struct Draw {
    std::size_t owner;
    std::vector<std::pair<std::size_t, double>> cover;
  };
  std::vector<Draw> draws;
  std::vector<std::size_t> per_member;
  double union_volume = 0.0;
};

inline SampledContext build_sampled_context(const ActionSpace& space, const std::vector<Action>& centers, double h,
                                            std::size_t budget, Rng& rng) {
  SampledContext c;
  const std::size_t per = std::max<std::size_t>(1, budget / std::max<std::size_t>(1, centers.size()));
  c.per_member.assign(centers.size(), per);
  std::vector<double> vol(centers.size());
  for (std::size_t j = 0; j < centers.size(); ++j) vol[j] = space.ball_volume(centers[j], h);
  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (std::size_t s = 0; s < per; ++s) {
      SampledContext::Draw d;
      d.owner = j;
      const Action a = space.sample_ball(centers[j], h, rng);
      for (std::size_t i = 0; i < centers.size(); ++i)
        if (space.distance(centers[i], a) <= h) d.cover.emplace_back(i, 1.0 / vol[i]);
      c.draws.push_back(std::move(d));
    }
  }
  c.union_volume = union_ball_volume(space, centers, h, budget, rng.next_u64()).value;
  return c;
}

inline void accumulate_sampled(const SampledContext& c, const std::vector<double>& Q, double mu, double w,
                               std::vector<double>& f) {
  for (const auto& d : c.draws) {
    double q = mu;
    for (const auto& [i, k] : d.cover) q += (1.0 - mu) * Q[i] * k;
    f[d.owner] += w / (q * static_cast<double>(c.per_member[d.owner]));
  }
}

}  // namespace detail

// Solves the variance program over the members of `subset`. Contexts and
// their weights come from `panel`.
inline VarianceSolution solve_variance_program(const ActionSpace& space, const PolicyClass& pc,
                                               const VersionSpace& subset, double h, double mu,
                                               const ContextPanel& panel, double tol = 1e-3,
                                               std::size_t iter_cap = 5000, std::size_t mc_draws = 10000) {
  if (!(mu > 0.0 && mu <= 0.5)) throw InvalidInput("solve_variance_program: mu must lie in (0, 1/2]");
  if (!(h > 0.0 && h <= 1.0)) throw InvalidInput("solve_variance_program: h must lie in (0, 1]");
  const std::vector<std::size_t> members = subset.indices();
  if (members.empty()) throw InvalidInput("solve_variance_program: empty version space");
  const std::size_t k = members.size();

  std::vector<detail::ExactContext> exact;
  std::vector<detail::SampledContext> sampled;
  Rng rng(0xc0ffee);
  double V = 0.0;
  for (std::size_t c = 0; c < panel.size(); ++c) {
    std::vector<Action> centers;
    for (std::size_t i : members) centers.push_back(pc.act(i, panel.contexts[c]));
    if (space.one_dimensional()) {
      exact.push_back(detail::build_exact_context(space, centers, h));
      V += panel.weights[c] * exact.back().union_volume;
    } else {
      sampled.push_back(detail::build_sampled_context(space, centers, h, mc_draws, rng));
      V += panel.weights[c] * sampled.back().union_volume;
    }
  }

  std::vector<double> scratch;
  auto objective = [&](const std::vector<double>& Q, std::vector<double>& f) {
    f.assign(k, 0.0);
    for (std::size_t c = 0; c < exact.size(); ++c) detail::accumulate_exact(exact[c], Q, mu, panel.weights[c], f, scratch);
    for (std::size_t c = 0; c < sampled.size(); ++c) detail::accumulate_sampled(sampled[c], Q, mu, panel.weights[c], f);
    return *std::max_element(f.begin(), f.end());
  };

  VarianceSolution sol;
  sol.volume = V;
  sol.target = V / (1.0 - mu);
  const double goal = sol.target * (1.0 + tol);

  std::vector<double> Q(k, 1.0 / static_cast<double>(k));
  std::vector<double> f;
  std::vector<double> best_Q = Q;
  double best = objective(Q, f);
  std::size_t it = 0;
  while (best > goal && it < iter_cap) {
    ++it;
    // Q f sums to E_x int (q - mu) / q, so mu * A + (1 - mu) Q.f = 1 with
    // A = E_x int 1 / q; the update below is Q_j (mu A + (1 - mu) f_j).
    double qf = 0.0;
    for (std::size_t j = 0; j < k; ++j) qf += Q[j] * f[j];
    const double base = std::max(0.0, 1.0 - (1.0 - mu) * qf);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += Q[j] *= base + (1.0 - mu) * f[j];
    for (double& q : Q) q /= z;
    const double v = objective(Q, f);
    if (v < best) {
      best = v;
      best_Q = Q;
    }
  }
  sol.iterations = it;
  sol.value = best;
  sol.converged = best <= goal;
  if (!sol.converged && best > sol.target * (1.0 + 10.0 * tol))
    throw SolverFailure("variance program did not reach the duality bound", best, sol.target);
  sol.Q.assign(subset.universe(), 0.0);
  for (std::size_t j = 0; j < k; ++j) sol.Q[members[j]] = best_Q[j];
  return sol;
}

// mu + (1 - mu) sum_pi Q(pi) K_h(pi(x))(a).
inline double mixture_density(const ActionSpace& space, const PolicyClass& pc, const std::vector<double>& Q, double h,
                              double mu, const Context& x, const Action& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    if (Q[i] <= 0.0) continue;
    const Action c = pc.act(i, x);
    if (space.distance(c, a) <= h) s += Q[i] / space.ball_volume(c, h);
  }
  return mu + (1.0 - mu) * s;
}

// Draws from the mixture: uniform with probability mu, else pi ~ Q and a
// uniform point of B(pi(x), h).
inline Action sample_mixture(const ActionSpace& space, const PolicyClass& pc, const std::vector<double>& Q, double h,
                             double mu, const Context& x, Rng& rng) {
  if (rng.uniform() < mu) return space.sample_uniform(rng);
  const std::size_t i = rng.categorical(Q);
  return space.sample_ball(pc.act(i, x), h, rng);
}

struct EpochLog {
  std::size_t m = 0;
  std::uint64_t start = 0;  // first round of the epoch (0-based)
  double h = 0.0;
  double r = 0.0;
  double mu = 0.0;
  double V = 0.0;
  std::size_t survivors = 0;
  double n_tilde = 0.0;
  double n = 0.0;
  double solver_value = 0.0;
  std::size_t solver_iters = 0;
  std::size_t eliminated = 0;
  bool truncated = false;
};

struct EpochState {
  std::size_t m = 1;
  VersionSpace survivors{1};
  EpochSchedule schedule;
  double V = 0.0;
  double n_tilde = 0.0;
  double n = 0.0;  // may exceed T
  VarianceSolution solution;
  std::vector<IWSample> samples;
};

// Median-of-means estimates over `batches` contiguous batches of the epoch's
// samples, for every survivor (NaN elsewhere).
inline std::vector<double> epoch_estimates(const ActionSpace& space, const PolicyClass& pc, const EpochState& st,
                                           std::size_t batches) {
  const RectKernel kernel(space, st.schedule.h);
  std::vector<double> est(pc.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> vals(st.samples.size());
  for (std::size_t i : st.survivors.indices()) {
    for (std::size_t s = 0; s < st.samples.size(); ++s) vals[s] = iw_estimate(kernel, pc, i, st.samples[s]);
    est[i] = median_of_means_k(vals, batches);
  }
  return est;
}

// Survivors with estimate within 3 r of the empirical minimum.
inline VersionSpace eliminate(const VersionSpace& survivors, const std::vector<double>& estimates, double r,
                              std::size_t next_epoch) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : survivors.indices()) best = std::min(best, estimates[i]);
  VersionSpace next = survivors.restrict([&](std::size_t i) { return estimates[i] <= best + 3.0 * r; });
  return VersionSpace(next.universe(), next.indices(), next_epoch);
}

// SmoothPolicyElimination as an online learner: act() then observe() each
// round.
class PolicyElimination {
 public:
  PolicyElimination(ElimConfig cfg, ActionSpace space, std::shared_ptr<const PolicyClass> pc, ContextPanel panel)
      : cfg_(cfg), space_(space), pc_(std::move(pc)), panel_(std::move(panel)) {
    if (!pc_ || pc_->size() == 0) throw InvalidInput("PolicyElimination: empty policy class");
    if (cfg_.variant == ElimConfig::Variant::SmoothS && !(cfg_.h > 0.0 && cfg_.h <= 1.0))
      throw InvalidInput("PolicyElimination: h must lie in (0,1]");
    if (cfg_.variant == ElimConfig::Variant::LipschitzL && !(cfg_.L >= 1.0))
      throw InvalidInput("PolicyElimination: L must be >= 1");
    if (!(cfg_.batch_constant > 0.0)) throw InvalidInput("PolicyElimination: batch constant must be positive");
    batches_ = cfg_.batches ? *cfg_.batches : elimination_batches(cfg_.T, pc_->size());
    if (batches_ == 0) throw InvalidInput("PolicyElimination: need at least one batch");
    start_epoch(1, VersionSpace(pc_->size(), 1));
  }

  std::size_t batches() const noexcept { return batches_; }
  const EpochState& state() const noexcept { return st_; }
  const VersionSpace& version_space() const noexcept { return st_.survivors; }
  const std::vector<EpochLog>& epochs() const noexcept { return logs_; }
  double last_propensity() const noexcept { return pending_.propensity; }

  Action act(const Context& x, Rng& rng) {
    if (has_pending_) throw StateError("PolicyElimination: act called with an observation pending");
    const auto& s = st_.schedule;
    const Action a = sample_mixture(space_, *pc_, st_.solution.Q, s.h, s.mu, x, rng);
    pending_ = IWSample{x, a, 0.0, mixture_density(space_, *pc_, st_.solution.Q, s.h, s.mu, x, a)};
    has_pending_ = true;
    return a;
  }

  void observe(double loss) {
    if (!has_pending_) throw StateError("PolicyElimination: observe without act");
    pending_.observed_loss = loss;
    st_.samples.push_back(std::move(pending_));
    has_pending_ = false;
    ++t_;
    if (static_cast<double>(st_.samples.size()) >= st_.n) end_epoch();
  }

  // Marks the last epoch as truncated; call once the horizon is reached.
  void finish() {
    if (!logs_.empty() && static_cast<double>(st_.samples.size()) < st_.n) logs_.back().truncated = true;
  }

 private:
  void start_epoch(std::size_t m, VersionSpace survivors) {
    st_ = EpochState{};
    st_.m = m;
    st_.survivors = std::move(survivors);
    st_.schedule = epoch_schedule(cfg_, m);
    const auto& s = st_.schedule;
    st_.solution = solve_variance_program(space_, *pc_, st_.survivors, s.h, s.mu, panel_, cfg_.tol, cfg_.iter_cap,
                                          cfg_.mc_draws);
    st_.V = st_.solution.volume;
    const double kappa = RectKernel(space_, s.h).kappa();
    st_.n_tilde = std::ceil(cfg_.batch_constant * kappa * st_.V / (s.r * s.r));
    st_.n_tilde = std::max(1.0, st_.n_tilde);
    st_.n = st_.n_tilde * static_cast<double>(batches_);
    EpochLog log;
    log.m = m;
    log.start = t_;
    log.h = s.h;
    log.r = s.r;
    log.mu = s.mu;
    log.V = st_.V;
    log.survivors = st_.survivors.size();
    log.n_tilde = st_.n_tilde;
    log.n = st_.n;
    log.solver_value = st_.solution.value;
    log.solver_iters = st_.solution.iterations;
    logs_.push_back(log);
  }

  void end_epoch() {
    const auto est = epoch_estimates(space_, *pc_, st_, batches_);
    VersionSpace next = eliminate(st_.survivors, est, st_.schedule.r, st_.m + 1);
    logs_.back().eliminated = st_.survivors.size() - next.size();
    start_epoch(st_.m + 1, std::move(next));
  }

  ElimConfig cfg_;
  ActionSpace space_;
  std::shared_ptr<const PolicyClass> pc_;
  ContextPanel panel_;
  std::size_t batches_ = 0;
  EpochState st_;
  std::vector<EpochLog> logs_;
  IWSample pending_;
  bool has_pending_ = false;
  std::uint64_t t_ = 0;
};

}  // namespace smoothcb
